#pragma once

// Plain-loop reference computations, independent of the autodiff engine.
// Every function works on std::vector<double> in row-major order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "sqvae/rng.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline Vec softmax(const Vec& s) {
  const double m = *std::max_element(s.begin(), s.end());
  Vec p(s.size());
  double z = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) z += (p[k] = std::exp(s[k] - m));
  for (double& v : p) v /= z;
  return p;
}

inline double entropy(const Vec& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

/// Type I Gaussian scores of one latent row against every code.
inline Vec gaussian_scores(const double* z, const Vec& B, std::size_t K, std::size_t d_b, double var) {
  Vec s(K);
  for (std::size_t k = 0; k < K; ++k) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < d_b; ++j) d2 += (B[k * d_b + j] - z[j]) * (B[k * d_b + j] - z[j]);
    s[k] = -0.5 * d2 / var;
  }
  return s;
}

/// Relaxed sample softmax((ln max(p, 1e-12) + g) / tau), consuming K draws.
inline Vec gumbel_relaxed(const Vec& p, double tau, sqvae::Rng& rng) {
  Vec y(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) y[k] = (std::log(std::max(p[k], 1e-12)) + rng.gumbel()) / tau;
  return softmax(y);
}

struct Terms {
  double reconstruction = 0, regularization = 0, neg_entropy = 0, decoder_variance_term = 0, constant = 0;
  double total() const { return reconstruction + regularization + neg_entropy + decoder_variance_term + constant; }
};

/// Gaussian type I SQ loss for N samples given everything after the encoder:
/// Zhat (N*d_z, d_b), codes B (K, d_b), the assignments Y (N*d_z, K) used for
/// the soft code, the decoder output f (N, D) and targets x (N, D).
inline Terms gaussian_sq(const Vec& x, const Vec& f, const Vec& Zhat, const Vec& B, const Vec& Y, std::size_t N,
                         std::size_t D, std::size_t d_z, std::size_t K, std::size_t d_b, double sigma2,
                         double sigma2_phi) {
  Terms t;
  double sq = 0.0;
  for (std::size_t i = 0; i < N * D; ++i) sq += (x[i] - f[i]) * (x[i] - f[i]);
  t.reconstruction = sq / (2.0 * sigma2) / static_cast<double>(N);
  double reg = 0.0, h = 0.0;
  for (std::size_t r = 0; r < N * d_z; ++r) {
    const double* z = &Zhat[r * d_b];
    h += entropy(softmax(gaussian_scores(z, B, K, d_b, sigma2_phi)));
    for (std::size_t j = 0; j < d_b; ++j) {
      double zq = 0.0;
      for (std::size_t k = 0; k < K; ++k) zq += Y[r * K + k] * B[k * d_b + j];
      reg += 0.5 * (z[j] - zq) * (z[j] - zq) / sigma2_phi;
    }
  }
  t.regularization = reg / static_cast<double>(N);
  t.neg_entropy = -h / static_cast<double>(N);
  t.decoder_variance_term = 0.5 * static_cast<double>(D) * std::log(sigma2);
  t.constant = static_cast<double>(d_z) * std::log(static_cast<double>(K)) +
               0.5 * static_cast<double>(D) * std::log(2.0 * std::numbers::pi);
  return t;
}

/// y = act(x W + b) for x (N, in), W (in, out), b (out).
inline Vec dense(const Vec& x, std::size_t N, const Vec& W, const Vec& b, std::size_t in, std::size_t out, int act) {
  Vec y(N * out);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += x[n * in + i] * W[i * out + o];
      if (act == 1) s = std::max(0.0, s);
      if (act == 2) s = 1.0 / (1.0 + std::exp(-s));
      y[n * out + o] = s;
    }
  }
  return y;
}

using Params = std::map<std::string, Vec>;

/// Loss of the first training step of a gaussian_sqvae_I run, recomputed from
/// the initial parameters: MLP forward passes, Gumbel draws of stream
/// (seed, Gumbel, step) in row-major order, relaxed soft codes, all terms.
inline Terms gaussian_i_step(const Params& p, const Vec& x, std::size_t N, std::size_t D,
                             const std::vector<std::size_t>& hidden, std::size_t d_z, std::size_t d_b, std::size_t K,
                             std::uint64_t seed, std::uint64_t step, double tau) {
  Vec h = x;
  std::size_t width = D;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const std::string pre = "encoder.trunk." + std::to_string(l);
    h = dense(h, N, p.at(pre + ".weight"), p.at(pre + ".bias"), width, hidden[l], 1);
    width = hidden[l];
  }
  const Vec Zhat = dense(h, N, p.at("encoder.latent.weight"), p.at("encoder.latent.bias"), width, d_z * d_b, 0);
  const Vec& B = p.at("codebook");
  const double sigma2 = std::exp(p.at("log_sigma2")[0]);
  const double sigma2_phi = std::exp(p.at("log_sigma2_phi")[0]);

  sqvae::Rng rng(seed, sqvae::Stream::Gumbel, step);
  Vec Y(N * d_z * K), codes(N * d_z * d_b, 0.0);
  for (std::size_t r = 0; r < N * d_z; ++r) {
    const Vec probs = softmax(gaussian_scores(&Zhat[r * d_b], B, K, d_b, sigma2_phi));
    const Vec y = gumbel_relaxed(probs, tau, rng);
    for (std::size_t k = 0; k < K; ++k) {
      Y[r * K + k] = y[k];
      for (std::size_t j = 0; j < d_b; ++j) codes[r * d_b + j] += y[k] * B[k * d_b + j];
    }
  }
  Vec g = codes;  // (N, d_z * d_b) in the same row-major order
  width = d_z * d_b;
  const std::size_t layers = hidden.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string pre = "decoder." + std::to_string(l);
    const std::size_t out = l + 1 < layers ? hidden[hidden.size() - 1 - l] : D;
    g = dense(g, N, p.at(pre + ".weight"), p.at(pre + ".bias"), width, out, l + 1 < layers ? 1 : 2);
    width = out;
  }
  return gaussian_sq(x, g, Zhat, B, Y, N, D, d_z, K, d_b, sigma2, sigma2_phi);
}

/// Exact expectation over all K^d_z hard assignments of one sample with
/// latents Z (d_z, d_b): returns {sum of entropies, expected regularizer}
/// where the regularizer is 1/2 sum |z_i - b_{k_i}|^2 / var.
struct Expectation {
  double entropy = 0.0;
  double regularizer = 0.0;
};

inline Expectation enumerate_gaussian(const Vec& Z, const Vec& B, std::size_t d_z, std::size_t K, std::size_t d_b,
                                      double var) {
  std::vector<Vec> probs(d_z);
  for (std::size_t i = 0; i < d_z; ++i) probs[i] = softmax(gaussian_scores(&Z[i * d_b], B, K, d_b, var));
  Expectation e;
  std::size_t total = 1;
  for (std::size_t i = 0; i < d_z; ++i) total *= K;
  for (std::size_t a = 0; a < total; ++a) {
    std::size_t rest = a;
    double p = 1.0, lnp = 0.0, reg = 0.0;
    for (std::size_t i = 0; i < d_z; ++i) {
      const std::size_t k = rest % K;
      rest /= K;
      p *= probs[i][k];
      lnp += std::log(probs[i][k]);
      for (std::size_t j = 0; j < d_b; ++j) {
        const double d = Z[i * d_b + j] - B[k * d_b + j];
        reg += 0.5 * d * d / var;
      }
    }
    e.entropy -= p * lnp;
    e.regularizer += p * reg;
  }
  return e;
}

}  // namespace oracle
