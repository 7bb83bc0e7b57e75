#include "sqvae/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sqvae/error.hpp"

namespace sqvae {

Codebook Codebook::random(std::size_t K, std::size_t d_b, bool unit_norm, Rng& rng) {
  require(K >= 2 && d_b >= 1, "codebook needs K >= 2 and d_b >= 1");
  std::vector<double> rows(K * d_b);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d_b));
  for (double& v : rows) v = rng.normal(0.0, sd);
  Codebook cb = from_rows(K, d_b, std::move(rows), false, true);
  if (unit_norm) {
    cb.unit_norm = true;
    cb.renormalize();
  }
  return cb;
}

Codebook Codebook::from_rows(std::size_t K, std::size_t d_b, std::vector<double> rows, bool unit_norm,
                             bool trainable) {
  require(K >= 2 && d_b >= 1, "codebook needs K >= 2 and d_b >= 1");
  Codebook cb{Tensor::from_data({K, d_b}, std::move(rows), trainable), unit_norm};
  cb.check_invariants();
  return cb;
}

void Codebook::renormalize() {
  if (!unit_norm) return;
  auto e = entries.mutable_data();
  const std::size_t d = dim();
  for (std::size_t k = 0; k < size(); ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += e[k * d + j] * e[k * d + j];
    const double n = std::sqrt(s);
    if (!(n > 0.0)) throw NumericError("codebook row " + std::to_string(k) + " has zero norm");
    for (std::size_t j = 0; j < d; ++j) e[k * d + j] /= n;
  }
}

void Codebook::check_invariants() const {
  require(entries.defined() && entries.rank() == 2, "codebook entries must be (K, d_b)");
  require(size() >= 2 && dim() >= 1, "codebook needs K >= 2 and d_b >= 1");
  if (!unit_norm) return;
  const auto e = entries.data();
  for (std::size_t k = 0; k < size(); ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim(); ++j) s += e[k * dim() + j] * e[k * dim() + j];
    require(std::abs(std::sqrt(s) - 1.0) <= 1e-10,
            "unit-norm codebook row " + std::to_string(k) + " is not unit length");
  }
}

UsageStats UsageStats::zeros(std::size_t K, std::size_t d_b) {
  UsageStats s;
  s.counts.assign(K, 0);
  s.ema_cluster_size.assign(K, 0.0);
  s.ema_cluster_sum.assign(K * d_b, 0.0);
  return s;
}

void UsageStats::record(std::span<const std::size_t> assignments) {
  for (std::size_t a : assignments) {
    require(a < counts.size(), "assignment out of range");
    ++counts[a];
  }
  ++window_batches;
}

void UsageStats::clear_window() {
  std::fill(counts.begin(), counts.end(), 0);
  window_batches = 0;
}

Tensor gaussian_scores(const Tensor& Z, const Codebook& cb, const VarianceParam& var) {
  require(var.is_gaussian(), "gaussian_scores needs a Gaussian variance parameterization");
  require(Z.rank() == 2 && Z.size(1) == cb.dim(),
          "gaussian_scores: latents " + shape_str(Z.shape()) + " vs code dim " +
              std::to_string(cb.dim()));
  for (double lv : var.log_value.data()) {
    if (!std::isfinite(lv)) throw ContractError("gaussian_scores: variance must be positive and finite");
  }
  const std::size_t rows = Z.size(0), d_b = cb.dim();
  const Tensor prec = var.row_precision(rows, d_b);                       // (rows, d_b)
  const Tensor zz = sum_axis(mul(square(Z), prec), 1, true);              // (rows, 1)
  const Tensor zb = matmul(mul(Z, prec), transpose(cb.entries));          // (rows, K)
  const Tensor bb = matmul(prec, transpose(square(cb.entries)));          // (rows, K)
  // -1/2 (|z|^2 - 2 z.b + |b|^2) under the diagonal metric.
  return scale(add(sub(zz, scale(zb, 2.0)), bb), -0.5);
}

Tensor vmf_scores(const Tensor& Z, const Codebook& cb, const Tensor& kappa) {
  require(cb.unit_norm, "vmf_scores needs a unit-norm codebook");
  require(Z.rank() == 2 && Z.size(1) == cb.dim(), "vmf_scores: latent shape mismatch");
  require(kappa.numel() == 1 && kappa.item() >= 0.0, "vmf_scores: kappa must be a scalar >= 0");
  const auto zv = Z.data();
  const std::size_t d = Z.size(1);
  for (std::size_t r = 0; r < Z.size(0); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += zv[r * d + j] * zv[r * d + j];
    require(std::abs(std::sqrt(s) - 1.0) <= 1e-8,
            "vmf_scores: latent row " + std::to_string(r) + " is not unit norm");
  }
  return mul(matmul(Z, transpose(cb.entries)), reshape(kappa, {1, 1}));
}

std::vector<std::uint64_t> usage_histogram(std::span<const std::size_t> indices, std::size_t K) {
  std::vector<std::uint64_t> counts(K, 0);
  for (std::size_t i : indices) {
    require(i < K, "usage_histogram: index " + std::to_string(i) + " out of range " + std::to_string(K));
    ++counts[i];
  }
  return counts;
}

double perplexity(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  require(total > 0, "perplexity of an empty histogram");
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return std::exp(h);
}

void ema_update(Codebook& cb, UsageStats& stats, const Tensor& Z, std::span<const std::size_t> assignments,
                double gamma, double eps) {
  require(gamma > 0.0 && gamma < 1.0, "ema_update: gamma must lie in (0, 1)");
  const std::size_t K = cb.size(), d = cb.dim();
  require(Z.rank() == 2 && Z.size(1) == d && Z.size(0) == assignments.size(),
          "ema_update: latents and assignments disagree");
  require(stats.ema_cluster_size.size() == K && stats.ema_cluster_sum.size() == K * d,
          "ema_update: stats shape mismatch");
  std::vector<double> n(K, 0.0), s(K * d, 0.0);
  const auto zv = Z.data();
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const std::size_t k = assignments[i];
    require(k < K, "ema_update: assignment out of range");
    n[k] += 1.0;
    for (std::size_t j = 0; j < d; ++j) s[k * d + j] += zv[i * d + j];
  }
  auto e = cb.entries.mutable_data();
  for (std::size_t k = 0; k < K; ++k) {
    double& size = stats.ema_cluster_size[k];
    size = gamma * size + (1.0 - gamma) * n[k];
    for (std::size_t j = 0; j < d; ++j) {
      double& acc = stats.ema_cluster_sum[k * d + j];
      acc = gamma * acc + (1.0 - gamma) * s[k * d + j];
    }
    if (size < eps) continue;  // never-used code: keep its position
    for (std::size_t j = 0; j < d; ++j) e[k * d + j] = stats.ema_cluster_sum[k * d + j] / size;
  }
  cb.renormalize();
}

std::optional<ResetEvent> codebook_reset(Codebook& cb, UsageStats& stats, Rng& rng, double threshold,
                                         double noise_var) {
  const std::size_t K = cb.size(), d = cb.dim();
  require(stats.counts.size() == K, "codebook_reset: stats shape mismatch");
  ResetEvent ev;
  for (std::size_t k = 1; k < K; ++k) {
    if (stats.counts[k] > stats.counts[ev.most]) ev.most = k;
    if (stats.counts[k] < stats.counts[ev.least]) ev.least = k;
  }
  if (!(static_cast<double>(stats.counts[ev.least]) < threshold * static_cast<double>(stats.counts[ev.most]))) {
    return std::nullopt;
  }
  auto e = cb.entries.mutable_data();
  const double sd = std::sqrt(noise_var);
  for (std::size_t j = 0; j < d; ++j) e[ev.least * d + j] = rng.normal(e[ev.most * d + j], sd);
  cb.renormalize();
  if (!stats.ema_cluster_size.empty()) {
    for (std::size_t j = 0; j < d; ++j) {
      stats.ema_cluster_sum[ev.least * d + j] = e[ev.least * d + j] * stats.ema_cluster_size[ev.least];
    }
  }
  return ev;
}

std::vector<std::size_t> row_argmax(const Tensor& x) {
  require(x.rank() == 2, "row_argmax needs a rank-2 tensor");
  const std::size_t rows = x.size(0), c = x.size(1);
  std::vector<std::size_t> out(rows);
  const auto v = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (v[r * c + j] > v[r * c + best]) best = j;
    }
    out[r] = best;
  }
  return out;
}

std::vector<std::size_t> nearest_codes(const Tensor& Z, const Codebook& cb) {
  require(Z.rank() == 2 && Z.size(1) == cb.dim(), "nearest_codes: latent shape mismatch");
  const std::size_t rows = Z.size(0), K = cb.size(), d = cb.dim();
  const auto zv = Z.data();
  const auto bv = cb.entries.data();
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = zv[r * d + j] - bv[k * d + j];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        out[r] = k;
      }
    }
  }
  return out;
}

}  // namespace sqvae
