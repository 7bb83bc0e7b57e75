#include "sqvae/objectives.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "sqvae/error.hpp"

namespace sqvae {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double per_sample(std::size_t n) {
  require(n > 0, "loss needs a non-empty batch");
  return 1.0 / static_cast<double>(n);
}

void check_layout(const QuantizationOutput& q, const LatentLayout& layout) {
  require(layout.K >= 2 && layout.d_z >= 1 && layout.batch >= 1, "invalid latent layout");
  require(q.entropy_per_position.defined() && q.entropy_per_position.numel() == layout.batch * layout.d_z,
          "quantization output does not match N * d_z latent rows");
}

// Shared SQ terms: regularizer and negative entropy, as batch means.
void fill_latent_terms(const QuantizationOutput& q, const LatentLayout& layout, Tensor& reg, Tensor& neg_h) {
  check_layout(q, layout);
  const double inv_n = per_sample(layout.batch);
  reg = scale(q.regularizer_value, inv_n);
  neg_h = scale(sum(q.entropy_per_position), -inv_n);
}

void check_unit_rows(const Tensor& x, const char* what) {
  require(x.rank() == 2, std::string(what) + " must be (rows, F)");
  const std::size_t c = x.size(1);
  const auto v = x.data();
  for (std::size_t r = 0; r < x.size(0); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += v[r * c + j] * v[r * c + j];
    require(std::abs(std::sqrt(s) - 1.0) <= 1e-8, std::string(what) + " row " + std::to_string(r) + " is not unit norm");
  }
}

ElboBreakdown assemble(const Tensor& recon, const Tensor& reg, const Tensor& neg_h, const Tensor& dvt,
                       double constant) {
  ElboBreakdown b;
  b.objective = add(add(recon, reg), add(neg_h, dvt));
  b.reconstruction = recon.item();
  b.regularization = reg.item();
  b.neg_entropy = neg_h.item();
  b.decoder_variance_term = dvt.item();
  b.constant = constant;
  return b;
}

// --- modified Bessel function of the first kind, in log space -------------

double log_bessel_series(double nu, double kappa) {
  const double lh = std::log(0.5 * kappa);
  auto term = [&](double m) { return (2.0 * m + nu) * lh - std::lgamma(m + 1.0) - std::lgamma(m + nu + 1.0); };
  // Terms rise until (kappa/2)^2 ~ (m+1)(m+nu+1), then fall.
  const double q = 0.25 * kappa * kappa;
  double peak = std::floor(0.5 * (-(nu + 2.0) + std::sqrt(nu * nu + 4.0 * q)));
  peak = std::max(0.0, peak);
  const double lmax = std::max(term(peak), std::max(term(peak + 1.0), peak > 0 ? term(peak - 1.0) : -INFINITY));
  double s = 0.0;
  for (double m = peak; m >= 0.0; m -= 1.0) {
    const double d = term(m) - lmax;
    s += std::exp(d);
    if (d < -45.0) break;
  }
  for (double m = peak + 1.0;; m += 1.0) {
    const double d = term(m) - lmax;
    s += std::exp(d);
    if (d < -45.0) break;
  }
  return lmax + std::log(s);
}

// Large-argument expansion; used for nu < 1 only, where it converges quickly.
double log_bessel_hankel(double nu, double kappa) {
  const double mu = 4.0 * nu * nu;
  double s = 1.0, t = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -t * (mu - odd * odd) / (8.0 * k * kappa);
    if (std::abs(next) >= std::abs(t)) break;
    t = next;
    s += t;
    if (std::abs(t) < 1e-18) break;
  }
  return kappa - 0.5 * std::log(2.0 * std::numbers::pi * kappa) + std::log(s);
}

// Debye uniform expansion in 1/nu, with t = 1/sqrt(1 + z^2), z = kappa/nu.
double log_bessel_debye(double nu, double kappa) {
  const double z = kappa / nu;
  const double root = std::sqrt(1.0 + z * z);
  const double t = 1.0 / root;
  const double eta = root + std::log(z / (1.0 + root));
  const double t2 = t * t;
  std::array<double, 6> u{};
  u[0] = 1.0;
  u[1] = t * (3.0 - 5.0 * t2) / 24.0;
  u[2] = t2 * (81.0 + t2 * (-462.0 + t2 * 385.0)) / 1152.0;
  u[3] = t * t2 * (30375.0 + t2 * (-369603.0 + t2 * (765765.0 - t2 * 425425.0))) / 414720.0;
  u[4] = t2 * t2 *
         (4465125.0 + t2 * (-94121676.0 + t2 * (349922430.0 + t2 * (-446185740.0 + t2 * 185910725.0)))) /
         39813120.0;
  u[5] = t * t2 * t2 *
         (1519035525.0 +
          t2 * (-49286948607.0 +
                t2 * (284499769554.0 + t2 * (-614135872350.0 + t2 * (566098157625.0 - t2 * 188699385875.0))))) /
         6688604160.0;
  double s = 0.0, p = 1.0;
  for (double uk : u) {
    s += uk / p;
    p *= nu;
  }
  return nu * eta - 0.5 * std::log(2.0 * std::numbers::pi * nu) + 0.5 * std::log(t) + std::log(s);
}

}  // namespace

double log_bessel_iv(double nu, double kappa) {
  require(nu >= 0.0 && nu <= 512.0, "log_bessel_iv: order must lie in [0, 512], got " + std::to_string(nu));
  require(kappa >= 1e-8 && kappa <= 1e4, "log_bessel_iv: argument must lie in [1e-8, 1e4], got " + std::to_string(kappa));
  if (kappa <= std::max(30.0, 2.0 * nu)) return log_bessel_series(nu, kappa);
  if (nu < 1.0) return log_bessel_hankel(nu, kappa);
  return log_bessel_debye(nu, kappa);
}

double dlog_bessel_iv(double nu, double kappa) {
  return std::exp(log_bessel_iv(nu + 1.0, kappa) - log_bessel_iv(nu, kappa)) + nu / kappa;
}

double log_cf(double kappa, std::size_t F) {
  require(F >= 2, "log_cf: F must be >= 2");
  require(kappa > 0.0, "log_cf: kappa must be positive");
  const double half = 0.5 * static_cast<double>(F);
  const double nu = half - 1.0;
  return nu * std::log(kappa) - log_bessel_iv(nu, kappa) - half * kLog2Pi;
}

double dlog_cf(double kappa, std::size_t F) {
  require(F >= 2, "log_cf: F must be >= 2");
  const double half = 0.5 * static_cast<double>(F);
  return -std::exp(log_bessel_iv(half, kappa) - log_bessel_iv(half - 1.0, kappa));
}

Tensor log_cf(const Tensor& kappa, std::size_t F) {
  return map_unary(kappa, "log_cf", [F](double k) { return log_cf(k, F); },
                   [F](double k) { return dlog_cf(k, F); });
}

// --- losses ------------------------------------------------------------------

ElboBreakdown gaussian_sq_loss(const Tensor& x, const QuantizationOutput& quant, const Tensor& fmean,
                               const Tensor& log_sigma2, const LatentLayout& layout) {
  require(x.rank() == 2 && x.shape() == fmean.shape(), "gaussian_sq_loss: x " + shape_str(x.shape()) +
                                                           " vs decoder " + shape_str(fmean.shape()));
  require(x.size(0) == layout.batch, "gaussian_sq_loss: batch size mismatch");
  require(log_sigma2.numel() == 1 && std::isfinite(log_sigma2.item()), "gaussian_sq_loss: sigma^2 must be positive");
  const double inv_n = per_sample(layout.batch);
  const double D = static_cast<double>(x.size(1));
  Tensor reg, neg_h;
  fill_latent_terms(quant, layout, reg, neg_h);
  const Tensor recon = scale(mul(sum(square(sub(x, fmean))), exp(neg(log_sigma2))), 0.5 * inv_n);
  const Tensor dvt = scale(log_sigma2, 0.5 * D);
  const double constant = static_cast<double>(layout.d_z) * std::log(static_cast<double>(layout.K)) + 0.5 * D * kLog2Pi;
  return assemble(recon, reg, neg_h, dvt, constant);
}

ElboBreakdown vmf_sq_loss(const Tensor& V, const QuantizationOutput& quant, const Tensor& ftilde,
                          const Tensor& log_kappa, const LatentLayout& layout, bool literal_normalizer) {
  require(V.rank() == 2 && V.shape() == ftilde.shape(), "vmf_sq_loss: projections " + shape_str(V.shape()) +
                                                            " vs decoder " + shape_str(ftilde.shape()));
  require(V.size(0) % layout.batch == 0, "vmf_sq_loss: rows not divisible by batch");
  require(log_kappa.numel() == 1, "vmf_sq_loss: kappa must be a scalar");
  check_unit_rows(V, "vmf_sq_loss: projection");
  check_unit_rows(ftilde, "vmf_sq_loss: decoder direction");
  const double inv_n = per_sample(layout.batch);
  const std::size_t F = V.size(1);
  const double D = static_cast<double>(V.size(0) / layout.batch);
  Tensor reg, neg_h;
  fill_latent_terms(quant, layout, reg, neg_h);
  const Tensor kappa = exp(log_kappa);
  const Tensor recon = scale(mul(kappa, sum(mul(V, ftilde))), -inv_n);
  const Tensor dvt = scale(log_cf(kappa, F), literal_normalizer ? -1.0 : -D);
  const double constant = static_cast<double>(layout.d_z) * std::log(static_cast<double>(layout.K));
  return assemble(recon, reg, neg_h, dvt, constant);
}

ElboBreakdown nc_sq_loss(std::span<const std::size_t> classes, const QuantizationOutput& quant,
                         const Tensor& logits, const LatentLayout& layout) {
  require(logits.rank() == 2 && logits.size(0) == classes.size(),
          "nc_sq_loss: logits " + shape_str(logits.shape()) + " vs " + std::to_string(classes.size()) + " labels");
  require(classes.size() % layout.batch == 0, "nc_sq_loss: labels not divisible by batch");
  const std::size_t C = logits.size(1);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    require(classes[i] < C, "nc_sq_loss: class " + std::to_string(classes[i]) + " at position " +
                                std::to_string(i) + " out of range [0, " + std::to_string(C) + ")");
  }
  const double inv_n = per_sample(layout.batch);
  Tensor reg, neg_h;
  fill_latent_terms(quant, layout, reg, neg_h);
  const Tensor recon = scale(sum(mul(log_softmax_rows(logits), one_hot(classes, C))), -inv_n);
  const Tensor dvt = Tensor::scalar(0.0);
  const double constant = static_cast<double>(layout.d_z) * std::log(static_cast<double>(layout.K));
  return assemble(recon, reg, neg_h, dvt, constant);
}

ElboBreakdown vq_loss(const Tensor& x, const Tensor& Zhat, const Codebook& cb, std::span<const std::size_t> indices,
                      const Tensor& fmean, double beta, double sigma2, bool include_dictionary) {
  require(beta > 0.0, "vq_loss: beta must be positive");
  require(sigma2 > 0.0, "vq_loss: sigma^2 must be positive");
  require(x.rank() == 2 && x.shape() == fmean.shape(), "vq_loss: x and decoder output shapes differ");
  require(Zhat.rank() == 2 && Zhat.size(1) == cb.dim() && Zhat.size(0) == indices.size(),
          "vq_loss: latents and assignments disagree");
  const double inv_n = per_sample(x.size(0));
  const Tensor Zq = gather_rows(cb.entries, indices);
  const Tensor recon = scale(sum(square(sub(x, fmean))), inv_n / (2.0 * sigma2));
  const Tensor dictionary = scale(sum(square(sub(Zhat.detach(), Zq))), inv_n);
  const Tensor commitment = scale(sum(square(sub(Zhat, Zq.detach()))), beta * inv_n);
  ElboBreakdown b;
  b.objective = include_dictionary ? add(recon, add(dictionary, commitment)) : add(recon, commitment);
  b.reconstruction = recon.item();
  b.dictionary = include_dictionary ? dictionary.item() : 0.0;
  b.commitment = commitment.item();
  b.regularization = b.dictionary + b.commitment;
  return b;
}

Tensor gaussian_kl(const Tensor& mu, const Tensor& logvar) {
  require(mu.shape() == logvar.shape(), "gaussian_kl: mean and log-variance shapes differ");
  // 1/2 sum (mu^2 + s^2 - 1 - ln s^2)
  const Tensor inner = sub(add(square(mu), exp(logvar)), logvar);
  return scale(add_scalar(sum(inner), -static_cast<double>(mu.numel())), 0.5);
}

ElboBreakdown vae_loss(const Tensor& x, const Tensor& mu, const Tensor& logvar, const Tensor& fmean,
                       const Tensor& log_sigma2) {
  require(x.rank() == 2 && x.shape() == fmean.shape(), "vae_loss: x and decoder output shapes differ");
  require(mu.rank() == 2 && mu.size(0) == x.size(0), "vae_loss: posterior batch mismatch");
  for (double v : logvar.data()) require(std::isfinite(v), "vae_loss: posterior variances must be positive");
  const double inv_n = per_sample(x.size(0));
  const double D = static_cast<double>(x.size(1));
  const Tensor recon = scale(mul(sum(square(sub(x, fmean))), exp(neg(log_sigma2))), 0.5 * inv_n);
  const Tensor kl = scale(gaussian_kl(mu, logvar), inv_n);
  const Tensor dvt = scale(log_sigma2, 0.5 * D);
  ElboBreakdown b = assemble(recon, kl, Tensor::scalar(0.0), dvt, 0.5 * D * kLog2Pi);
  return b;
}

}  // namespace sqvae
