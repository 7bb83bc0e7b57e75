#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sqvae/codebook.hpp"
#include "sqvae/quantizer.hpp"
#include "sqvae/tensor.hpp"
#include "sqvae/variance.hpp"

namespace sqvae {

/// Per-sample loss terms (batch means). `objective` is the differentiable
/// sum of the four trainable terms; `constant` is reported only.
struct ElboBreakdown {
  double reconstruction = 0.0;
  double regularization = 0.0;
  double neg_entropy = 0.0;
  double decoder_variance_term = 0.0;
  double constant = 0.0;
  // VQ-VAE split of `regularization`.
  double dictionary = 0.0;
  double commitment = 0.0;
  Tensor objective;

  double total() const {
    return reconstruction + regularization + neg_entropy + decoder_variance_term + constant;
  }
};

/// Shapes shared by the loss functions. Latent rows are N * d_z.
struct LatentLayout {
  std::size_t batch = 0;  // N
  std::size_t d_z = 0;
  std::size_t K = 0;
};

/// Gaussian decoder with trainable log sigma^2 (shape (1)):
///   |x - f|^2 / (2 sigma^2) + R + (-H) + (D/2) ln sigma^2 + d_z ln K + (D/2) ln 2 pi.
/// x and fmean are (N, D); quant comes from stochastic_quantize on Zhat.
ElboBreakdown gaussian_sq_loss(const Tensor& x, const QuantizationOutput& quant, const Tensor& fmean,
                               const Tensor& log_sigma2, const LatentLayout& layout);

/// vMF decoder over D pixels on S^{F-1}. V and ftilde are (N * D, F) unit
/// rows, log_kappa has shape (1). With literal_normalizer the normalizer term
/// is -ln C_F(kappa) instead of -D ln C_F(kappa).
ElboBreakdown vmf_sq_loss(const Tensor& V, const QuantizationOutput& quant, const Tensor& ftilde,
                          const Tensor& log_kappa, const LatentLayout& layout, bool literal_normalizer = false);

/// Categorical decoder: logits (N * D, C_all), classes of length N * D.
ElboBreakdown nc_sq_loss(std::span<const std::size_t> classes, const QuantizationOutput& quant,
                         const Tensor& logits, const LatentLayout& layout);

/// Straight-through VQ objective. Zhat (N * d_z, d_b) is the encoder output,
/// indices the nearest codes, fmean the decoder output on the straight-through
/// code. With include_dictionary = false (EMA codebooks) the middle term is
/// dropped from the objective.
ElboBreakdown vq_loss(const Tensor& x, const Tensor& Zhat, const Codebook& cb,
                      std::span<const std::size_t> indices, const Tensor& fmean, double beta, double sigma2,
                      bool include_dictionary = true);

/// Gaussian VAE with standard-normal prior. mu and logvar are (N, L).
ElboBreakdown vae_loss(const Tensor& x, const Tensor& mu, const Tensor& logvar, const Tensor& fmean,
                       const Tensor& log_sigma2);

/// KL(N(mu, diag(exp(logvar))) || N(0, I)) summed over all entries.
Tensor gaussian_kl(const Tensor& mu, const Tensor& logvar);

/// ln I_nu(kappa) for nu >= 0, kappa in [1e-8, 1e4].
double log_bessel_iv(double nu, double kappa);
/// d/dkappa ln I_nu(kappa) = I_{nu+1}(kappa) / I_nu(kappa) + nu / kappa.
double dlog_bessel_iv(double nu, double kappa);

/// ln C_F(kappa) = (F/2 - 1) ln kappa - ln I_{F/2-1}(kappa) - (F/2) ln 2 pi.
double log_cf(double kappa, std::size_t F);
/// d/dkappa ln C_F(kappa) = -I_{F/2}(kappa) / I_{F/2-1}(kappa).
double dlog_cf(double kappa, std::size_t F);
/// Differentiable ln C_F applied elementwise to kappa.
Tensor log_cf(const Tensor& kappa, std::size_t F);

}  // namespace sqvae
