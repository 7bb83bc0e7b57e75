#pragma once

#include <cstddef>
#include <string_view>

#include "sqvae/tensor.hpp"

namespace sqvae {

/// How the dequantization spread is parameterized.
///
/// The Gaussian kinds differ only in how many distinct variances exist:
///   TypeI    one shared scalar, shape (1)
///   TypeII   one scalar per sample, shape (N, 1)
///   TypeIII  one scalar per latent position, shape (N, d_z)
///   TypeIV   one variance per position and dimension, shape (N, d_z * d_b)
/// VmfKappa holds log kappa_phi (shape (1)); FixedSigmaQ holds a constant
/// log sigma_q^2; Deterministic has no spread (nearest-neighbour baseline).
enum class VarianceKind { TypeI, TypeII, TypeIII, TypeIV, VmfKappa, FixedSigmaQ, Deterministic };

std::string_view variance_kind_name(VarianceKind kind);

struct VarianceParam {
  VarianceKind kind = VarianceKind::TypeI;
  Tensor log_value;  // realized value is exp(log_value) > 0

  static VarianceParam type_i(Tensor log_var) { return {VarianceKind::TypeI, std::move(log_var)}; }
  static VarianceParam type_ii(Tensor log_var) { return {VarianceKind::TypeII, std::move(log_var)}; }
  static VarianceParam type_iii(Tensor log_var) { return {VarianceKind::TypeIII, std::move(log_var)}; }
  static VarianceParam type_iv(Tensor log_var) { return {VarianceKind::TypeIV, std::move(log_var)}; }
  static VarianceParam vmf(Tensor log_kappa) { return {VarianceKind::VmfKappa, std::move(log_kappa)}; }
  static VarianceParam fixed(double sigma_q2);
  static VarianceParam deterministic() { return {VarianceKind::Deterministic, {}}; }
  /// Type I with a literal (non-trainable) variance; rejects var <= 0.
  static VarianceParam type_i_value(double var);

  bool is_gaussian() const;

  /// Log-variance expanded to one entry per latent row and code dimension:
  /// (rows, d_b), where rows = N * d_z.
  Tensor row_log_variance(std::size_t rows, std::size_t d_b) const;
  /// exp(-row_log_variance).
  Tensor row_precision(std::size_t rows, std::size_t d_b) const;
  /// Concentration kappa_phi as a (1) tensor; VmfKappa only.
  Tensor kappa() const;

  /// Mean realized value over all entries (for reporting).
  double mean_value() const;
};

}  // namespace sqvae
