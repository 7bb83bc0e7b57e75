#include "sqvae/variance.hpp"

#include <cmath>
#include <vector>

#include "sqvae/error.hpp"

namespace sqvae {

std::string_view variance_kind_name(VarianceKind kind) {
  switch (kind) {
    case VarianceKind::TypeI: return "I";
    case VarianceKind::TypeII: return "II";
    case VarianceKind::TypeIII: return "III";
    case VarianceKind::TypeIV: return "IV";
    case VarianceKind::VmfKappa: return "vmf";
    case VarianceKind::FixedSigmaQ: return "fixed";
    case VarianceKind::Deterministic: return "deterministic";
  }
  return "?";
}

VarianceParam VarianceParam::fixed(double sigma_q2) {
  require(sigma_q2 > 0.0, "fixed sigma_q^2 must be positive, got " + std::to_string(sigma_q2));
  return {VarianceKind::FixedSigmaQ, Tensor::scalar(std::log(sigma_q2))};
}

VarianceParam VarianceParam::type_i_value(double var) {
  require(var > 0.0, "variance must be positive, got " + std::to_string(var));
  return {VarianceKind::TypeI, Tensor::scalar(std::log(var))};
}

bool VarianceParam::is_gaussian() const {
  return kind != VarianceKind::VmfKappa && kind != VarianceKind::Deterministic;
}

Tensor VarianceParam::row_log_variance(std::size_t rows, std::size_t d_b) const {
  require(is_gaussian(), "row_log_variance on non-Gaussian parameterization");
  require(log_value.defined(), "variance parameter has no value");
  switch (kind) {
    case VarianceKind::TypeI:
    case VarianceKind::FixedSigmaQ:
      require(log_value.numel() == 1, "type I variance must be a scalar");
      return broadcast_to(reshape(log_value, {1, 1}), {rows, d_b});
    case VarianceKind::TypeII: {
      require(log_value.rank() == 2 && log_value.size(1) == 1, "type II variance must be (N, 1)");
      const std::size_t n = log_value.size(0);
      require(n > 0 && rows % n == 0, "type II variance: rows not divisible by batch");
      const std::size_t d_z = rows / n;
      std::vector<std::size_t> idx(rows);
      for (std::size_t r = 0; r < rows; ++r) idx[r] = r / d_z;
      return broadcast_to(gather_rows(log_value, idx), {rows, d_b});
    }
    case VarianceKind::TypeIII:
      require(log_value.rank() == 2 && log_value.numel() == rows,
              "type III variance must be (N, d_z) with N * d_z = rows");
      return broadcast_to(reshape(log_value, {rows, 1}), {rows, d_b});
    case VarianceKind::TypeIV:
      require(log_value.rank() == 2 && log_value.numel() == rows * d_b,
              "type IV variance must be (N, d_z * d_b)");
      return reshape(log_value, {rows, d_b});
    default:
      break;
  }
  throw ContractError("unsupported variance kind");
}

Tensor VarianceParam::row_precision(std::size_t rows, std::size_t d_b) const {
  return exp(neg(row_log_variance(rows, d_b)));
}

Tensor VarianceParam::kappa() const {
  require(kind == VarianceKind::VmfKappa, "kappa() requires a vMF parameterization");
  require(log_value.defined() && log_value.numel() == 1, "kappa_phi must be a scalar");
  return exp(log_value);
}

double VarianceParam::mean_value() const {
  if (!log_value.defined() || log_value.numel() == 0) return 0.0;
  double s = 0.0;
  for (double v : log_value.data()) s += std::exp(v);
  return s / static_cast<double>(log_value.numel());
}

}  // namespace sqvae
