#include "sqvae/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "sqvae/error.hpp"

namespace sqvae {

double temperature(std::uint64_t step, const TemperatureSchedule& sched) {
  require(sched.rate >= 0.0 && sched.floor > 0.0 && sched.floor <= 1.0,
          "temperature schedule needs rate >= 0 and floor in (0, 1]");
  const double t = static_cast<double>(step);
  if (sched.literal_sign) return std::min(1.0, std::max(sched.floor, std::exp(sched.rate * t)));
  return std::max(sched.floor, std::exp(-sched.rate * t));
}

Tensor one_hot(std::span<const std::size_t> indices, std::size_t K) {
  std::vector<double> v(indices.size() * K, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < K, "one_hot: index out of range");
    v[i * K + indices[i]] = 1.0;
  }
  return Tensor::from_data({indices.size(), K}, std::move(v));
}

Tensor quantize_logits(const Tensor& Z, const Codebook& cb, const VarianceParam& var) {
  if (var.kind == VarianceKind::VmfKappa) return vmf_scores(Z, cb, var.kappa());
  return gaussian_scores(Z, cb, var);
}

Tensor quantize_probs(const Tensor& Z, const Codebook& cb, const VarianceParam& var) {
  return softmax_rows(quantize_logits(Z, cb, var));
}

Tensor gumbel_softmax_sample(const Tensor& probs, double tau, Rng& rng, bool hard) {
  require(tau > 0.0, "gumbel_softmax_sample: tau must be positive");
  require(probs.rank() == 2, "gumbel_softmax_sample: probs must be (rows, K)");
  const std::size_t rows = probs.size(0), K = probs.size(1);
  std::vector<double> g(rows * K);
  for (double& v : g) v = rng.gumbel();
  const Tensor noise = Tensor::from_data({rows, K}, std::move(g));
  const Tensor perturbed = add(log(clamp_min(probs, kProbFloor)), noise);
  const Tensor y = softmax_rows(scale(perturbed, 1.0 / tau));
  if (!hard) return y;
  // argmax of the perturbed log-probabilities is independent of tau.
  return straight_through(one_hot(row_argmax(perturbed), K), y);
}

EntropyResult analytic_entropy(const Tensor& probs) {
  require(probs.rank() == 2, "analytic_entropy: probs must be (rows, K)");
  const Tensor plogp = mul(probs, log(clamp_min(probs, kProbFloor)));
  EntropyResult r;
  r.per_position = neg(sum_axis(plogp, 1));
  r.total = sum(r.per_position);
  return r;
}

Tensor regularizer(const Tensor& Z, const Tensor& Zq, const VarianceParam& var) {
  require(Z.shape() == Zq.shape() && Z.rank() == 2, "regularizer: Z and Zq shapes differ");
  if (var.kind == VarianceKind::VmfKappa) {
    const double rows = static_cast<double>(Z.size(0));
    // sum_i kappa (1 - zq_i . z_i)
    return mul(var.kappa(), add_scalar(neg(sum(mul(Zq, Z))), rows));
  }
  require(var.is_gaussian(), "regularizer: deterministic quantization has no regularizer");
  for (double lv : var.log_value.data()) {
    if (!std::isfinite(lv)) throw ContractError("regularizer: variance must be positive and finite");
  }
  const Tensor prec = var.row_precision(Z.size(0), Z.size(1));
  return scale(sum(mul(square(sub(Z, Zq)), prec)), 0.5);
}

Tensor expected_regularizer(const Tensor& Z, const Codebook& cb, const Tensor& probs, const VarianceParam& var) {
  const Tensor scores = quantize_logits(Z, cb, var);
  // Gaussian: score = -R(z, b_k); vMF: score = kappa b_k.z = kappa - R(z, b_k).
  const Tensor expected_scores = sum(mul(probs, scores));
  if (var.kind == VarianceKind::VmfKappa) {
    return sub(scale(var.kappa(), static_cast<double>(Z.size(0))), expected_scores);
  }
  return neg(expected_scores);
}

QuantizationOutput deterministic_quantize(const Tensor& Z, const Codebook& cb) {
  QuantizationOutput q;
  q.hard_indices = nearest_codes(Z, cb);
  q.probs = one_hot(q.hard_indices, cb.size());
  q.assignment = q.probs;
  q.soft_code = straight_through(gather_rows(cb.entries, q.hard_indices).detach(), Z);
  q.entropy_per_position = Tensor::zeros({Z.size(0)});
  q.regularizer_value = Tensor::scalar(0.0);
  return q;
}

QuantizationOutput stochastic_quantize(const Tensor& Z, const Codebook& cb, const VarianceParam& var,
                                       QuantizeMode mode, double tau, Rng* rng, bool analytic_regularizer) {
  require(var.kind != VarianceKind::Deterministic, "stochastic_quantize: use deterministic_quantize");
  QuantizationOutput q;
  q.logits = quantize_logits(Z, cb, var);
  q.probs = softmax_rows(q.logits);
  q.hard_indices = row_argmax(q.probs);
  if (mode == QuantizeMode::Argmax) {
    q.assignment = one_hot(q.hard_indices, cb.size());
    q.soft_code = gather_rows(cb.entries, q.hard_indices);
  } else {
    require(rng != nullptr, "stochastic_quantize: sampling needs a random stream");
    q.assignment = gumbel_softmax_sample(q.probs, tau, *rng, mode == QuantizeMode::Hard);
    q.soft_code = matmul(q.assignment, cb.entries);
  }
  q.entropy_per_position = analytic_entropy(q.probs).per_position;
  q.regularizer_value = analytic_regularizer ? expected_regularizer(Z, cb, q.probs, var)
                                             : regularizer(Z, q.soft_code, var);
  return q;
}

}  // namespace sqvae
