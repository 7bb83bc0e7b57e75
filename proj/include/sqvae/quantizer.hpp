#pragma once

#include <cstdint>
#include <vector>

#include "sqvae/codebook.hpp"
#include "sqvae/rng.hpp"
#include "sqvae/tensor.hpp"
#include "sqvae/variance.hpp"

namespace sqvae {

/// Floor applied to probabilities before taking logs.
inline constexpr double kProbFloor = 1e-12;

/// Gumbel-softmax temperature: tau(t) = max(floor, exp(-rate * t)).
/// With literal_sign the exponent is +rate * t (capped at 1 so tau stays in
/// (0, 1]); it exists only to reproduce the schedule as printed upstream.
struct TemperatureSchedule {
  double rate = 1e-5;
  double floor = 0.1;
  bool literal_sign = false;
};

double temperature(std::uint64_t step, const TemperatureSchedule& sched);

struct QuantizationOutput {
  Tensor logits;      // (rows, K) unnormalized log-probabilities
  Tensor probs;       // (rows, K)
  Tensor assignment;  // (rows, K): relaxed sample during training, one-hot otherwise
  Tensor soft_code;   // (rows, d_b) = assignment * B
  std::vector<std::size_t> hard_indices;  // argmax of probs, lowest index on ties
  Tensor entropy_per_position;            // (rows)
  Tensor regularizer_value;               // (1), summed over rows
};

/// Scores for the variance kind: Mahalanobis for the Gaussian kinds, scaled
/// cosine for VmfKappa.
Tensor quantize_logits(const Tensor& Z, const Codebook& cb, const VarianceParam& var);
Tensor quantize_probs(const Tensor& Z, const Codebook& cb, const VarianceParam& var);

/// Y = softmax((ln max(p, 1e-12) + g) / tau), g i.i.d. standard Gumbel.
/// With hard = true the forward value is the one-hot of argmax(ln p + g),
/// an exact categorical draw, and the gradient is that of the relaxed Y.
Tensor gumbel_softmax_sample(const Tensor& probs, double tau, Rng& rng, bool hard = false);

/// Nearest-neighbour assignment with straight-through gradient: the forward
/// soft_code is the selected codes, the backward pass hands dL/dsoft_code to Z.
QuantizationOutput deterministic_quantize(const Tensor& Z, const Codebook& cb);

struct EntropyResult {
  Tensor per_position;  // (rows)
  Tensor total;         // (1), sum over rows
};

/// Exact -sum_k p ln p per row (0 ln 0 := 0).
EntropyResult analytic_entropy(const Tensor& probs);

/// Penalty between continuous latents Z and (soft) codes Zq, summed over rows:
/// Gaussian kinds 1/2 sum (z - zq)^2 / var, vMF sum_i kappa (1 - zq_i . z_i).
Tensor regularizer(const Tensor& Z, const Tensor& Zq, const VarianceParam& var);

/// E_{k ~ probs}[regularizer] computed in closed form from the scores.
Tensor expected_regularizer(const Tensor& Z, const Codebook& cb, const Tensor& probs,
                            const VarianceParam& var);

enum class QuantizeMode {
  Relaxed,  // one Gumbel-softmax sample (training)
  Hard,     // straight-through Gumbel: exact categorical draw
  Argmax,   // deterministic most-probable code (evaluation)
};

/// Full stochastic quantization of Z: probabilities, sample, soft code,
/// entropy and the regularizer. The regularizer is evaluated at the sampled
/// code, or in closed form under probs when analytic_regularizer is set.
QuantizationOutput stochastic_quantize(const Tensor& Z, const Codebook& cb, const VarianceParam& var,
                                       QuantizeMode mode, double tau, Rng* rng,
                                       bool analytic_regularizer = false);

/// One-hot (rows, K) matrix for the given indices.
Tensor one_hot(std::span<const std::size_t> indices, std::size_t K);

}  // namespace sqvae
