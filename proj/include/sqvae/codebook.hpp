#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sqvae/rng.hpp"
#include "sqvae/tensor.hpp"
#include "sqvae/variance.hpp"

namespace sqvae {

/// Trainable K x d_b matrix of code vectors.
struct Codebook {
  Tensor entries;  // (K, d_b)
  bool unit_norm = false;

  std::size_t size() const { return entries.size(0); }
  std::size_t dim() const { return entries.size(1); }

  /// Entries i.i.d. Normal(0, 1/d_b); unit-norm books are then row-normalized.
  static Codebook random(std::size_t K, std::size_t d_b, bool unit_norm, Rng& rng);
  static Codebook from_rows(std::size_t K, std::size_t d_b, std::vector<double> rows,
                            bool unit_norm = false, bool trainable = true);

  /// Re-project every row onto the unit sphere (in place, unit_norm books only).
  void renormalize();
  /// Throws ContractError if K < 2, d_b < 1 or unit-norm rows drift past 1e-10.
  void check_invariants() const;
};

/// Per-code usage accounting for the EMA update and the reset heuristic.
struct UsageStats {
  std::vector<std::uint64_t> counts;     // hard assignments in the current window
  std::vector<double> ema_cluster_size;  // (K)
  std::vector<double> ema_cluster_sum;   // (K, d_b) row-major
  std::size_t window_batches = 0;

  static UsageStats zeros(std::size_t K, std::size_t d_b);
  void record(std::span<const std::size_t> assignments);
  void clear_window();
};

/// Entry (i, k) = -1/2 (b_k - z_i)^T Sigma^-1 (b_k - z_i); Z is (rows, d_b).
/// Every variance type goes through the same diagonal-precision arithmetic, so
/// a type IV parameter with equal diagonals reproduces type I bit for bit.
Tensor gaussian_scores(const Tensor& Z, const Codebook& cb, const VarianceParam& var);

/// Entry (i, k) = kappa * b_k . z_i. `kappa` is a (1) tensor, kappa >= 0.
Tensor vmf_scores(const Tensor& Z, const Codebook& cb, const Tensor& kappa);

std::vector<std::uint64_t> usage_histogram(std::span<const std::size_t> indices, std::size_t K);

/// exp of the Shannon entropy of the normalized counts; lies in [1, K].
double perplexity(std::span<const std::uint64_t> counts);

/// Moving-average codebook update (cluster size / cluster sum form):
///   size_k <- gamma size_k + (1 - gamma) n_k
///   sum_k  <- gamma sum_k  + (1 - gamma) sum_{i: a_i = k} z_i
///   b_k    <- sum_k / size_k          (only while size_k >= eps)
void ema_update(Codebook& cb, UsageStats& stats, const Tensor& Z,
                std::span<const std::size_t> assignments, double gamma, double eps = 1e-5);

struct ResetEvent {
  std::size_t least = 0;
  std::size_t most = 0;
};

/// If the least-used code in the window was used less than 3% as often as the
/// most-used one, move it to a draw from Normal(b_most, 0.01 I). The EMA sum
/// of the moved code is rescaled so a later EMA step keeps the new position.
std::optional<ResetEvent> codebook_reset(Codebook& cb, UsageStats& stats, Rng& rng,
                                         double threshold = 0.03, double noise_var = 0.01);

/// Index of the largest entry per row, lowest index on ties.
std::vector<std::size_t> row_argmax(const Tensor& x);

/// Index of the nearest code (Euclidean) per latent row, lowest index on ties.
std::vector<std::size_t> nearest_codes(const Tensor& Z, const Codebook& cb);

}  // namespace sqvae
