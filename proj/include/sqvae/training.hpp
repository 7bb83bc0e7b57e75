#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sqvae/codebook.hpp"
#include "sqvae/config.hpp"
#include "sqvae/data.hpp"
#include "sqvae/metrics.hpp"
#include "sqvae/models.hpp"
#include "sqvae/objectives.hpp"
#include "sqvae/quantizer.hpp"

namespace sqvae {

/// Bias-corrected Adam over named parameters.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

/// One Adam step on every parameter that holds a gradient. Parameters
/// without a gradient are left alone (their moments do not decay).
void adam_update(const NamedParams& params, AdamState& st, double lr);

/// Plateau halving: after `patience` consecutive epochs without a new best
/// validation loss, lr *= factor and the counter restarts.
struct LrSchedule {
  double lr = 1e-3;
  double best = 0.0;
  bool has_best = false;
  std::size_t bad_epochs = 0;
  std::size_t patience = 3;
  double factor = 0.5;

  /// Returns true when the learning rate was reduced.
  bool observe(double val_loss);
};

/// Scale all gradients so their global L2 norm is at most max_norm.
/// Returns the pre-clip norm.
double clip_grad_norm(const NamedParams& params, double max_norm);

/// Encoder, decoder, codebook and the scalar spread parameters of one run.
struct Model {
  ModelKind kind = ModelKind::GaussianI;
  Encoder encoder;
  Decoder decoder;
  Codebook codebook;
  Tensor log_sigma2;      // Gaussian decoder variance (Gaussian kinds, fixed_sigma_q, vae)
  Tensor log_kappa;       // vMF decoder concentration
  Tensor log_sigma2_phi;  // type I dequantization variance
  Tensor log_kappa_phi;   // vMF dequantization concentration
  std::optional<CategoryProjection> projection;
  std::size_t D = 0;

  static Model init(const TrainConfig& cfg, const Dataset& ds);
  /// Trainable tensors in a fixed order.
  NamedParams parameters() const;
  /// Trainable tensors plus the codebook (for checkpoints).
  NamedParams state_tensors() const;
};

/// Model inputs for one batch.
struct Batch {
  std::vector<std::size_t> indices;
  Tensor x;                          // encoder input (N, D) or (N, D * F)
  Tensor target;                     // continuous pixels (N, D)
  Tensor projected;                  // vMF targets (N * D, F)
  std::vector<std::size_t> classes;  // categorical labels (N * D)
};

Batch make_batch(const Model& model, const Dataset& ds, const std::vector<std::size_t>& indices);

enum class Phase { Train, Eval };

struct ForwardResult {
  ElboBreakdown loss;
  std::vector<std::size_t> codes;  // hard assignment per latent row
  Tensor latents;                  // encoder output (N * d_z, d_b)
  Tensor entropy;                  // per latent row, undefined for VQ/VAE
  Tensor reconstruction;           // decoder output
  Tensor spread;                   // head output for types II-IV
};

/// Full forward pass. In Train phase the quantizer samples with the Gumbel
/// stream of `step`; Eval uses argmax codes and the posterior mean.
ForwardResult forward(const Model& model, const TrainConfig& cfg, const Batch& batch, Phase phase,
                      std::uint64_t step);

struct TrainState {
  TrainConfig config;
  std::shared_ptr<const Dataset> dataset;
  Model model;
  AdamState adam;
  LrSchedule schedule;
  UsageStats usage;
  std::uint64_t step = 0;   // optimizer steps taken
  std::uint64_t epoch = 0;  // epochs completed

  static TrainState create(const TrainConfig& cfg, std::shared_ptr<const Dataset> ds);
};

/// Build the dataset named by the config.
std::shared_ptr<const Dataset> load_dataset(const DatasetSpec& spec);

/// One optimizer step; returns the per-step metric row.
MetricRow train_step(TrainState& st, const std::vector<std::size_t>& indices);

struct EvalResult {
  double loss = 0.0;  // eval-mode objective + constant, per sample
  std::optional<double> mse;
  std::optional<double> pixel_error;
  std::optional<double> miou;
  std::optional<double> perplexity;
  std::optional<double> mean_entropy;
  std::optional<double> sigma2;
  std::optional<double> sigma2_phi;
  std::optional<double> kappa;
  std::optional<double> kappa_phi;
  std::vector<std::uint64_t> usage;
};

EvalResult evaluate(const TrainState& st, Split split);

/// Decoder and dequantization spreads as reported in metric rows. `head`
/// is the spread-head output of a batch (types II-IV), averaged after exp.
void fill_spread(const Model& model, const TrainConfig& cfg, const Tensor& head, MetricRow& row);

struct EpochResult {
  MetricRow row;
  std::vector<MetricRow> steps;
  bool lr_reduced = false;
};

/// One pass over the training split, then validation (lr schedule) and
/// test-split evaluation.
EpochResult train_epoch(TrainState& st);

}  // namespace sqvae
