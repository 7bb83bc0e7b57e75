#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace sqvae {

enum class ModelKind {
  GaussianI,
  GaussianII,
  GaussianIII,
  GaussianIV,
  Vmf,
  Nc,
  Vq,
  VqEma,
  VqEmaReset,
  FixedSigmaQ,
  Vae,
};

ModelKind parse_model_kind(const std::string& name);
std::string model_kind_name(ModelKind kind);
bool is_vq_kind(ModelKind kind);
bool is_categorical_kind(ModelKind kind);  // vMF and NC decoders

struct DatasetSpec {
  std::string kind = "synth_continuous";  // synth_continuous | synth_categorical | mnist
  std::size_t n_train = 2000;
  std::size_t n_val = 500;
  std::size_t n_test = 500;
  std::size_t side = 16;
  std::size_t classes = 8;  // L, synth_categorical
  std::uint64_t seed = 0;
  std::string images;  // mnist
  std::string labels;  // mnist, optional
};

struct TrainConfig {
  ModelKind model = ModelKind::GaussianI;
  DatasetSpec dataset;
  std::size_t d_z = 4;
  std::size_t d_b = 16;
  std::size_t K = 32;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = -1.0;  // < 0: model default (3e-4 VQ kinds, 1e-3 otherwise)
  double beta = 0.25;
  double gamma = 0.99;
  double sigma_q2 = 1.0;
  double vq_sigma2 = 1.0;
  double tau_min = 0.1;
  double tau_rate = 1e-5;
  bool tau_literal_sign = false;
  bool gumbel_hard = false;
  bool analytic_regularizer = false;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden{256, 128};
  double init_log_sigma2 = 0.0;
  double init_log_sigma2_phi = 0.0;
  double init_log_kappa = 0.0;
  double init_log_kappa_phi = 0.0;
  std::string projection = "one_hot";
  bool vmf_literal_normalizer = false;
  double grad_clip = 10.0;  // 0 disables
  std::size_t lr_patience = 3;
  double lr_factor = 0.5;
  std::size_t reset_interval = 20;
  double reset_threshold = 0.03;
  double reset_noise = 0.01;
  double ema_eps = 1e-5;
  std::size_t eval_batch = 256;
  std::size_t checkpoint_every = 0;  // epochs; 0 = initial and final only
  bool log_steps = false;
  std::string run_id = "run";

  double effective_lr() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parse a config document; unknown keys and ill-typed values are rejected
/// with the field name.
TrainConfig config_from_json(const nlohmann::json& doc);
/// Every field, defaults included, with lr materialized.
nlohmann::json config_to_json(const TrainConfig& cfg);

}  // namespace sqvae
