#include "sqvae/config.hpp"

#include <set>

#include "sqvae/error.hpp"

namespace sqvae {

using nlohmann::json;

namespace {

struct KindName {
  ModelKind kind;
  const char* name;
};

constexpr KindName kKinds[] = {
    {ModelKind::GaussianI, "gaussian_sqvae_I"},   {ModelKind::GaussianII, "gaussian_sqvae_II"},
    {ModelKind::GaussianIII, "gaussian_sqvae_III"}, {ModelKind::GaussianIV, "gaussian_sqvae_IV"},
    {ModelKind::Vmf, "vmf_sqvae"},                {ModelKind::Nc, "nc_sqvae"},
    {ModelKind::Vq, "vqvae"},                     {ModelKind::VqEma, "vqvae_ema"},
    {ModelKind::VqEmaReset, "vqvae_ema_reset"},   {ModelKind::FixedSigmaQ, "fixed_sigma_q"},
    {ModelKind::Vae, "vae"},
};

template <class T>
void take(const json& obj, const char* key, T& out, const std::string& prefix, std::set<std::string>& seen) {
  seen.insert(key);
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + prefix + key + "' has the wrong type: " + obj.at(key).dump());
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& seen, const std::string& prefix) {
  for (const auto& [k, v] : obj.items()) {
    if (!seen.count(k)) throw ConfigError("unknown field '" + prefix + k + "'");
  }
}

}  // namespace

ModelKind parse_model_kind(const std::string& name) {
  for (const auto& k : kKinds) {
    if (name == k.name) return k.kind;
  }
  throw ConfigError("field 'model': unknown model kind '" + name + "'");
}

std::string model_kind_name(ModelKind kind) {
  for (const auto& k : kKinds) {
    if (kind == k.kind) return k.name;
  }
  return "?";
}

bool is_vq_kind(ModelKind kind) {
  return kind == ModelKind::Vq || kind == ModelKind::VqEma || kind == ModelKind::VqEmaReset;
}

bool is_categorical_kind(ModelKind kind) { return kind == ModelKind::Vmf || kind == ModelKind::Nc; }

double TrainConfig::effective_lr() const {
  if (lr >= 0.0) return lr;
  return is_vq_kind(model) ? 3e-4 : 1e-3;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError("field '" + field + "': " + why); };
  if (d_z < 1) fail("d_z", "must be >= 1");
  if (d_b < 1) fail("d_b", "must be >= 1");
  if (K < 2) fail("K", "must be >= 2");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (eval_batch < 1) fail("eval_batch", "must be >= 1");
  if (!(beta > 0.0)) fail("beta", "must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma", "must lie in (0, 1)");
  if (!(sigma_q2 > 0.0)) fail("sigma_q2", "must be positive");
  if (!(vq_sigma2 > 0.0)) fail("vq_sigma2", "must be positive");
  if (!(tau_min > 0.0 && tau_min <= 1.0)) fail("tau_min", "must lie in (0, 1]");
  if (!(tau_rate >= 0.0)) fail("tau_rate", "must be >= 0");
  if (!(grad_clip >= 0.0)) fail("grad_clip", "must be >= 0");
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) fail("lr_factor", "must lie in (0, 1]");
  if (lr_patience < 1) fail("lr_patience", "must be >= 1");
  if (reset_interval < 1) fail("reset_interval", "must be >= 1");
  if (!(reset_threshold > 0.0 && reset_threshold < 1.0)) fail("reset_threshold", "must lie in (0, 1)");
  if (!(reset_noise > 0.0)) fail("reset_noise", "must be positive");
  if (!(ema_eps > 0.0)) fail("ema_eps", "must be positive");
  if (hidden.empty()) fail("hidden", "needs at least one layer");
  for (std::size_t h : hidden) {
    if (h < 1) fail("hidden", "layer widths must be >= 1");
  }
  if (projection != "one_hot" && projection != "circle") fail("projection", "must be one_hot or circle");
  if (run_id.empty() || run_id.find_first_of(",\n\r") != std::string::npos) fail("run_id", "must be non-empty without commas");
  const auto& ds = dataset;
  if (ds.kind != "synth_continuous" && ds.kind != "synth_categorical" && ds.kind != "mnist") {
    fail("dataset.kind", "must be synth_continuous, synth_categorical or mnist");
  }
  if (ds.kind == "mnist") {
    if (ds.images.empty()) fail("dataset.images", "required for mnist");
  } else {
    if (ds.n_train < 1) fail("dataset.n_train", "must be >= 1");
    if (ds.side < 4) fail("dataset.side", "must be >= 4");
  }
  if (ds.kind == "synth_categorical" && (ds.classes < 2 || ds.classes > 256)) {
    fail("dataset.classes", "must lie in [2, 256]");
  }
  const bool categorical_data = ds.kind == "synth_categorical";
  if (is_categorical_kind(model) != categorical_data) {
    fail("model", model_kind_name(model) + " does not match dataset kind " + ds.kind);
  }
  if (lr < 0.0 && lr != -1.0) fail("lr", "must be >= 0");
}

TrainConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig c;
  std::set<std::string> seen;
  std::string model = model_kind_name(c.model);
  take(doc, "model", model, "", seen);
  c.model = parse_model_kind(model);
  seen.insert("dataset");
  if (doc.contains("dataset")) {
    const json& d = doc.at("dataset");
    if (!d.is_object()) throw ConfigError("field 'dataset' must be an object");
    std::set<std::string> dseen;
    take(d, "kind", c.dataset.kind, "dataset.", dseen);
    take(d, "n_train", c.dataset.n_train, "dataset.", dseen);
    take(d, "n_val", c.dataset.n_val, "dataset.", dseen);
    take(d, "n_test", c.dataset.n_test, "dataset.", dseen);
    take(d, "side", c.dataset.side, "dataset.", dseen);
    take(d, "classes", c.dataset.classes, "dataset.", dseen);
    take(d, "seed", c.dataset.seed, "dataset.", dseen);
    take(d, "images", c.dataset.images, "dataset.", dseen);
    take(d, "labels", c.dataset.labels, "dataset.", dseen);
    reject_unknown(d, dseen, "dataset.");
  }
  take(doc, "d_z", c.d_z, "", seen);
  take(doc, "d_b", c.d_b, "", seen);
  take(doc, "K", c.K, "", seen);
  take(doc, "epochs", c.epochs, "", seen);
  take(doc, "batch_size", c.batch_size, "", seen);
  take(doc, "lr", c.lr, "", seen);
  take(doc, "beta", c.beta, "", seen);
  take(doc, "gamma", c.gamma, "", seen);
  take(doc, "sigma_q2", c.sigma_q2, "", seen);
  take(doc, "vq_sigma2", c.vq_sigma2, "", seen);
  take(doc, "tau_min", c.tau_min, "", seen);
  take(doc, "tau_rate", c.tau_rate, "", seen);
  take(doc, "tau_literal_sign", c.tau_literal_sign, "", seen);
  take(doc, "gumbel_hard", c.gumbel_hard, "", seen);
  take(doc, "analytic_regularizer", c.analytic_regularizer, "", seen);
  take(doc, "seed", c.seed, "", seen);
  take(doc, "hidden", c.hidden, "", seen);
  take(doc, "init_log_sigma2", c.init_log_sigma2, "", seen);
  take(doc, "init_log_sigma2_phi", c.init_log_sigma2_phi, "", seen);
  take(doc, "init_log_kappa", c.init_log_kappa, "", seen);
  take(doc, "init_log_kappa_phi", c.init_log_kappa_phi, "", seen);
  take(doc, "projection", c.projection, "", seen);
  take(doc, "vmf_literal_normalizer", c.vmf_literal_normalizer, "", seen);
  take(doc, "grad_clip", c.grad_clip, "", seen);
  take(doc, "lr_patience", c.lr_patience, "", seen);
  take(doc, "lr_factor", c.lr_factor, "", seen);
  take(doc, "reset_interval", c.reset_interval, "", seen);
  take(doc, "reset_threshold", c.reset_threshold, "", seen);
  take(doc, "reset_noise", c.reset_noise, "", seen);
  take(doc, "ema_eps", c.ema_eps, "", seen);
  take(doc, "eval_batch", c.eval_batch, "", seen);
  take(doc, "checkpoint_every", c.checkpoint_every, "", seen);
  take(doc, "log_steps", c.log_steps, "", seen);
  take(doc, "run_id", c.run_id, "", seen);
  reject_unknown(doc, seen, "");
  if (doc.contains("lr") && c.lr < 0.0) throw ConfigError("field 'lr': must be >= 0");
  c.validate();
  return c;
}

json config_to_json(const TrainConfig& c) {
  json d = {
      {"kind", c.dataset.kind},     {"n_train", c.dataset.n_train}, {"n_val", c.dataset.n_val},
      {"n_test", c.dataset.n_test}, {"side", c.dataset.side},       {"classes", c.dataset.classes},
      {"seed", c.dataset.seed},     {"images", c.dataset.images},   {"labels", c.dataset.labels},
  };
  return json{
      {"model", model_kind_name(c.model)},
      {"dataset", d},
      {"d_z", c.d_z},
      {"d_b", c.d_b},
      {"K", c.K},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"lr", c.effective_lr()},
      {"beta", c.beta},
      {"gamma", c.gamma},
      {"sigma_q2", c.sigma_q2},
      {"vq_sigma2", c.vq_sigma2},
      {"tau_min", c.tau_min},
      {"tau_rate", c.tau_rate},
      {"tau_literal_sign", c.tau_literal_sign},
      {"gumbel_hard", c.gumbel_hard},
      {"analytic_regularizer", c.analytic_regularizer},
      {"seed", c.seed},
      {"hidden", c.hidden},
      {"init_log_sigma2", c.init_log_sigma2},
      {"init_log_sigma2_phi", c.init_log_sigma2_phi},
      {"init_log_kappa", c.init_log_kappa},
      {"init_log_kappa_phi", c.init_log_kappa_phi},
      {"projection", c.projection},
      {"vmf_literal_normalizer", c.vmf_literal_normalizer},
      {"grad_clip", c.grad_clip},
      {"lr_patience", c.lr_patience},
      {"lr_factor", c.lr_factor},
      {"reset_interval", c.reset_interval},
      {"reset_threshold", c.reset_threshold},
      {"reset_noise", c.reset_noise},
      {"ema_eps", c.ema_eps},
      {"eval_batch", c.eval_batch},
      {"checkpoint_every", c.checkpoint_every},
      {"log_steps", c.log_steps},
      {"run_id", c.run_id},
  };
}

}  // namespace sqvae
