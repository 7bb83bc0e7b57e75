#include "sqvae/training.hpp"

#include <algorithm>
#include <cmath>

#include "sqvae/error.hpp"

namespace sqvae {

// --- optimizer ---------------------------------------------------------------

void adam_update(const NamedParams& params, AdamState& st, double lr) {
  ++st.t;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    Tensor t = p;
    auto data = t.mutable_data();
    const auto g = p.grad();
    auto& m = st.m[name];
    auto& v = st.v[name];
    if (m.size() != data.size()) m.assign(data.size(), 0.0);
    if (v.size() != data.size()) v.assign(data.size(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      data[i] -= lr * mh / (std::sqrt(vh) + st.eps);
    }
  }
}

bool LrSchedule::observe(double val_loss) {
  if (!has_best || val_loss < best) {
    best = val_loss;
    has_best = true;
    bad_epochs = 0;
    return false;
  }
  if (++bad_epochs >= patience) {
    lr *= factor;
    bad_epochs = 0;
    return true;
  }
  return false;
}

double clip_grad_norm(const NamedParams& params, double max_norm) {
  double s = 0.0;
  for (const auto& [name, p] : params) {
    for (double g : p.grad()) s += g * g;
  }
  const double norm = std::sqrt(s);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (const auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.node()->grad) g *= f;
    }
  }
  return norm;
}

// --- model -------------------------------------------------------------------

namespace {

bool has_decoder_variance(ModelKind k) {
  return k == ModelKind::GaussianI || k == ModelKind::GaussianII || k == ModelKind::GaussianIII ||
         k == ModelKind::GaussianIV || k == ModelKind::FixedSigmaQ || k == ModelKind::Vae;
}

bool is_ema_kind(ModelKind k) { return k == ModelKind::VqEma || k == ModelKind::VqEmaReset; }

VarianceParam variance_for(const Model& m, const TrainConfig& cfg, const Tensor& head) {
  switch (m.kind) {
    case ModelKind::GaussianI:
    case ModelKind::Nc: return VarianceParam::type_i(m.log_sigma2_phi);
    case ModelKind::GaussianII: return VarianceParam::type_ii(head);
    case ModelKind::GaussianIII: return VarianceParam::type_iii(head);
    case ModelKind::GaussianIV: return VarianceParam::type_iv(head);
    case ModelKind::FixedSigmaQ: return VarianceParam::fixed(cfg.sigma_q2);
    case ModelKind::Vmf: return VarianceParam::vmf(m.log_kappa_phi);
    default: return VarianceParam::deterministic();
  }
}

double mean_exp(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += std::exp(v);
  return s / static_cast<double>(t.numel());
}

}  // namespace

Model Model::init(const TrainConfig& cfg, const Dataset& ds) {
  cfg.validate();
  Rng rng(cfg.seed, Stream::Init);
  Model m;
  m.kind = cfg.model;
  m.D = ds.D;
  std::size_t in_width = ds.D;
  if (is_categorical_kind(cfg.model)) {
    require(ds.kind == DataKind::Categorical, "categorical model needs a categorical dataset");
    m.projection = CategoryProjection::make(parse_projection_mode(cfg.projection), ds.classes);
    in_width = ds.D * m.projection->dim();
  } else {
    require(ds.kind == DataKind::Continuous, "continuous model needs a continuous dataset");
  }
  const HeadShape head = cfg.model == ModelKind::Vae ? HeadShape::PerEntry
                         : cfg.model == ModelKind::GaussianII  ? HeadShape::PerSample
                         : cfg.model == ModelKind::GaussianIII ? HeadShape::PerPosition
                         : cfg.model == ModelKind::GaussianIV  ? HeadShape::PerEntry
                                                               : HeadShape::None;
  m.encoder = Encoder::init(in_width, cfg.d_z, cfg.d_b, head, cfg.model == ModelKind::Vmf, cfg.hidden, rng);
  std::vector<std::size_t> dec_hidden(cfg.hidden.rbegin(), cfg.hidden.rend());
  if (cfg.model == ModelKind::Vmf) {
    m.decoder = Decoder::init(cfg.d_z, cfg.d_b, ds.D, m.projection->dim(), DecoderOutput::Directions, dec_hidden, rng);
  } else if (cfg.model == ModelKind::Nc) {
    m.decoder = Decoder::init(cfg.d_z, cfg.d_b, ds.D, ds.classes, DecoderOutput::Logits, dec_hidden, rng);
  } else {
    m.decoder = Decoder::init(cfg.d_z, cfg.d_b, ds.D, 1, DecoderOutput::Mean, dec_hidden, rng);
  }
  if (cfg.model != ModelKind::Vae) {
    m.codebook = Codebook::random(cfg.K, cfg.d_b, cfg.model == ModelKind::Vmf, rng);
    if (is_ema_kind(cfg.model)) {
      auto rows = m.codebook.entries.data();
      m.codebook = Codebook::from_rows(cfg.K, cfg.d_b, {rows.begin(), rows.end()}, false, false);
    }
  }
  if (has_decoder_variance(cfg.model)) m.log_sigma2 = Tensor::scalar(cfg.init_log_sigma2, true);
  if (cfg.model == ModelKind::Vmf) {
    m.log_kappa = Tensor::scalar(cfg.init_log_kappa, true);
    m.log_kappa_phi = Tensor::scalar(cfg.init_log_kappa_phi, true);
  }
  if (cfg.model == ModelKind::GaussianI || cfg.model == ModelKind::Nc) {
    m.log_sigma2_phi = Tensor::scalar(cfg.init_log_sigma2_phi, true);
  }
  return m;
}

NamedParams Model::parameters() const {
  NamedParams p;
  encoder.collect(p);
  decoder.collect(p);
  if (codebook.entries.defined() && codebook.entries.requires_grad()) p.emplace_back("codebook", codebook.entries);
  if (log_sigma2.defined()) p.emplace_back("log_sigma2", log_sigma2);
  if (log_kappa.defined()) p.emplace_back("log_kappa", log_kappa);
  if (log_sigma2_phi.defined()) p.emplace_back("log_sigma2_phi", log_sigma2_phi);
  if (log_kappa_phi.defined()) p.emplace_back("log_kappa_phi", log_kappa_phi);
  return p;
}

NamedParams Model::state_tensors() const {
  NamedParams p = parameters();
  if (codebook.entries.defined() && !codebook.entries.requires_grad()) p.emplace_back("codebook", codebook.entries);
  return p;
}

Batch make_batch(const Model& model, const Dataset& ds, const std::vector<std::size_t>& indices) {
  require(!indices.empty(), "make_batch: empty batch");
  Batch b;
  b.indices = indices;
  const std::size_t n = indices.size();
  if (ds.kind == DataKind::Continuous) {
    b.target = Tensor::from_data({n, ds.D}, gather_pixels(ds, indices));
    b.x = b.target;
  } else {
    require(model.projection.has_value(), "make_batch: categorical data needs a category projection");
    b.classes = gather_labels(ds, indices);
    b.projected = model.projection->project(b.classes);
    b.x = reshape(b.projected, {n, ds.D * model.projection->dim()});
  }
  return b;
}

ForwardResult forward(const Model& model, const TrainConfig& cfg, const Batch& batch, Phase phase,
                      std::uint64_t step) {
  ForwardResult r;
  const EncoderOutput enc = model.encoder.forward(batch.x);
  const std::size_t n = batch.x.size(0);
  r.latents = enc.latents;
  r.spread = enc.head;
  const LatentLayout layout{n, cfg.d_z, cfg.K};

  if (is_vq_kind(model.kind)) {
    const QuantizationOutput q = deterministic_quantize(enc.latents, model.codebook);
    r.reconstruction = model.decoder.forward(q.soft_code);
    r.loss = vq_loss(batch.target, enc.latents, model.codebook, q.hard_indices, r.reconstruction, cfg.beta,
                     cfg.vq_sigma2, model.kind == ModelKind::Vq);
    r.codes = q.hard_indices;
    return r;
  }

  if (model.kind == ModelKind::Vae) {
    const Tensor& mu = enc.features;
    const Tensor& logvar = enc.head;
    Tensor z = mu;
    if (phase == Phase::Train) {
      Rng rng(cfg.seed, Stream::Latent, step);
      std::vector<double> eps(mu.numel());
      for (double& e : eps) e = rng.normal();
      z = add(mu, mul(exp(scale(logvar, 0.5)), Tensor::from_data(mu.shape(), std::move(eps))));
    }
    r.reconstruction = model.decoder.forward(reshape(z, {n * cfg.d_z, cfg.d_b}));
    r.loss = vae_loss(batch.target, mu, logvar, r.reconstruction, model.log_sigma2);
    return r;
  }

  const VarianceParam var = variance_for(model, cfg, enc.head);
  QuantizeMode mode = QuantizeMode::Argmax;
  if (phase == Phase::Train) mode = cfg.gumbel_hard ? QuantizeMode::Hard : QuantizeMode::Relaxed;
  Rng rng(cfg.seed, Stream::Gumbel, step);
  const double tau = temperature(step, {cfg.tau_rate, cfg.tau_min, cfg.tau_literal_sign});
  const QuantizationOutput q = stochastic_quantize(enc.latents, model.codebook, var, mode, tau, &rng,
                                                  cfg.analytic_regularizer && phase == Phase::Train);
  r.codes = q.hard_indices;
  r.entropy = q.entropy_per_position;
  r.reconstruction = model.decoder.forward(q.soft_code);
  switch (model.kind) {
    case ModelKind::Vmf:
      r.loss = vmf_sq_loss(batch.projected, q, r.reconstruction, model.log_kappa, layout, cfg.vmf_literal_normalizer);
      break;
    case ModelKind::Nc: r.loss = nc_sq_loss(batch.classes, q, r.reconstruction, layout); break;
    default: r.loss = gaussian_sq_loss(batch.target, q, r.reconstruction, model.log_sigma2, layout); break;
  }
  return r;
}

// --- state ---------------------------------------------------------------------

std::shared_ptr<const Dataset> load_dataset(const DatasetSpec& spec) {
  auto ds = std::make_shared<Dataset>();
  const std::size_t total = spec.n_train + spec.n_val + spec.n_test;
  if (spec.kind == "synth_continuous") {
    *ds = synth_continuous(total, spec.side, spec.seed);
    assign_splits(*ds, spec.n_train, spec.n_val);
  } else if (spec.kind == "synth_categorical") {
    *ds = synth_categorical(total, spec.side, spec.classes, spec.seed);
    assign_splits(*ds, spec.n_train, spec.n_val);
  } else if (spec.kind == "mnist") {
    Dataset full = load_mnist_idx(spec.images, spec.labels, spec.n_val, spec.n_test);
    // Keep the first n_train training samples and the trailing val/test blocks.
    const std::size_t avail = full.train.size();
    const std::size_t keep = spec.n_train == 0 ? avail : std::min(avail, spec.n_train);
    std::vector<std::size_t> pick(full.train.begin(), full.train.begin() + static_cast<std::ptrdiff_t>(keep));
    pick.insert(pick.end(), full.val.begin(), full.val.end());
    pick.insert(pick.end(), full.test.begin(), full.test.end());
    ds->kind = DataKind::Continuous;
    ds->n = pick.size();
    ds->D = full.D;
    ds->pixels = gather_pixels(full, pick);
    if (!full.labels.empty()) {
      for (std::size_t i : pick) ds->labels.push_back(full.labels[i]);
    }
    assign_splits(*ds, keep, full.val.size());
  } else {
    throw ConfigError("field 'dataset.kind': unknown dataset kind '" + spec.kind + "'");
  }
  ds->validate();
  return ds;
}

TrainState TrainState::create(const TrainConfig& cfg, std::shared_ptr<const Dataset> ds) {
  require(ds != nullptr, "TrainState::create: no dataset");
  TrainState st;
  st.config = cfg;
  st.dataset = std::move(ds);
  st.model = Model::init(cfg, *st.dataset);
  st.schedule.lr = cfg.effective_lr();
  st.schedule.patience = cfg.lr_patience;
  st.schedule.factor = cfg.lr_factor;
  if (st.model.codebook.entries.defined()) st.usage = UsageStats::zeros(cfg.K, cfg.d_b);
  return st;
}

void fill_spread(const Model& m, const TrainConfig& cfg, const Tensor& head, MetricRow& row) {
  if (m.log_sigma2.defined()) row.sigma2 = std::exp(m.log_sigma2.item());
  if (m.log_sigma2_phi.defined()) row.sigma2_phi = std::exp(m.log_sigma2_phi.item());
  if (m.kind == ModelKind::FixedSigmaQ) row.sigma2_phi = cfg.sigma_q2;
  if (head.defined() && m.kind != ModelKind::Vae) row.sigma2_phi = mean_exp(head);
  if (m.log_kappa.defined()) row.kappa = std::exp(m.log_kappa.item());
  if (m.log_kappa_phi.defined()) row.kappa_phi = std::exp(m.log_kappa_phi.item());
}

namespace {

void check_finite_terms(const ElboBreakdown& b, std::uint64_t step) {
  const std::pair<const char*, double> terms[] = {{"reconstruction", b.reconstruction},
                                                  {"regularization", b.regularization},
                                                  {"neg_entropy", b.neg_entropy},
                                                  {"decoder_variance_term", b.decoder_variance_term}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      throw NumericError("step " + std::to_string(step) + ": non-finite loss term '" + name + "'");
    }
  }
}

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s / static_cast<double>(t.numel());
}

}  // namespace

MetricRow train_step(TrainState& st, const std::vector<std::size_t>& indices) {
  const TrainConfig& cfg = st.config;
  const NamedParams params = st.model.parameters();
  for (const auto& [name, p] : params) {
    Tensor t = p;
    t.zero_grad();
  }
  const Batch batch = make_batch(st.model, *st.dataset, indices);
  ForwardResult fr;
  try {
    fr = forward(st.model, cfg, batch, Phase::Train, st.step);
    check_finite_terms(fr.loss, st.step);
    backward(fr.loss.objective);
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    if (msg.rfind("step ", 0) == 0) throw;
    throw NumericError("step " + std::to_string(st.step) + ": " + msg);
  }
  if (cfg.grad_clip > 0.0) clip_grad_norm(params, cfg.grad_clip);
  adam_update(params, st.adam, st.schedule.lr);
  if (st.model.codebook.unit_norm) st.model.codebook.renormalize();
  if (is_ema_kind(st.model.kind)) {
    ema_update(st.model.codebook, st.usage, fr.latents, fr.codes, cfg.gamma, cfg.ema_eps);
  }
  if (st.model.kind == ModelKind::VqEmaReset) {
    st.usage.record(fr.codes);
    if (st.usage.window_batches >= cfg.reset_interval) {
      Rng rng(cfg.seed, Stream::ResetNoise, st.step);
      codebook_reset(st.model.codebook, st.usage, rng, cfg.reset_threshold, cfg.reset_noise);
      st.usage.clear_window();
    }
  }
  ++st.step;

  MetricRow row;
  row.run_id = cfg.run_id;
  row.epoch = st.epoch + 1;
  row.step = st.step;
  row.lr = st.schedule.lr;
  row.loss_total = fr.loss.total();
  row.reconstruction = fr.loss.reconstruction;
  row.regularization = fr.loss.regularization;
  row.neg_entropy = fr.loss.neg_entropy;
  row.decoder_variance_term = fr.loss.decoder_variance_term;
  row.constant = fr.loss.constant;
  fill_spread(st.model, cfg, fr.spread, row);
  if (!fr.codes.empty()) row.perplexity = perplexity(usage_histogram(fr.codes, cfg.K));
  if (fr.entropy.defined()) row.mean_entropy = mean_of(fr.entropy);
  return row;
}

EvalResult evaluate(const TrainState& st, Split split) {
  const TrainConfig& cfg = st.config;
  const Dataset& ds = *st.dataset;
  const auto& idx = ds.indices(split);
  require(!idx.empty(), "evaluate: split '" + split_name(split) + "' is empty");
  EvalResult out;
  double loss_sum = 0.0, sq_sum = 0.0, entropy_sum = 0.0, head_sum = 0.0;
  std::size_t entropy_rows = 0, head_count = 0;
  std::vector<std::size_t> all_codes, labels, preds;
  for (std::size_t start = 0; start < idx.size(); start += cfg.eval_batch) {
    const std::size_t end = std::min(idx.size(), start + cfg.eval_batch);
    const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                         idx.begin() + static_cast<std::ptrdiff_t>(end));
    const Batch batch = make_batch(st.model, ds, chunk);
    const ForwardResult fr = forward(st.model, cfg, batch, Phase::Eval, st.step);
    const double n = static_cast<double>(chunk.size());
    loss_sum += fr.loss.total() * n;
    all_codes.insert(all_codes.end(), fr.codes.begin(), fr.codes.end());
    if (fr.entropy.defined()) {
      for (double v : fr.entropy.data()) entropy_sum += v;
      entropy_rows += fr.entropy.numel();
    }
    if (fr.spread.defined() && st.model.kind != ModelKind::Vae) {
      for (double v : fr.spread.data()) head_sum += std::exp(v);
      head_count += fr.spread.numel();
    }
    if (ds.kind == DataKind::Continuous) {
      const auto x = batch.target.data();
      const auto f = fr.reconstruction.data();
      for (std::size_t i = 0; i < x.size(); ++i) sq_sum += (x[i] - f[i]) * (x[i] - f[i]);
    } else {
      labels.insert(labels.end(), batch.classes.begin(), batch.classes.end());
      const auto p = st.model.kind == ModelKind::Vmf ? st.model.projection->classify(fr.reconstruction)
                                                     : row_argmax(fr.reconstruction);
      preds.insert(preds.end(), p.begin(), p.end());
    }
  }
  const double count = static_cast<double>(idx.size());
  out.loss = loss_sum / count;
  if (ds.kind == DataKind::Continuous) {
    out.mse = sq_sum / (count * static_cast<double>(ds.D));
  } else {
    out.pixel_error = pixel_error(labels, preds);
    out.miou = miou(labels, preds, ds.classes);
  }
  if (!all_codes.empty()) {
    out.usage = usage_histogram(all_codes, cfg.K);
    out.perplexity = perplexity(out.usage);
  }
  if (entropy_rows > 0) out.mean_entropy = entropy_sum / static_cast<double>(entropy_rows);
  MetricRow spread;
  fill_spread(st.model, cfg, Tensor(), spread);
  if (head_count > 0) spread.sigma2_phi = head_sum / static_cast<double>(head_count);
  out.sigma2 = spread.sigma2;
  out.sigma2_phi = spread.sigma2_phi;
  out.kappa = spread.kappa;
  out.kappa_phi = spread.kappa_phi;
  return out;
}

EpochResult train_epoch(TrainState& st) {
  const TrainConfig& cfg = st.config;
  EpochResult res;
  const auto plan = batches(*st.dataset, Split::Train, cfg.batch_size, cfg.seed, st.epoch);
  const double lr_used = st.schedule.lr;
  double w_total = 0.0;
  MetricRow acc;
  double entropy_acc = 0.0;
  bool has_entropy = false;
  for (const auto& b : plan) {
    MetricRow r = train_step(st, b);
    const double w = static_cast<double>(b.size());
    w_total += w;
    acc.loss_total += w * r.loss_total;
    acc.reconstruction += w * r.reconstruction;
    acc.regularization += w * r.regularization;
    acc.neg_entropy += w * r.neg_entropy;
    acc.decoder_variance_term += w * r.decoder_variance_term;
    acc.constant += w * r.constant;
    if (r.mean_entropy) {
      entropy_acc += w * *r.mean_entropy;
      has_entropy = true;
    }
    if (cfg.log_steps) res.steps.push_back(std::move(r));
  }
  ++st.epoch;

  if (!st.dataset->val.empty()) res.lr_reduced = st.schedule.observe(evaluate(st, Split::Val).loss);
  const Split report = !st.dataset->test.empty() ? Split::Test : !st.dataset->val.empty() ? Split::Val : Split::Train;
  const EvalResult ev = evaluate(st, report);

  MetricRow& row = res.row;
  row.run_id = cfg.run_id;
  row.epoch = st.epoch;
  row.step = st.step;
  row.lr = lr_used;
  row.loss_total = acc.loss_total / w_total;
  row.reconstruction = acc.reconstruction / w_total;
  row.regularization = acc.regularization / w_total;
  row.neg_entropy = acc.neg_entropy / w_total;
  row.decoder_variance_term = acc.decoder_variance_term / w_total;
  row.constant = acc.constant / w_total;
  row.sigma2 = ev.sigma2;
  row.sigma2_phi = ev.sigma2_phi;
  row.kappa = ev.kappa;
  row.kappa_phi = ev.kappa_phi;
  row.perplexity = ev.perplexity;
  if (has_entropy) row.mean_entropy = entropy_acc / w_total;
  row.test_mse = ev.mse;
  row.pixel_error = ev.pixel_error;
  row.miou = ev.miou;
  return res;
}

}  // namespace sqvae
