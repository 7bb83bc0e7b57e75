#include "sqvae/models.hpp"

#include <cmath>
#include <numbers>

#include "sqvae/codebook.hpp"
#include "sqvae/error.hpp"

namespace sqvae {

Linear Linear::init(std::size_t in, std::size_t out, double gain, Rng& rng) {
  require(in >= 1 && out >= 1, "linear layer needs positive dimensions");
  std::vector<double> w(in * out);
  const double sd = std::sqrt(gain / static_cast<double>(in));
  for (double& v : w) v = rng.normal(0.0, sd);
  return {Tensor::from_data({in, out}, std::move(w), true), Tensor::zeros({1, out}, true)};
}

Tensor Linear::forward(const Tensor& x) const {
  require(x.rank() == 2 && x.size(1) == in_dim(),
          "linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  return add(matmul(x, weight), bias);
}

MlpNetwork MlpNetwork::init(std::span<const std::size_t> dims, Activation output, Rng& rng) {
  require(dims.size() >= 2, "mlp needs at least input and output dims");
  MlpNetwork net;
  net.output = output;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    const bool relu_layer = !last || output == Activation::Relu;
    net.layers.push_back(Linear::init(dims[i], dims[i + 1], relu_layer ? 2.0 : 1.0, rng));
  }
  return net;
}

Tensor MlpNetwork::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) {
      h = relu(h);
    } else if (output == Activation::Relu) {
      h = relu(h);
    } else if (output == Activation::Sigmoid) {
      h = sigmoid(h);
    }
  }
  return h;
}

void MlpNetwork::collect(const std::string& prefix, NamedParams& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.emplace_back(prefix + "." + std::to_string(i) + ".weight", layers[i].weight);
    out.emplace_back(prefix + "." + std::to_string(i) + ".bias", layers[i].bias);
  }
}

HeadShape head_shape_for(VarianceKind kind) {
  switch (kind) {
    case VarianceKind::TypeII: return HeadShape::PerSample;
    case VarianceKind::TypeIII: return HeadShape::PerPosition;
    case VarianceKind::TypeIV: return HeadShape::PerEntry;
    default: return HeadShape::None;
  }
}

Encoder Encoder::init(std::size_t D, std::size_t d_z, std::size_t d_b, HeadShape head, bool unit_rows,
                      std::span<const std::size_t> hidden, Rng& rng) {
  require(D >= 1 && d_z >= 1 && d_b >= 1, "encoder needs positive dimensions");
  require(!hidden.empty(), "encoder needs at least one hidden layer");
  std::vector<std::size_t> dims{D};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  Encoder e;
  e.trunk = MlpNetwork::init(dims, Activation::Relu, rng);
  e.latent_head = Linear::init(hidden.back(), d_z * d_b, 1.0, rng);
  e.head = head;
  e.d_z = d_z;
  e.d_b = d_b;
  e.unit_rows = unit_rows;
  std::size_t hw = 0;
  switch (head) {
    case HeadShape::None: break;
    case HeadShape::PerSample: hw = 1; break;
    case HeadShape::PerPosition: hw = d_z; break;
    case HeadShape::PerEntry: hw = d_z * d_b; break;
  }
  if (hw > 0) e.spread_head = Linear::init(hidden.back(), hw, 1.0, rng);
  return e;
}

EncoderOutput Encoder::forward(const Tensor& x) const {
  require(x.rank() == 2 && x.size(1) == trunk.layers.front().in_dim(),
          "encoder: input " + shape_str(x.shape()) + " expects width " + std::to_string(trunk.layers.front().in_dim()));
  const std::size_t n = x.size(0);
  const Tensor h = trunk.forward(x);
  EncoderOutput out;
  out.features = latent_head.forward(h);
  out.latents = reshape(out.features, {n * d_z, d_b});
  if (unit_rows) out.latents = l2_normalize_rows(out.latents);
  if (head != HeadShape::None) out.head = spread_head.forward(h);
  return out;
}

void Encoder::collect(NamedParams& out) const {
  trunk.collect("encoder.trunk", out);
  out.emplace_back("encoder.latent.weight", latent_head.weight);
  out.emplace_back("encoder.latent.bias", latent_head.bias);
  if (head != HeadShape::None) {
    out.emplace_back("encoder.spread.weight", spread_head.weight);
    out.emplace_back("encoder.spread.bias", spread_head.bias);
  }
}

Decoder Decoder::init(std::size_t in_rows, std::size_t in_width, std::size_t D, std::size_t width,
                      DecoderOutput kind, std::span<const std::size_t> hidden, Rng& rng) {
  require(in_rows >= 1 && in_width >= 1 && D >= 1 && width >= 1, "decoder needs positive dimensions");
  require(kind != DecoderOutput::Mean || width == 1, "mean decoder has one output per pixel");
  require(kind != DecoderOutput::Directions || width >= 2, "direction decoder needs F >= 2");
  std::vector<std::size_t> dims{in_rows * in_width};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(D * width);
  Decoder d;
  d.net = MlpNetwork::init(dims, kind == DecoderOutput::Mean ? Activation::Sigmoid : Activation::Identity, rng);
  d.kind = kind;
  d.D = D;
  d.width = width;
  d.in_rows = in_rows;
  d.in_width = in_width;
  return d;
}

Tensor Decoder::forward(const Tensor& codes) const {
  require(codes.rank() == 2 && codes.size(1) == in_width && codes.size(0) % in_rows == 0,
          "decoder: codes " + shape_str(codes.shape()) + " do not match (N * " + std::to_string(in_rows) + ", " +
              std::to_string(in_width) + ")");
  const std::size_t n = codes.size(0) / in_rows;
  const Tensor out = net.forward(reshape(codes, {n, in_rows * in_width}));
  switch (kind) {
    case DecoderOutput::Mean: return out;
    case DecoderOutput::Directions: return l2_normalize_rows(reshape(out, {n * D, width}));
    case DecoderOutput::Logits: return reshape(out, {n * D, width});
  }
  return out;
}

void Decoder::collect(NamedParams& out) const { net.collect("decoder", out); }

CategoryProjection CategoryProjection::make(ProjectionMode mode, std::size_t L) {
  require(L >= 2 && L <= 256, "category projection needs 2 <= L <= 256, got " + std::to_string(L));
  CategoryProjection p;
  p.mode = mode;
  p.L = L;
  if (mode == ProjectionMode::OneHot) {
    std::vector<double> w(L * L, 0.0);
    for (std::size_t c = 0; c < L; ++c) w[c * L + c] = 1.0;
    p.w = Tensor::from_data({L, L}, std::move(w));
  } else {
    std::vector<double> w(L * 2);
    for (std::size_t c = 0; c < L; ++c) {
      const double a = std::numbers::pi * static_cast<double>(c) / static_cast<double>(L);
      w[2 * c] = std::cos(a);
      w[2 * c + 1] = std::sin(a);
    }
    p.w = Tensor::from_data({L, 2}, std::move(w));
  }
  return p;
}

Tensor CategoryProjection::project(std::span<const std::size_t> classes) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    require(classes[i] < L, "project: class " + std::to_string(classes[i]) + " at position " + std::to_string(i) +
                                " out of range [0, " + std::to_string(L) + ")");
  }
  return gather_rows(w, classes);
}

std::vector<std::size_t> CategoryProjection::classify(const Tensor& directions) const {
  require(directions.rank() == 2 && directions.size(1) == dim(), "classify: direction width mismatch");
  return row_argmax(matmul(directions, transpose(w)));
}

Tensor CategoryProjection::class_probs(const Tensor& directions, const Tensor& kappa) const {
  require(directions.rank() == 2 && directions.size(1) == dim(), "class_probs: direction width mismatch");
  require(kappa.numel() == 1 && kappa.item() >= 0.0, "class_probs: kappa must be a scalar >= 0");
  return softmax_rows(mul(matmul(directions, transpose(w)), reshape(kappa, {1, 1})));
}

ProjectionMode parse_projection_mode(const std::string& name) {
  if (name == "one_hot") return ProjectionMode::OneHot;
  if (name == "circle") return ProjectionMode::Circle;
  throw ConfigError("unknown projection mode '" + name + "' (expected one_hot or circle)");
}

std::string projection_mode_name(ProjectionMode mode) { return mode == ProjectionMode::OneHot ? "one_hot" : "circle"; }

}  // namespace sqvae
