#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sqvae/rng.hpp"
#include "sqvae/tensor.hpp"
#include "sqvae/variance.hpp"

namespace sqvae {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

enum class Activation { Identity, Relu, Sigmoid };

/// y = x W + b with W (in, out), b (1, out).
struct Linear {
  Tensor weight;
  Tensor bias;

  /// Weights Normal(0, gain / fan_in), bias zero.
  static Linear init(std::size_t in, std::size_t out, double gain, Rng& rng);
  Tensor forward(const Tensor& x) const;
  std::size_t in_dim() const { return weight.size(0); }
  std::size_t out_dim() const { return weight.size(1); }
};

/// Relu hidden layers followed by a configurable output activation.
struct MlpNetwork {
  std::vector<Linear> layers;
  Activation output = Activation::Identity;

  static MlpNetwork init(std::span<const std::size_t> dims, Activation output, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

/// Where the per-input spread head is attached, if any.
enum class HeadShape {
  None,
  PerSample,    // (N, 1)       type II
  PerPosition,  // (N, d_z)     type III
  PerEntry,     // (N, d_z*d_b) type IV, and the VAE log-variance
};

HeadShape head_shape_for(VarianceKind kind);

struct EncoderOutput {
  Tensor latents;   // (N * d_z, d_b)
  Tensor head;      // log-variance from the head, undefined when HeadShape::None
  Tensor features;  // (N, d_z * d_b) before reshaping
};

/// x (N, D) -> trunk D -> 256 -> 128 -> latent head 128 -> d_z * d_b,
/// plus an optional spread head sharing the trunk.
struct Encoder {
  MlpNetwork trunk;
  Linear latent_head;
  Linear spread_head;  // unset when head == None
  HeadShape head = HeadShape::None;
  std::size_t d_z = 0;
  std::size_t d_b = 0;
  bool unit_rows = false;  // vMF: L2-normalize each latent row

  static Encoder init(std::size_t D, std::size_t d_z, std::size_t d_b, HeadShape head, bool unit_rows,
                      std::span<const std::size_t> hidden, Rng& rng);
  EncoderOutput forward(const Tensor& x) const;
  void collect(NamedParams& out) const;
};

enum class DecoderOutput {
  Mean,        // sigmoid pixel means, (N, D)
  Directions,  // unit rows on S^{F-1}, (N * D, F)
  Logits,      // class logits, (N * D, C)
};

/// Codes (N * d_z, d_b) -> d_z * d_b -> 128 -> 256 -> D * width.
struct Decoder {
  MlpNetwork net;
  DecoderOutput kind = DecoderOutput::Mean;
  std::size_t D = 0;
  std::size_t width = 1;  // 1, F or C
  std::size_t in_rows = 0;  // d_z (1 for the VAE)
  std::size_t in_width = 0;

  static Decoder init(std::size_t in_rows, std::size_t in_width, std::size_t D, std::size_t width,
                      DecoderOutput kind, std::span<const std::size_t> hidden, Rng& rng);
  Tensor forward(const Tensor& codes) const;
  void collect(NamedParams& out) const;
};

enum class ProjectionMode { OneHot, Circle };

/// Unit vectors w_c placing L categories on S^{F-1}.
/// OneHot: F = L, w_c = e_c. Circle: F = 2, w_c = [cos a_c, sin a_c], a_c = pi c / L.
struct CategoryProjection {
  ProjectionMode mode = ProjectionMode::OneHot;
  std::size_t L = 0;
  Tensor w;  // (L, F)

  static CategoryProjection make(ProjectionMode mode, std::size_t L);
  std::size_t dim() const { return w.size(1); }
  /// Row d of the result is w_{classes[d]}.
  Tensor project(std::span<const std::size_t> classes) const;
  /// argmax_c w_c . v per row (lowest index on ties).
  std::vector<std::size_t> classify(const Tensor& directions) const;
  /// row-softmax(kappa * directions * w^T).
  Tensor class_probs(const Tensor& directions, const Tensor& kappa) const;
};

ProjectionMode parse_projection_mode(const std::string& name);
std::string projection_mode_name(ProjectionMode mode);

}  // namespace sqvae
