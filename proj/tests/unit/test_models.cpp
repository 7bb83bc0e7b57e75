#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../support/oracle.hpp"
#include "sqvae/error.hpp"
#include "sqvae/models.hpp"

using namespace sqvae;

namespace {

constexpr std::size_t kHidden[] = {12, 8};

Tensor randn(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.normal();
  return Tensor::from_data(std::move(shape), std::move(v));
}

void zero_weights(Encoder& enc) {
  for (Linear& l : enc.trunk.layers) std::fill(l.weight.mutable_data().begin(), l.weight.mutable_data().end(), 0.0);
  std::fill(enc.latent_head.weight.mutable_data().begin(), enc.latent_head.weight.mutable_data().end(), 0.0);
}

}  // namespace

TEST_CASE("zero-weight encoder emits the broadcast bias") {
  Rng rng(1, Stream::Init);
  Encoder enc = Encoder::init(6, 2, 3, HeadShape::None, false, kHidden, rng);
  zero_weights(enc);
  auto bias = enc.latent_head.bias.mutable_data();
  for (std::size_t j = 0; j < bias.size(); ++j) bias[j] = 0.1 * static_cast<double>(j);
  const EncoderOutput out = enc.forward(randn({3, 6}, rng));
  REQUIRE(out.latents.shape() == Shape{6, 3});
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(out.latents.at(n * 2 + i, j) == 0.1 * static_cast<double>(i * 3 + j));
}

TEST_CASE("encoder output matches a plain-loop forward pass") {
  Rng rng(2, Stream::Init);
  const Encoder enc = Encoder::init(5, 2, 2, HeadShape::None, false, kHidden, rng);
  const Tensor x = randn({4, 5}, rng);
  oracle::Vec h(x.data().begin(), x.data().end());
  std::size_t width = 5;
  for (const Linear& l : enc.trunk.layers) {
    h = oracle::dense(h, 4, {l.weight.data().begin(), l.weight.data().end()}, {l.bias.data().begin(), l.bias.data().end()},
                      width, l.out_dim(), 1);
    width = l.out_dim();
  }
  const Linear& head = enc.latent_head;
  const oracle::Vec z = oracle::dense(h, 4, {head.weight.data().begin(), head.weight.data().end()},
                                      {head.bias.data().begin(), head.bias.data().end()}, width, 4, 0);
  const EncoderOutput out = enc.forward(x);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(out.latents.at(i) == doctest::Approx(z[i]).epsilon(1e-13));
}

TEST_CASE("vmf encoder rows are unit norm") {
  Rng rng(3, Stream::Init);
  const Encoder enc = Encoder::init(6, 3, 4, HeadShape::None, true, kHidden, rng);
  const EncoderOutput out = enc.forward(randn({5, 6}, rng));
  for (std::size_t r = 0; r < out.latents.size(0); ++r) {
    double n = 0.0;
    for (std::size_t j = 0; j < 4; ++j) n += out.latents.at(r, j) * out.latents.at(r, j);
    CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-10);
  }
}

TEST_CASE("variance heads emit the table shapes") {
  Rng rng(4, Stream::Init);
  const Tensor x = randn({2, 6}, rng);
  CHECK(Encoder::init(6, 3, 4, HeadShape::PerSample, false, kHidden, rng).forward(x).head.shape() == Shape{2, 1});
  CHECK(Encoder::init(6, 3, 4, HeadShape::PerPosition, false, kHidden, rng).forward(x).head.shape() == Shape{2, 3});
  CHECK(Encoder::init(6, 3, 4, HeadShape::PerEntry, false, kHidden, rng).forward(x).head.shape() == Shape{2, 12});
  CHECK(head_shape_for(VarianceKind::TypeI) == HeadShape::None);
  CHECK(head_shape_for(VarianceKind::TypeII) == HeadShape::PerSample);
  CHECK(head_shape_for(VarianceKind::TypeIII) == HeadShape::PerPosition);
  CHECK(head_shape_for(VarianceKind::TypeIV) == HeadShape::PerEntry);
}

TEST_CASE("heads start at log-variance zero") {
  Rng rng(5, Stream::Init);
  const Encoder enc = Encoder::init(6, 3, 4, HeadShape::PerPosition, false, kHidden, rng);
  for (double b : enc.spread_head.bias.data()) CHECK(b == 0.0);
}

TEST_CASE("encoder rejects the wrong input width") {
  Rng rng(6, Stream::Init);
  const Encoder enc = Encoder::init(6, 2, 2, HeadShape::None, false, kHidden, rng);
  CHECK_THROWS_AS(enc.forward(randn({2, 5}, rng)), ContractError);
}

TEST_CASE("gaussian decoder") {
  Rng rng(7, Stream::Init);
  const Decoder dec = Decoder::init(2, 3, 10, 1, DecoderOutput::Mean, kHidden, rng);
  SUBCASE("sigmoid range and determinism") {
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor codes = randn({4, 3}, rng);
      const Tensor f = dec.forward(codes);
      REQUIRE(f.shape() == Shape{2, 10});
      for (double v : f.data()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
      }
      // Far out the sigmoid rounds to 0 or 1 in double precision.
      Tensor big = randn({4, 3}, rng);
      for (double& v : big.mutable_data()) v *= 1e3;
      const Tensor fb = dec.forward(big);
      for (double v : fb.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      const Tensor g = dec.forward(codes);
      CHECK(std::vector<double>(f.data().begin(), f.data().end()) == std::vector<double>(g.data().begin(), g.data().end()));
    }
  }
  SUBCASE("gradient reaches every code entry") {
    const Tensor codes = randn({4, 3}, rng);
    Tensor leaf = Tensor::from_data({4, 3}, {codes.data().begin(), codes.data().end()}, true);
    backward(sum(dec.forward(leaf)));
    for (double g : leaf.grad()) CHECK(g != 0.0);
    CHECK(finite_difference_check([&](const Tensor& c) { return sum(square(dec.forward(c))); }, codes) <= 1e-4);
  }
  SUBCASE("code rows must match") { CHECK_THROWS_AS(dec.forward(randn({3, 3}, rng)), ContractError); }
}

TEST_CASE("encoder and decoder weights pass finite differences") {
  Rng rng(8, Stream::Init);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Encoder enc = Encoder::init(4, 2, 2, HeadShape::PerSample, false, kHidden, rng);
    const Tensor x = randn({3, 4}, rng);
    const Tensor W0 = enc.trunk.layers[0].weight.detach();
    worst = std::max(worst, finite_difference_check(
                                [&](const Tensor& W) {
                                  Encoder e = enc;
                                  e.trunk.layers[0].weight = W;
                                  const EncoderOutput o = e.forward(x);
                                  return add(sum(square(o.latents)), sum(o.head));
                                },
                                W0));
    const Decoder dec = Decoder::init(2, 2, 5, 3, DecoderOutput::Directions, kHidden, rng);
    const Tensor V = randn({15, 3}, rng);
    worst = std::max(worst, finite_difference_check(
                                [&](const Tensor& c) { return sum(mul(dec.forward(c), V)); }, randn({6, 2}, rng)));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("vmf decoder rows are unit and class probabilities follow the softmax") {
  Rng rng(9, Stream::Init);
  const Decoder dec = Decoder::init(2, 3, 6, 4, DecoderOutput::Directions, kHidden, rng);
  const Tensor f = dec.forward(randn({4, 3}, rng));
  REQUIRE(f.shape() == Shape{12, 4});
  for (std::size_t r = 0; r < 12; ++r) {
    double n = 0.0;
    for (std::size_t j = 0; j < 4; ++j) n += f.at(r, j) * f.at(r, j);
    CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-10);
  }
  const CategoryProjection proj = CategoryProjection::make(ProjectionMode::OneHot, 2);
  const Tensor p = proj.class_probs(Tensor::from_data({1, 2}, {1, 0}), Tensor::scalar(2.0));
  const double e2 = std::exp(2.0);
  CHECK(p.at(0) == doctest::Approx(e2 / (e2 + 1.0)).epsilon(1e-14));
  CHECK(p.at(1) == doctest::Approx(1.0 / (e2 + 1.0)).epsilon(1e-14));
  CHECK(p.at(0) == doctest::Approx(0.8808).epsilon(1e-4));

  const CategoryProjection p4 = CategoryProjection::make(ProjectionMode::OneHot, 4);
  const Tensor w2 = p4.project(std::vector<std::size_t>{2});
  const Tensor sharp = p4.class_probs(w2, Tensor::scalar(200.0));
  CHECK(sharp.at(2) == doctest::Approx(1.0).epsilon(1e-12));
  const Tensor flat = p4.class_probs(w2, Tensor::scalar(0.0));
  for (std::size_t c = 0; c < 4; ++c) CHECK(flat.at(c) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("category projection examples") {
  const CategoryProjection oh = CategoryProjection::make(ProjectionMode::OneHot, 4);
  const Tensor v = oh.project(std::vector<std::size_t>{2});
  CHECK(v.shape() == Shape{1, 4});
  CHECK(v.at(0) == 0.0);
  CHECK(v.at(1) == 0.0);
  CHECK(v.at(2) == 1.0);
  CHECK(v.at(3) == 0.0);
  const CategoryProjection circ = CategoryProjection::make(ProjectionMode::Circle, 4);
  const Tensor c = circ.project(std::vector<std::size_t>{2});
  CHECK(std::abs(c.at(0)) <= 1e-15);
  CHECK(c.at(1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(oh.project(std::vector<std::size_t>{4}), ContractError);
}

TEST_CASE("projection then classification is the identity for every L up to 256") {
  for (std::size_t L = 2; L <= 256; ++L) {
    for (ProjectionMode mode : {ProjectionMode::OneHot, ProjectionMode::Circle}) {
      const CategoryProjection p = CategoryProjection::make(mode, L);
      std::vector<std::size_t> all(L);
      for (std::size_t c = 0; c < L; ++c) all[c] = c;
      const Tensor V = p.project(all);
      CHECK(p.classify(V) == all);
      for (std::size_t c = 0; c < L; ++c) {
        double n = 0.0;
        for (std::size_t j = 0; j < p.dim(); ++j) n += V.at(c, j) * V.at(c, j);
        CHECK(std::abs(n - 1.0) <= 1e-12);
      }
    }
  }
}
