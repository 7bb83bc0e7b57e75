#include <doctest.h>

#include <cmath>

#include "../support/oracle.hpp"
#include "sqvae/error.hpp"
#include "sqvae/quantizer.hpp"

using namespace sqvae;

namespace {

Codebook three_codes() { return Codebook::from_rows(3, 2, {1, 0, -1, 0, 0, 2}); }

Tensor randn(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.normal();
  return Tensor::from_data(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("quantize_probs example") {
  const Tensor p = quantize_probs(Tensor::from_data({1, 2}, {0, 0}), three_codes(), VarianceParam::type_i_value(0.5));
  const double e1 = std::exp(-1.0), e4 = std::exp(-4.0), z = 2 * e1 + e4;
  CHECK(p.at(0) == doctest::Approx(e1 / z).epsilon(1e-14));
  CHECK(p.at(2) == doctest::Approx(e4 / z).epsilon(1e-14));
  CHECK(p.at(0) == doctest::Approx(0.48785).epsilon(1e-4));
  CHECK(p.at(2) == doctest::Approx(0.02430).epsilon(1e-3));
}

TEST_CASE("small variance sharpens to the nearest code") {
  const Tensor p = quantize_probs(Tensor::from_data({1, 2}, {0.9, 0.1}), three_codes(), VarianceParam::type_i_value(1e-4));
  CHECK(p.at(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vmf with zero concentration is uniform") {
  const Codebook cb = Codebook::from_rows(4, 2, {1, 0, 0, 1, -1, 0, 0, -1}, true);
  const Tensor p = quantize_probs(Tensor::from_data({1, 2}, {0.6, 0.8}), cb,
                                  VarianceParam::vmf(Tensor::scalar(-800.0)));
  for (std::size_t k = 0; k < 4; ++k) CHECK(p.at(k) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("probs rows are distributions, entropy in [0, ln K], argmax indices") {
  Rng rng(1, Stream::Test);
  const Codebook cb = Codebook::random(6, 3, false, rng);
  const Tensor Z = randn({10, 3}, rng);
  Rng g(1, Stream::Gumbel);
  const QuantizationOutput q =
      stochastic_quantize(Z, cb, VarianceParam::type_i_value(0.2), QuantizeMode::Relaxed, 0.7, &g);
  for (std::size_t r = 0; r < 10; ++r) {
    double s = 0.0;
    std::size_t best = 0;
    for (std::size_t k = 0; k < 6; ++k) {
      CHECK(q.probs.at(r, k) >= 0.0);
      s += q.probs.at(r, k);
      if (q.probs.at(r, k) > q.probs.at(r, best)) best = k;
    }
    CHECK(std::abs(s - 1.0) <= 1e-10);
    CHECK(q.hard_indices[r] == best);
    CHECK(q.entropy_per_position.at(r) >= 0.0);
    CHECK(q.entropy_per_position.at(r) <= std::log(6.0) + 1e-12);
  }
}

TEST_CASE("softmax shift invariance of the quantizer") {
  const Tensor s = Tensor::from_data({1, 3}, {0.2, -1.0, 3.0});
  const Tensor a = softmax_rows(s);
  const Tensor b = softmax_rows(add_scalar(s, 17.5));
  for (std::size_t k = 0; k < 3; ++k) CHECK(a.at(k) == doctest::Approx(b.at(k)).epsilon(1e-14));
}

TEST_CASE("gumbel softmax rows sum to one and are deterministic per seed") {
  const Tensor p = Tensor::from_data({2, 3}, {0.2, 0.3, 0.5, 0.0, 0.5, 0.5});
  for (double tau : {0.05, 0.5, 1.0, 5.0}) {
    Rng a(9, Stream::Gumbel, 3), b(9, Stream::Gumbel, 3);
    const Tensor y1 = gumbel_softmax_sample(p, tau, a);
    const Tensor y2 = gumbel_softmax_sample(p, tau, b);
    for (std::size_t r = 0; r < 2; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += y1.at(r, k);
      CHECK(std::abs(s - 1.0) <= 1e-10);
    }
    for (std::size_t i = 0; i < 6; ++i) CHECK(y1.at(i) == y2.at(i));
  }
}

TEST_CASE("zero-temperature limit is the argmax of ln p + g") {
  const Tensor p = Tensor::from_data({1, 4}, {0.1, 0.2, 0.3, 0.4});
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng a(s, Stream::Gumbel), b(s, Stream::Gumbel);
    const Tensor y = gumbel_softmax_sample(p, 1e-5, a);
    const Tensor hard = gumbel_softmax_sample(p, 1.0, b, true);
    for (std::size_t k = 0; k < 4; ++k) CHECK(y.at(k) == doctest::Approx(hard.at(k)).epsilon(1e-6));
  }
}

TEST_CASE("hard gumbel draws follow the categorical distribution") {
  const std::vector<double> probs{0.1, 0.25, 0.05, 0.6};
  const Tensor p = Tensor::from_data({1, 4}, probs);
  const std::size_t n = 100000;
  std::vector<double> counts(4, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng(11, Stream::Gumbel, s);
    const Tensor y = gumbel_softmax_sample(p, 1.0, rng, true);
    for (std::size_t k = 0; k < 4; ++k) counts[k] += y.at(k);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double se = std::sqrt(probs[k] * (1 - probs[k]) / n);
    CHECK(std::abs(counts[k] / n - probs[k]) <= 3.0 * se);
  }
}

TEST_CASE("a zero probability is floored, never chosen") {
  const Tensor p = Tensor::from_data({1, 2}, {0.0, 1.0});
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(s, Stream::Gumbel);
    const Tensor y = gumbel_softmax_sample(p, 1.0, rng, true);
    CHECK(y.at(1) == 1.0);
  }
}

TEST_CASE("temperature schedule") {
  const TemperatureSchedule sched;
  CHECK(temperature(0, sched) == 1.0);
  CHECK(temperature(100000, sched) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(temperature(100000, sched) == doctest::Approx(0.36788).epsilon(1e-5));
  CHECK(temperature(100000000, sched) == 0.1);
  double prev = 1.0;
  for (std::uint64_t t = 0; t < 1000000; t += 997) {
    const double tau = temperature(t, sched);
    CHECK(tau <= prev);
    CHECK(tau > 0.0);
    CHECK(tau <= 1.0);
    prev = tau;
  }
  TemperatureSchedule literal;
  literal.literal_sign = true;
  CHECK(temperature(100000, literal) == 1.0);
}

TEST_CASE("deterministic quantization") {
  const Codebook cb = three_codes();
  SUBCASE("latent equal to a code selects it") {
    const QuantizationOutput q = deterministic_quantize(Tensor::from_data({1, 2}, {0, 2}), cb);
    CHECK(q.hard_indices[0] == 2);
    CHECK(q.soft_code.at(0) == 0.0);
    CHECK(q.soft_code.at(1) == 2.0);
  }
  SUBCASE("ties go to the lowest index") {
    const QuantizationOutput q = deterministic_quantize(Tensor::from_data({1, 2}, {0, 0}), cb);
    CHECK(q.hard_indices[0] == 0);
  }
  SUBCASE("straight-through gradient") {
    Tensor Z = Tensor::from_data({2, 2}, {0.9, 0.1, -0.2, 1.7}, true);
    const QuantizationOutput q = deterministic_quantize(Z, cb);
    const Tensor w = Tensor::from_data({2, 2}, {1.5, -2.0, 0.25, 3.0});
    backward(sum(mul(q.soft_code, w)));
    for (std::size_t i = 0; i < 4; ++i) CHECK(Z.grad()[i] == w.at(i));
  }
}

TEST_CASE("type I argmax of probs equals the deterministic selection") {
  Rng rng(2, Stream::Test);
  const Codebook cb = Codebook::random(8, 3, false, rng);
  const Tensor Z = randn({40, 3}, rng);
  const QuantizationOutput det = deterministic_quantize(Z, cb);
  const QuantizationOutput sto =
      stochastic_quantize(Z, cb, VarianceParam::type_i_value(0.4), QuantizeMode::Argmax, 1.0, nullptr);
  CHECK(det.hard_indices == sto.hard_indices);
}

TEST_CASE("analytic entropy examples") {
  const EntropyResult u = analytic_entropy(Tensor::full({2, 4}, 0.25));
  CHECK(u.per_position.at(0) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(analytic_entropy(Tensor::from_data({1, 3}, {0, 1, 0})).total.item() == 0.0);
  CHECK(analytic_entropy(Tensor::from_data({1, 4}, {0.5, 0.5, 0, 0})).total.item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("regularizer examples") {
  const Tensor Z = Tensor::from_data({2, 2}, {0.3, 0.1, -0.4, 0.9});
  CHECK(regularizer(Z, Z, VarianceParam::type_i_value(0.7)).item() == 0.0);
  const Tensor Zq = Tensor::from_data({2, 2}, {1.3, 0.1, -0.4, -0.1});  // |Z - Zq|^2 = 2
  CHECK(regularizer(Z, Zq, VarianceParam::type_i_value(0.5)).item() == doctest::Approx(2.0).epsilon(1e-15));
  const Tensor U = Tensor::from_data({1, 2}, {0.6, 0.8});
  CHECK(regularizer(U, U, VarianceParam::vmf(Tensor::scalar(std::log(3.0)))).item() == doctest::Approx(0.0));
  CHECK(regularizer(U, Tensor::from_data({1, 2}, {0.8, -0.6}), VarianceParam::vmf(Tensor::scalar(std::log(3.0)))).item() ==
        doctest::Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS(regularizer(Z, U, VarianceParam::type_i_value(0.5)), ContractError);
}

TEST_CASE("entropy and regularizer gradients match finite differences") {
  Rng rng(3, Stream::Test);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Codebook cb = Codebook::random(4, 3, false, rng);
    const Tensor Z0 = randn({3, 3}, rng);
    const Tensor Zq = randn({3, 3}, rng);
    const Tensor lv = Tensor::scalar(0.3 * rng.normal());
    worst = std::max(worst, finite_difference_check(
                                [&](const Tensor& Z) {
                                  return analytic_entropy(quantize_probs(Z, cb, VarianceParam::type_i(lv))).total;
                                },
                                Z0));
    worst = std::max(worst, finite_difference_check(
                                [&](const Tensor& Z) { return regularizer(Z, Zq, VarianceParam::type_i(lv)); }, Z0));
    worst = std::max(worst, finite_difference_check(
                                [&](const Tensor& l) { return regularizer(Z0, Zq, VarianceParam::type_i(l)); }, lv));
    worst = std::max(worst, finite_difference_check(
                                [&](const Tensor& B) {
                                  const Codebook c{B, false};
                                  return analytic_entropy(quantize_probs(Z0, c, VarianceParam::type_i(lv))).total;
                                },
                                cb.entries));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("expected regularizer matches enumeration") {
  Rng rng(4, Stream::Test);
  const Codebook cb = Codebook::random(3, 2, false, rng);
  const Tensor Z = randn({2, 2}, rng);
  const double var = 0.6;
  const VarianceParam v = VarianceParam::type_i_value(var);
  const Tensor probs = quantize_probs(Z, cb, v);
  const double got = expected_regularizer(Z, cb, probs, v).item();
  const std::vector<double> zv(Z.data().begin(), Z.data().end()), bv(cb.entries.data().begin(), cb.entries.data().end());
  const auto e = oracle::enumerate_gaussian(zv, bv, 2, 3, 2, var);
  CHECK(got == doctest::Approx(e.regularizer).epsilon(1e-12));
}

TEST_CASE("one hot") {
  const Tensor h = one_hot(std::vector<std::size_t>{2, 0}, 3);
  CHECK(h.at(0, 2) == 1.0);
  CHECK(h.at(1, 0) == 1.0);
  CHECK(h.at(0, 0) == 0.0);
  CHECK_THROWS_AS(one_hot(std::vector<std::size_t>{3}, 3), ContractError);
}
