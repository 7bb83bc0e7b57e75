#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "sqvae/error.hpp"
#include "sqvae/metrics.hpp"
#include "sqvae/rng.hpp"

using namespace sqvae;

using Labels = std::vector<std::size_t>;

TEST_CASE("mse examples") {
  const std::vector<double> a{0.1, 0.7, 0.3};
  CHECK(mse(a, a) == 0.0);
  CHECK(mse(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
  CHECK(mse(std::vector<double>{0, 1}, std::vector<double>{0.5, 0.5}) == 0.25);
  CHECK_THROWS_AS(mse(std::vector<double>{0, 1}, std::vector<double>{0}), ContractError);
}

TEST_CASE("pixel error examples") {
  CHECK(pixel_error(Labels{0, 1, 2}, Labels{0, 1, 2}) == 0.0);
  CHECK(pixel_error(Labels{0, 0, 1}, Labels{1, 1, 0}) == 100.0);
  CHECK(pixel_error(Labels{0, 1, 2, 3}, Labels{0, 1, 2, 0}) == 25.0);
  CHECK_THROWS_AS(pixel_error(Labels{0, 1}, Labels{0}), ContractError);
}

TEST_CASE("miou examples") {
  CHECK(miou(Labels{0, 1, 1, 2}, Labels{0, 1, 1, 2}, 4) == 1.0);
  CHECK(miou(Labels{0, 0, 1, 1}, Labels{1, 1, 0, 0}, 2) == 0.0);
  CHECK(miou(Labels{0, 0, 1, 1}, Labels{0, 1, 1, 1}, 2) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  // A class absent from both maps does not drag the mean down.
  CHECK(miou(Labels{0, 0, 1, 1}, Labels{0, 1, 1, 1}, 5) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
}

TEST_CASE("metrics are permutation-equivariant and vanish only on identical maps") {
  Rng rng(1, Stream::Test);
  for (int trial = 0; trial < 50; ++trial) {
    Labels a(40), b(40);
    std::vector<double> x(40), y(40);
    for (std::size_t i = 0; i < 40; ++i) {
      a[i] = rng.below(4);
      b[i] = rng.uniform() < 0.8 ? a[i] : rng.below(4);
      x[i] = rng.uniform();
      y[i] = rng.uniform();
    }
    std::vector<std::size_t> perm(40);
    for (std::size_t i = 0; i < 40; ++i) perm[i] = i;
    for (std::size_t i = 39; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    Labels pa(40), pb(40);
    std::vector<double> px(40), py(40);
    for (std::size_t i = 0; i < 40; ++i) {
      pa[i] = a[perm[i]];
      pb[i] = b[perm[i]];
      px[i] = x[perm[i]];
      py[i] = y[perm[i]];
    }
    CHECK(pixel_error(pa, pb) == pixel_error(a, b));
    CHECK(miou(pa, pb, 4) == doctest::Approx(miou(a, b, 4)).epsilon(1e-15));
    CHECK(mse(px, py) == doctest::Approx(mse(x, y)).epsilon(1e-14));
    const bool same = a == b;
    CHECK((pixel_error(a, b) == 0.0) == same);
    CHECK((miou(a, b, 4) == 1.0) == same);
  }
}

TEST_CASE("metric csv rows") {
  MetricRow row;
  row.run_id = "r";
  row.epoch = 2;
  row.step = 40;
  row.lr = 0.001;
  row.loss_total = 1.5;
  row.sigma2 = 0.1;
  const std::string line = format_row(row);
  const std::string header = metrics_header();
  CHECK(std::count(line.begin(), line.end(), ',') == std::count(header.begin(), header.end(), ','));
  const CsvTable t = parse_csv(std::string(kMetricsSchema) + "\n" + header + "\n" + line + "\n");
  REQUIRE(t.rows.size() == 1);
  CHECK(t.columns == metric_columns());
  CHECK(t.rows[0][t.column("epoch")] == "2");
  CHECK(t.rows[0][t.column("sigma2")] == "0.1");
  CHECK(t.rows[0][t.column("kappa")].empty());
  CHECK_THROWS_AS(t.column("nope"), FormatError);
}

TEST_CASE("format_double round-trips") {
  Rng rng(2, Stream::Test);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.25) == "0.25");
}
