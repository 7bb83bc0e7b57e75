#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sqvae {

double mse(std::span<const double> x, std::span<const double> xhat);
/// Percentage of positions where the maps disagree.
double pixel_error(std::span<const std::size_t> labels, std::span<const std::size_t> predictions);
/// Mean IoU over classes present in either map; classes absent from both
/// are left out of the mean.
double miou(std::span<const std::size_t> labels, std::span<const std::size_t> predictions, std::size_t L);

inline constexpr const char* kMetricsSchema = "# sqvae-metrics v1";

/// One CSV row. Optional fields that do not apply to a model are left empty.
struct MetricRow {
  std::string run_id;
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double reconstruction = 0.0;
  double regularization = 0.0;
  double neg_entropy = 0.0;
  double decoder_variance_term = 0.0;
  double constant = 0.0;
  std::optional<double> sigma2;
  std::optional<double> sigma2_phi;
  std::optional<double> kappa;
  std::optional<double> kappa_phi;
  std::optional<double> perplexity;
  std::optional<double> mean_entropy;
  std::optional<double> test_mse;
  std::optional<double> pixel_error;
  std::optional<double> miou;
};

const std::vector<std::string>& metric_columns();
std::string metrics_header();
std::string format_row(const MetricRow& row);

/// Parsed CSV: column names and rows of raw cells (comment lines skipped).
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name`; throws FormatError("missing column '<name>'").
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

/// Shortest round-trip decimal form of v.
std::string format_double(double v);

}  // namespace sqvae
