#include "sqvae/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "sqvae/error.hpp"

namespace sqvae {

double mse(std::span<const double> x, std::span<const double> xhat) {
  require(x.size() == xhat.size(), "mse: size mismatch " + std::to_string(x.size()) + " vs " + std::to_string(xhat.size()));
  require(!x.empty(), "mse of empty arrays");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - xhat[i]) * (x[i] - xhat[i]);
  return s / static_cast<double>(x.size());
}

double pixel_error(std::span<const std::size_t> labels, std::span<const std::size_t> predictions) {
  require(labels.size() == predictions.size(), "pixel_error: size mismatch");
  require(!labels.empty(), "pixel_error of empty maps");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += labels[i] != predictions[i];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double miou(std::span<const std::size_t> labels, std::span<const std::size_t> predictions, std::size_t L) {
  require(labels.size() == predictions.size(), "miou: size mismatch");
  std::vector<std::size_t> inter(L, 0), uni(L, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t a = labels[i], b = predictions[i];
    require(a < L && b < L, "miou: class out of range");
    if (a == b) {
      ++inter[a];
      ++uni[a];
    } else {
      ++uni[a];
      ++uni[b];
    }
  }
  double s = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < L; ++c) {
    if (uni[c] == 0) continue;
    s += static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    ++present;
  }
  require(present > 0, "miou of empty maps");
  return s / static_cast<double>(present);
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{
      "run_id",     "epoch",          "step",         "lr",         "loss_total",   "reconstruction",
      "regularization", "neg_entropy", "decoder_variance_term", "constant", "sigma2", "sigma2_phi",
      "kappa",      "kappa_phi",      "perplexity",   "mean_entropy", "test_mse",   "pixel_error",
      "miou"};
  return cols;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metrics_header() {
  std::string s = std::string(kMetricsSchema) + "\n";
  const auto& cols = metric_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) s += ',';
    s += cols[i];
  }
  return s + "\n";
}

std::string format_row(const MetricRow& r) {
  std::string s = r.run_id + "," + std::to_string(r.epoch) + "," + std::to_string(r.step);
  auto put = [&s](double v) { s += "," + format_double(v); };
  auto opt = [&s](const std::optional<double>& v) { s += v ? "," + format_double(*v) : std::string(","); };
  put(r.lr);
  put(r.loss_total);
  put(r.reconstruction);
  put(r.regularization);
  put(r.neg_entropy);
  put(r.decoder_variance_term);
  put(r.constant);
  opt(r.sigma2);
  opt(r.sigma2_phi);
  opt(r.kappa);
  opt(r.kappa_phi);
  opt(r.perplexity);
  opt(r.mean_entropy);
  opt(r.test_mse);
  opt(r.pixel_error);
  opt(r.miou);
  return s + "\n";
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw FormatError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_line(line);
    if (header) {
      t.columns = std::move(cells);
      header = false;
      continue;
    }
    if (cells.size() != t.columns.size()) {
      throw FormatError("csv row has " + std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(t.columns.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (header) throw FormatError("csv has no header line");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace sqvae
