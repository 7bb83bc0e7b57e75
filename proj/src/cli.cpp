#include "sqvae/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "sqvae/error.hpp"

namespace sqvae {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

json parse_json_file(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
}

std::string epoch_tag(std::uint64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04llu.sqvc", static_cast<unsigned long long>(epoch));
  return buf;
}

// Lines of an existing metrics file whose epoch is at most `upto`.
std::string kept_rows(const fs::path& path, std::uint64_t upto) {
  if (upto == 0 || !fs::exists(path)) return {};
  std::istringstream in(read_text(path));
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) continue;
    if (std::stoull(line.substr(a + 1, b - a - 1)) <= upto) kept += line + "\n";
  }
  return kept;
}

}  // namespace

// --- config files --------------------------------------------------------------

RunConfigFile parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfigFile rc;
  json body = doc;
  if (body.contains("out_dir")) {
    if (!body["out_dir"].is_string()) throw ConfigError("field 'out_dir' has the wrong type: " + body["out_dir"].dump());
    rc.out_dir = body["out_dir"].get<std::string>();
    body.erase("out_dir");
  }
  rc.config = config_from_json(body);
  return rc;
}

RunConfigFile read_run_config(const fs::path& path) { return parse_run_config(parse_json_file(path)); }

json run_config_to_json(const RunConfigFile& rc) {
  json doc = config_to_json(rc.config);
  if (!rc.out_dir.empty()) doc["out_dir"] = rc.out_dir;
  return doc;
}

std::string init_config_json() { return config_to_json(TrainConfig{}).dump(2) + "\n"; }

// --- training --------------------------------------------------------------------

std::vector<MetricRow> run_training(TrainState& st, const fs::path& out, const LogFn& log) {
  ensure_dir(out);
  const TrainConfig& cfg = st.config;
  write_text(out / "config.json", config_to_json(cfg).dump(2) + "\n");
  std::string body = kept_rows(out / "metrics.csv", st.epoch);
  std::string steps_body = cfg.log_steps ? kept_rows(out / "steps.csv", st.epoch) : std::string();
  write_text(out / "metrics.csv", metrics_header() + body);
  if (cfg.log_steps) write_text(out / "steps.csv", metrics_header() + steps_body);
  if (st.epoch == 0) save_checkpoint(out / "initial.sqvc", st);

  std::vector<MetricRow> rows;
  while (st.epoch < cfg.epochs) {
    EpochResult r = train_epoch(st);
    body += format_row(r.row);
    write_text(out / "metrics.csv", metrics_header() + body);
    if (cfg.log_steps) {
      for (const auto& s : r.steps) steps_body += format_row(s);
      write_text(out / "steps.csv", metrics_header() + steps_body);
    }
    if (cfg.checkpoint_every > 0 && st.epoch % cfg.checkpoint_every == 0) save_checkpoint(out / epoch_tag(st.epoch), st);
    if (log) {
      std::ostringstream line;
      line << cfg.run_id << " epoch " << st.epoch << "/" << cfg.epochs << " loss " << format_double(r.row.loss_total);
      if (r.row.test_mse) line << " mse " << format_double(*r.row.test_mse);
      if (r.row.pixel_error) line << " pixel_error " << format_double(*r.row.pixel_error);
      if (r.row.perplexity) line << " perplexity " << format_double(*r.row.perplexity);
      if (r.lr_reduced) line << " (lr reduced)";
      log(line.str());
    }
    rows.push_back(std::move(r.row));
  }
  save_checkpoint(out / "final.sqvc", st);
  return rows;
}

void cmd_train(const TrainArgs& args, const LogFn& log) {
  if (args.config_path.empty() == args.resume_path.empty()) {
    throw ConfigError("train needs exactly one of --config or --resume");
  }
  std::string out_dir = args.out_dir;
  if (!args.config_path.empty()) {
    RunConfigFile rc = read_run_config(args.config_path);
    if (args.epochs) rc.config.epochs = *args.epochs;
    if (out_dir.empty()) out_dir = rc.out_dir;
    if (out_dir.empty()) throw ConfigError("no output directory: pass --out or set out_dir in the config");
    TrainState st = TrainState::create(rc.config, load_dataset(rc.config.dataset));
    run_training(st, out_dir, log);
    return;
  }
  if (out_dir.empty()) throw ConfigError("--resume needs --out");
  TrainState st = load_checkpoint(args.resume_path);
  if (args.epochs) {
    st.config.epochs = *args.epochs;
    st.config.validate();
  }
  run_training(st, out_dir, log);
}

// --- evaluation -------------------------------------------------------------------

json eval_json(const TrainState& st, Split split) {
  const EvalResult ev = evaluate(st, split);
  json j;
  j["model"] = model_kind_name(st.config.model);
  j["run_id"] = st.config.run_id;
  j["split"] = split_name(split);
  j["epoch"] = st.epoch;
  j["step"] = st.step;
  j["loss"] = ev.loss;
  auto opt = [&j](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  opt("mse", ev.mse);
  opt("pixel_error", ev.pixel_error);
  opt("miou", ev.miou);
  opt("perplexity", ev.perplexity);
  opt("mean_entropy", ev.mean_entropy);
  opt("sigma2", ev.sigma2);
  opt("sigma2_phi", ev.sigma2_phi);
  opt("kappa", ev.kappa);
  opt("kappa_phi", ev.kappa_phi);
  if (!ev.usage.empty()) j["usage"] = ev.usage;
  return j;
}

std::string cmd_eval(const std::string& checkpoint, const std::string& split) {
  const Split s = parse_split(split);
  const TrainState st = load_checkpoint(checkpoint);
  return eval_json(st, s).dump(2) + "\n";
}

// --- sweeps -------------------------------------------------------------------------

namespace {

void set_dotted(json& doc, const std::string& key, const json& value) {
  json* cur = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*cur)[part] = value;
      return;
    }
    if (!cur->contains(part)) (*cur)[part] = json::object();
    cur = &(*cur)[part];
    if (!cur->is_object()) throw ConfigError("sweep axis '" + key + "' descends into a non-object");
    start = dot + 1;
  }
}

std::string cell_token(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  for (char& c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '-' || c == '_';
    if (!ok) c = '_';
  }
  return s;
}

std::string csv_cell(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

const char* const kSummaryMetrics[] = {"loss_total", "test_mse",     "pixel_error", "miou",
                                       "perplexity", "mean_entropy", "sigma2",      "sigma2_phi",
                                       "kappa",      "kappa_phi"};

std::optional<double> metric_of(const MetricRow& r, const std::string& name) {
  if (name == "loss_total") return r.loss_total;
  if (name == "test_mse") return r.test_mse;
  if (name == "pixel_error") return r.pixel_error;
  if (name == "miou") return r.miou;
  if (name == "perplexity") return r.perplexity;
  if (name == "mean_entropy") return r.mean_entropy;
  if (name == "sigma2") return r.sigma2;
  if (name == "sigma2_phi") return r.sigma2_phi;
  if (name == "kappa") return r.kappa;
  if (name == "kappa_phi") return r.kappa_phi;
  return std::nullopt;
}

std::string summary_csv(const std::vector<std::string>& axes, const std::vector<SweepCell>& cells) {
  std::vector<std::string> group_axes;
  for (const auto& a : axes) {
    if (a != "seed") group_axes.push_back(a);
  }
  // Groups keep the order of their first cell.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SweepCell*>> groups;
  for (const auto& c : cells) {
    std::string key;
    for (const auto& a : group_axes) key += c.axes.at(a).dump() + "\x1f";
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&c);
  }
  std::string s;
  for (const auto& a : group_axes) s += a + ",";
  s += "n_cells,n_failed";
  for (const char* m : kSummaryMetrics) s += std::string(",") + m + "_mean," + m + "_std";
  s += ",errors\n";
  for (const auto& key : order) {
    const auto& members = groups[key];
    const SweepCell& first = *members.front();
    for (const auto& a : group_axes) s += csv_cell(cell_token(first.axes.at(a))) + ",";
    std::size_t failed = 0;
    std::string errors;
    for (const auto* c : members) {
      if (!c->ok) {
        ++failed;
        if (!errors.empty()) errors += " | ";
        errors += c->name + ": " + c->error;
      }
    }
    s += std::to_string(members.size()) + "," + std::to_string(failed);
    for (const char* m : kSummaryMetrics) {
      std::vector<double> vals;
      for (const auto* c : members) {
        if (c->ok && c->final_row) {
          if (auto v = metric_of(*c->final_row, m)) vals.push_back(*v);
        }
      }
      if (vals.empty()) {
        s += ",,";
        continue;
      }
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      s += "," + format_double(mean) + ",";
      if (vals.size() > 1) {
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        s += format_double(std::sqrt(ss / static_cast<double>(vals.size() - 1)));
      }
    }
    s += "," + csv_cell(errors) + "\n";
  }
  return s;
}

}  // namespace

std::vector<SweepCell> cmd_sweep(const std::string& grid_path, const std::string& out_dir, std::size_t parallel,
                                 const LogFn& log) {
  if (parallel < 1) throw ConfigError("--parallel must be >= 1");
  const json grid = parse_json_file(grid_path);
  if (!grid.is_object() || !grid.contains("axes") || !grid["axes"].is_object()) {
    throw ConfigError("grid needs an \"axes\" object");
  }
  for (const auto& [k, v] : grid.items()) {
    if (k != "base" && k != "axes") throw ConfigError("unknown field '" + k + "' in grid");
  }
  const json base = grid.value("base", json::object());
  if (!base.is_object()) throw ConfigError("grid field 'base' must be an object");
  std::vector<std::string> axes;
  std::vector<std::vector<json>> values;
  for (const auto& [k, v] : grid["axes"].items()) {
    if (!v.is_array() || v.empty()) throw ConfigError("grid axis '" + k + "' must be a non-empty array");
    axes.push_back(k);
    values.emplace_back(v.begin(), v.end());
  }
  if (axes.empty()) throw ConfigError("grid has no axes");
  ensure_dir(out_dir);

  // Cartesian product, last axis fastest.
  std::vector<SweepCell> cells;
  std::vector<json> docs;
  std::vector<std::size_t> pos(axes.size(), 0);
  for (bool more = true; more;) {
    SweepCell c;
    json doc = base;
    doc.erase("out_dir");
    c.axes = json::object();
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const json& v = values[a][pos[a]];
      c.axes[axes[a]] = v;
      set_dotted(doc, axes[a], v);
      if (!c.name.empty()) c.name += "_";
      c.name += cell_token(json(axes[a])) + "-" + cell_token(v);
    }
    if (!base.contains("run_id")) doc["run_id"] = c.name;
    cells.push_back(std::move(c));
    docs.push_back(std::move(doc));
    more = false;
    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++pos[a] < values[a].size()) {
        more = true;
        break;
      }
      pos[a] = 0;
    }
  }

  std::mutex log_mu;
  auto safe_log = [&](const std::string& s) {
    if (!log) return;
    std::lock_guard<std::mutex> lock(log_mu);
    log(s);
  };
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      SweepCell& c = cells[i];
      try {
        const TrainConfig cfg = config_from_json(docs[i]);
        TrainState st = TrainState::create(cfg, load_dataset(cfg.dataset));
        const auto rows = run_training(st, fs::path(out_dir) / c.name, safe_log);
        if (!rows.empty()) c.final_row = rows.back();
        c.ok = true;
        safe_log(c.name + ": done");
      } catch (const std::exception& e) {
        c.error = e.what();
        safe_log(c.name + ": failed: " + c.error);
      }
    }
  };
  const std::size_t n_threads = std::min(parallel, cells.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  write_text(fs::path(out_dir) / "summary.csv", summary_csv(axes, cells));
  return cells;
}

// --- plots ---------------------------------------------------------------------------

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "anneal") return PlotKind::Anneal;
  if (name == "capacity") return PlotKind::Capacity;
  if (name == "entropy") return PlotKind::Entropy;
  throw ConfigError("unknown plot kind '" + name + "' (anneal, capacity or entropy)");
}

namespace {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct Panel {
  std::string title;
  std::string y_label;
  bool log_y = false;
  std::vector<Series> series;
};

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

constexpr double kWidth = 760, kPanelHeight = 420;
constexpr double kLeft = 80, kRight = 200, kTop = 44, kBottom = 56;

void draw_panel(std::string& svg, const Panel& p, double y0) {
  const double pw = kWidth - kLeft - kRight, ph = kPanelHeight - kTop - kBottom;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : p.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = p.log_y ? std::log10(s.y[i]) : s.y[i];
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (p.log_y) {
    ymin = std::floor(ymin);
    ymax = std::ceil(ymax);
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double ox = kLeft, oy = y0 + kTop;
  auto px = [&](double x) { return ox + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return oy + ph - (y - ymin) / (ymax - ymin) * ph; };

  svg += "<text x=\"" + fmt(ox + pw / 2) + "\" y=\"" + fmt(y0 + 26) +
         "\" text-anchor=\"middle\" font-size=\"16\">" + xml_escape(p.title) + "</text>\n";
  svg += "<rect x=\"" + fmt(ox) + "\" y=\"" + fmt(oy) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
         "\" fill=\"none\" stroke=\"#000\"/>\n";
  // y ticks
  std::vector<std::pair<double, std::string>> yt;
  if (p.log_y) {
    for (double e = ymin; e <= ymax + 1e-9; e += 1.0) yt.emplace_back(e, tick_label(std::pow(10.0, e)));
  } else {
    for (int i = 0; i <= 5; ++i) {
      const double v = ymin + (ymax - ymin) * i / 5.0;
      yt.emplace_back(v, tick_label(v));
    }
  }
  for (const auto& [v, label] : yt) {
    const double y = py(v);
    svg += "<line x1=\"" + fmt(ox - 5) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(ox + pw) + "\" y2=\"" + fmt(y) +
           "\" stroke=\"#ddd\"/>\n";
    svg += "<text x=\"" + fmt(ox - 8) + "\" y=\"" + fmt(y + 4) + "\" text-anchor=\"end\" font-size=\"11\">" + label +
           "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double v = xmin + (xmax - xmin) * i / 5.0;
    const double x = px(v);
    svg += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(oy + ph) + "\" x2=\"" + fmt(x) + "\" y2=\"" + fmt(oy + ph + 5) +
           "\" stroke=\"#000\"/>\n";
    svg += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(oy + ph + 18) + "\" text-anchor=\"middle\" font-size=\"11\">" +
           tick_label(v) + "</text>\n";
  }
  svg += "<text x=\"" + fmt(ox + pw / 2) + "\" y=\"" + fmt(oy + ph + 42) +
         "\" text-anchor=\"middle\" font-size=\"13\">epoch</text>\n";
  const double ly = oy + ph / 2;
  svg += "<text x=\"" + fmt(20) + "\" y=\"" + fmt(ly) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 " +
         fmt(20) + " " + fmt(ly) + ")\">" + xml_escape(p.y_label) + (p.log_y ? " (log scale)" : "") + "</text>\n";

  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const Series& s = p.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!pts.empty()) pts += ' ';
      pts += fmt(px(s.x[i])) + "," + fmt(py(p.log_y ? std::log10(s.y[i]) : s.y[i]));
    }
    svg += std::string("<polyline fill=\"none\" stroke=\"") + color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double lx = ox + pw + 14, lyy = oy + 12 + 18.0 * static_cast<double>(k);
    svg += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(lyy - 4) + "\" x2=\"" + fmt(lx + 18) + "\" y2=\"" + fmt(lyy - 4) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fmt(lx + 24) + "\" y=\"" + fmt(lyy) + "\" font-size=\"11\">" + xml_escape(s.label) + "</text>\n";
  }
}

struct MetricsFile {
  std::string label;
  CsvTable table;
};

// Series of `column` against epoch; entries that are empty (or not positive
// on a log axis) are skipped.
Series column_series(const MetricsFile& f, const std::string& column, bool log_y, const std::string& label) {
  Series s;
  s.label = label;
  const std::size_t ce = f.table.column("epoch");
  const std::size_t cc = f.table.column(column);
  for (const auto& row : f.table.rows) {
    if (row[cc].empty()) continue;
    const double v = std::stod(row[cc]);
    if (!std::isfinite(v) || (log_y && v <= 0.0)) continue;
    s.x.push_back(std::stod(row[ce]));
    s.y.push_back(v);
  }
  return s;
}

}  // namespace

std::string render_plot(const std::vector<std::string>& csv_paths, PlotKind kind) {
  if (csv_paths.empty()) throw ConfigError("plot needs at least one metrics file");
  std::vector<MetricsFile> files;
  for (const auto& path : csv_paths) {
    MetricsFile f{"", read_csv(path)};
    if (f.table.rows.empty()) throw FormatError(path + ": no data rows");
    f.table.column("epoch");
    const std::size_t cr = f.table.column("run_id");
    f.label = f.table.rows.front()[cr];
    files.push_back(std::move(f));
  }

  std::vector<Panel> panels;
  if (kind == PlotKind::Anneal) {
    Panel p{"Variance and concentration", "value", true, {}};
    for (const auto& f : files) {
      for (const char* c : {"sigma2", "sigma2_phi", "kappa", "kappa_phi"}) f.table.column(c);
      for (const char* c : {"sigma2", "sigma2_phi", "kappa", "kappa_phi"}) {
        Series s = column_series(f, c, true, f.label + " " + c);
        if (!s.x.empty()) p.series.push_back(std::move(s));
      }
    }
    if (p.series.empty()) throw FormatError("no sigma2, sigma2_phi, kappa or kappa_phi values to plot");
    panels.push_back(std::move(p));
  } else if (kind == PlotKind::Entropy) {
    Panel p{"Quantization entropy", "mean entropy (nats)", false, {}};
    for (const auto& f : files) {
      Series s = column_series(f, "mean_entropy", false, f.label);
      if (!s.x.empty()) p.series.push_back(std::move(s));
    }
    if (p.series.empty()) throw FormatError("no mean_entropy values to plot");
    panels.push_back(std::move(p));
  } else {
    Panel perp{"Codebook perplexity", "perplexity", true, {}};
    Panel err{"Reconstruction error", "error", true, {}};
    for (const auto& f : files) {
      Series s = column_series(f, "perplexity", true, f.label);
      if (!s.x.empty()) perp.series.push_back(std::move(s));
      Series m = column_series(f, "test_mse", true, f.label + " mse");
      if (m.x.empty()) m = column_series(f, "pixel_error", true, f.label + " pixel error");
      if (!m.x.empty()) err.series.push_back(std::move(m));
    }
    if (perp.series.empty()) throw FormatError("no perplexity values to plot");
    panels.push_back(std::move(perp));
    if (!err.series.empty()) panels.push_back(std::move(err));
  }

  const double height = kPanelHeight * static_cast<double>(panels.size());
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(height) +
                    "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(height) + "\" font-family=\"sans-serif\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) draw_panel(svg, panels[i], kPanelHeight * static_cast<double>(i));
  svg += "</svg>\n";
  return svg;
}

void cmd_plot(const std::vector<std::string>& csv_paths, const std::string& kind, const std::string& out_path) {
  const PlotKind k = parse_plot_kind(kind);
  write_text(out_path, render_plot(csv_paths, k));
}

}  // namespace sqvae
