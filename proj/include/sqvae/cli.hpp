#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqvae/checkpoint.hpp"
#include "sqvae/config.hpp"
#include "sqvae/metrics.hpp"

namespace sqvae {

using LogFn = std::function<void(const std::string&)>;

/// A run config file: TrainConfig fields plus an optional "out_dir".
struct RunConfigFile {
  TrainConfig config;
  std::string out_dir;
};

RunConfigFile parse_run_config(const nlohmann::json& doc);
RunConfigFile read_run_config(const std::filesystem::path& path);
/// Materialized document: every TrainConfig field plus out_dir when set.
nlohmann::json run_config_to_json(const RunConfigFile& rc);

/// Train from `st` until st.config.epochs epochs are complete, writing into
/// `out`: config.json, metrics.csv (epoch rows), steps.csv (log_steps),
/// initial.sqvc (fresh runs), epoch_NNNN.sqvc every checkpoint_every epochs
/// and final.sqvc. Rows of an existing metrics.csv up to st.epoch are kept,
/// so a resumed run continues the same file.
std::vector<MetricRow> run_training(TrainState& st, const std::filesystem::path& out, const LogFn& log = {});

struct TrainArgs {
  std::string config_path;                // fresh run
  std::string resume_path;                // or: continue from this checkpoint
  std::string out_dir;                    // overrides out_dir of the config file
  std::optional<std::size_t> epochs;      // overrides the total epoch count
};

void cmd_train(const TrainArgs& args, const LogFn& log = {});

/// evaluate() of a checkpoint as a JSON object.
nlohmann::json eval_json(const TrainState& st, Split split);
std::string cmd_eval(const std::string& checkpoint, const std::string& split);

/// Grid file: {"base": {config}, "axes": {"key": [values...], ...}}. Keys may
/// be dotted ("dataset.seed"). Cells run in parallel threads; each writes
/// <out>/<cell name>/ and uses the cell name as run_id unless the base sets
/// one. summary.csv groups the cells by every axis except "seed" and reports
/// mean and sample std of the final-epoch metrics.
struct SweepCell {
  std::string name;
  nlohmann::json axes;  // axis key -> value of this cell
  bool ok = false;
  std::string error;
  std::optional<MetricRow> final_row;
};

std::vector<SweepCell> cmd_sweep(const std::string& grid_path, const std::string& out_dir, std::size_t parallel,
                                 const LogFn& log = {});

enum class PlotKind { Anneal, Capacity, Entropy };
PlotKind parse_plot_kind(const std::string& name);

/// Deterministic SVG line chart of the given metrics files.
std::string render_plot(const std::vector<std::string>& csv_paths, PlotKind kind);
void cmd_plot(const std::vector<std::string>& csv_paths, const std::string& kind, const std::string& out_path);

/// Default config document with every field materialized.
std::string init_config_json();

}  // namespace sqvae
