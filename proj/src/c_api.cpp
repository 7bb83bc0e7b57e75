#include "sqvae/sqvae.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "sqvae/checkpoint.hpp"
#include "sqvae/cli.hpp"
#include "sqvae/error.hpp"

struct sqvae_run {
  sqvae::TrainState state;
};

namespace {

thread_local std::string g_last_error;

template <class F>
sqvae_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return SQVAE_OK;
  } catch (const sqvae::ConfigError& e) {
    g_last_error = e.what();
    return SQVAE_ERR_CONFIG;
  } catch (const sqvae::FormatError& e) {
    g_last_error = e.what();
    return SQVAE_ERR_FORMAT;
  } catch (const sqvae::NumericError& e) {
    g_last_error = e.what();
    return SQVAE_ERR_NUMERIC;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return SQVAE_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SQVAE_ERR_CONTRACT;
  } catch (...) {
    g_last_error = "unknown error";
    return SQVAE_ERR_CONTRACT;
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

std::string str_or_empty(const char* s) { return s ? s : ""; }

void need(const void* p, const char* what) {
  if (!p) throw sqvae::ContractError(std::string(what) + " must not be NULL");
}

sqvae::LogFn wrap_log(sqvae_log_fn log, void* user) {
  if (!log) return {};
  return [log, user](const std::string& line) { log(line.c_str(), user); };
}

}  // namespace

extern "C" {

const char* sqvae_version(void) { return "0.1.0"; }

const char* sqvae_last_error(void) { return g_last_error.c_str(); }

void sqvae_string_free(char* s) { std::free(s); }

sqvae_status sqvae_default_config(char** out_json) {
  return guarded([&] {
    need(out_json, "out_json");
    *out_json = dup_string(sqvae::init_config_json());
  });
}

sqvae_status sqvae_cmd_train(const char* config_path, const char* resume_path, const char* out_dir, int64_t epochs,
                             sqvae_log_fn log, void* user) {
  return guarded([&] {
    sqvae::TrainArgs args;
    args.config_path = str_or_empty(config_path);
    args.resume_path = str_or_empty(resume_path);
    args.out_dir = str_or_empty(out_dir);
    if (epochs >= 0) args.epochs = static_cast<std::size_t>(epochs);
    sqvae::cmd_train(args, wrap_log(log, user));
  });
}

sqvae_status sqvae_cmd_eval(const char* checkpoint_path, const char* split, char** out_json) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out_json, "out_json");
    *out_json = dup_string(sqvae::cmd_eval(checkpoint_path, split ? split : "test"));
  });
}

sqvae_status sqvae_cmd_sweep(const char* grid_path, const char* out_dir, size_t parallel, sqvae_log_fn log,
                             void* user) {
  return guarded([&] {
    need(grid_path, "grid_path");
    need(out_dir, "out_dir");
    sqvae::cmd_sweep(grid_path, out_dir, parallel, wrap_log(log, user));
  });
}

sqvae_status sqvae_cmd_plot(const char* const* csv_paths, size_t n_paths, const char* kind, const char* out_path) {
  return guarded([&] {
    need(kind, "kind");
    need(out_path, "out_path");
    if (n_paths > 0) need(csv_paths, "csv_paths");
    std::vector<std::string> paths;
    for (size_t i = 0; i < n_paths; ++i) {
      need(csv_paths[i], "csv path");
      paths.emplace_back(csv_paths[i]);
    }
    sqvae::cmd_plot(paths, kind, out_path);
  });
}

sqvae_status sqvae_run_create(const char* config_json, sqvae_run** out) {
  return guarded([&] {
    need(config_json, "config_json");
    need(out, "out");
    *out = nullptr;
    const sqvae::TrainConfig cfg = sqvae::config_from_json(nlohmann::json::parse(config_json));
    auto* run = new sqvae_run{sqvae::TrainState::create(cfg, sqvae::load_dataset(cfg.dataset))};
    *out = run;
  });
}

sqvae_status sqvae_run_load(const char* checkpoint_path, sqvae_run** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out, "out");
    *out = nullptr;
    auto* run = new sqvae_run{sqvae::load_checkpoint(checkpoint_path)};
    *out = run;
  });
}

void sqvae_run_free(sqvae_run* run) { delete run; }

sqvae_status sqvae_run_train_epoch(sqvae_run* run, char** out_row) {
  return guarded([&] {
    need(run, "run");
    const sqvae::EpochResult r = sqvae::train_epoch(run->state);
    if (out_row) *out_row = dup_string(sqvae::format_row(r.row));
  });
}

sqvae_status sqvae_run_evaluate(const sqvae_run* run, const char* split, char** out_json) {
  return guarded([&] {
    need(run, "run");
    need(out_json, "out_json");
    const auto s = sqvae::parse_split(split ? split : "test");
    *out_json = dup_string(sqvae::eval_json(run->state, s).dump(2) + "\n");
  });
}

sqvae_status sqvae_run_save(const sqvae_run* run, const char* checkpoint_path) {
  return guarded([&] {
    need(run, "run");
    need(checkpoint_path, "checkpoint_path");
    sqvae::save_checkpoint(checkpoint_path, run->state);
  });
}

sqvae_status sqvae_run_counters(const sqvae_run* run, uint64_t* epoch, uint64_t* step) {
  return guarded([&] {
    need(run, "run");
    if (epoch) *epoch = run->state.epoch;
    if (step) *step = run->state.step;
  });
}

}  // extern "C"
