#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "sqvae/sqvae.h"

namespace {

void log_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

// 0 success, 1 usage/config, 2 data/format, 3 numeric.
int finish(sqvae_status st) {
  if (st == SQVAE_OK) return 0;
  std::fprintf(stderr, "error: %s\n", sqvae_last_error());
  return st == SQVAE_ERR_CONTRACT ? 1 : static_cast<int>(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastically quantized VAEs and VQ-VAE baselines"};
  app.set_version_flag("--version", sqvae_version());
  app.require_subcommand(1);

  std::string config, resume, out;
  long long epochs = -1;
  auto* train = app.add_subcommand("train", "Train one run");
  train->add_option("--config", config, "Run config JSON");
  train->add_option("--resume", resume, "Continue from a checkpoint");
  train->add_option("--out", out, "Output directory (overrides out_dir of the config)");
  train->add_option("--epochs", epochs, "Total number of epochs (overrides the config)")->check(CLI::NonNegativeNumber);

  std::string checkpoint, split = "test";
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint, print JSON");
  eval->add_option("--checkpoint", checkpoint, "SQVC checkpoint")->required();
  eval->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  std::string grid, sweep_out;
  std::size_t parallel = 1;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of configs");
  sweep->add_option("--grid", grid, "Grid JSON {base, axes}")->required();
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  sweep->add_option("--parallel", parallel, "Concurrent runs")->check(CLI::PositiveNumber);

  std::vector<std::string> metrics;
  std::string kind, svg;
  auto* plot = app.add_subcommand("plot", "Render metrics files to SVG");
  plot->add_option("--metrics", metrics, "metrics.csv files")->required();
  plot->add_option("--kind", kind, "anneal, capacity or entropy")
      ->required()
      ->check(CLI::IsMember({"anneal", "capacity", "entropy"}));
  plot->add_option("--out", svg, "Output SVG")->required();

  auto* init = app.add_subcommand("init-config", "Print the default config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*train) {
    return finish(sqvae_cmd_train(config.empty() ? nullptr : config.c_str(), resume.empty() ? nullptr : resume.c_str(),
                                  out.empty() ? nullptr : out.c_str(), epochs, log_line, nullptr));
  }
  if (*eval) {
    char* json = nullptr;
    const sqvae_status st = sqvae_cmd_eval(checkpoint.c_str(), split.c_str(), &json);
    if (st == SQVAE_OK) {
      std::fputs(json, stdout);
      sqvae_string_free(json);
    }
    return finish(st);
  }
  if (*sweep) return finish(sqvae_cmd_sweep(grid.c_str(), sweep_out.c_str(), parallel, log_line, nullptr));
  if (*plot) {
    std::vector<const char*> paths;
    for (const auto& m : metrics) paths.push_back(m.c_str());
    return finish(sqvae_cmd_plot(paths.data(), paths.size(), kind.c_str(), svg.c_str()));
  }
  if (*init) {
    char* json = nullptr;
    const sqvae_status st = sqvae_default_config(&json);
    if (st == SQVAE_OK) {
      std::fputs(json, stdout);
      sqvae_string_free(json);
    }
    return finish(st);
  }
  return 1;
}
