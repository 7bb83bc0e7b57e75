#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "../support/oracle.hpp"
#include "../support/tempdir.hpp"
#include "sqvae/cli.hpp"
#include "sqvae/error.hpp"

using namespace sqvae;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tiny_doc(std::size_t epochs = 3) {
  return json{{"model", "gaussian_sqvae_I"},
              {"dataset", {{"n_train", 12}, {"n_val", 4}, {"n_test", 6}, {"side", 4}, {"seed", 1}}},
              {"d_z", 2},
              {"d_b", 2},
              {"K", 3},
              {"hidden", {6, 5}},
              {"batch_size", 4},
              {"epochs", epochs},
              {"seed", 3},
              {"run_id", "tiny"}};
}

fs::path write_config(const testing::TempDir& dir, const json& doc, const std::string& name = "cfg.json") {
  const fs::path p = dir / name;
  testing::spit(p, doc.dump(2));
  return p;
}

void train(const fs::path& config, const fs::path& out, std::optional<std::size_t> epochs = std::nullopt) {
  TrainArgs a;
  a.config_path = config.string();
  a.out_dir = out.string();
  a.epochs = epochs;
  cmd_train(a);
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SQVAE_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config documents") {
  SUBCASE("round trip materializes every field") {
    const TrainConfig c = config_from_json(tiny_doc());
    const json full = config_to_json(c);
    CHECK(config_to_json(config_from_json(full)) == full);
    CHECK(full.contains("beta"));
    CHECK(full["lr"] == 1e-3);
  }
  SUBCASE("unknown keys are rejected by name") {
    json d = tiny_doc();
    d["betta"] = 0.3;
    try {
      (void)config_from_json(d);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("betta") != std::string::npos);
    }
    json n = tiny_doc();
    n["dataset"]["sidee"] = 3;
    CHECK_THROWS_AS(config_from_json(n), ConfigError);
  }
  SUBCASE("invalid values name the field") {
    json d = tiny_doc();
    d["K"] = 1;
    try {
      (void)config_from_json(d);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("K") != std::string::npos);
    }
  }
  SUBCASE("out_dir is carried next to the config") {
    json d = tiny_doc();
    d["out_dir"] = "somewhere";
    const RunConfigFile rc = parse_run_config(d);
    CHECK(rc.out_dir == "somewhere");
    CHECK(run_config_to_json(rc)["out_dir"] == "somewhere");
  }
  SUBCASE("default config parses") { CHECK_NOTHROW(config_from_json(json::parse(init_config_json()))); }
}

TEST_CASE("zero epochs writes config and initial checkpoint only") {
  testing::TempDir dir;
  train(write_config(dir, tiny_doc(0)), dir / "out");
  CHECK(fs::exists(dir / "out" / "config.json"));
  CHECK(fs::exists(dir / "out" / "initial.sqvc"));
  const CsvTable t = read_csv((dir / "out" / "metrics.csv").string());
  CHECK(t.rows.empty());
  CHECK(t.columns == metric_columns());
  const json saved = json::parse(testing::slurp(dir / "out" / "config.json"));
  CHECK(saved == config_to_json(config_from_json(tiny_doc(0))));
}

TEST_CASE("same config twice gives byte-identical metrics") {
  testing::TempDir dir;
  const fs::path cfg = write_config(dir, tiny_doc());
  train(cfg, dir / "a");
  train(cfg, dir / "b");
  const std::string a = testing::slurp(dir / "a" / "metrics.csv");
  CHECK(!a.empty());
  CHECK(a == testing::slurp(dir / "b" / "metrics.csv"));
  CHECK(testing::slurp(dir / "a" / "final.sqvc") == testing::slurp(dir / "b" / "final.sqvc"));
}

TEST_CASE("materialized config reproduces the run") {
  testing::TempDir dir;
  train(write_config(dir, tiny_doc()), dir / "a");
  train(dir / "a" / "config.json", dir / "b");
  CHECK(testing::slurp(dir / "a" / "metrics.csv") == testing::slurp(dir / "b" / "metrics.csv"));
}

TEST_CASE("first metrics row loss equals the oracle") {
  testing::TempDir dir;
  json d = tiny_doc(1);
  d["log_steps"] = true;
  train(write_config(dir, d), dir / "out");
  const TrainState init = load_checkpoint(dir / "out" / "initial.sqvc");
  oracle::Params p;
  for (const auto& [name, t] : init.model.state_tensors()) p[name] = {t.data().begin(), t.data().end()};
  const auto first = batches(*init.dataset, Split::Train, 4, init.config.seed, 0).front();
  const auto x = gather_pixels(*init.dataset, first);
  const oracle::Terms t = oracle::gaussian_i_step(p, x, first.size(), init.dataset->D, init.config.hidden, 2, 2, 3,
                                                  init.config.seed, 0, 1.0);
  const CsvTable steps = read_csv((dir / "out" / "steps.csv").string());
  REQUIRE(!steps.rows.empty());
  CHECK(std::abs(std::stod(steps.rows[0][steps.column("loss_total")]) - t.total()) <= 1e-10);
}

TEST_CASE("resume mid-run is bit-exact") {
  testing::TempDir dir;
  json d = tiny_doc(6);
  d["checkpoint_every"] = 3;
  d["log_steps"] = true;
  train(write_config(dir, d), dir / "straight");
  json half = d;
  half["epochs"] = 3;
  train(write_config(dir, half, "half.json"), dir / "resumed");
  TrainArgs a;
  a.resume_path = (dir / "resumed" / "final.sqvc").string();
  a.out_dir = (dir / "resumed").string();
  a.epochs = 6;
  cmd_train(a);
  CHECK(testing::slurp(dir / "straight" / "metrics.csv") == testing::slurp(dir / "resumed" / "metrics.csv"));
  CHECK(testing::slurp(dir / "straight" / "steps.csv") == testing::slurp(dir / "resumed" / "steps.csv"));
  CHECK(testing::slurp(dir / "straight" / "final.sqvc") == testing::slurp(dir / "resumed" / "final.sqvc"));
  // The periodic checkpoint of the straight run resumes to the same end.
  a.resume_path = (dir / "straight" / "epoch_0003.sqvc").string();
  a.out_dir = (dir / "again").string();
  cmd_train(a);
  CHECK(testing::slurp(dir / "straight" / "final.sqvc") == testing::slurp(dir / "again" / "final.sqvc"));
}

TEST_CASE("checkpoint state survives save and load for every model kind") {
  for (const char* kind : {"gaussian_sqvae_II", "vmf_sqvae", "nc_sqvae", "vqvae_ema_reset", "vae"}) {
    testing::TempDir dir;
    json d = tiny_doc(2);
    d["model"] = kind;
    if (std::string(kind) == "vmf_sqvae" || std::string(kind) == "nc_sqvae") {
      d["dataset"]["kind"] = "synth_categorical";
      d["dataset"]["classes"] = 3;
    }
    d["reset_interval"] = 2;
    const TrainConfig cfg = config_from_json(d);
    TrainState st = TrainState::create(cfg, load_dataset(cfg.dataset));
    train_epoch(st);
    save_checkpoint(dir / "c.sqvc", st);
    TrainState back = load_checkpoint(dir / "c.sqvc");
    INFO(kind);
    CHECK(format_row(train_epoch(st).row) == format_row(train_epoch(back).row));
  }
}

TEST_CASE("eval output") {
  testing::TempDir dir;
  const TrainConfig cfg = config_from_json(tiny_doc(2));
  TrainState st = TrainState::create(cfg, load_dataset(cfg.dataset));
  run_training(st, dir / "out");
  const std::string ck = (dir / "out" / "final.sqvc").string();
  const std::string a = cmd_eval(ck, "test");
  CHECK(a == cmd_eval(ck, "test"));
  CHECK(json::parse(a) == eval_json(st, Split::Test));
  CHECK(json::parse(a)["step"] == st.step);
  CHECK(json::parse(cmd_eval(ck, "val"))["split"] == "val");
  CHECK_THROWS_AS(cmd_eval(ck, "nope"), ConfigError);
}

TEST_CASE("corrupted checkpoints") {
  testing::TempDir dir;
  const TrainConfig cfg = config_from_json(tiny_doc(0));
  const TrainState st = TrainState::create(cfg, load_dataset(cfg.dataset));
  save_checkpoint(dir / "ok.sqvc", st);
  std::string bytes = testing::slurp(dir / "ok.sqvc");
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    testing::spit(dir / "bad.sqvc", bytes);
    try {
      (void)load_checkpoint(dir / "bad.sqvc");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("bad checkpoint magic") != std::string::npos);
    }
  }
  SUBCASE("version mismatch") {
    bytes[4] = 9;
    testing::spit(dir / "v.sqvc", bytes);
    CHECK_THROWS_AS(load_checkpoint(dir / "v.sqvc"), FormatError);
  }
  SUBCASE("truncated") {
    testing::spit(dir / "t.sqvc", bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_checkpoint(dir / "t.sqvc"), FormatError);
  }
  SUBCASE("encode and decode are inverse") {
    const CheckpointFile f = snapshot(st);
    const auto enc = encode_checkpoint(f);
    CHECK(encode_checkpoint(decode_checkpoint(enc)) == enc);
    CHECK(std::string(enc.begin(), enc.end()) == bytes);
  }
}

TEST_CASE("sweeps") {
  testing::TempDir dir;
  SUBCASE("a 1x1 grid matches a single train") {
    json grid{{"base", tiny_doc()}, {"axes", {{"seed", {3}}}}};
    testing::spit(dir / "g.json", grid.dump());
    const auto cells = cmd_sweep((dir / "g.json").string(), (dir / "sw").string(), 1);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].ok);
    train(write_config(dir, tiny_doc()), dir / "single");
    CHECK(testing::slurp(dir / "sw" / cells[0].name / "metrics.csv") ==
          testing::slurp(dir / "single" / "metrics.csv"));
  }
  SUBCASE("seeds are aggregated with a sample std over exactly three values") {
    json base = tiny_doc(2);
    base.erase("run_id");
    json grid{{"base", base}, {"axes", {{"K", {3, 4}}, {"seed", {0, 1, 2}}}}};
    testing::spit(dir / "g.json", grid.dump());
    const auto cells = cmd_sweep((dir / "g.json").string(), (dir / "sw").string(), 2);
    REQUIRE(cells.size() == 6);
    CHECK(cells[0].name == "K-3_seed-0");
    CHECK(cells[5].name == "K-4_seed-2");
    const CsvTable s = read_csv((dir / "sw" / "summary.csv").string());
    REQUIRE(s.rows.size() == 2);
    for (std::size_t g = 0; g < 2; ++g) {
      CHECK(s.rows[g][s.column("n_cells")] == "3");
      CHECK(s.rows[g][s.column("n_failed")] == "0");
      std::vector<double> v;
      for (std::size_t i = 0; i < 3; ++i) v.push_back(cells[g * 3 + i].final_row->loss_total);
      const double m = (v[0] + v[1] + v[2]) / 3.0;
      const double sd = std::sqrt(((v[0] - m) * (v[0] - m) + (v[1] - m) * (v[1] - m) + (v[2] - m) * (v[2] - m)) / 2.0);
      CHECK(std::stod(s.rows[g][s.column("loss_total_mean")]) == doctest::Approx(m).epsilon(1e-12));
      CHECK(std::stod(s.rows[g][s.column("loss_total_std")]) == doctest::Approx(sd).epsilon(1e-12));
    }
    CHECK(read_csv((dir / "sw" / "K-4_seed-1" / "metrics.csv").string()).rows[0][0] == "K-4_seed-1");
  }
  SUBCASE("a failing cell is recorded and the others finish") {
    json grid{{"base", tiny_doc(1)}, {"axes", {{"K", {1, 3}}}}};
    testing::spit(dir / "g.json", grid.dump());
    const auto cells = cmd_sweep((dir / "g.json").string(), (dir / "sw").string(), 2);
    CHECK_FALSE(cells[0].ok);
    CHECK(cells[1].ok);
    const CsvTable s = read_csv((dir / "sw" / "summary.csv").string());
    CHECK(s.rows[0][s.column("n_failed")] == "1");
    CHECK(!s.rows[0][s.column("errors")].empty());
  }
}

TEST_CASE("plots") {
  testing::TempDir dir;
  train(write_config(dir, tiny_doc()), dir / "out");
  const std::string m = (dir / "out" / "metrics.csv").string();
  SUBCASE("deterministic and labeled") {
    const std::string a = render_plot({m}, PlotKind::Anneal);
    CHECK(a == render_plot({m}, PlotKind::Anneal));
    CHECK(a.find("<svg") == 0);
    CHECK(a.find("tiny sigma2<") != std::string::npos);
    CHECK(a.find("tiny sigma2_phi<") != std::string::npos);
    CHECK(a.find("epoch") != std::string::npos);
    cmd_plot({m}, "capacity", (dir / "c.svg").string());
    CHECK(testing::slurp(dir / "c.svg") == render_plot({m}, PlotKind::Capacity));
    CHECK(render_plot({m}, PlotKind::Entropy).find("mean entropy") != std::string::npos);
  }
  SUBCASE("empty body") {
    testing::spit(dir / "e.csv", std::string(kMetricsSchema) + "\n" + metrics_header() + "\n");
    try {
      (void)render_plot({(dir / "e.csv").string()}, PlotKind::Anneal);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("no data rows") != std::string::npos);
    }
  }
  SUBCASE("missing column is named") {
    testing::spit(dir / "m.csv", "run_id,epoch,perplexity\nx,1,2\n");
    try {
      (void)render_plot({(dir / "m.csv").string()}, PlotKind::Anneal);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("sigma2") != std::string::npos);
    }
  }
}

TEST_CASE("command-line exit codes") {
  testing::TempDir dir;
  const fs::path log = dir / "log";
  CHECK(run_cli("--help", log) == 0);
  CHECK(run_cli("train", log) == 1);
  CHECK(run_cli("bogus", log) == 1);
  json bad = tiny_doc(1);
  bad["K"] = 0;
  CHECK(run_cli("train --config " + write_config(dir, bad, "bad.json").string() + " --out " + (dir / "o").string(),
                log) == 1);
  CHECK(testing::slurp(log).find("K") != std::string::npos);

  CHECK(run_cli("train --config " + write_config(dir, tiny_doc(1)).string() + " --out " + (dir / "ok").string(), log) ==
        0);
  CHECK(run_cli("eval --checkpoint " + (dir / "ok" / "final.sqvc").string() + " --split test", log) == 0);
  CHECK(json::parse(testing::slurp(log))["split"] == "test");

  std::string bytes = testing::slurp(dir / "ok" / "final.sqvc");
  bytes[1] = '!';
  testing::spit(dir / "bad.sqvc", bytes);
  CHECK(run_cli("eval --checkpoint " + (dir / "bad.sqvc").string(), log) == 2);
  CHECK(testing::slurp(log).find("bad checkpoint magic") != std::string::npos);

  json nan = tiny_doc(1);
  nan["init_log_sigma2"] = -800.0;
  CHECK(run_cli("train --config " + write_config(dir, nan, "nan.json").string() + " --out " + (dir / "n").string(),
                log) == 3);
  CHECK(testing::slurp(log).find("step 0") != std::string::npos);

  testing::spit(dir / "empty.csv", metrics_header() + "\n");
  CHECK(run_cli("plot --metrics " + (dir / "empty.csv").string() + " --kind anneal --out " + (dir / "p.svg").string(),
                log) == 2);
  CHECK(run_cli("init-config", log) == 0);
  CHECK(json::parse(testing::slurp(log)) == json::parse(init_config_json()));
}
