#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbrlab/commands.hpp"
#include "dbrlab/io.hpp"
#include "dbrlab/report.hpp"

using namespace dbrlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kTinyConfig = R"({
  "dataset": {"kind": "synthetic", "n": 160, "p": 12, "q": 1, "split": [96, 40, 24], "seed": 5},
  "model": {"repr_dim": 8, "treat_repr_dim": 4, "proj_dim": 4,
            "phi_hidden": [16], "psi_hidden": [8], "h_hidden": [16]},
  "train": {"alpha": 0.5, "m": 1, "batch_size": 16, "epochs": 4, "seed": 9, "patience": 0},
  "replication": {"runs": 2, "base_seed": 31},
  "output_dir": "OUTDIR"
})";

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

config::ExperimentConfig tiny_config(const fs::path& out) {
  std::string text = kTinyConfig;
  const std::string marker = "OUTDIR";
  text.replace(text.find(marker), marker.size(), out.string());
  return config::parse_experiment_config(json::parse(text), ".");
}

std::string run_binary(const std::string& args, int& exit_code) {
  const fs::path bin = fs::path(DBRLAB_BINARY_DIR) / "tools" / "dbrlab";
  const fs::path out = fs::temp_directory_path() / "dbrlab_cli_out.txt";
  const std::string cmd = bin.string() + " " + args + " > " + out.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  exit_code = WEXITSTATUS(rc);
  return io::read_file(out);
}

}  // namespace

TEST_CASE("config parsing is strict") {
  SUBCASE("unknown keys are rejected with block and key") {
    json j = json::parse(kTinyConfig);
    j["train"]["learning_rat"] = 0.01;
    CHECK_THROWS_WITH_AS(config::parse_experiment_config(j, "."),
                         doctest::Contains("learning_rat"), ConfigError);
    json j2 = json::parse(kTinyConfig);
    j2["outputs"] = "x";
    CHECK_THROWS_WITH_AS(config::parse_experiment_config(j2, "."),
                         doctest::Contains("<root>"), ConfigError);
  }
  SUBCASE("semi_synthetic requires a covariate file") {
    json j = json::parse(kTinyConfig);
    j["dataset"]["kind"] = "semi_synthetic";
    CHECK_THROWS_WITH_AS(config::parse_experiment_config(j, "."),
                         doctest::Contains("covariate_file"), ConfigError);
  }
  SUBCASE("field validation names the offending value") {
    json j = json::parse(kTinyConfig);
    j["train"]["alpha"] = -1.0;
    CHECK_THROWS_WITH_AS(config::parse_experiment_config(j, "."), doctest::Contains("alpha"),
                         ConfigError);
    json j2 = json::parse(kTinyConfig);
    j2["train"]["mode"] = "nope";
    CHECK_THROWS_AS(config::parse_experiment_config(j2, "."), ConfigError);
  }
  SUBCASE("default dataset name derives from q") {
    json j = json::parse(kTinyConfig);
    config::ExperimentConfig cfg = config::parse_experiment_config(j, ".");
    CHECK(cfg.spec.name == "Data-1");
  }
}

TEST_CASE("cmd_generate") {
  const fs::path out = fresh_dir("dbrlab_cli_gen");
  config::ExperimentConfig cfg = tiny_config(out);
  cli::GlobalOpts opts;
  opts.out_dir = (out / "ds").string();
  std::ostringstream log;
  cli::cmd_generate(cfg, opts, log);
  CHECK(fs::exists(out / "ds" / "X.csv"));
  CHECK(fs::exists(out / "ds" / "T.csv"));
  CHECK(fs::exists(out / "ds" / "Y.csv"));
  CHECK(fs::exists(out / "ds" / "weights.json"));
  CHECK(fs::exists(out / "ds" / "split.json"));

  SUBCASE("rerun is byte-identical") {
    const std::string x1 = io::read_file(out / "ds" / "X.csv");
    const std::string w1 = io::read_file(out / "ds" / "weights.json");
    std::ostringstream log2;
    cli::cmd_generate(cfg, opts, log2);
    CHECK(io::read_file(out / "ds" / "X.csv") == x1);
    CHECK(io::read_file(out / "ds" / "weights.json") == w1);
  }
  SUBCASE("dry run touches nothing") {
    cli::GlobalOpts dry = opts;
    dry.dry_run = true;
    dry.out_dir = (out / "dry").string();
    std::ostringstream log2;
    cli::cmd_generate(cfg, dry, log2);
    CHECK(!fs::exists(out / "dry"));
    CHECK(log2.str().find("dry-run") != std::string::npos);
  }
  SUBCASE("the Data-1 preset produces the paper-sized dataset") {
    json j = json::parse(kTinyConfig);
    j["dataset"] = json{{"kind", "synthetic"}, {"n", 3000}, {"p", 100}, {"q", 1},
                        {"split", {2100, 600, 300}}, {"seed", 1}};
    config::ExperimentConfig big = config::parse_experiment_config(j, ".");
    CHECK(big.spec.name == "Data-1");
    cli::GlobalOpts gopts;
    gopts.out_dir = (out / "data1").string();
    std::ostringstream log3;
    cli::cmd_generate(big, gopts, log3);
    Mat x = io::read_csv_matrix(out / "data1" / "X.csv");
    CHECK(x.rows() == 3000);
    CHECK(x.cols() == 100);
    datagen::Split split = datagen::load_split(out / "data1");
    CHECK(split.train.size() == 2100);
    CHECK(split.val.size() == 600);
    CHECK(split.test.size() == 300);
  }
  fs::remove_all(out);
}

TEST_CASE("cmd_generate honors DBRLAB_DATA_DIR") {
  const fs::path out = fresh_dir("dbrlab_cli_env");
  setenv("DBRLAB_DATA_DIR", out.c_str(), 1);
  config::ExperimentConfig cfg = tiny_config(out / "unused");
  cli::GlobalOpts opts;  // no --out: falls back to the data root
  std::ostringstream log;
  cli::cmd_generate(cfg, opts, log);
  CHECK(fs::exists(out / "Data-1" / "X.csv"));
  unsetenv("DBRLAB_DATA_DIR");
  fs::remove_all(out);
}

TEST_CASE("cmd_train and checkpoint output") {
  const fs::path out = fresh_dir("dbrlab_cli_train");
  config::ExperimentConfig cfg = tiny_config(out);
  cli::GlobalOpts opts;
  std::ostringstream log;
  cli::cmd_train(cfg, opts, log);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "model.ckpt"));
  CHECK(log.str().find("test_mise") != std::string::npos);
  train_eval::RunManifest m = train_eval::RunManifest::load(out / "manifest.json");
  CHECK(m.selected_epoch >= 0);
  CHECK(m.config["train"]["alpha"].get<double>() == 0.5);

  SUBCASE("no_br records alpha = 0 in the manifest") {
    json j = json::parse(kTinyConfig);
    j["train"]["mode"] = "no_br";
    config::ExperimentConfig cfg2 = config::parse_experiment_config(j, ".");
    cfg2.output_dir = (out / "nobr").string();
    std::ostringstream log2;
    cli::cmd_train(cfg2, opts, log2);
    train_eval::RunManifest m2 = train_eval::RunManifest::load(out / "nobr" / "manifest.json");
    CHECK(m2.config["train"]["alpha"].get<double>() == 0.0);
    CHECK(m2.config["train"]["mode"].get<std::string>() == "no_br");
  }
  fs::remove_all(out);
}

TEST_CASE("cmd_bench writes a stable results table") {
  const fs::path out = fresh_dir("dbrlab_cli_bench");
  config::ExperimentConfig cfg = tiny_config(out);
  cfg.spec.train.epochs = 3;
  cli::GlobalOpts opts;
  opts.jobs = 2;
  std::ostringstream log;
  cli::cmd_bench(cfg, opts, log);
  REQUIRE(fs::exists(out / "results.csv"));
  REQUIRE(fs::exists(out / "summary.md"));
  const std::string csv = io::read_file(out / "results.csv");
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == report::kBenchCsvHeader);
  int data_rows = 0;
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty()) ++data_rows;
  }
  CHECK(data_rows == 6);  // 3 modes x 2 replications
  const std::string summary = io::read_file(out / "summary.md");
  CHECK(summary.find("CRNet") != std::string::npos);
  CHECK(summary.find("w/o BR") != std::string::npos);
  CHECK(summary.find("w/o PR") != std::string::npos);
  CHECK(fs::exists(out / "full" / "run_0" / "manifest.json"));
  CHECK(fs::exists(out / "no_pr" / "run_1" / "manifest.json"));

  SUBCASE("rerun with identical config and seeds is byte-identical") {
    const std::string summary1 = io::read_file(out / "summary.md");
    std::ostringstream log2;
    cli::cmd_bench(cfg, opts, log2);
    CHECK(io::read_file(out / "results.csv") == csv);
    CHECK(io::read_file(out / "summary.md") == summary1);
  }
  SUBCASE("a single replication flags the degenerate std") {
    config::ExperimentConfig one = tiny_config(out / "one");
    one.spec.train.epochs = 3;
    one.replication_runs = 1;
    std::ostringstream log3;
    cli::cmd_bench(one, opts, log3);
    CHECK(log3.str().find("std is 0 by convention") != std::string::npos);
    CHECK(io::read_file(out / "one" / "summary.md").find("single run") != std::string::npos);
  }
  fs::remove_all(out);
}

TEST_CASE("cmd_sweep emits table and plot") {
  const fs::path out = fresh_dir("dbrlab_cli_sweep");
  config::ExperimentConfig cfg = tiny_config(out);
  cfg.spec.train.epochs = 3;
  cfg.replication_runs = 2;
  cli::GlobalOpts opts;
  std::ostringstream log;
  cli::cmd_sweep(cfg, opts, "m", {0.0, 1.0}, log);
  REQUIRE(fs::exists(out / "sweep.csv"));
  REQUIRE(fs::exists(out / "sweep.svg"));
  std::istringstream csv(io::read_file(out / "sweep.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == report::kSweepCsvHeader);
  int data_rows = 0;
  for (std::string line; std::getline(csv, line);) {
    if (!line.empty()) ++data_rows;
  }
  CHECK(data_rows == 2);
  const std::string svg = io::read_file(out / "sweep.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);

  SUBCASE("single-value sweep degenerates gracefully") {
    config::ExperimentConfig cfg2 = tiny_config(out / "single");
    cfg2.spec.train.epochs = 3;
    cfg2.replication_runs = 1;
    std::ostringstream log2;
    cli::cmd_sweep(cfg2, opts, "alpha", {0.5}, log2);
    CHECK(fs::exists(out / "single" / "sweep.svg"));
  }
  fs::remove_all(out);
}

TEST_CASE("cmd_report aggregates manifests") {
  const fs::path out = fresh_dir("dbrlab_cli_report");
  config::ExperimentConfig cfg = tiny_config(out / "run1");
  cfg.spec.train.epochs = 3;
  cli::GlobalOpts opts;
  std::ostringstream log;
  cli::cmd_train(cfg, opts, log);

  cli::GlobalOpts report_opts;
  report_opts.out_dir = out.string();
  std::ostringstream rlog;
  cli::cmd_report({(out / "run1").string()}, report_opts, rlog);
  REQUIRE(fs::exists(out / "report.md"));
  const std::string r1 = io::read_file(out / "report.md");
  CHECK(r1.find("Data-1") != std::string::npos);
  CHECK(r1.find("balancing") != std::string::npos);

  SUBCASE("regeneration is byte-identical") {
    std::ostringstream rlog2;
    cli::cmd_report({(out / "run1").string()}, report_opts, rlog2);
    CHECK(io::read_file(out / "report.md") == r1);
  }
  SUBCASE("corrupt manifests are skipped with a warning") {
    fs::create_directories(out / "bad");
    io::atomic_write(out / "bad" / "manifest.json", "{not json");
    std::ostringstream rlog3;
    cli::cmd_report({(out / "run1").string(), (out / "bad").string()}, report_opts, rlog3);
    CHECK(rlog3.str().find("skipping corrupt manifest") != std::string::npos);
    CHECK(io::read_file(out / "report.md") == r1);
  }
  fs::remove_all(out);
}

TEST_CASE("binary exit codes") {
  const fs::path out = fresh_dir("dbrlab_cli_bin");
  const fs::path cfg_path = out / "cfg.json";
  {
    std::string text = kTinyConfig;
    const std::string marker = "OUTDIR";
    text.replace(text.find(marker), marker.size(), (out / "run").string());
    io::atomic_write(cfg_path, text);
  }
  int rc = 0;
  SUBCASE("success is 0") {
    run_binary("train --config " + cfg_path.string(), rc);
    CHECK(rc == 0);
    CHECK(fs::exists(out / "run" / "manifest.json"));
  }
  SUBCASE("config errors are 2 and name the field") {
    json j = json::parse(io::read_file(cfg_path));
    j["train"]["alpha"] = -1.0;
    io::atomic_write(out / "bad.json", j.dump());
    const std::string log = run_binary("train --config " + (out / "bad.json").string(), rc);
    CHECK(rc == 2);
    CHECK(log.find("alpha") != std::string::npos);
  }
  SUBCASE("missing config is 2") {
    run_binary("train --config " + (out / "nope.json").string(), rc);
    CHECK(rc == 2);
  }
  SUBCASE("runtime failures are 3") {
    json j = json::parse(io::read_file(cfg_path));
    j["train"]["optimizer"] = "sgd";
    j["train"]["learning_rate"] = 1e18;
    io::atomic_write(out / "diverge.json", j.dump());
    const std::string log = run_binary("train --config " + (out / "diverge.json").string(), rc);
    CHECK(rc == 3);
    CHECK(log.find("diverged") != std::string::npos);
  }
  SUBCASE("dry run validates without output") {
    const std::string log = run_binary("bench --config " + cfg_path.string() + " --dry-run", rc);
    CHECK(rc == 0);
    CHECK(log.find("dry-run") != std::string::npos);
    CHECK(!fs::exists(out / "run"));
  }
  fs::remove_all(out);
}
