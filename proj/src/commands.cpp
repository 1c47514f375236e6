#include "dbrlab/commands.hpp"

#include <algorithm>
#include <filesystem>

#include "dbrlab/io.hpp"
#include "dbrlab/report.hpp"

namespace dbrlab::cli {

namespace fs = std::filesystem;
using config::ExperimentConfig;
using train_eval::ExperimentSpec;

void apply_overrides(ExperimentConfig& cfg, const GlobalOpts& opts) {
  if (opts.seed) {
    cfg.spec.dataset_seed = *opts.seed;
    cfg.spec.train.seed = *opts.seed;
    cfg.replication_base_seed = *opts.seed;
  }
  if (opts.out_dir) {
    cfg.output_dir = *opts.out_dir;
  }
}

namespace {

void print_snapshot(const ExperimentSpec& spec, std::ostream& log) {
  log << spec.snapshot().dump(2) << "\n";
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> run_seeds(const ExperimentConfig& cfg) {
  if (cfg.replication_seeds) return *cfg.replication_seeds;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> seeds;
  for (int r = 0; r < cfg.replication_runs; ++r) {
    seeds.emplace_back(rng::derive_seed(cfg.replication_base_seed,
                                        {rng::stream::dataset, static_cast<std::uint64_t>(r)}),
                       rng::derive_seed(cfg.replication_base_seed,
                                        {rng::stream::train, static_cast<std::uint64_t>(r)}));
  }
  return seeds;
}

}  // namespace

void cmd_generate(ExperimentConfig cfg, const GlobalOpts& opts, std::ostream& log) {
  apply_overrides(cfg, opts);
  config::resolve_covariates(cfg.spec, ".");
  if (opts.dry_run) {
    log << "dry-run: config valid\n";
    print_snapshot(cfg.spec, log);
    return;
  }
  datagen::Dataset ds = train_eval::make_dataset(cfg.spec, cfg.spec.dataset_seed);
  const int n_total = static_cast<int>(ds.x.rows());
  datagen::Split split =
      datagen::make_split(n_total, cfg.spec.split_sizes, cfg.spec.dataset_seed);
  fs::path dir = opts.out_dir ? fs::path(*opts.out_dir) : config::data_root() / cfg.spec.name;
  datagen::export_dataset(dir, ds, split);
  log << "wrote dataset '" << cfg.spec.name << "' (" << ds.x.rows() << " x " << ds.x.cols()
      << " covariates, q = " << ds.t.cols() << ") to " << dir.string() << "\n";
  log << "split " << split.train.size() << "/" << split.val.size() << "/" << split.test.size()
      << "\n";
}

void cmd_train(ExperimentConfig cfg, const GlobalOpts& opts, std::ostream& log) {
  apply_overrides(cfg, opts);
  config::resolve_covariates(cfg.spec, ".");
  if (opts.dry_run) {
    log << "dry-run: config valid\n";
    print_snapshot(cfg.spec, log);
    return;
  }
  if (cfg.spec.train.mode == train_eval::Mode::no_br) {
    cfg.spec.train.alpha = 0.0;
  }
  train_eval::RunOutput out =
      train_eval::run_single(cfg.spec, cfg.spec.dataset_seed, cfg.spec.train.seed);
  const fs::path dir(cfg.output_dir);
  out.manifest.save(dir / "manifest.json");
  model::save_checkpoint(dir / "model.ckpt", out.fitted);
  const auto& sel = out.manifest.epochs.at(static_cast<std::size_t>(out.manifest.selected_epoch));
  log << "selected epoch " << out.manifest.selected_epoch << " (of "
      << out.manifest.epochs.size() << ")\n";
  log << "val_mse " << io::format_double(sel.val_mse) << "\n";
  log << "test_mise " << io::format_double(out.manifest.test_mise) << "\n";
  log << "wrote " << (dir / "manifest.json").string() << " and " << (dir / "model.ckpt").string()
      << "\n";
}

void cmd_bench(ExperimentConfig cfg, const GlobalOpts& opts, std::ostream& log) {
  apply_overrides(cfg, opts);
  config::resolve_covariates(cfg.spec, ".");
  if (opts.dry_run) {
    log << "dry-run: config valid\n";
    print_snapshot(cfg.spec, log);
    return;
  }
  const fs::path dir(cfg.output_dir);
  const auto seeds = run_seeds(cfg);
  std::vector<report::BenchRow> rows;
  std::vector<report::BenchSummaryRow> summary;
  for (const train_eval::Mode mode :
       {train_eval::Mode::full, train_eval::Mode::no_br, train_eval::Mode::no_pr}) {
    ExperimentSpec spec = cfg.spec;
    spec.train.mode = mode;
    if (mode == train_eval::Mode::no_br) spec.train.alpha = 0.0;
    train_eval::ReplicateResult rep =
        train_eval::replicate_seeded(spec, seeds, opts.jobs);
    for (const std::string& err : rep.errors) {
      log << "warning: " << to_string(mode) << " " << err << "\n";
    }
    if (!rep.errors.empty()) {
      std::string all;
      for (const std::string& err : rep.errors) all += err + "\n";
      io::atomic_write(dir / to_string(mode) / "errors.txt", all);
    }
    for (std::size_t r = 0; r < rep.manifests.size(); ++r) {
      const train_eval::RunManifest& m = rep.manifests[r];
      m.save(dir / to_string(mode) / ("run_" + std::to_string(r)) / "manifest.json");
      rows.push_back(report::BenchRow{cfg.spec.name, to_string(mode), spec.train.alpha,
                                      spec.train.m, spec.net.repr_dim, m.seed, m.test_mise});
    }
    summary.push_back(report::BenchSummaryRow{to_string(mode), rep.mean, rep.stddev,
                                              static_cast<int>(rep.manifests.size()),
                                              rep.degenerate_std});
    log << to_string(mode) << ": mise " << rep.mean << " +- " << rep.stddev << " ("
        << rep.manifests.size() << " runs)"
        << (rep.degenerate_std ? " [single run, std is 0 by convention]" : "") << "\n";
  }
  io::atomic_write(dir / "results.csv", report::bench_results_csv(rows));
  io::atomic_write(dir / "summary.md", report::bench_summary_md(cfg.spec.name, summary));
  log << "wrote " << (dir / "results.csv").string() << " and " << (dir / "summary.md").string()
      << "\n";
}

void cmd_sweep(ExperimentConfig cfg, const GlobalOpts& opts, const std::string& parameter,
               const std::vector<double>& values, std::ostream& log) {
  apply_overrides(cfg, opts);
  config::resolve_covariates(cfg.spec, ".");
  const train_eval::SweepParam param = train_eval::sweep_param_from_string(parameter);
  if (values.empty()) {
    throw ConfigError("sweep: --values must be non-empty");
  }
  if (opts.dry_run) {
    log << "dry-run: config valid\n";
    print_snapshot(cfg.spec, log);
    return;
  }
  if (cfg.replication_seeds) {
    throw ConfigError("sweep: explicit replication.seeds are not supported; use base_seed");
  }
  const fs::path dir(cfg.output_dir);
  std::vector<train_eval::SweepCell> cells = train_eval::sweep(
      cfg.spec, param, values, cfg.replication_runs, cfg.replication_base_seed, opts.jobs);
  std::vector<report::SweepRow> rows;
  const std::string pname = train_eval::to_string(param);
  for (const train_eval::SweepCell& cell : cells) {
    rows.push_back(report::SweepRow{pname, cell.value, cell.result.mean, cell.result.stddev,
                                    static_cast<int>(cell.result.manifests.size())});
    std::string vdir = pname + "_" + io::format_double(cell.value);
    for (std::size_t r = 0; r < cell.result.manifests.size(); ++r) {
      cell.result.manifests[r].save(dir / vdir / ("run_" + std::to_string(r)) /
                                    "manifest.json");
    }
    for (const std::string& err : cell.result.errors) {
      log << "warning: " << pname << "=" << cell.value << " " << err << "\n";
    }
    log << pname << "=" << cell.value << ": mise " << cell.result.mean << " +- "
        << cell.result.stddev << "\n";
  }
  io::atomic_write(dir / "sweep.csv", report::sweep_csv(rows));
  io::atomic_write(dir / "sweep.svg",
                   report::sweep_svg("MISE vs " + pname + " (" + cfg.spec.name + ")", pname,
                                     rows));
  log << "wrote " << (dir / "sweep.csv").string() << " and " << (dir / "sweep.svg").string()
      << "\n";
}

void cmd_report(const std::vector<std::string>& run_dirs, const GlobalOpts& opts,
                std::ostream& log) {
  std::vector<fs::path> manifest_paths;
  for (const std::string& d : run_dirs) {
    if (!fs::exists(d)) {
      throw ConfigError("report: no such directory: " + d);
    }
    if (fs::is_regular_file(d)) {
      manifest_paths.emplace_back(d);
      continue;
    }
    for (const auto& entry : fs::recursive_directory_iterator(d)) {
      if (entry.is_regular_file() && entry.path().filename() == "manifest.json") {
        manifest_paths.push_back(entry.path());
      }
    }
  }
  std::sort(manifest_paths.begin(), manifest_paths.end());
  if (opts.dry_run) {
    log << "dry-run: found " << manifest_paths.size() << " manifests\n";
    return;
  }
  std::vector<train_eval::RunManifest> manifests;
  for (const fs::path& p : manifest_paths) {
    try {
      manifests.push_back(train_eval::RunManifest::load(p));
    } catch (const std::exception& e) {
      log << "warning: skipping corrupt manifest " << p.string() << ": " << e.what() << "\n";
    }
  }
  if (manifests.empty()) {
    throw RuntimeError("report: no readable manifests under the given directories");
  }
  const fs::path out = opts.out_dir ? fs::path(*opts.out_dir) / "report.md"
                                    : fs::path("report.md");
  io::atomic_write(out, report::report_md(manifests));
  log << "wrote " << out.string() << " (" << manifests.size() << " runs)\n";
}

}  // namespace dbrlab::cli
