#pragma once

#include <string>
#include <vector>

#include "dbrlab/train_eval.hpp"

namespace dbrlab::report {

struct BenchRow {
  std::string dataset;
  std::string mode;
  double alpha = 0.0;
  int m = 0;
  int repr_dim = 0;
  std::uint64_t seed = 0;
  double mise = 0.0;
};

inline constexpr const char* kBenchCsvHeader = "dataset,mode,alpha,m,K,seed,mise";
std::string bench_results_csv(const std::vector<BenchRow>& rows);

struct BenchSummaryRow {
  std::string mode;
  double mean = 0.0;
  double stddev = 0.0;
  int runs = 0;
  bool degenerate_std = false;
};
std::string bench_summary_md(const std::string& dataset,
                             const std::vector<BenchSummaryRow>& rows);

inline constexpr const char* kSweepCsvHeader = "parameter,value,mean_mise,std_mise,runs";
struct SweepRow {
  std::string parameter;
  double value = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  int runs = 0;
};
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Static line plot of mean +- std against the swept value.
std::string sweep_svg(const std::string& title, const std::string& x_label,
                      const std::vector<SweepRow>& rows);

// Aggregates run manifests into markdown tables grouped by dataset, with the
// balance diagnostics per run. Regeneration over the same inputs is
// byte-identical.
std::string report_md(const std::vector<train_eval::RunManifest>& manifests);

}  // namespace dbrlab::report
