#include "dbrlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "dbrlab/io.hpp"

namespace dbrlab::report {

namespace {

std::string fmt(double v, int prec = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
  return buf;
}

}  // namespace

std::string bench_results_csv(const std::vector<BenchRow>& rows) {
  std::string out = kBenchCsvHeader;
  out.push_back('\n');
  for (const BenchRow& r : rows) {
    out += r.dataset + "," + r.mode + "," + io::format_double(r.alpha) + "," +
           std::to_string(r.m) + "," + std::to_string(r.repr_dim) + "," + std::to_string(r.seed) +
           "," + io::format_double(r.mise) + "\n";
  }
  return out;
}

std::string bench_summary_md(const std::string& dataset,
                             const std::vector<BenchSummaryRow>& rows) {
  std::string out = "# Benchmark: " + dataset + "\n\n";
  out += "| method | MISE (mean ± std) | runs |\n";
  out += "|---|---|---|\n";
  for (const BenchSummaryRow& r : rows) {
    std::string label = r.mode == "full" ? "CRNet" : (r.mode == "no_br" ? "w/o BR" : "w/o PR");
    out += "| " + label + " | " + fmt(r.mean) + " ± " + fmt(r.stddev);
    if (r.degenerate_std) out += " (single run; std not meaningful)";
    out += " | " + std::to_string(r.runs) + " |\n";
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = kSweepCsvHeader;
  out.push_back('\n');
  for (const SweepRow& r : rows) {
    out += r.parameter + "," + io::format_double(r.value) + "," + io::format_double(r.mean) +
           "," + io::format_double(r.stddev) + "," + std::to_string(r.runs) + "\n";
  }
  return out;
}

std::string sweep_svg(const std::string& title, const std::string& x_label,
                      const std::vector<SweepRow>& rows) {
  const double width = 640, height = 420;
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double x_min = rows.front().value, x_max = rows.front().value;
  double y_min = 0.0, y_max = 0.0;
  bool first = true;
  for (const SweepRow& r : rows) {
    x_min = std::min(x_min, r.value);
    x_max = std::max(x_max, r.value);
    const double lo = r.mean - r.stddev, hi = r.mean + r.stddev;
    if (first) {
      y_min = lo;
      y_max = hi;
      first = false;
    } else {
      y_min = std::min(y_min, lo);
      y_max = std::max(y_max, hi);
    }
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  auto px = [&](double v) { return ml + (v - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double v) { return mt + ph - (v - y_min) / (y_max - y_min) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << title << "</text>\n";
  // axes
  s << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
    << mt + ph << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
    << "\" stroke=\"black\"/>\n";
  // ticks
  for (int k = 0; k <= 4; ++k) {
    const double yv = y_min + (y_max - y_min) * k / 4.0;
    s << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(yv) << "\" x2=\"" << ml << "\" y2=\""
      << py(yv) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
      << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv, 3) << "</text>\n";
    const double xv = x_min + (x_max - x_min) * k / 4.0;
    s << "<line x1=\"" << px(xv) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(xv) << "\" y2=\""
      << mt + ph + 4 << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << px(xv) << "\" y=\"" << mt + ph + 18
      << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv, 3) << "</text>\n";
  }
  s << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
    << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
  s << "<text x=\"18\" y=\"" << mt + ph / 2
    << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " << mt + ph / 2
    << ")\">MISE</text>\n";
  // error bars
  for (const SweepRow& r : rows) {
    const double x = px(r.value);
    s << "<line x1=\"" << x << "\" y1=\"" << py(r.mean - r.stddev) << "\" x2=\"" << x
      << "\" y2=\"" << py(r.mean + r.stddev) << "\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n";
  }
  // mean polyline + points
  s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (const SweepRow& r : rows) {
    s << px(r.value) << "," << py(r.mean) << " ";
  }
  s << "\"/>\n";
  for (const SweepRow& r : rows) {
    s << "<circle cx=\"" << px(r.value) << "\" cy=\"" << py(r.mean)
      << "\" r=\"3.5\" fill=\"steelblue\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string report_md(const std::vector<train_eval::RunManifest>& manifests) {
  std::map<std::string, std::vector<const train_eval::RunManifest*>> groups;
  for (const auto& m : manifests) {
    std::string dataset = "unknown";
    if (m.config.contains("dataset") && m.config["dataset"].contains("name")) {
      dataset = m.config["dataset"]["name"].get<std::string>();
    }
    groups[dataset].push_back(&m);
  }
  std::string out = "# Run report\n";
  for (auto& [dataset, runs] : groups) {
    std::stable_sort(runs.begin(), runs.end(),
                     [](const train_eval::RunManifest* a, const train_eval::RunManifest* b) {
                       auto mode = [](const train_eval::RunManifest* m) {
                         return m->config.contains("train")
                                    ? m->config["train"].value("mode", std::string("full"))
                                    : std::string("full");
                       };
                       if (mode(a) != mode(b)) return mode(a) < mode(b);
                       return a->seed < b->seed;
                     });
    out += "\n## " + dataset + "\n\n";
    out += "| mode | alpha | m | K | seed | test MISE | selected epoch | balancing pdcor(X,T | g(phi(X))) init -> selected | prognostic pdcor(X,Y | phi(X)) init -> selected |\n";
    out += "|---|---|---|---|---|---|---|---|---|\n";
    for (const train_eval::RunManifest* m : runs) {
      const auto& c = m->config;
      auto train_field = [&c](const char* key, double fallback) {
        return c.contains("train") ? c["train"].value(key, fallback) : fallback;
      };
      std::string mode =
          c.contains("train") ? c["train"].value("mode", std::string("full")) : "full";
      const double alpha = train_field("alpha", 0.0);
      const int mneg = static_cast<int>(train_field("m", 0.0));
      const int K = c.contains("model") ? c["model"].value("repr_dim", 0) : 0;
      out += "| " + mode + " | " + fmt(alpha) + " | " + std::to_string(mneg) + " | " +
             std::to_string(K) + " | " + std::to_string(m->seed) + " | " + fmt(m->test_mise, 6) +
             " | " + std::to_string(m->selected_epoch) + " | " +
             fmt(m->balance_init.balancing_g) + " -> " + fmt(m->balance_selected.balancing_g) +
             " | " + fmt(m->balance_init.prognostic_phi) + " -> " +
             fmt(m->balance_selected.prognostic_phi) + " |\n";
    }
  }
  return out;
}

}  // namespace dbrlab::report
