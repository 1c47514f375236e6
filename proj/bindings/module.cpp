#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dbrlab/config.hpp"
#include "dbrlab/datagen.hpp"
#include "dbrlab/dependence.hpp"
#include "dbrlab/model.hpp"
#include "dbrlab/train_eval.hpp"

namespace py = pybind11;
using namespace dbrlab;

namespace {

dep::Centering mode_of(const std::string& s) { return dep::centering_from_string(s); }

py::object json_to_py(const nlohmann::json& j) {
  py::module_ json_mod = py::module_::import("json");
  return json_mod.attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "dbrlab core: partial distance correlation, CRNet training and benchmark drivers";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<RuntimeError>(m, "RuntimeError", PyExc_RuntimeError);

  // dependence machinery
  m.def("pairwise_euclidean",
        [](const Mat& x) { return dep::pairwise_euclidean(x).entries; },
        py::arg("x"), "Row-pairwise Euclidean distance matrix (requires n >= 4)");
  m.def("center",
        [](const Mat& d, const std::string& mode) {
          return dep::center(dep::DistanceMatrix{d}, mode_of(mode)).entries;
        },
        py::arg("d"), py::arg("mode") = "u");
  m.def("otimes",
        [](const Mat& a, const Mat& b, const std::string& mode) {
          return dep::otimes(dep::CenteredMatrix{a, mode_of(mode)},
                             dep::CenteredMatrix{b, mode_of(mode)});
        },
        py::arg("a"), py::arg("b"), py::arg("mode") = "u");
  m.def("project",
        [](const Mat& a, const Mat& c, const std::string& mode) {
          return dep::project(dep::CenteredMatrix{a, mode_of(mode)},
                              dep::CenteredMatrix{c, mode_of(mode)})
              .entries;
        },
        py::arg("a"), py::arg("c"), py::arg("mode") = "u");
  m.def("pdcor",
        [](const Mat& x, const Mat& t, const Mat& z, const std::string& mode) {
          return dep::pdcor(x, t, z, mode_of(mode));
        },
        py::arg("x"), py::arg("t"), py::arg("z"), py::arg("mode") = "u",
        "Partial distance measure of x and t given z");
  m.def("dcor",
        [](const Mat& x, const Mat& t, const std::string& mode) {
          return dep::dcor(x, t, mode_of(mode));
        },
        py::arg("x"), py::arg("t"), py::arg("mode") = "u");
  m.def("balance_diagnostics",
        [](const Mat& repr, const Mat& x, const Mat& t, const Mat& y, const std::string& mode) {
          dep::BalanceScores s = dep::balance_diagnostics(repr, x, t, y, mode_of(mode));
          return py::make_tuple(s.balancing, s.prognostic);
        },
        py::arg("repr"), py::arg("x"), py::arg("t"), py::arg("y"), py::arg("mode") = "u");

  // data generation
  m.def("make_synthetic",
        [](int n, int p, int q, std::uint64_t seed, double outcome_noise_sd) {
          datagen::Dataset ds = datagen::make_synthetic(n, p, q, seed, outcome_noise_sd);
          py::dict out;
          out["X"] = ds.x;
          out["T"] = ds.t;
          out["Y"] = ds.y;
          out["W"] = ds.weights.w;
          out["W_T"] = ds.weights.w_t;
          out["provenance"] = ds.provenance;
          return out;
        },
        py::arg("n"), py::arg("p"), py::arg("q"), py::arg("seed") = 0,
        py::arg("outcome_noise_sd") = 0.0);
  m.def("true_hdrc",
        [](const Mat& x_row, const Mat& t_row, const Vec& w, const Vec& w_t) {
          datagen::GeneratorWeights gw;
          gw.w = w;
          gw.w_t = w_t;
          return datagen::true_hdrc(x_row, t_row, gw);
        },
        py::arg("x_row"), py::arg("t_row"), py::arg("w"), py::arg("w_t"));
  m.def("make_split",
        [](int n, int train, int val, int test, std::uint64_t seed) {
          datagen::Split s = datagen::make_split(n, {train, val, test}, seed);
          return py::make_tuple(s.train, s.val, s.test);
        },
        py::arg("n"), py::arg("train"), py::arg("val"), py::arg("test"), py::arg("seed") = 0);

  // experiment driver: full config -> run manifest (as a python dict)
  m.def("run_experiment",
        [](const std::string& config_json) {
          config::ExperimentConfig cfg =
              config::parse_experiment_config(nlohmann::json::parse(config_json), ".");
          config::resolve_covariates(cfg.spec, ".");
          train_eval::RunOutput out =
              train_eval::run_single(cfg.spec, cfg.spec.dataset_seed, cfg.spec.train.seed);
          return json_to_py(out.manifest.to_json());
        },
        py::arg("config_json"),
        "Run one training job described by an experiment config (JSON string); returns the "
        "run manifest");

  // checkpoint round trip
  m.def("predict_curve",
        [](const std::string& checkpoint_path, const Mat& x_row, const Mat& t_grid) {
          model::FittedCRNet f = model::load_checkpoint(checkpoint_path);
          return f.predict_curve(x_row, t_grid);
        },
        py::arg("checkpoint_path"), py::arg("x_row"), py::arg("t_grid"));
}
