#include <doctest.h>

#include <cmath>

#include "dbrlab/train_eval.hpp"
#include "test_helpers.hpp"

using namespace dbrlab;
using train_eval::ExperimentSpec;
using train_eval::MiseSpec;
using train_eval::Mode;
using train_eval::TrainConfig;

namespace {

model::CRNetConfig tiny_net() {
  model::CRNetConfig net;
  net.repr_dim = 8;
  net.treat_repr_dim = 4;
  net.proj_dim = 4;
  net.phi_hidden = {16};
  net.psi_hidden = {8};
  net.g_hidden = {};
  net.h_hidden = {16};
  return net;
}

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  spec.kind = ExperimentSpec::Kind::synthetic;
  spec.name = "unit";
  spec.n = 200;
  spec.p = 12;
  spec.q = 1;
  spec.split_sizes = {120, 48, 32};
  spec.dataset_seed = 3;
  spec.net = tiny_net();
  spec.train.batch_size = 32;
  spec.train.epochs = 6;
  spec.train.m = 1;
  spec.train.alpha = 0.5;
  spec.train.patience = 0;  // run all epochs in unit tests
  return spec;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.batch_size = 4;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc.batch_size = 8;
  tc.alpha = -0.5;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc.alpha = 0.0;
  CHECK_NOTHROW(tc.validate());
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Mat w = Mat::Constant(2, 2, 1.5);
    Mat g = Mat::Zero(2, 2);
    train_eval::AdamState st;
    train_eval::adam_step({&w}, {&g}, st, 1e-3);
    CHECK((w.array() == 1.5).all());
  }
  SUBCASE("single step matches the hand-computed update") {
    Mat w = Mat::Constant(1, 1, 1.0);
    Mat g = Mat::Constant(1, 1, 0.5);
    train_eval::AdamState st;
    train_eval::adam_step({&w}, {&g}, st, 0.1);
    const double expected = 1.0 - 0.1 * 0.5 / (std::sqrt(0.25) + 1e-8);
    CHECK(w(0, 0) == doctest::Approx(expected).epsilon(1e-15));
  }
  SUBCASE("constant gradient drives the step magnitude to lr") {
    Mat w = Mat::Constant(1, 1, 10.0);
    Mat g = Mat::Constant(1, 1, 3.0);
    train_eval::AdamState st;
    double prev = w(0, 0);
    double step = 0.0;
    for (int i = 0; i < 500; ++i) {
      train_eval::adam_step({&w}, {&g}, st, 1e-2);
      step = prev - w(0, 0);
      prev = w(0, 0);
    }
    CHECK(step == doctest::Approx(1e-2).epsilon(1e-6));
  }
}

TEST_CASE("treatment interval") {
  Mat t(5, 1);
  t << 1.0, 3.0, 2.0, 5.0, 4.0;
  MiseSpec spec;
  SUBCASE("empirical range") {
    spec.interval = MiseSpec::Interval::empirical_range;
    auto iv = train_eval::treatment_interval(t, spec);
    CHECK(iv.lo(0) == 1.0);
    CHECK(iv.hi(0) == 5.0);
  }
  SUBCASE("quantiles interpolate the sorted sample") {
    spec.interval = MiseSpec::Interval::quantile;
    spec.quantile_lo = 0.25;
    spec.quantile_hi = 0.75;
    auto iv = train_eval::treatment_interval(t, spec);
    CHECK(iv.lo(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(iv.hi(0) == doctest::Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("mise") {
  datagen::Dataset ds = datagen::make_synthetic(60, 12, 1, 5);
  MiseSpec spec;
  spec.interval = MiseSpec::Interval::empirical_range;
  auto interval = train_eval::treatment_interval(ds.t, spec);
  const Mat x_test = ds.x.topRows(10);

  auto truth_predictor = [&ds](const Mat& x_row, const Mat& grid) {
    return Vec(datagen::outcome_formula(x_row.replicate(grid.rows(), 1), grid, ds.weights));
  };

  SUBCASE("the oracle predictor achieves exactly zero") {
    CHECK(train_eval::mise(truth_predictor, x_test, ds.weights, spec, interval) == 0.0);
  }
  SUBCASE("a constant offset integrates to c^2 (b - a)") {
    const double c = 0.75;
    auto shifted = [&](const Mat& x_row, const Mat& grid) {
      Vec v = truth_predictor(x_row, grid);
      v.array() += c;
      return v;
    };
    const double expected = c * c * (interval.hi(0) - interval.lo(0));
    CHECK(train_eval::mise(shifted, x_test, ds.weights, spec, interval) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("monte carlo agrees on the same constant-offset integrand") {
    MiseSpec mc = spec;
    mc.integration = MiseSpec::Integration::monte_carlo;
    mc.mc_samples = 64;
    const double c = 0.75;
    auto shifted = [&](const Mat& x_row, const Mat& grid) {
      Vec v = truth_predictor(x_row, grid);
      v.array() += c;
      return v;
    };
    const double expected = c * c * (interval.hi(0) - interval.lo(0));
    CHECK(train_eval::mise(shifted, x_test, ds.weights, mc, interval) ==
          doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("empty test set is an error") {
    Mat empty(0, 12);
    CHECK_THROWS_WITH_AS(train_eval::mise(truth_predictor, empty, ds.weights, spec, interval),
                         doctest::Contains("empty"), RuntimeError);
  }
}

TEST_CASE("train") {
  ExperimentSpec spec = tiny_spec();
  datagen::Dataset ds = datagen::make_synthetic(spec.n, spec.p, spec.q, spec.dataset_seed);
  datagen::Split split = datagen::make_split(spec.n, spec.split_sizes, spec.dataset_seed);

  SUBCASE("learning rate zero leaves parameters at their initialization") {
    TrainConfig tc = spec.train;
    tc.epochs = 1;
    tc.learning_rate = 0.0;
    tc.seed = 21;
    train_eval::TrainResult res = train_eval::train(tc, spec.net, ds, split, spec.mise);
    model::CRNetConfig resolved = spec.net;
    resolved.covariate_dim = spec.p;
    resolved.treatment_dim = spec.q;
    model::CRNetModel init = model::init_model(resolved, 21);
    CHECK((res.fitted.net.phi.weights[0] - init.phi.weights[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((res.fitted.net.h.weights[1] - init.h.weights[1]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.manifest.selected_epoch == 0);
  }

  SUBCASE("no_br is bitwise identical to full with alpha zero") {
    TrainConfig a = spec.train;
    a.mode = Mode::no_br;
    a.seed = 33;
    TrainConfig b = spec.train;
    b.mode = Mode::full;
    b.alpha = 0.0;
    b.seed = 33;
    train_eval::TrainResult ra = train_eval::train(a, spec.net, ds, split, spec.mise);
    train_eval::TrainResult rb = train_eval::train(b, spec.net, ds, split, spec.mise);
    CHECK(ra.manifest.results_equal(rb.manifest));
    CHECK((ra.fitted.net.phi.weights[0] - rb.fitted.net.phi.weights[0])
              .cwiseAbs().maxCoeff() == 0.0);
    CHECK(ra.manifest.test_mise == rb.manifest.test_mise);
  }

  SUBCASE("with alpha zero the trajectory ignores the negative-sample count") {
    TrainConfig a = spec.train;
    a.alpha = 0.0;
    a.m = 0;
    a.seed = 44;
    TrainConfig b = a;
    b.m = 5;
    train_eval::TrainResult ra = train_eval::train(a, spec.net, ds, split, spec.mise);
    train_eval::TrainResult rb = train_eval::train(b, spec.net, ds, split, spec.mise);
    CHECK(ra.manifest.results_equal(rb.manifest));
  }

  SUBCASE("selected epoch minimizes validation mse") {
    TrainConfig tc = spec.train;
    tc.seed = 55;
    train_eval::TrainResult res = train_eval::train(tc, spec.net, ds, split, spec.mise);
    const auto& eps = res.manifest.epochs;
    REQUIRE(res.manifest.selected_epoch >= 0);
    const double best = eps[static_cast<std::size_t>(res.manifest.selected_epoch)].val_mse;
    for (const auto& e : eps) {
      CHECK(best <= e.val_mse);
    }
    CHECK(res.manifest.test_mise >= 0.0);
  }

  SUBCASE("replay determinism") {
    TrainConfig tc = spec.train;
    tc.seed = 66;
    train_eval::TrainResult r1 = train_eval::train(tc, spec.net, ds, split, spec.mise);
    train_eval::TrainResult r2 = train_eval::train(tc, spec.net, ds, split, spec.mise);
    CHECK(r1.manifest.results_equal(r2.manifest));
    CHECK(r1.manifest.test_mise == r2.manifest.test_mise);
  }

  SUBCASE("divergence raises a structured error") {
    TrainConfig tc = spec.train;
    tc.optimizer = train_eval::OptimizerKind::sgd;
    tc.learning_rate = 1e18;
    tc.seed = 77;
    CHECK_THROWS_WITH_AS(train_eval::train(tc, spec.net, ds, split, spec.mise),
                         doctest::Contains("diverged"), RuntimeError);
  }

  SUBCASE("no_pr freezes the covariate encoder and projection head after stage 1") {
    TrainConfig a = spec.train;
    a.mode = Mode::no_pr;
    a.stage1_epochs = 3;
    a.epochs = 5;
    a.seed = 88;
    TrainConfig b = a;
    b.epochs = 9;  // more stage-2 epochs must not move phi or g
    train_eval::TrainResult ra = train_eval::train(a, spec.net, ds, split, spec.mise);
    train_eval::TrainResult rb = train_eval::train(b, spec.net, ds, split, spec.mise);
    for (std::size_t l = 0; l < ra.fitted.net.phi.weights.size(); ++l) {
      CHECK((ra.fitted.net.phi.weights[l] - rb.fitted.net.phi.weights[l])
                .cwiseAbs().maxCoeff() == 0.0);
    }
    for (std::size_t l = 0; l < ra.fitted.net.g.weights.size(); ++l) {
      CHECK((ra.fitted.net.g.weights[l] - rb.fitted.net.g.weights[l])
                .cwiseAbs().maxCoeff() == 0.0);
    }
    // outcome path does train in stage 2
    CHECK((ra.fitted.net.h.weights[0] - rb.fitted.net.h.weights[0])
              .cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("replicate") {
  ExperimentSpec spec = tiny_spec();
  spec.train.epochs = 3;
  SUBCASE("single run is flagged with zero std") {
    train_eval::ReplicateResult r = train_eval::replicate(spec, 1, 7, 1);
    CHECK(r.manifests.size() == 1);
    CHECK(r.stddev == 0.0);
    CHECK(r.degenerate_std);
  }
  SUBCASE("identical seed pairs give zero std") {
    train_eval::ReplicateResult r =
        train_eval::replicate_seeded(spec, {{11, 12}, {11, 12}}, 1);
    CHECK(r.manifests.size() == 2);
    CHECK(r.manifests[0].test_mise == r.manifests[1].test_mise);
    CHECK(r.stddev == 0.0);
  }
  SUBCASE("parallel execution reproduces the serial results") {
    train_eval::ReplicateResult serial = train_eval::replicate(spec, 3, 7, 1);
    train_eval::ReplicateResult parallel = train_eval::replicate(spec, 3, 7, 2);
    REQUIRE(serial.manifests.size() == parallel.manifests.size());
    for (std::size_t i = 0; i < serial.manifests.size(); ++i) {
      CHECK(serial.manifests[i].test_mise == parallel.manifests[i].test_mise);
    }
    CHECK(serial.mean == parallel.mean);
  }
  SUBCASE("an unconfigured semi-synthetic source fails every run") {
    ExperimentSpec bad = spec;
    bad.kind = ExperimentSpec::Kind::semi_synthetic;
    CHECK_THROWS_WITH_AS(train_eval::replicate(bad, 2, 7, 1), doctest::Contains("all"),
                         RuntimeError);
  }
}

TEST_CASE("sweep pairs seeds across values") {
  ExperimentSpec spec = tiny_spec();
  spec.train.epochs = 3;
  auto cells = train_eval::sweep(spec, train_eval::SweepParam::alpha, {0.0, 0.5}, 2, 13, 1);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].value == 0.0);

  // the alpha = 0 column equals an explicit no_br replicate on the same seeds
  ExperimentSpec no_br = spec;
  no_br.train.mode = Mode::no_br;
  train_eval::ReplicateResult ref = train_eval::replicate(no_br, 2, 13, 1);
  CHECK(cells[0].result.mean == ref.mean);
  CHECK(cells[0].result.manifests[0].test_mise == ref.manifests[0].test_mise);

  // paired: same train seeds across cells
  CHECK(cells[0].result.train_seeds == cells[1].result.train_seeds);
}
