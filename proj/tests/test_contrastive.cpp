#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "dbrlab/contrastive.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace dbrlab;
using ad::Tape;
using ad::Var;
using dep::Centering;
using testutil::from_rows;
using testutil::random_matrix;

TEST_CASE("shuffle_negatives") {
  rng::Engine eng(11);
  Mat x = random_matrix(8, 3, eng);
  SUBCASE("m = 0 gives an empty set") {
    rng::Engine e(1);
    contrastive::NegativeSet negs = contrastive::shuffle_negatives(x, 0, e);
    CHECK(negs.m == 0);
    CHECK(negs.shuffled.empty());
  }
  SUBCASE("each shuffle preserves the row multiset") {
    rng::Engine e(2);
    contrastive::NegativeSet negs = contrastive::shuffle_negatives(x, 3, e);
    REQUIRE(negs.shuffled.size() == 3);
    auto sorted_rows = [](const Mat& m) {
      std::vector<std::vector<double>> rows;
      for (int i = 0; i < m.rows(); ++i) {
        rows.emplace_back(m.row(i).begin(), m.row(i).end());
      }
      std::sort(rows.begin(), rows.end());
      return rows;
    };
    const auto orig = sorted_rows(x);
    for (const auto& s : negs.shuffled) {
      CHECK(sorted_rows(s) == orig);
    }
  }
  SUBCASE("fixed seed reproduces the permutations") {
    rng::Engine e1(3), e2(3);
    contrastive::NegativeSet a = contrastive::shuffle_negatives(x, 2, e1);
    contrastive::NegativeSet b = contrastive::shuffle_negatives(x, 2, e2);
    CHECK(a.permutations == b.permutations);
  }
  SUBCASE("batch too small") {
    Mat tiny = random_matrix(3, 2, eng);
    rng::Engine e(4);
    CHECK_THROWS_WITH_AS(contrastive::shuffle_negatives(tiny, 1, e),
                         doctest::Contains("batch too small"), RuntimeError);
  }
}

namespace {

// repr that ignores its input and returns canned matrices in call order;
// lets a test pin the conditioning representations directly
contrastive::ReprFn canned_repr(std::vector<Mat> outputs) {
  auto state = std::make_shared<std::pair<std::vector<Mat>, std::size_t>>(std::move(outputs), 0);
  return [state](Tape& tape, const Mat&) {
    return tape.input(state->first.at(state->second++));
  };
}

}  // namespace

TEST_CASE("cr_loss") {
  Mat x = from_rows({{1.75, -0.5, 0.0}, {0.5, -0.75, 0.0}, {-0.0, -1.75, 1.0},
                     {0.5, -0.75, -0.25}, {0.5, -0.25, -0.25}, {-1.5, 0.5, 0.0},
                     {0.25, -1.5, 1.75}, {0.25, -0.5, 2.0}});
  Mat t = from_rows({{-0.0}, {-1.5}, {-0.5}, {-2.25}, {1.0}, {-0.5}, {-0.75}, {1.0}});
  Mat z_pos = from_rows({{-1.75, 0.5}, {-2.0, -0.75}, {-1.25, 1.5}, {1.75, -0.25},
                         {0.75, -0.25}, {0.5, -0.75}, {-1.75, -1.75}, {0.5, 2.25}});
  Mat z_neg1 = from_rows({{0.25, -0.5}, {2.0, 0.25}, {0.0, 0.25}, {-0.25, -0.25},
                          {-1.5, 0.5}, {-0.0, 1.25}, {-0.25, -2.0}, {-0.0, 1.75}});
  Mat z_neg2 = from_rows({{-0.5, -1.0}, {-1.25, -1.0}, {-0.25, -1.25}, {1.5, -0.25},
                          {0.0, 1.5}, {1.5, -0.25}, {0.25, 0.75}, {-0.25, -1.75}});

  SUBCASE("m = 0 reduces to the positive measure") {
    Tape tape;
    Var loss = contrastive::cr_loss(tape, x, t, canned_repr({z_pos}),
                                    contrastive::NegativeSet{}, Centering::u_centered);
    CHECK(tape.scalar(loss) ==
          doctest::Approx(dep::pdcor(x, t, z_pos, Centering::u_centered)).epsilon(1e-14));
    // frozen positive term from the independent numpy evaluation
    CHECK(tape.scalar(loss) == doctest::Approx(0.087764491403803727).epsilon(1e-12));
  }

  SUBCASE("identity permutation makes the loss exactly zero for m = 1") {
    contrastive::NegativeSet negs;
    negs.m = 1;
    std::vector<int> id(8);
    for (int i = 0; i < 8; ++i) id[static_cast<std::size_t>(i)] = i;
    negs.permutations.push_back(id);
    negs.shuffled.push_back(x);
    Tape tape;
    // both calls see the same covariates, so one canned output per call
    Var loss = contrastive::cr_loss(tape, x, t, canned_repr({z_pos, z_pos}), negs,
                                    Centering::u_centered);
    CHECK(tape.scalar(loss) == 0.0);
  }

  SUBCASE("m = 2 instance matches the hand-composed evaluation (frozen numpy values)") {
    contrastive::NegativeSet negs;
    negs.m = 2;
    negs.shuffled = {x, x};  // conditioning pinned by the canned repr
    Tape tape;
    Var loss = contrastive::cr_loss(tape, x, t, canned_repr({z_pos, z_neg1, z_neg2}), negs,
                                    Centering::u_centered);
    CHECK(tape.scalar(loss) == doctest::Approx(-0.7169697094028622).epsilon(1e-12));
    Tape tape2;
    Var loss2 = contrastive::cr_loss(tape2, x, t, canned_repr({z_pos, z_neg1, z_neg2}), negs,
                                     Centering::double_centered);
    CHECK(tape2.scalar(loss2) == doctest::Approx(-0.69136574780836657).epsilon(1e-12));
  }

  SUBCASE("matches the oracle composition with a real linear representation") {
    rng::Engine eng(909);
    for (int rep = 0; rep < 10; ++rep) {
      Mat xb = random_matrix(8, 3, eng);
      Mat tb = random_matrix(8, 1, eng);
      Mat w = random_matrix(3, 2, eng);
      rng::Engine neg_eng(1000 + static_cast<std::uint64_t>(rep));
      contrastive::NegativeSet negs = contrastive::shuffle_negatives(xb, 2, neg_eng);
      contrastive::ReprFn repr = [&w](Tape& tp, const Mat& xin) {
        return tp.matmul(tp.input(xin), tp.input(w));
      };
      Tape tape;
      Var loss = contrastive::cr_loss(tape, xb, tb, repr, negs, Centering::u_centered);
      std::vector<Mat> z_negs;
      for (const Mat& s : negs.shuffled) z_negs.push_back(s * w);
      const double expected = oracle::cr_loss(xb, tb, xb * w, z_negs, true);
      CHECK(tape.scalar(loss) == doctest::Approx(expected).epsilon(1e-10));
    }
  }

  SUBCASE("decomposes exactly into positive minus log-sum-exp of negatives") {
    rng::Engine eng(77);
    Mat xb = random_matrix(10, 2, eng);
    Mat tb = random_matrix(10, 1, eng);
    Mat w = random_matrix(2, 2, eng);
    rng::Engine neg_eng(78);
    contrastive::NegativeSet negs = contrastive::shuffle_negatives(xb, 3, neg_eng);
    contrastive::ReprFn repr = [&w](Tape& tp, const Mat& xin) {
      return tp.matmul(tp.input(xin), tp.input(w));
    };
    Tape tape;
    const double loss =
        tape.scalar(contrastive::cr_loss(tape, xb, tb, repr, negs, Centering::u_centered));
    const double pos = dep::pdcor(xb, tb, xb * w, Centering::u_centered);
    double sum_exp = 0.0;
    for (const Mat& s : negs.shuffled) {
      sum_exp += std::exp(dep::pdcor(xb, tb, s * w, Centering::u_centered));
    }
    CHECK(loss == doctest::Approx(pos - std::log(sum_exp)).epsilon(1e-12));
  }

  SUBCASE("bounds: positive term in [0,1]; loss within [-log m - 1, 1]") {
    rng::Engine eng(314);
    for (int rep = 0; rep < 40; ++rep) {
      const int b = 8 + static_cast<int>(eng.integer(8));
      const int m = 1 + static_cast<int>(eng.integer(4));
      Mat xb = random_matrix(b, 3, eng);
      Mat tb = random_matrix(b, 1, eng);
      Mat w = random_matrix(3, 2, eng);
      rng::Engine neg_eng(5000 + static_cast<std::uint64_t>(rep));
      contrastive::NegativeSet negs = contrastive::shuffle_negatives(xb, m, neg_eng);
      contrastive::ReprFn repr = [&w](Tape& tp, const Mat& xin) {
        return tp.matmul(tp.input(xin), tp.input(w));
      };
      Tape tape;
      const double loss =
          tape.scalar(contrastive::cr_loss(tape, xb, tb, repr, negs, Centering::u_centered));
      CHECK(loss >= -std::log(static_cast<double>(m)) - 1.0 - 1e-12);
      CHECK(loss <= 1.0 + 1e-12);
    }
  }

  SUBCASE("deterministic for a fixed seed") {
    rng::Engine eng(55);
    Mat xb = random_matrix(8, 3, eng);
    Mat tb = random_matrix(8, 1, eng);
    Mat w = random_matrix(3, 2, eng);
    contrastive::ReprFn repr = [&w](Tape& tp, const Mat& xin) {
      return tp.matmul(tp.input(xin), tp.input(w));
    };
    auto run = [&]() {
      rng::Engine neg_eng(42);
      contrastive::NegativeSet negs = contrastive::shuffle_negatives(xb, 2, neg_eng);
      Tape tape;
      return tape.scalar(contrastive::cr_loss(tape, xb, tb, repr, negs,
                                              Centering::u_centered));
    };
    CHECK(run() == run());
  }

  SUBCASE("batch mismatch is an error") {
    Mat bad_t = from_rows({{1.0}, {2.0}, {3.0}, {4.0}});
    Tape tape;
    CHECK_THROWS_WITH_AS(contrastive::cr_loss(tape, x, bad_t, canned_repr({z_pos}),
                                              contrastive::NegativeSet{},
                                              Centering::u_centered),
                         doctest::Contains("batch mismatch"), RuntimeError);
  }
}
