#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cforest/conformal.hpp"
#include "cforest/error.hpp"
#include "cforest/metrics.hpp"
#include "cforest/rng.hpp"
#include "cforest/synthetic.hpp"

using namespace cforest;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Dataset constant_regression(std::size_t n, double value, std::uint64_t seed) {
  LinearGenerator gen{.n_features = 3, .noise = 1.0, .seed = seed};
  Dataset d = gen.sample(n, 0);
  std::fill(d.targets.begin(), d.targets.end(), value);
  return d;
}

Hyperparams small_forest(int trees) {
  Hyperparams hp;
  hp.n_estimators = trees;
  return hp;
}

Tree constant_tree(double v, std::size_t n_features) {
  Tree t;
  t.nodes = {TreeNode{}};
  t.values = {v};
  t.n_features = n_features;
  return t;
}

}  // namespace

TEST_CASE("split conformal regression") {
  SUBCASE("exact model gives zero scores and point intervals") {
    auto train = constant_regression(30, 3.0, 1);
    auto calib = constant_regression(20, 3.0, 2);
    auto sc = calibrate_split(train, calib, small_forest(10), RapsParams{}, 5, 1);
    for (double s : sc.calibration.sorted_scores) CHECK(s == 0.0);
    CHECK(sc.calibration.tau_for(0.1) == 0.0);
    auto iv = predict_intervals_split(sc, calib.features, 0.1);
    for (const auto& v : iv) {
      CHECK(v.lo == 3.0);
      CHECK(v.hi == 3.0);
    }
  }
  SUBCASE("interval is prediction plus or minus tau") {
    SplitConformal sc;
    sc.model.task = Task::Regression;
    sc.model.n_features = 1;
    sc.model.n_train = 1;
    sc.model.trees = {constant_tree(10.0, 1)};
    sc.model.in_bag = {Bitmap(1)};
    sc.calibration.sorted_scores = std::vector<double>(9, 2.0);
    const double x[] = {0.0};
    auto iv = predict_interval_split(sc, x, 0.1);
    CHECK(iv.lo == 8.0);
    CHECK(iv.hi == 12.0);
    // ceil(0.95 * 10) = 10 > 9 calibration scores
    auto wide = predict_interval_split(sc, x, 0.05);
    CHECK(wide.lo == -kInf);
    CHECK(wide.hi == kInf);
    CHECK_FALSE(wide.bounded());
  }
  SUBCASE("coverage over fresh test data") {
    LinearGenerator gen{.n_features = 5, .noise = 1.0, .seed = 77};
    double total = 0.0;
    const int seeds = 50;
    for (int s = 0; s < seeds; ++s) {
      const auto us = static_cast<std::uint64_t>(s);
      auto train = gen.sample(200, 3 * us);
      auto calib = gen.sample(100, 3 * us + 1);
      auto test = gen.sample(200, 3 * us + 2);
      auto sc = calibrate_split(train, calib, small_forest(50), RapsParams{}, us);
      total += regression_coverage(predict_intervals_split(sc, test.features, 0.1), test.targets);
    }
    CHECK(total / seeds >= 0.88);
  }
  SUBCASE("task mismatch") {
    auto train = constant_regression(20, 1.0, 3);
    auto sc = calibrate_split(train, train, small_forest(3), RapsParams{}, 1);
    CHECK_THROWS_AS(predict_set_split(sc, train.features, 0.1, 0), Error);
  }
}

TEST_CASE("split conformal classification") {
  BlobsGenerator gen{.n_classes = 4, .n_features = 3, .cluster_std = 2.5, .center_box = 5.0, .seed = 12};
  auto train = gen.sample(120, 1);
  auto calib = gen.sample(80, 2);
  auto test = gen.sample(60, 3);

  SUBCASE("non-randomized aps scores are mass through the true class") {
    RapsParams params{.randomized = false};
    auto sc = calibrate_split(train, calib, small_forest(20), params, 9);
    CHECK(sc.calibration.score_kind == ScoreKind::Aps);
    auto probs = predict_forest(sc.model, calib.features);
    std::vector<double> expected;
    for (std::size_t i = 0; i < calib.size(); ++i) {
      auto sp = sort_probs(probs.row(i));
      expected.push_back(sp.cumsum[static_cast<std::size_t>(sp.rank_of[static_cast<std::size_t>(calib.label(i))] - 1)]);
    }
    std::sort(expected.begin(), expected.end());
    CHECK(sc.calibration.sorted_scores == expected);
  }
  SUBCASE("calibration u is keyed by calibration index") {
    RapsParams params{.randomized = true};
    auto sc = calibrate_split(train, calib, small_forest(20), params, 9);
    auto probs = predict_forest(sc.model, calib.features);
    std::vector<double> expected;
    for (std::size_t i = 0; i < calib.size(); ++i) {
      expected.push_back(
          aps_score(sort_probs(probs.row(i)), calib.label(i), counter_uniform(9, Stream::Calibration, i)));
    }
    std::sort(expected.begin(), expected.end());
    CHECK(sc.calibration.sorted_scores == expected);
  }
  SUBCASE("maximal threshold lists every class") {
    RapsParams params{.k_star = 1, .lambda_star = 0.2, .randomized = false};
    auto sc = calibrate_split(train, calib, small_forest(20), params, 9);
    sc.calibration.sorted_scores.assign(5, 1.0 + 0.2 * 3);
    auto sets = predict_set_split(sc, test.features, 0.5, 4);
    for (std::size_t j = 0; j < sets.size(); ++j) CHECK(sets.sets.row_size(j) == 4);
  }
  SUBCASE("thread count does not change sets") {
    auto sc = calibrate_split(train, calib, small_forest(20), RapsParams{.k_star = 2, .lambda_star = 0.1}, 9, 1);
    auto sc3 = calibrate_split(train, calib, small_forest(20), RapsParams{.k_star = 2, .lambda_star = 0.1}, 9, 3);
    CHECK(sc.calibration.sorted_scores == sc3.calibration.sorted_scores);
    CHECK(predict_set_split(sc, test.features, 0.1, 4, 1).sets == predict_set_split(sc3, test.features, 0.1, 4, 3).sets);
  }
}

TEST_CASE("fold assignment") {
  SUBCASE("K = 2 over 4 samples") {
    auto folds = assign_folds(4, 2, 3);
    CHECK(std::count(folds.begin(), folds.end(), 0U) == 2);
    CHECK(std::count(folds.begin(), folds.end(), 1U) == 2);
  }
  SUBCASE("sizes differ by at most one") {
    for (std::size_t n = 5; n < 40; n += 3) {
      for (std::size_t K = 2; K <= n && K <= 9; ++K) {
        auto folds = assign_folds(n, K, n * 31 + K);
        std::vector<std::size_t> sizes(K, 0);
        for (auto f : folds) sizes[f]++;
        auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        CHECK(*hi - *lo <= 1);
        CHECK(*lo >= 1);
      }
    }
  }
  SUBCASE("K = n gives singleton folds") {
    auto folds = assign_folds(7, 7, 1);
    auto sorted = folds;
    std::sort(sorted.begin(), sorted.end());
    for (std::uint32_t k = 0; k < 7; ++k) CHECK(sorted[k] == k);
  }
  SUBCASE("out of range") {
    CHECK_THROWS_AS(assign_folds(5, 6, 0), Error);
    CHECK_THROWS_AS(assign_folds(5, 1, 0), Error);
  }
}

TEST_CASE("cv+ scores use the out-of-fold model") {
  LinearGenerator gen{.n_features = 2, .noise = 0.5, .seed = 4};
  auto train = gen.sample(4, 1);
  auto cal = calibrate_cv(train, 2, small_forest(5), RapsParams{}, 6);
  CHECK(cal.fold_models.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) CHECK(cal.fold_models[k].n_train == 2);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& model = cal.fold_models[cal.fold_of[i]];
    Matrix x(1, 2, std::vector<double>(train.features.row(i).begin(), train.features.row(i).end()));
    CHECK(cal.scores[i] == std::abs(train.targets[i] - predict_forest(model, x)(0, 0)));
  }
}

TEST_CASE("number of bootstraps") {
  SUBCASE("m = 0 keeps every tree") {
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(sample_num_bootstraps(37, 50, 0, s) == 37);
  }
  SUBCASE("large n at fixed m keeps nearly every tree") {
    CHECK(sample_num_bootstraps(100, 10'000'000, 5, 1) >= 99);
  }
  SUBCASE("never zero") {
    for (std::uint64_t s = 0; s < 50; ++s) CHECK(sample_num_bootstraps(1, 5, 50, s) == 1);
  }
  SUBCASE("deterministic under a seed") {
    CHECK(sample_num_bootstraps(400, 200, 200, 8) == sample_num_bootstraps(400, 200, 200, 8));
  }
}

TEST_CASE("jackknife+ after bootstrap") {
  SUBCASE("single tree: in-bag samples are inactive") {
    LinearGenerator gen{.n_features = 2, .noise = 0.5, .seed = 4};
    auto train = gen.sample(30, 2);
    auto cal = fit_jab(train, 1, 0, false, small_forest(1), 3);
    REQUIRE(cal.model.n_trees() == 1);
    for (std::size_t i = 0; i < 30; ++i) {
      const bool active = std::find(cal.active.begin(), cal.active.end(), i) != cal.active.end();
      CHECK(active == !cal.model.in_bag[0].test(i));
    }
    CHECK(cal.n_inactive() == cal.oob.empty.size());
  }
  SUBCASE("exact model gives zero residuals") {
    auto train = constant_regression(40, -2.0, 5);
    auto cal = calibrate_jab(train, 20, 0, true, small_forest(1), RapsParams{}, 7);
    for (double r : cal.scores) CHECK(r == 0.0);
  }
  SUBCASE("scores average each sample's out-of-bag trees") {
    LinearGenerator gen{.n_features = 3, .noise = 1.0, .seed = 9};
    auto train = gen.sample(25, 1);
    auto cal = calibrate_jab(train, 15, 0, false, small_forest(1), RapsParams{}, 2);
    for (std::size_t a = 0; a < cal.active.size(); ++a) {
      const std::size_t i = cal.active[a];
      double sum = 0.0;
      for (auto t : cal.oob.sets[i]) sum += predict_tree(cal.model.trees[t], train.features.row(i))[0];
      CHECK(cal.scores[a] == std::abs(train.targets[i] - sum / static_cast<double>(cal.oob.sets[i].size())));
    }
  }
  SUBCASE("every sample in bag is an error") {
    Dataset d;
    d.features = Matrix(1, 1, 0.0);
    d.targets = {1.0};
    CHECK_THROWS_AS(fit_jab(d, 5, 0, false, small_forest(1), 0), Error);
  }
}

TEST_CASE("cross-conformal intervals") {
  SUBCASE("hand example") {
    Matrix loo(3, 1, 5.0);
    const double r[] = {1.0, 1.0, 1.0};
    auto iv = intervals_from_leave_out(loo, r, 0.5);
    CHECK(iv[0].lo == 4.0);
    CHECK(iv[0].hi == 6.0);
  }
  SUBCASE("zero residuals collapse to the common prediction") {
    Matrix loo(19, 2, 7.5);
    std::vector<double> r(19, 0.0);
    auto iv = intervals_from_leave_out(loo, r, 0.1);
    CHECK(iv[0] == PredictionInterval{7.5, 7.5});
    // floor(0.01 * 20) = 0 and ceil(0.99 * 20) = 20 > 19
    auto wide = intervals_from_leave_out(loo, r, 0.01);
    CHECK(wide[1] == PredictionInterval{-kInf, kInf});
  }
  SUBCASE("matches a per-column full sort") {
    std::mt19937_64 eng(6);
    std::normal_distribution<double> normal;
    Matrix loo(23, 4);
    std::vector<double> r(23);
    for (auto& v : loo.data()) v = normal(eng);
    for (auto& v : r) v = std::abs(normal(eng));
    auto iv = intervals_from_leave_out(loo, r, 0.2);
    for (std::size_t j = 0; j < 4; ++j) {
      std::vector<double> lo, hi;
      for (std::size_t i = 0; i < 23; ++i) {
        lo.push_back(loo(i, j) - r[i]);
        hi.push_back(loo(i, j) + r[i]);
      }
      std::sort(lo.begin(), lo.end());
      std::sort(hi.begin(), hi.end());
      CHECK(iv[j].lo == lo[(2 * 24) / 10 - 1]);
      CHECK(iv[j].hi == hi[(8 * 24 + 9) / 10 - 1]);
    }
  }
}

TEST_CASE("sets from p-values") {
  Matrix p(3, 3, std::vector<double>{0.5, 0.05, 0.2, 0.01, 0.02, 0.02, 0.0, 0.0, 0.0});
  auto sets = sets_from_pvalues(p, 0.1, true);
  CHECK(sets.classes(0) == std::vector<int>{0, 2});
  CHECK(sets.row_size(1) == 0);
  auto forced = sets_from_pvalues(p, 0.1, false);
  CHECK(forced.classes(1) == std::vector<int>{1});
  CHECK(forced.classes(2) == std::vector<int>{0});
}

TEST_CASE("cross-conformal classification") {
  BlobsGenerator gen{.n_classes = 3, .n_features = 2, .cluster_std = 2.0, .center_box = 5.0, .seed = 21};
  auto train = gen.sample(60, 1);
  auto test = gen.sample(25, 2);
  RapsParams params{.k_star = 1, .lambda_star = 0.1};

  SUBCASE("chunking and threads leave p-values unchanged") {
    auto cv = calibrate_cv(train, 4, small_forest(8), params, 3);
    auto full = cross_pvalues(cv, test.features, 5, 1);
    CHECK(cross_pvalues(cv, test.features, 5, 2, 7) == full);
    CHECK(cross_pvalues(cv, test.features, 5, 0, 1) == full);
    auto jab = calibrate_jab(train, 30, 0, true, small_forest(1), params, 3);
    auto jfull = cross_pvalues(jab, test.features, 5, 1);
    CHECK(cross_pvalues(jab, test.features, 5, 3, 4) == jfull);
  }
  SUBCASE("p-values follow the count definition") {
    auto jab = calibrate_jab(train, 30, 0, true, small_forest(1), params, 3);
    auto probs = leave_out_probabilities(jab, test.features);
    auto p = cross_pvalues(jab, test.features, 5);
    for (std::size_t j = 0; j < test.size(); ++j) {
      const double u = counter_uniform(5, Stream::Test, j);
      for (int y = 0; y < 3; ++y) {
        std::size_t count = 0;
        for (std::size_t a = 0; a < jab.active.size(); ++a) {
          auto sp = sort_probs(probs.slice(a, j));
          count += jab.scores[a] >= raps_score(sp, y, u, params) ? 1 : 0;
        }
        CHECK(p(j, static_cast<std::size_t>(y)) == doctest::Approx(count / static_cast<double>(jab.active.size())));
      }
    }
  }
  SUBCASE("sets never empty when forbidden") {
    auto cv = calibrate_cv(train, 3, small_forest(8), RapsParams{.allow_empty_sets = false}, 3);
    auto sets = predict_set_cross(cv, test.features, 0.5, 2);
    for (std::size_t j = 0; j < sets.size(); ++j) CHECK(sets.sets.row_size(j) >= 1);
  }
}

TEST_CASE("raps parameter search") {
  SUBCASE("true label always ranked first") {
    Matrix probs(40, 4, 0.0);
    std::vector<int> labels(40);
    for (std::size_t i = 0; i < 40; ++i) {
      labels[i] = static_cast<int>(i % 4);
      probs(i, i % 4) = 0.7;
      for (std::size_t c = 0; c < 4; ++c) {
        if (c != i % 4) probs(i, c) = 0.1;
      }
    }
    auto params = search_k_and_lambda(probs, labels, 0.1, true, true, 3);
    CHECK(params.k_star == 1);
  }
  SUBCASE("ties in set size keep the smallest lambda") {
    Matrix probs(30, 3, 0.0);
    std::vector<int> labels(30);
    for (std::size_t i = 0; i < 30; ++i) {
      labels[i] = static_cast<int>(i % 3);
      probs(i, i % 3) = 1.0;
    }
    auto params = search_k_and_lambda(probs, labels, 0.1, true, true, 3);
    CHECK(params.k_star == 1);
    CHECK(params.lambda_star == 0.001);
  }
  SUBCASE("small tuning sets are rejected") {
    Matrix probs(5, 2, 0.5);
    std::vector<int> labels(5, 0);
    CHECK_THROWS_AS(search_k_and_lambda(probs, labels, 0.1, true, true, 0), Error);
  }
}
