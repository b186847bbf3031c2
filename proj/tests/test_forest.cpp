#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "cforest/binary_io.hpp"
#include "cforest/error.hpp"
#include "cforest/forest.hpp"
#include "cforest/persistence.hpp"
#include "cforest/synthetic.hpp"

using namespace cforest;

namespace {

Tree leaf_tree(double v) {
  Tree t;
  t.nodes = {TreeNode{}};
  t.values = {v};
  t.width = 1;
  t.n_features = 1;
  return t;
}

// Preorder layout:
//   0: x0 <= 0 ? 1 : 4
//   1: x1 <= 0 ? leaf 1.0 : leaf 2.0
//   4: x1 <= 1 ? 5 : leaf 5.0
//   5: x0 <= 2 ? leaf 3.0 : leaf 4.0
Tree three_deep() {
  Tree t;
  t.width = 1;
  t.n_features = 2;
  t.nodes = {
      {0, 0.0, 1, 4, 0}, {1, 0.0, 2, 3, 0}, {-1, 0, 0, 0, 0}, {-1, 0, 0, 0, 1}, {1, 1.0, 5, 8, 0},
      {0, 2.0, 6, 7, 0}, {-1, 0, 0, 0, 2}, {-1, 0, 0, 0, 3}, {-1, 0, 0, 0, 4},
  };
  t.values = {1.0, 2.0, 3.0, 4.0, 5.0};
  return t;
}

}  // namespace

TEST_CASE("single sample fits a one-leaf stump") {
  Dataset d;
  d.features = Matrix(1, 2, std::vector<double>{0.5, -1.0});
  d.targets = {7.25};
  d.task = Task::Regression;
  Hyperparams hp;
  hp.n_estimators = 1;
  auto model = fit_forest(d, hp, 3, 1);
  REQUIRE(model.n_trees() == 1);
  CHECK(model.trees[0].nodes.size() == 1);
  CHECK(model.trees[0].nodes[0].is_leaf());
  CHECK(model.trees[0].values == std::vector<double>{7.25});
}

TEST_CASE("pure-class data gives one-hot leaves") {
  Dataset d;
  d.features = Matrix(6, 1, std::vector<double>{0, 1, 2, 3, 4, 5});
  d.targets = std::vector<double>(6, 2.0);
  d.task = Task::Classification;
  d.n_classes = 3;
  Hyperparams hp;
  hp.n_estimators = 5;
  auto model = fit_forest(d, hp, 11, 1);
  for (const auto& tree : model.trees) {
    for (std::size_t leaf = 0; leaf < tree.n_leaves(); ++leaf) {
      CHECK(tree.values[leaf * 3 + 0] == 0.0);
      CHECK(tree.values[leaf * 3 + 1] == 0.0);
      CHECK(tree.values[leaf * 3 + 2] == 1.0);
    }
  }
}

TEST_CASE("two-class blobs are recovered on the training points") {
  BlobsGenerator gen{.n_classes = 2, .n_features = 2, .cluster_std = 1.0, .center_box = 5.0, .seed = 7};
  auto d = gen.sample(50, 7);
  Hyperparams hp;
  hp.n_estimators = 100;
  auto model = fit_forest(d, hp, 7);
  auto probs = predict_forest(model, d.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int pred = probs(i, 1) > probs(i, 0) ? 1 : 0;
    correct += pred == d.label(i) ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / 50.0 >= 0.9);
}

TEST_CASE("tree traversal") {
  SUBCASE("stump returns its leaf value") {
    auto t = leaf_tree(3.5);
    const double x[] = {123.0};
    CHECK(predict_tree(t, x)[0] == 3.5);
  }
  SUBCASE("boundary goes left") {
    Tree t;
    t.width = 1;
    t.n_features = 1;
    t.nodes = {{0, 0.0, 1, 2, 0}, {-1, 0, 0, 0, 0}, {-1, 0, 0, 0, 1}};
    t.values = {-1.0, 1.0};
    const double a[] = {-1.0}, b[] = {0.0}, c[] = {0.1};
    CHECK(predict_tree(t, a)[0] == -1.0);
    CHECK(predict_tree(t, b)[0] == -1.0);
    CHECK(predict_tree(t, c)[0] == 1.0);
  }
  SUBCASE("hand-traced three-level tree") {
    auto t = three_deep();
    const double c1[] = {-1, -1}, c2[] = {-1, 5}, c3[] = {1, 0}, c4[] = {3, 0}, c5[] = {3, 3};
    CHECK(predict_tree(t, c1)[0] == 1.0);
    CHECK(predict_tree(t, c2)[0] == 2.0);
    CHECK(predict_tree(t, c3)[0] == 3.0);
    CHECK(predict_tree(t, c4)[0] == 4.0);
    CHECK(predict_tree(t, c5)[0] == 5.0);
  }
  SUBCASE("feature count is checked") {
    auto t = three_deep();
    const double x[] = {1.0};
    CHECK_THROWS_AS(predict_tree(t, x), Error);
  }
}

TEST_CASE("forest averaging") {
  ForestModel m;
  m.task = Task::Regression;
  m.n_features = 1;
  m.n_train = 1;
  m.trees = {leaf_tree(2.0), leaf_tree(4.0)};
  m.in_bag = {Bitmap(1), Bitmap(1)};
  Matrix X(1, 1, 0.0);
  CHECK(predict_forest(m, X)(0, 0) == 3.0);

  const std::uint32_t one[] = {1};
  CHECK(predict_forest(m, X, std::span<const std::uint32_t>(one))(0, 0) == 4.0);

  std::vector<std::uint32_t> none;
  CHECK_THROWS_AS(predict_forest(m, X, std::span<const std::uint32_t>(none)), Error);
  const std::uint32_t bad[] = {7};
  CHECK_THROWS_AS(predict_forest(m, X, std::span<const std::uint32_t>(bad)), Error);
}

TEST_CASE("forest probabilities match a naive loop") {
  BlobsGenerator gen{.n_classes = 4, .n_features = 3, .cluster_std = 2.0, .center_box = 5.0, .seed = 1};
  auto d = gen.sample(80, 2);
  Hyperparams hp;
  hp.n_estimators = 5;
  auto model = fit_forest(d, hp, 5);
  auto test = gen.sample(20, 3);
  auto probs = predict_forest(model, test.features);
  for (std::size_t r = 0; r < test.size(); ++r) {
    std::vector<double> acc(4, 0.0);
    for (const auto& tree : model.trees) {
      auto leaf = predict_tree(tree, test.features.row(r));
      for (int c = 0; c < 4; ++c) acc[c] += leaf[c];
    }
    for (int c = 0; c < 4; ++c) CHECK(probs(r, c) == acc[c] / 5.0);
  }

  SUBCASE("single-tree subset is predict_tree") {
    const std::uint32_t sub[] = {3};
    auto p = predict_forest(model, test.features, std::span<const std::uint32_t>(sub));
    for (std::size_t r = 0; r < test.size(); ++r) {
      auto leaf = predict_tree(model.trees[3], test.features.row(r));
      for (int c = 0; c < 4; ++c) CHECK(p(r, c) == leaf[c]);
    }
  }
}

TEST_CASE("fitting is independent of thread count") {
  LinearGenerator gen{.n_features = 4, .noise = 1.0, .seed = 9};
  auto d = gen.sample(120, 1);
  Hyperparams hp;
  hp.n_estimators = 12;
  auto a = fit_forest(d, hp, 42, 1);
  auto b = fit_forest(d, hp, 42, 3);
  CHECK(a == b);
  auto c = fit_forest(d, hp, 43, 1);
  CHECK_FALSE(a == c);
}

TEST_CASE("out-of-bag tree sets") {
  SUBCASE("complement of in-bag") {
    ForestModel m;
    m.n_train = 2;
    m.trees = {leaf_tree(0), leaf_tree(0)};
    Bitmap a(2), b(2);
    a.set(0);
    b.set(1);
    m.in_bag = {a, b};
    auto oob = oob_tree_sets(m);
    CHECK(oob.sets[0] == std::vector<std::uint32_t>{1});
    CHECK(oob.sets[1] == std::vector<std::uint32_t>{0});
    CHECK(oob.empty.empty());
  }
  SUBCASE("all in bag flags every sample") {
    ForestModel m;
    m.n_train = 3;
    m.trees = {leaf_tree(0)};
    Bitmap a(3);
    a.set(0);
    a.set(1);
    a.set(2);
    m.in_bag = {a};
    auto oob = oob_tree_sets(m);
    CHECK(oob.empty == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("about (1-1/n)^n of trees are out of bag") {
    LinearGenerator gen{.n_features = 2, .noise = 1.0, .seed = 0};
    double total = 0.0;
    const int reps = 5;
    for (int s = 0; s < reps; ++s) {
      auto d = gen.sample(200, static_cast<std::uint64_t>(s));
      Hyperparams hp;
      hp.n_estimators = 100;
      hp.max_depth = 2;
      auto model = fit_forest(d, hp, static_cast<std::uint64_t>(100 + s));
      auto oob = oob_tree_sets(model);
      for (const auto& set : oob.sets) total += static_cast<double>(set.size()) / 100.0;
    }
    const double mean = total / (200.0 * reps);
    CHECK(std::abs(mean - std::pow(1.0 - 1.0 / 200.0, 200.0)) < 0.05);
  }
}

TEST_CASE("invalid datasets and hyperparameters") {
  Dataset d;
  d.task = Task::Regression;
  CHECK_THROWS_AS(fit_forest(d, Hyperparams{}, 0), Error);

  d.features = Matrix(2, 1, std::vector<double>{0.0, std::nan("")});
  d.targets = {1.0, 2.0};
  CHECK_THROWS_AS(fit_forest(d, Hyperparams{}, 0), Error);

  d.features = Matrix(2, 1, std::vector<double>{0.0, 1.0});
  Hyperparams hp;
  hp.n_estimators = 0;
  CHECK_THROWS_AS(fit_forest(d, hp, 0), Error);
  hp.n_estimators = 2;
  hp.min_samples_leaf = 0;
  CHECK_THROWS_AS(fit_forest(d, hp, 0), Error);
}

TEST_CASE("forest persistence round-trips") {
  BlobsGenerator gen{.n_classes = 3, .n_features = 2, .cluster_std = 1.0, .center_box = 5.0, .seed = 4};
  auto d = gen.sample(40, 1);
  Hyperparams hp;
  hp.n_estimators = 4;
  hp.max_depth = 3;
  auto model = fit_forest(d, hp, 8);

  std::stringstream ss;
  io::Writer w(ss);
  write_forest(w, model);
  io::Reader r(ss);
  CHECK(read_forest(r) == model);

  std::stringstream truncated(ss.str().substr(0, ss.str().size() / 2));
  io::Reader rt(truncated);
  CHECK_THROWS_AS(read_forest(rt), Error);
}
