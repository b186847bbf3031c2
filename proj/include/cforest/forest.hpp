#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cforest/dataset.hpp"

namespace cforest {

/// Fixed-size bitset over training samples.
class Bitmap {
 public:
  Bitmap() = default;
  explicit Bitmap(std::size_t n) : n_(n), words_((n + 63) / 64, 0) {}

  std::size_t size() const noexcept { return n_; }
  bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
  void set(std::size_t i) noexcept { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  std::size_t count() const noexcept;

  std::span<const std::uint64_t> words() const noexcept { return words_; }
  static Bitmap from_words(std::size_t n, std::vector<std::uint64_t> words);

  friend bool operator==(const Bitmap&, const Bitmap&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

struct Hyperparams {
  int n_estimators = 100;
  /// Default: ceil(sqrt(d)) for classification, d for regression.
  std::optional<int> max_features;
  int min_samples_leaf = 1;
  /// Unlimited when unset.
  std::optional<int> max_depth;
  /// Bootstrap draws per tree (with replacement). Default: n.
  std::optional<std::size_t> bootstrap_size;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// Flat tree node. Leaves have feature == -1 and point into Tree::values.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::uint32_t value = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Binary tree stored as a preorder node list. Each leaf owns `width` values:
/// one mean for regression, a class-frequency vector for classification.
struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<double> values;
  std::size_t width = 1;
  std::size_t n_features = 0;

  /// Leaf output for x; traversal goes left iff x[feature] <= threshold.
  std::span<const double> predict(std::span<const double> x) const;

  std::size_t n_leaves() const noexcept { return values.size() / width; }
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<Bitmap> in_bag;
  Task task = Task::Regression;
  int n_classes = 0;
  std::size_t n_features = 0;
  std::size_t n_train = 0;
  Hyperparams hyperparams;
  std::uint64_t seed = 0;

  std::size_t n_trees() const noexcept { return trees.size(); }
  std::size_t output_width() const noexcept {
    return task == Task::Classification ? static_cast<std::size_t>(n_classes) : 1;
  }
  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

/// Bagged CART forest. Tree t draws its bootstrap and feature subsets from a
/// stream keyed by (seed, t), so the result is independent of `threads`.
ForestModel fit_forest(const Dataset& data, const Hyperparams& hp, std::uint64_t seed, int threads = 0);

/// Throws FeatureCountMismatch when x has the wrong length.
std::span<const double> predict_tree(const Tree& tree, std::span<const double> x);

/// Mean of per-tree outputs over `tree_subset` (all trees when empty optional).
/// Result is n x output_width.
Matrix predict_forest(const ForestModel& model, const Matrix& X,
                      std::optional<std::span<const std::uint32_t>> tree_subset = std::nullopt,
                      int threads = 0);

/// Per-tree outputs, laid out [tree][row][width].
struct TreeOutputs {
  std::size_t n_trees = 0;
  std::size_t n_rows = 0;
  std::size_t width = 1;
  std::vector<double> values;

  std::span<const double> at(std::size_t tree, std::size_t row) const noexcept {
    return {values.data() + (tree * n_rows + row) * width, width};
  }
};

TreeOutputs predict_each_tree(const ForestModel& model, const Matrix& X, int threads = 0);

/// Out-of-bag tree sets: sets[i] = { t : sample i not in in_bag[t] }.
struct OobSets {
  std::vector<std::vector<std::uint32_t>> sets;
  /// Samples whose set is empty.
  std::vector<std::size_t> empty;
};

OobSets oob_tree_sets(const ForestModel& model);

}  // namespace cforest
