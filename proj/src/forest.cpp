#include "cforest/forest.hpp"

#include <omp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "cforest/error.hpp"
#include "cforest/parallel.hpp"
#include "cforest/rng.hpp"

namespace cforest {

int max_threads() noexcept { return omp_get_max_threads(); }

int resolve_threads(int requested) noexcept { return requested > 0 ? requested : omp_get_max_threads(); }

std::size_t Bitmap::count() const noexcept {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

Bitmap Bitmap::from_words(std::size_t n, std::vector<std::uint64_t> words) {
  require(words.size() == (n + 63) / 64, ErrorCode::DimensionMismatch, "bitmap word count does not match size");
  Bitmap b;
  b.n_ = n;
  b.words_ = std::move(words);
  return b;
}

std::span<const double> Tree::predict(std::span<const double> x) const {
  std::uint32_t node = 0;
  while (!nodes[node].is_leaf()) {
    const auto& nd = nodes[node];
    node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return {values.data() + static_cast<std::size_t>(nodes[node].value) * width, width};
}

std::span<const double> predict_tree(const Tree& tree, std::span<const double> x) {
  require(x.size() == tree.n_features, ErrorCode::FeatureCountMismatch,
          "expected " + std::to_string(tree.n_features) + " features, got " + std::to_string(x.size()));
  return tree.predict(x);
}

namespace {

struct BuildSettings {
  std::size_t max_features;
  std::size_t min_samples_leaf;
  std::size_t max_depth;  // SIZE_MAX when unlimited
};

// Builds one CART tree over a bootstrap sample (indices may repeat).
class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const BuildSettings& settings, Engine& eng)
      : data_(data), settings_(settings), eng_(eng) {
    tree_.n_features = data.n_features();
    tree_.width = data.task == Task::Classification ? static_cast<std::size_t>(data.n_classes) : 1;
    features_.resize(data.n_features());
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    class_counts_.resize(tree_.width);
    left_counts_.resize(tree_.width);
  }

  Tree build(std::vector<std::size_t> samples) {
    samples_ = std::move(samples);
    grow(0, samples_.size(), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
    bool found = false;
  };

  bool classification() const { return data_.task == Task::Classification; }

  std::uint32_t grow(std::size_t begin, std::size_t end, std::size_t depth) {
    const auto node_id = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    Split split;
    const std::size_t count = end - begin;
    if (depth < settings_.max_depth && count >= 2 * settings_.min_samples_leaf && !is_pure(begin, end)) {
      split = best_split(begin, end);
    }
    if (!split.found) {
      make_leaf(node_id, begin, end);
      return node_id;
    }

    auto mid = std::stable_partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                     samples_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t s) {
                                       return data_.features(s, split.feature) <= split.threshold;
                                     });
    const auto mid_idx = static_cast<std::size_t>(mid - samples_.begin());

    tree_.nodes[node_id].feature = static_cast<std::int32_t>(split.feature);
    tree_.nodes[node_id].threshold = split.threshold;
    const auto left = grow(begin, mid_idx, depth + 1);
    const auto right = grow(mid_idx, end, depth + 1);
    tree_.nodes[node_id].left = left;
    tree_.nodes[node_id].right = right;
    return node_id;
  }

  bool is_pure(std::size_t begin, std::size_t end) const {
    const double first = data_.targets[samples_[begin]];
    for (std::size_t k = begin + 1; k < end; ++k) {
      if (data_.targets[samples_[k]] != first) return false;
    }
    return true;
  }

  void make_leaf(std::uint32_t node_id, std::size_t begin, std::size_t end) {
    const std::size_t count = end - begin;
    tree_.nodes[node_id].value = static_cast<std::uint32_t>(tree_.values.size() / tree_.width);
    if (classification()) {
      std::fill(class_counts_.begin(), class_counts_.end(), 0.0);
      for (std::size_t k = begin; k < end; ++k) class_counts_[static_cast<std::size_t>(data_.label(samples_[k]))] += 1.0;
      for (double c : class_counts_) tree_.values.push_back(c / static_cast<double>(count));
    } else {
      double sum = 0.0;
      for (std::size_t k = begin; k < end; ++k) sum += data_.targets[samples_[k]];
      tree_.values.push_back(sum / static_cast<double>(count));
    }
  }

  // Candidate features: a seeded partial shuffle, scanned in ascending order so
  // that equal gains resolve to the lowest (feature, threshold) pair.
  std::span<const std::size_t> sample_features() {
    const std::size_t d = features_.size();
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    const std::size_t mtry = std::min(settings_.max_features, d);
    if (mtry < d) {
      for (std::size_t k = 0; k < mtry; ++k) {
        const std::size_t j = k + uniform_index(eng_, d - k);
        std::swap(features_[k], features_[j]);
      }
      std::sort(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(mtry));
    }
    return {features_.data(), mtry};
  }

  Split best_split(std::size_t begin, std::size_t end) {
    const std::size_t count = end - begin;
    const double n = static_cast<double>(count);

    // Node-level sums. The split score is the "proxy" objective:
    //   regression:     sumL^2/nL + sumR^2/nR
    //   classification: sum_k cL_k^2/nL + sum_k cR_k^2/nR
    // and the gain is its increase over the unsplit node.
    double total_sum = 0.0;
    double baseline = 0.0;
    if (classification()) {
      std::fill(class_counts_.begin(), class_counts_.end(), 0.0);
      for (std::size_t k = begin; k < end; ++k) class_counts_[static_cast<std::size_t>(data_.label(samples_[k]))] += 1.0;
      double sq = 0.0;
      for (double c : class_counts_) sq += c * c;
      baseline = sq / n;
    } else {
      for (std::size_t k = begin; k < end; ++k) total_sum += data_.targets[samples_[k]];
      baseline = total_sum * total_sum / n;
    }

    Split best;
    best.gain = 1e-12 * std::max(1.0, std::abs(baseline));
    const std::size_t min_leaf = settings_.min_samples_leaf;

    for (std::size_t f : sample_features()) {
      sorted_.clear();
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t s = samples_[k];
        sorted_.push_back({data_.features(s, f), data_.targets[s]});
      }
      std::sort(sorted_.begin(), sorted_.end(), [](const auto& a, const auto& b) {
        return a.value < b.value || (a.value == b.value && a.target < b.target);
      });
      if (sorted_.front().value == sorted_.back().value) continue;

      double left_sum = 0.0;
      double left_sq = 0.0;
      double right_sq = 0.0;
      if (classification()) {
        std::fill(left_counts_.begin(), left_counts_.end(), 0.0);
        for (double c : class_counts_) right_sq += c * c;
      }

      for (std::size_t i = 1; i < count; ++i) {
        const double moved = sorted_[i - 1].target;
        if (classification()) {
          const auto cls = static_cast<std::size_t>(moved);
          const double cl = left_counts_[cls];
          const double cr = class_counts_[cls] - cl;
          left_sq += 2.0 * cl + 1.0;
          right_sq -= 2.0 * cr - 1.0;
          left_counts_[cls] = cl + 1.0;
        } else {
          left_sum += moved;
        }
        if (sorted_[i - 1].value == sorted_[i].value) continue;
        if (i < min_leaf || count - i < min_leaf) continue;

        const double nl = static_cast<double>(i);
        const double nr = n - nl;
        double score;
        if (classification()) {
          score = left_sq / nl + right_sq / nr;
        } else {
          const double right_sum = total_sum - left_sum;
          score = left_sum * left_sum / nl + right_sum * right_sum / nr;
        }
        const double gain = score - baseline;
        if (gain > best.gain) {
          const double lo = sorted_[i - 1].value;
          const double hi = sorted_[i].value;
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid >= lo && mid < hi)) mid = lo;
          best = {f, mid, gain, true};
        }
      }
    }
    return best;
  }

  struct Entry {
    double value;
    double target;
  };

  const Dataset& data_;
  BuildSettings settings_;
  Engine& eng_;
  Tree tree_;
  std::vector<std::size_t> samples_;
  std::vector<std::size_t> features_;
  std::vector<double> class_counts_;
  std::vector<double> left_counts_;
  std::vector<Entry> sorted_;
};

void validate_hyperparams(const Hyperparams& hp) {
  require(hp.n_estimators >= 1, ErrorCode::InvalidHyperparams, "n_estimators must be >= 1");
  require(hp.min_samples_leaf >= 1, ErrorCode::InvalidHyperparams, "min_samples_leaf must be >= 1");
  require(!hp.max_features || *hp.max_features >= 1, ErrorCode::InvalidHyperparams, "max_features must be >= 1");
  require(!hp.max_depth || *hp.max_depth >= 0, ErrorCode::InvalidHyperparams, "max_depth must be >= 0");
  require(!hp.bootstrap_size || *hp.bootstrap_size >= 1, ErrorCode::InvalidHyperparams,
          "bootstrap_size must be >= 1");
}

}  // namespace

ForestModel fit_forest(const Dataset& data, const Hyperparams& hp, std::uint64_t seed, int threads) {
  validate(data);
  validate_hyperparams(hp);

  const std::size_t n = data.size();
  const std::size_t d = data.n_features();
  if (data.task == Task::Classification) {
    std::vector<char> seen(static_cast<std::size_t>(data.n_classes), 0);
    for (std::size_t i = 0; i < n; ++i) seen[static_cast<std::size_t>(data.label(i))] = 1;
    if (std::count(seen.begin(), seen.end(), 1) == 1) {
      spdlog::warn("fit_forest: training data contains a single observed class");
    }
  }

  BuildSettings settings;
  if (hp.max_features) {
    settings.max_features = static_cast<std::size_t>(*hp.max_features);
  } else if (data.task == Task::Classification) {
    settings.max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  } else {
    settings.max_features = d;
  }
  settings.max_features = std::max<std::size_t>(1, std::min(settings.max_features, d));
  settings.min_samples_leaf = static_cast<std::size_t>(hp.min_samples_leaf);
  settings.max_depth = hp.max_depth ? static_cast<std::size_t>(*hp.max_depth) : SIZE_MAX;
  const std::size_t m = hp.bootstrap_size.value_or(n);

  ForestModel model;
  model.task = data.task;
  model.n_classes = data.task == Task::Classification ? data.n_classes : 0;
  model.n_features = d;
  model.n_train = n;
  model.hyperparams = hp;
  model.seed = seed;
  const auto n_trees = static_cast<std::size_t>(hp.n_estimators);
  model.trees.resize(n_trees);
  model.in_bag.assign(n_trees, Bitmap(n));

#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
  for (std::size_t t = 0; t < n_trees; ++t) {
    Engine eng = make_engine(seed, Stream::TreeBootstrap, t);
    std::vector<std::size_t> samples(m);
    for (auto& s : samples) {
      s = static_cast<std::size_t>(uniform_index(eng, n));
      model.in_bag[t].set(s);
    }
    TreeBuilder builder(data, settings, eng);
    model.trees[t] = builder.build(std::move(samples));
  }
  return model;
}

Matrix predict_forest(const ForestModel& model, const Matrix& X,
                      std::optional<std::span<const std::uint32_t>> tree_subset, int threads) {
  require(X.cols() == model.n_features, ErrorCode::FeatureCountMismatch,
          "expected " + std::to_string(model.n_features) + " features, got " + std::to_string(X.cols()));
  std::vector<std::uint32_t> all;
  std::span<const std::uint32_t> subset;
  if (tree_subset) {
    subset = *tree_subset;
    require(!subset.empty(), ErrorCode::EmptyTreeSubset, "tree subset is empty");
    for (auto t : subset) {
      require(t < model.n_trees(), ErrorCode::EmptyTreeSubset, "tree index " + std::to_string(t) + " out of range");
    }
  } else {
    require(model.n_trees() > 0, ErrorCode::EmptyTreeSubset, "model has no trees");
    all.resize(model.n_trees());
    std::iota(all.begin(), all.end(), 0U);
    subset = all;
  }

  const std::size_t width = model.output_width();
  Matrix out(X.rows(), width);
  const double scale = static_cast<double>(subset.size());
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto acc = out.row(r);
    for (auto t : subset) {
      auto leaf = model.trees[t].predict(X.row(r));
      for (std::size_t c = 0; c < width; ++c) acc[c] += leaf[c];
    }
    for (auto& v : acc) v /= scale;
  }
  return out;
}

TreeOutputs predict_each_tree(const ForestModel& model, const Matrix& X, int threads) {
  require(X.cols() == model.n_features, ErrorCode::FeatureCountMismatch,
          "expected " + std::to_string(model.n_features) + " features, got " + std::to_string(X.cols()));
  TreeOutputs out;
  out.n_trees = model.n_trees();
  out.n_rows = X.rows();
  out.width = model.output_width();
  out.values.resize(out.n_trees * out.n_rows * out.width);
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
  for (std::size_t t = 0; t < out.n_trees; ++t) {
    for (std::size_t r = 0; r < out.n_rows; ++r) {
      auto leaf = model.trees[t].predict(X.row(r));
      std::copy(leaf.begin(), leaf.end(), out.values.begin() + static_cast<std::ptrdiff_t>((t * out.n_rows + r) * out.width));
    }
  }
  return out;
}

OobSets oob_tree_sets(const ForestModel& model) {
  OobSets out;
  out.sets.resize(model.n_train);
  for (std::size_t t = 0; t < model.n_trees(); ++t) {
    for (std::size_t i = 0; i < model.n_train; ++i) {
      if (!model.in_bag[t].test(i)) out.sets[i].push_back(static_cast<std::uint32_t>(t));
    }
  }
  for (std::size_t i = 0; i < model.n_train; ++i) {
    if (out.sets[i].empty()) out.empty.push_back(i);
  }
  return out;
}

}  // namespace cforest
