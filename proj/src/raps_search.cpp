#include <algorithm>
#include <string>

#include "cforest/conformal.hpp"
#include "cforest/error.hpp"
#include "cforest/quantile.hpp"
#include "cforest/rng.hpp"

namespace cforest {

RapsParams search_k_and_lambda(const Matrix& tuning_probs, std::span<const int> labels, double alpha, bool randomized,
                               bool allow_empty_sets, std::uint64_t seed, int threads) {
  const std::size_t n = labels.size();
  require(n >= 10, ErrorCode::TuningTooSmall, "k/lambda search needs at least 10 tuning samples, got " + std::to_string(n));
  require(tuning_probs.rows() == n, ErrorCode::LengthMismatch, "tuning probabilities and labels differ in length");
  const int n_classes = static_cast<int>(tuning_probs.cols());

  std::vector<SortedProbs> sorted;
  sorted.reserve(n);
  std::vector<int> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(labels[i] >= 0 && labels[i] < n_classes, ErrorCode::ClassOutOfRange, "tuning label out of range");
    sorted.push_back(sort_probs(tuning_probs.row(i)));
    ranks[i] = sorted.back().rank_of[static_cast<std::size_t>(labels[i])];
  }
  std::sort(ranks.begin(), ranks.end());
  const std::size_t idx = upper_quantile_index(n, alpha);
  int k_star = idx > n ? n_classes : ranks[idx - 1];
  k_star = std::clamp(k_star, 1, n_classes);

  const std::vector<double> u_test = uniform_vector(seed, Stream::Test, n);
  std::vector<double> scores(n);

  RapsParams best{k_star, kLambdaGrid[0], randomized, allow_empty_sets};
  double best_size = -1.0;
  for (double lambda : kLambdaGrid) {
    const RapsParams params{k_star, lambda, randomized, allow_empty_sets};
    for (std::size_t i = 0; i < n; ++i) {
      const double u = randomized ? counter_uniform(seed, Stream::Calibration, i) : 1.0;
      scores[i] = raps_score(sorted[i], labels[i], u, params);
    }
    const double tau = upper_quantile(scores, alpha);
    const SetMatrix sets = split_sets_kernel(tuning_probs, tau, params, u_test, threads);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) total += static_cast<double>(sets.row_size(r));
    const double mean_size = total / static_cast<double>(n);
    if (best_size < 0.0 || mean_size < best_size) {
      best_size = mean_size;
      best.lambda_star = lambda;
    }
  }
  return best;
}

}  // namespace cforest
