#include "cforest/conformal.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "cforest/error.hpp"
#include "cforest/parallel.hpp"
#include "cforest/quantile.hpp"
#include "cforest/rng.hpp"

namespace cforest {

bool PredictionInterval::bounded() const noexcept { return std::isfinite(lo) && std::isfinite(hi); }

ScoreKind score_kind_for(Task task, const RapsParams& raps) {
  if (task == Task::Regression) return ScoreKind::Residual;
  return (raps.k_star == 0 && raps.lambda_star == 0.0) ? ScoreKind::Aps : ScoreKind::Raps;
}

namespace {

double calibration_u(const RapsParams& raps, std::uint64_t seed, std::size_t index) {
  return raps.randomized ? counter_uniform(seed, Stream::Calibration, index) : 1.0;
}

std::vector<double> test_u(std::uint64_t seed, std::size_t offset, std::size_t n) {
  std::vector<double> u(n);
  for (std::size_t j = 0; j < n; ++j) u[j] = counter_uniform(seed, Stream::Test, offset + j);
  return u;
}

// Score of sample `index` with target y given the model output row.
double conformity_score(Task task, std::span<const double> output, double y, const RapsParams& raps,
                        std::uint64_t seed, std::size_t index) {
  if (task == Task::Regression) return residual_score(y, output[0]);
  return raps_score(sort_probs(output), static_cast<int>(y), calibration_u(raps, seed, index), raps);
}

void require_task(Task have, Task want, const char* what) {
  require(have == want, ErrorCode::TaskMismatch, what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Split

double SplitCalibration::tau_for(double alpha) const { return upper_quantile_sorted(sorted_scores, alpha); }

SplitCalibration score_split(const ForestModel& model, const Dataset& calib, const RapsParams& raps,
                             std::uint64_t seed, int threads) {
  validate(calib);
  require(calib.task == model.task && calib.n_features() == model.n_features &&
              (calib.task == Task::Regression || calib.n_classes == model.n_classes),
          ErrorCode::SchemaMismatch, "calibration data does not match the training schema");
  if (model.task == Task::Classification) validate(raps, model.n_classes);

  const Matrix out = predict_forest(model, calib.features, std::nullopt, threads);
  SplitCalibration cal;
  cal.score_kind = score_kind_for(model.task, raps);
  cal.raps = raps;
  cal.sorted_scores.resize(calib.size());
  for (std::size_t i = 0; i < calib.size(); ++i) {
    cal.sorted_scores[i] = conformity_score(model.task, out.row(i), calib.targets[i], raps, seed, i);
  }
  std::sort(cal.sorted_scores.begin(), cal.sorted_scores.end());
  return cal;
}

SplitConformal calibrate_split(const Dataset& train, const Dataset& calib, const Hyperparams& hp,
                               const RapsParams& raps, std::uint64_t seed, int threads) {
  validate(train);
  validate(calib);
  require(same_schema(train, calib), ErrorCode::SchemaMismatch, "train and calibration schemas differ");
  SplitConformal sc;
  sc.model = fit_forest(train, hp, seed, threads);
  sc.calibration = score_split(sc.model, calib, raps, seed, threads);
  return sc;
}

PredictionInterval predict_interval_split(const SplitConformal& sc, std::span<const double> x, double alpha) {
  require_task(sc.model.task, Task::Regression, "interval prediction needs a regression calibration");
  const double tau = sc.calibration.tau_for(alpha);
  require(x.size() == sc.model.n_features, ErrorCode::FeatureCountMismatch, "test row has the wrong feature count");
  double sum = 0.0;
  for (const auto& tree : sc.model.trees) sum += tree.predict(x)[0];
  const double f = sum / static_cast<double>(sc.model.n_trees());
  if (std::isinf(tau)) return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  return {f - tau, f + tau};
}

std::vector<PredictionInterval> predict_intervals_split(const SplitConformal& sc, const Matrix& X, double alpha,
                                                        int threads) {
  require_task(sc.model.task, Task::Regression, "interval prediction needs a regression calibration");
  const double tau = sc.calibration.tau_for(alpha);
  const Matrix f = predict_forest(sc.model, X, std::nullopt, threads);
  std::vector<PredictionInterval> out(X.rows());
  for (std::size_t j = 0; j < X.rows(); ++j) {
    if (std::isinf(tau)) {
      out[j] = {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    } else {
      out[j] = {f(j, 0) - tau, f(j, 0) + tau};
    }
  }
  return out;
}

PredictionSets predict_set_split(const SplitConformal& sc, const Matrix& X, double alpha, std::uint64_t seed,
                                 int threads) {
  require_task(sc.model.task, Task::Classification, "set prediction needs a classification calibration");
  const double tau = sc.calibration.tau_for(alpha);
  const Matrix probs = predict_forest(sc.model, X, std::nullopt, threads);
  PredictionSets out;
  out.sets = split_sets_kernel(probs, tau, sc.calibration.raps, test_u(seed, 0, X.rows()), threads);
  out.point_predictions = argmax_rows(probs);
  return out;
}

// ---------------------------------------------------------------------------
// CV+

std::vector<std::uint32_t> assign_folds(std::size_t n, std::size_t K, std::uint64_t seed) {
  require(K >= 2 && K <= n, ErrorCode::KOutOfRange,
          "cv folds K=" + std::to_string(K) + " must satisfy 2 <= K <= n=" + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Engine eng = make_engine(seed, Stream::FoldShuffle, 0);
  shuffle(perm, eng);

  std::vector<std::uint32_t> fold_of(n);
  const std::size_t base = n / K;
  const std::size_t extra = n % K;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t size = base + (k < extra ? 1 : 0);
    for (std::size_t s = 0; s < size; ++s) fold_of[perm[pos++]] = static_cast<std::uint32_t>(k);
  }
  return fold_of;
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t k) { return derive_seed(seed, Stream::FoldForest, k); }

CvCalibration fit_cv_folds(const Dataset& train, std::size_t K, const Hyperparams& hp, std::uint64_t seed,
                           int threads) {
  validate(train);
  CvCalibration cal;
  cal.fold_of = assign_folds(train.size(), K, seed);
  cal.K = K;
  cal.task = train.task;
  cal.n_classes = train.task == Task::Classification ? train.n_classes : 0;
  cal.fold_models.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (cal.fold_of[i] != k) keep.push_back(i);
    }
    cal.fold_models.push_back(fit_forest(train.subset(keep), hp, fold_seed(seed, k), threads));
  }
  return cal;
}

void score_cv(CvCalibration& cal, const Dataset& train, const RapsParams& raps, std::uint64_t seed, int threads) {
  require(train.size() == cal.fold_of.size(), ErrorCode::DimensionMismatch, "training set differs from fold map");
  if (cal.task == Task::Classification) validate(raps, cal.n_classes);
  cal.raps = raps;
  cal.scores.assign(train.size(), 0.0);
  for (std::size_t k = 0; k < cal.K; ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (cal.fold_of[i] == k) members.push_back(i);
    }
    const Matrix out = predict_forest(cal.fold_models[k], train.features.select_rows(members), std::nullopt, threads);
    for (std::size_t r = 0; r < members.size(); ++r) {
      const std::size_t i = members[r];
      cal.scores[i] = conformity_score(cal.task, out.row(r), train.targets[i], raps, seed, i);
    }
  }
}

CvCalibration calibrate_cv(const Dataset& train, std::size_t K, const Hyperparams& hp, const RapsParams& raps,
                           std::uint64_t seed, int threads) {
  CvCalibration cal = fit_cv_folds(train, K, hp, seed, threads);
  score_cv(cal, train, raps, seed, threads);
  return cal;
}

// ---------------------------------------------------------------------------
// J+ab

std::size_t sample_num_bootstraps(std::size_t B_tilde, std::size_t n, std::size_t m, std::uint64_t seed) {
  require(B_tilde >= 1, ErrorCode::InvalidHyperparams, "B_tilde must be >= 1");
  const double p = std::pow(1.0 - 1.0 / (static_cast<double>(n) + 1.0), static_cast<double>(m));
  Engine eng = make_engine(seed, Stream::BinomialDraw, 0);
  std::binomial_distribution<std::size_t> dist(B_tilde, p);
  std::size_t B = dist(eng);
  while (B == 0) {
    spdlog::warn("sample_num_bootstraps: drew B = 0, redrawing");
    B = dist(eng);
  }
  return B;
}

JabCalibration fit_jab(const Dataset& train, std::size_t B_tilde, std::size_t m, bool resample_B, const Hyperparams& hp,
                       std::uint64_t seed, int threads) {
  validate(train);
  require(B_tilde >= 1, ErrorCode::InvalidHyperparams, "B_tilde must be >= 1");
  const std::size_t n = train.size();
  const std::size_t draws = m == 0 ? n : m;

  JabCalibration cal;
  cal.B_tilde = B_tilde;
  const std::size_t B = resample_B ? sample_num_bootstraps(B_tilde, n, draws, seed) : B_tilde;

  Hyperparams forest_hp = hp;
  forest_hp.n_estimators = static_cast<int>(B);
  forest_hp.bootstrap_size = draws;
  cal.model = fit_forest(train, forest_hp, seed, threads);
  cal.oob = oob_tree_sets(cal.model);
  for (std::size_t i = 0; i < n; ++i) {
    if (!cal.oob.sets[i].empty()) cal.active.push_back(i);
  }
  require(!cal.active.empty(), ErrorCode::AllSamplesInBag,
          "every training sample is in-bag for every tree; no OOB calibration is possible");
  if (!cal.oob.empty.empty()) {
    spdlog::warn("jackknife+-after-bootstrap: {} of {} training samples have no out-of-bag trees and are excluded",
                 cal.oob.empty.size(), n);
  }
  return cal;
}

void score_jab(JabCalibration& cal, const Dataset& train, const RapsParams& raps, std::uint64_t seed, int threads) {
  require(train.size() == cal.model.n_train, ErrorCode::DimensionMismatch, "training set differs from the model");
  if (cal.model.task == Task::Classification) validate(raps, cal.model.n_classes);
  cal.raps = raps;
  const TreeOutputs per_tree = predict_each_tree(cal.model, train.features, threads);
  const std::size_t width = per_tree.width;
  cal.scores.assign(cal.active.size(), 0.0);
  std::vector<double> agg(width);
  for (std::size_t a = 0; a < cal.active.size(); ++a) {
    const std::size_t i = cal.active[a];
    const auto& trees = cal.oob.sets[i];
    std::fill(agg.begin(), agg.end(), 0.0);
    for (auto t : trees) {
      auto leaf = per_tree.at(t, i);
      for (std::size_t c = 0; c < width; ++c) agg[c] += leaf[c];
    }
    for (auto& v : agg) v /= static_cast<double>(trees.size());
    cal.scores[a] = conformity_score(cal.model.task, agg, train.targets[i], raps, seed, i);
  }
}

JabCalibration calibrate_jab(const Dataset& train, std::size_t B_tilde, std::size_t m, bool resample_B,
                             const Hyperparams& hp, const RapsParams& raps, std::uint64_t seed, int threads) {
  JabCalibration cal = fit_jab(train, B_tilde, m, resample_B, hp, seed, threads);
  score_jab(cal, train, raps, seed, threads);
  return cal;
}

// ---------------------------------------------------------------------------
// Leave-out outputs

namespace {

// fold_out[k] = fold model k's outputs on X; row i of the result copies fold S(i).
Tensor3 cv_leave_out(const CvCalibration& cal, const Matrix& X, int threads) {
  std::vector<Matrix> fold_out;
  fold_out.reserve(cal.K);
  for (const auto& m : cal.fold_models) fold_out.push_back(predict_forest(m, X, std::nullopt, threads));
  const std::size_t width = fold_out.front().cols();
  const std::size_t n = cal.fold_of.size();
  Tensor3 out(n, X.rows(), width);
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& src = fold_out[cal.fold_of[i]];
    std::copy(src.data().begin(), src.data().end(),
              out.values.begin() + static_cast<std::ptrdiff_t>(i * X.rows() * width));
  }
  return out;
}

// Row a = mean over OOB trees of active sample a, summed in tree-index order,
// which reproduces predict_forest(model, X, T_i) exactly.
Tensor3 jab_leave_out(const JabCalibration& cal, const Matrix& X, int threads) {
  const TreeOutputs per_tree = predict_each_tree(cal.model, X, threads);
  const std::size_t width = per_tree.width;
  const std::size_t n_test = X.rows();
  Tensor3 out(cal.active.size(), n_test, width);
#pragma omp parallel for schedule(dynamic, 4) num_threads(resolve_threads(threads))
  for (std::size_t a = 0; a < cal.active.size(); ++a) {
    const auto& trees = cal.oob.sets[cal.active[a]];
    const double count = static_cast<double>(trees.size());
    for (std::size_t j = 0; j < n_test; ++j) {
      auto dst = out.slice(a, j);
      for (auto t : trees) {
        auto leaf = per_tree.at(t, j);
        for (std::size_t c = 0; c < width; ++c) dst[c] += leaf[c];
      }
      for (auto& v : dst) v /= count;
    }
  }
  return out;
}

Matrix squeeze(Tensor3 t) {
  // width-1 tensor -> (d0 x d1) matrix
  return Matrix(t.d0, t.d1, std::move(t.values));
}

}  // namespace

Matrix leave_out_predictions(const CvCalibration& cal, const Matrix& X, int threads) {
  require_task(cal.task, Task::Regression, "leave-out predictions need a regression calibration");
  return squeeze(cv_leave_out(cal, X, threads));
}

Matrix leave_out_predictions(const JabCalibration& cal, const Matrix& X, int threads) {
  require_task(cal.model.task, Task::Regression, "leave-out predictions need a regression calibration");
  return squeeze(jab_leave_out(cal, X, threads));
}

Tensor3 leave_out_probabilities(const CvCalibration& cal, const Matrix& X, int threads) {
  require_task(cal.task, Task::Classification, "leave-out probabilities need a classification calibration");
  return cv_leave_out(cal, X, threads);
}

Tensor3 leave_out_probabilities(const JabCalibration& cal, const Matrix& X, int threads) {
  require_task(cal.model.task, Task::Classification, "leave-out probabilities need a classification calibration");
  return jab_leave_out(cal, X, threads);
}

std::vector<PredictionInterval> intervals_from_leave_out(const Matrix& loo, std::span<const double> residuals,
                                                         double alpha, int threads) {
  const std::size_t n = loo.rows();
  require(n >= 1, ErrorCode::NoActiveSamples, "no active calibration samples");
  require(residuals.size() == n, ErrorCode::DimensionMismatch, "residual count differs from leave-out rows");
  const std::size_t lo_idx = lower_quantile_index(n, alpha);
  const std::size_t hi_idx = upper_quantile_index(n, alpha);
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<PredictionInterval> out(loo.cols());
#pragma omp parallel num_threads(resolve_threads(threads))
  {
    std::vector<double> buf(n);
#pragma omp for schedule(static)
    for (std::size_t j = 0; j < loo.cols(); ++j) {
      double lo = -inf;
      double hi = inf;
      if (lo_idx >= 1) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = loo(i, j) - residuals[i];
        auto nth = buf.begin() + static_cast<std::ptrdiff_t>(lo_idx - 1);
        std::nth_element(buf.begin(), nth, buf.end());
        lo = *nth;
      }
      if (hi_idx <= n) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = loo(i, j) + residuals[i];
        auto nth = buf.begin() + static_cast<std::ptrdiff_t>(hi_idx - 1);
        std::nth_element(buf.begin(), nth, buf.end());
        hi = *nth;
      }
      out[j] = {lo, hi};
    }
  }
  return out;
}

std::vector<PredictionInterval> predict_interval_cross(const CvCalibration& cal, const Matrix& X, double alpha,
                                                       int threads) {
  return intervals_from_leave_out(leave_out_predictions(cal, X, threads), cal.scores, alpha, threads);
}

std::vector<PredictionInterval> predict_interval_cross(const JabCalibration& cal, const Matrix& X, double alpha,
                                                       int threads) {
  require(!cal.active.empty(), ErrorCode::NoActiveSamples, "no active calibration samples");
  return intervals_from_leave_out(leave_out_predictions(cal, X, threads), cal.scores, alpha, threads);
}

namespace {

int class_count(const CvCalibration& cal) { return cal.n_classes; }
int class_count(const JabCalibration& cal) { return cal.model.n_classes; }

template <typename Cal>
Matrix chunked_pvalues(const Cal& cal, const Matrix& X, std::uint64_t seed, int threads, std::size_t chunk_rows) {
  const std::size_t n_test = X.rows();
  Matrix p(n_test, static_cast<std::size_t>(class_count(cal)));
  const std::size_t step = chunk_rows == 0 ? n_test : chunk_rows;
  for (std::size_t start = 0; start < n_test; start += step) {
    const std::size_t stop = std::min(n_test, start + step);
    std::vector<std::size_t> rows(stop - start);
    std::iota(rows.begin(), rows.end(), start);
    const Tensor3 probs = leave_out_probabilities(cal, X.select_rows(rows), threads);
    const GiqsTensor giqs = cross_giqs_kernel(probs, cal.raps, test_u(seed, start, rows.size()), threads);
    const Matrix part = pvalues_from_giqs(cal.scores, giqs, threads);
    for (std::size_t r = 0; r < part.rows(); ++r) {
      std::copy(part.row(r).begin(), part.row(r).end(), p.row(start + r).begin());
    }
  }
  return p;
}

}  // namespace

Matrix cross_pvalues(const CvCalibration& cal, const Matrix& X, std::uint64_t seed, int threads,
                     std::size_t chunk_rows) {
  require_task(cal.task, Task::Classification, "set prediction needs a classification calibration");
  return chunked_pvalues(cal, X, seed, threads, chunk_rows);
}

Matrix cross_pvalues(const JabCalibration& cal, const Matrix& X, std::uint64_t seed, int threads,
                     std::size_t chunk_rows) {
  require_task(cal.model.task, Task::Classification, "set prediction needs a classification calibration");
  require(!cal.active.empty(), ErrorCode::NoActiveSamples, "no active calibration samples");
  return chunked_pvalues(cal, X, seed, threads, chunk_rows);
}

SetMatrix sets_from_pvalues(const Matrix& pvalues, double alpha, bool allow_empty_sets) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::AlphaOutOfRange, "alpha must lie in (0, 1)");
  SetMatrix sets(pvalues.rows(), pvalues.cols());
  for (std::size_t j = 0; j < pvalues.rows(); ++j) {
    bool any = false;
    for (std::size_t y = 0; y < pvalues.cols(); ++y) {
      if (pvalues(j, y) >= alpha) {
        sets.set(j, y);
        any = true;
      }
    }
    if (!any && !allow_empty_sets && pvalues.cols() > 0) {
      std::size_t best = 0;
      for (std::size_t y = 1; y < pvalues.cols(); ++y) {
        if (pvalues(j, y) > pvalues(j, best)) best = y;
      }
      sets.set(j, best);
    }
  }
  return sets;
}

PredictionSets predict_set_cross(const CvCalibration& cal, const Matrix& X, double alpha, std::uint64_t seed,
                                 int threads) {
  PredictionSets out;
  out.sets = sets_from_pvalues(cross_pvalues(cal, X, seed, threads), alpha, cal.raps.allow_empty_sets);
  out.point_predictions = argmax_rows(point_outputs(cal, X, threads));
  return out;
}

PredictionSets predict_set_cross(const JabCalibration& cal, const Matrix& X, double alpha, std::uint64_t seed,
                                 int threads) {
  PredictionSets out;
  out.sets = sets_from_pvalues(cross_pvalues(cal, X, seed, threads), alpha, cal.raps.allow_empty_sets);
  out.point_predictions = argmax_rows(point_outputs(cal, X, threads));
  return out;
}

// ---------------------------------------------------------------------------
// Point outputs

Matrix point_outputs(const SplitConformal& sc, const Matrix& X, int threads) {
  return predict_forest(sc.model, X, std::nullopt, threads);
}

Matrix point_outputs(const CvCalibration& cal, const Matrix& X, int threads) {
  Matrix sum;
  for (std::size_t k = 0; k < cal.K; ++k) {
    Matrix out = predict_forest(cal.fold_models[k], X, std::nullopt, threads);
    if (k == 0) {
      sum = std::move(out);
    } else {
      for (std::size_t v = 0; v < sum.data().size(); ++v) sum.data()[v] += out.data()[v];
    }
  }
  for (auto& v : sum.data()) v /= static_cast<double>(cal.K);
  return sum;
}

Matrix point_outputs(const JabCalibration& cal, const Matrix& X, int threads) {
  return predict_forest(cal.model, X, std::nullopt, threads);
}

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(probs.rows(), 0);
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c) {
      if (probs(r, c) > probs(r, best)) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

}  // namespace cforest
