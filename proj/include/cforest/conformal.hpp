#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cforest/dataset.hpp"
#include "cforest/forest.hpp"
#include "cforest/kernels.hpp"
#include "cforest/scores.hpp"

namespace cforest {

enum class Method : std::uint8_t { Split = 0, CvPlus = 1, JackknifeAfterBootstrap = 2 };
enum class ScoreKind : std::uint8_t { Residual = 0, Aps = 1, Raps = 2 };

struct PredictionInterval {
  double lo = 0.0;
  double hi = 0.0;

  bool bounded() const noexcept;
  double length() const noexcept { return hi - lo; }
  friend bool operator==(const PredictionInterval&, const PredictionInterval&) = default;
};

/// One set per test row plus the forest's argmax class.
struct PredictionSets {
  SetMatrix sets;
  std::vector<int> point_predictions;

  std::size_t size() const noexcept { return sets.n_rows; }
};

// ---------------------------------------------------------------------------
// Split conformal

struct SplitCalibration {
  std::vector<double> sorted_scores;
  ScoreKind score_kind = ScoreKind::Residual;
  RapsParams raps;

  /// ceil((1 - alpha)(n_cal + 1))-th smallest score, +inf on overflow.
  double tau_for(double alpha) const;
};

struct SplitConformal {
  ForestModel model;
  SplitCalibration calibration;
};

ScoreKind score_kind_for(Task task, const RapsParams& raps);

/// Scores `calib` under an already fitted model. Classification scores use
/// u_i keyed by calibration index (u = 1 when not randomized).
SplitCalibration score_split(const ForestModel& model, const Dataset& calib, const RapsParams& raps,
                             std::uint64_t seed, int threads = 0);

SplitConformal calibrate_split(const Dataset& train, const Dataset& calib, const Hyperparams& hp,
                               const RapsParams& raps, std::uint64_t seed, int threads = 0);

PredictionInterval predict_interval_split(const SplitConformal& sc, std::span<const double> x, double alpha);
std::vector<PredictionInterval> predict_intervals_split(const SplitConformal& sc, const Matrix& X, double alpha,
                                                        int threads = 0);

/// u_j is keyed by test row index under `seed`.
PredictionSets predict_set_split(const SplitConformal& sc, const Matrix& X, double alpha, std::uint64_t seed,
                                 int threads = 0);

// ---------------------------------------------------------------------------
// CV+

struct CvCalibration {
  std::vector<ForestModel> fold_models;
  /// fold_of[i] = S(i)
  std::vector<std::uint32_t> fold_of;
  /// R_i or E_i, one per training sample, by its out-of-fold model
  std::vector<double> scores;
  std::size_t K = 0;
  RapsParams raps;
  Task task = Task::Regression;
  int n_classes = 0;
};

/// Seeded shuffle cut into K contiguous folds whose sizes differ by at most one.
std::vector<std::uint32_t> assign_folds(std::size_t n, std::size_t K, std::uint64_t seed);

/// Seed of the forest trained without fold k.
std::uint64_t fold_seed(std::uint64_t seed, std::size_t k);

/// Fits the K leave-one-fold-out forests; scores are left empty.
CvCalibration fit_cv_folds(const Dataset& train, std::size_t K, const Hyperparams& hp, std::uint64_t seed,
                           int threads = 0);

/// (Re)computes scores for every training sample with its out-of-fold model.
void score_cv(CvCalibration& cal, const Dataset& train, const RapsParams& raps, std::uint64_t seed, int threads = 0);

CvCalibration calibrate_cv(const Dataset& train, std::size_t K, const Hyperparams& hp, const RapsParams& raps,
                           std::uint64_t seed, int threads = 0);

// ---------------------------------------------------------------------------
// Jackknife+-after-bootstrap

/// B ~ Binomial(B_tilde, (1 - 1/(n+1))^m), redrawn while B == 0.
std::size_t sample_num_bootstraps(std::size_t B_tilde, std::size_t n, std::size_t m, std::uint64_t seed);

struct JabCalibration {
  ForestModel model;
  OobSets oob;
  /// Training indices with a non-empty OOB tree set.
  std::vector<std::size_t> active;
  /// One score per active sample, aligned with `active`.
  std::vector<double> scores;
  std::size_t B_tilde = 0;
  RapsParams raps;

  std::size_t n_inactive() const noexcept { return model.n_train - active.size(); }
};

/// Fits the bootstrap forest (B trees, B resampled when `resample_B`) and
/// derives the OOB sets; scores are left empty. Throws AllSamplesInBag.
JabCalibration fit_jab(const Dataset& train, std::size_t B_tilde, std::size_t m, bool resample_B, const Hyperparams& hp,
                       std::uint64_t seed, int threads = 0);

void score_jab(JabCalibration& cal, const Dataset& train, const RapsParams& raps, std::uint64_t seed, int threads = 0);

/// m = 0 means "n" (one bootstrap draw per training sample).
JabCalibration calibrate_jab(const Dataset& train, std::size_t B_tilde, std::size_t m, bool resample_B,
                             const Hyperparams& hp, const RapsParams& raps, std::uint64_t seed, int threads = 0);

// ---------------------------------------------------------------------------
// Cross-conformal prediction (CV+ and J+ab share everything below)

/// Regression leave-out predictions f^(-i)(x_j), shape (n_active x n_test).
Matrix leave_out_predictions(const CvCalibration& cal, const Matrix& X, int threads = 0);
Matrix leave_out_predictions(const JabCalibration& cal, const Matrix& X, int threads = 0);

/// Classification leave-out probabilities, shape (n_active x n_test x C).
Tensor3 leave_out_probabilities(const CvCalibration& cal, const Matrix& X, int threads = 0);
Tensor3 leave_out_probabilities(const JabCalibration& cal, const Matrix& X, int threads = 0);

/// lo_j = lower_quantile_i(loo[i, j] - R_i), hi_j = upper_quantile_i(loo[i, j] + R_i).
std::vector<PredictionInterval> intervals_from_leave_out(const Matrix& loo, std::span<const double> residuals,
                                                         double alpha, int threads = 0);

std::vector<PredictionInterval> predict_interval_cross(const CvCalibration& cal, const Matrix& X, double alpha,
                                                       int threads = 0);
std::vector<PredictionInterval> predict_interval_cross(const JabCalibration& cal, const Matrix& X, double alpha,
                                                       int threads = 0);

/// Conformal p-values for every (test row, class). Test scores use u_j keyed by
/// test row under `seed`. With chunk_rows > 0 the test set is processed in
/// chunks of that many rows to bound the giqs tensor; results are unchanged.
Matrix cross_pvalues(const CvCalibration& cal, const Matrix& X, std::uint64_t seed, int threads = 0,
                     std::size_t chunk_rows = 0);
Matrix cross_pvalues(const JabCalibration& cal, const Matrix& X, std::uint64_t seed, int threads = 0,
                     std::size_t chunk_rows = 0);

/// {y : p[j, y] >= alpha}; an empty row gets the max-p class (lowest index on
/// ties) unless allow_empty_sets.
SetMatrix sets_from_pvalues(const Matrix& pvalues, double alpha, bool allow_empty_sets);

PredictionSets predict_set_cross(const CvCalibration& cal, const Matrix& X, double alpha, std::uint64_t seed,
                                 int threads = 0);
PredictionSets predict_set_cross(const JabCalibration& cal, const Matrix& X, double alpha, std::uint64_t seed,
                                 int threads = 0);

// ---------------------------------------------------------------------------
// Point predictions (forest mean; CV+ averages its fold models)

Matrix point_outputs(const SplitConformal& sc, const Matrix& X, int threads = 0);
Matrix point_outputs(const CvCalibration& cal, const Matrix& X, int threads = 0);
Matrix point_outputs(const JabCalibration& cal, const Matrix& X, int threads = 0);

/// Row-wise argmax, lowest index on ties.
std::vector<int> argmax_rows(const Matrix& probs);

// ---------------------------------------------------------------------------
// RAPS (k, lambda) search

inline constexpr double kLambdaGrid[] = {0.001, 0.01, 0.1, 0.2, 0.5, 1.0};

/// k* = ceil((1 - alpha)(n + 1))-th smallest true-label rank on the tuning
/// set, clamped to [1, C]. lambda* minimizes the mean split-conformal set size
/// on the tuning set over kLambdaGrid (ties keep the smaller lambda).
/// `randomized` / `allow_empty_sets` carry over into the result.
RapsParams search_k_and_lambda(const Matrix& tuning_probs, std::span<const int> labels, double alpha, bool randomized,
                               bool allow_empty_sets, std::uint64_t seed, int threads = 0);

}  // namespace cforest
