#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cforest/bundle.hpp"
#include "cforest/csv.hpp"
#include "cforest/metrics.hpp"

namespace cforest {

std::string to_string(Method m);
Method parse_method(const std::string& s);
std::string to_string(Task t);
Task parse_task(const std::string& s);

/// Resolved options for fit / benchmark.
struct RunConfig {
  Task task = Task::Classification;
  Method method = Method::Split;
  std::vector<double> alphas{0.1};
  int n_estimators = 100;
  std::size_t cv_folds = 5;
  /// k_init = lambda_init = "auto" runs the RAPS search on a 20% tuning slice.
  bool auto_raps = false;
  int k_init = 0;
  double lambda_init = 0.0;
  bool randomized = true;
  bool allow_empty_sets = true;
  bool resample_n_estimators = true;
  /// 0 = n
  std::size_t bootstrap_size = 0;
  std::optional<int> max_features;
  int min_samples_leaf = 1;
  std::optional<int> max_depth;
  /// split conformal only: share of the training rows held out for calibration
  double calib_fraction = 0.3;
  std::uint64_t seed = 0;
  int threads = 0;

  Hyperparams hyperparams() const;
  RapsParams raps() const;
};

/// Throws InvalidConfig.
void validate(const RunConfig& cfg);

inline constexpr double kTuningFraction = 0.2;

struct FitOutcome {
  Bundle bundle;
  nlohmann::ordered_json manifest;
};

/// Fits and calibrates the configured method. `calib` (split only) replaces
/// the internal train/calibration cut.
FitOutcome fit_bundle(const RunConfig& cfg, const LoadedData& train, const std::optional<LoadedData>& calib = std::nullopt);

/// `fit` subcommand: reads CSVs, writes the bundle and the JSON run manifest.
FitOutcome cmd_fit(const RunConfig& cfg, const std::filesystem::path& train_csv, const std::string& target,
                   const std::filesystem::path& bundle_path, const std::optional<std::filesystem::path>& manifest_path,
                   const std::optional<std::filesystem::path>& calib_csv = std::nullopt);

/// In-memory predictions of a bundle at one alpha.
struct BundlePredictions {
  /// classification
  PredictionSets sets;
  /// regression
  std::vector<double> point_values;
  std::vector<PredictionInterval> intervals;
};

BundlePredictions predict_bundle(const Bundle& bundle, const Matrix& X, double alpha, int threads = 0);

/// Wraps a synthetic or in-memory dataset with generated column names
/// (x0, x1, ...) and class labels ("0", "1", ...).
LoadedData as_loaded(const Dataset& data);

/// Prediction CSV text for every row of `test`.
///   classification: row,prediction,set   (set = '|'-joined labels)
///   regression:     row,prediction,lo,hi (unbounded sides print as -inf / inf)
std::string predict_csv(const Bundle& bundle, const CsvTable& test, double alpha, int threads = 0);

void cmd_predict(const std::filesystem::path& bundle_path, const std::filesystem::path& test_csv, double alpha,
                 const std::filesystem::path& out_path, int threads = 0);

/// Metrics of a predictions file against the truth column of `truth`.
EvalReport evaluate_predictions(const CsvTable& predictions, const CsvTable& truth, const std::string& target);

nlohmann::ordered_json report_json(const EvalReport& report, bool classification);

/// Prints a table to `out`; writes JSON to `json_path` when given, else after the table.
EvalReport cmd_evaluate(const std::filesystem::path& predictions_csv, const std::filesystem::path& truth_csv,
                        const std::string& target, const std::optional<std::filesystem::path>& json_path,
                        std::ostream& out);

// ---------------------------------------------------------------------------
// Benchmark

enum class Generator { Blobs, Linear, Csv };

struct BenchConfig {
  RunConfig run;
  std::vector<Method> methods{Method::Split};
  std::size_t n_trials = 10;
  Generator generator = Generator::Blobs;
  std::size_t n_train = 200;
  std::size_t n_test = 500;
  int n_classes = 10;
  std::size_t n_features = 5;
  double noise = 1.0;
  double cluster_std = 2.0;
  /// CSV-resampling mode: each trial draws a random train/test split.
  std::optional<std::filesystem::path> csv;
  std::string target;
  double test_fraction = 0.25;
};

struct BenchRow {
  std::size_t trial = 0;
  Method method = Method::Split;
  double alpha = 0.0;
  double coverage = 0.0;
  double mean_size = 0.0;
  double fit_seconds = 0.0;
  double predict_seconds = 0.0;
};

std::vector<BenchRow> run_benchmark(const BenchConfig& cfg);

/// One line per row, then one "mean" line per (method, alpha).
void write_benchmark_csv(std::ostream& os, const std::vector<BenchRow>& rows);

}  // namespace cforest
