#include "cforest/commands.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cforest/error.hpp"
#include "cforest/quantile.hpp"
#include "cforest/rng.hpp"
#include "cforest/synthetic.hpp"

namespace cforest {

std::string to_string(Method m) {
  switch (m) {
    case Method::Split: return "split";
    case Method::CvPlus: return "cv";
    case Method::JackknifeAfterBootstrap: return "bootstrap";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "split") return Method::Split;
  if (s == "cv") return Method::CvPlus;
  if (s == "bootstrap") return Method::JackknifeAfterBootstrap;
  fail(ErrorCode::InvalidConfig, "unknown method '" + s + "' (split | cv | bootstrap)");
}

std::string to_string(Task t) { return t == Task::Regression ? "regression" : "classification"; }

Task parse_task(const std::string& s) {
  if (s == "regression") return Task::Regression;
  if (s == "classification") return Task::Classification;
  fail(ErrorCode::InvalidConfig, "unknown task '" + s + "' (regression | classification)");
}

Hyperparams RunConfig::hyperparams() const {
  Hyperparams hp;
  hp.n_estimators = n_estimators;
  hp.max_features = max_features;
  hp.min_samples_leaf = min_samples_leaf;
  hp.max_depth = max_depth;
  if (bootstrap_size > 0) hp.bootstrap_size = bootstrap_size;
  return hp;
}

RapsParams RunConfig::raps() const {
  RapsParams p;
  p.k_star = auto_raps ? 0 : k_init;
  p.lambda_star = auto_raps ? 0.0 : lambda_init;
  p.randomized = randomized;
  p.allow_empty_sets = allow_empty_sets;
  return p;
}

void validate(const RunConfig& cfg) {
  require(!cfg.alphas.empty(), ErrorCode::InvalidConfig, "at least one alpha is required");
  for (double a : cfg.alphas) {
    require(a > 0.0 && a < 1.0, ErrorCode::InvalidConfig, "alpha values must lie in (0, 1)");
  }
  require(cfg.n_estimators >= 1, ErrorCode::InvalidConfig, "n-estimators must be >= 1");
  require(cfg.method != Method::CvPlus || cfg.cv_folds >= 2, ErrorCode::InvalidConfig, "cv-folds must be >= 2");
  require(cfg.k_init >= 0 && cfg.lambda_init >= 0.0, ErrorCode::InvalidConfig, "k-init and lambda-init must be >= 0");
  require(cfg.calib_fraction > 0.0 && cfg.calib_fraction < 1.0, ErrorCode::InvalidConfig,
          "calib-fraction must lie in (0, 1)");
  require(cfg.min_samples_leaf >= 1, ErrorCode::InvalidConfig, "min-samples-leaf must be >= 1");
}

namespace {

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed, Stream stream) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Engine eng = make_engine(seed, stream, 0);
  shuffle(perm, eng);
  return perm;
}

// Splits [0, n) into a seeded sample of `k` rows and the rest, both ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> seeded_cut(std::size_t n, std::size_t k,
                                                                         std::uint64_t seed, Stream stream) {
  auto perm = seeded_permutation(n, seed, stream);
  std::vector<std::size_t> first(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<std::size_t> rest(perm.begin() + static_cast<std::ptrdiff_t>(k), perm.end());
  std::sort(first.begin(), first.end());
  std::sort(rest.begin(), rest.end());
  return {std::move(first), std::move(rest)};
}

std::vector<int> labels_of(const Dataset& d) {
  std::vector<int> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = d.label(i);
  return out;
}

double coverage_floor(Method m, double alpha, std::size_t K, std::size_t n) {
  switch (m) {
    case Method::Split: return 1.0 - alpha;
    case Method::CvPlus: return 1.0 - 2.0 * alpha - epsilon_cv_bound(K, n);
    case Method::JackknifeAfterBootstrap: return 1.0 - 2.0 * alpha;
  }
  return 0.0;
}

}  // namespace

FitOutcome fit_bundle(const RunConfig& cfg, const LoadedData& train, const std::optional<LoadedData>& calib) {
  validate(cfg);
  const Dataset& all = train.data;
  validate(all);
  require(all.task == cfg.task, ErrorCode::TaskMismatch, "training data task differs from the configured task");
  const bool classification = cfg.task == Task::Classification;
  const bool tune = classification && cfg.auto_raps;
  const std::uint64_t seed = cfg.seed;
  const int threads = cfg.threads;
  const Hyperparams hp = cfg.hyperparams();

  std::vector<std::size_t> tune_idx;
  std::vector<std::size_t> rest_idx(all.size());
  std::iota(rest_idx.begin(), rest_idx.end(), std::size_t{0});
  if (tune) {
    const auto n_tune = static_cast<std::size_t>(std::llround(kTuningFraction * static_cast<double>(all.size())));
    require(n_tune >= 10, ErrorCode::TuningTooSmall,
            "k/lambda auto-search needs a tuning slice of >= 10 rows (20% of training)");
    std::tie(tune_idx, rest_idx) = seeded_cut(all.size(), n_tune, seed, Stream::TuningSplit);
  }
  const Dataset tuning = all.subset(tune_idx);
  const Dataset rest = all.subset(rest_idx);

  RapsParams raps = cfg.raps();
  if (classification) validate(raps, all.n_classes);
  auto search = [&](const Matrix& probs) {
    raps = search_k_and_lambda(probs, labels_of(tuning), cfg.alphas.front(), cfg.randomized, cfg.allow_empty_sets, seed,
                               threads);
    spdlog::info("RAPS search: k* = {}, lambda* = {}", raps.k_star, raps.lambda_star);
  };

  FitOutcome out;
  Bundle& b = out.bundle;
  b.task = cfg.task;
  b.method = cfg.method;
  b.seed = seed;
  b.feature_names = train.feature_names;
  b.class_labels = train.class_labels;

  nlohmann::ordered_json m;
  m["format_version"] = kBundleVersion;
  m["task"] = to_string(cfg.task);
  m["method"] = to_string(cfg.method);
  m["seed"] = seed;
  m["n_rows"] = all.size();
  m["n_tuning"] = tuning.size();

  switch (cfg.method) {
    case Method::Split: {
      Dataset train_part;
      Dataset calib_part;
      if (calib) {
        require(same_schema(calib->data, rest) && calib->feature_names == train.feature_names &&
                    calib->class_labels == train.class_labels,
                ErrorCode::SchemaMismatch, "calibration CSV schema differs from the training CSV");
        train_part = rest;
        calib_part = calib->data;
      } else {
        const auto n_cal = static_cast<std::size_t>(std::llround(cfg.calib_fraction * static_cast<double>(rest.size())));
        require(n_cal >= 1 && n_cal < rest.size(), ErrorCode::InvalidConfig,
                "too few rows to split into training and calibration parts");
        auto [cal_idx, fit_idx] = seeded_cut(rest.size(), n_cal, seed, Stream::CalibSplit);
        train_part = rest.subset(fit_idx);
        calib_part = rest.subset(cal_idx);
      }
      SplitConformal sc;
      sc.model = fit_forest(train_part, hp, seed, threads);
      if (tune) search(predict_forest(sc.model, tuning.features, std::nullopt, threads));
      sc.calibration = score_split(sc.model, calib_part, raps, seed, threads);
      m["n_fit"] = train_part.size();
      m["n_calibration"] = calib_part.size();
      m["n_estimators"] = cfg.n_estimators;
      b.state = std::move(sc);
      break;
    }
    case Method::CvPlus: {
      CvCalibration cv = fit_cv_folds(rest, cfg.cv_folds, hp, seed, threads);
      if (tune) search(point_outputs(cv, tuning.features, threads));
      score_cv(cv, rest, raps, seed, threads);
      m["n_calibration"] = rest.size();
      m["cv_folds"] = cfg.cv_folds;
      m["n_estimators_per_fold"] = cfg.n_estimators;
      m["epsilon_cv"] = epsilon_cv_bound(cfg.cv_folds, rest.size());
      b.state = std::move(cv);
      break;
    }
    case Method::JackknifeAfterBootstrap: {
      JabCalibration jab = fit_jab(rest, static_cast<std::size_t>(cfg.n_estimators), cfg.bootstrap_size,
                                   cfg.resample_n_estimators, hp, seed, threads);
      if (tune) search(predict_forest(jab.model, tuning.features, std::nullopt, threads));
      score_jab(jab, rest, raps, seed, threads);
      m["n_calibration"] = rest.size();
      m["B_tilde"] = jab.B_tilde;
      m["B"] = jab.model.n_trees();
      m["resample_n_estimators"] = cfg.resample_n_estimators;
      m["bootstrap_size"] = cfg.bootstrap_size == 0 ? rest.size() : cfg.bootstrap_size;
      m["n_active"] = jab.active.size();
      m["n_inactive"] = jab.n_inactive();
      b.state = std::move(jab);
      break;
    }
  }

  if (classification) {
    m["k_star"] = raps.k_star;
    m["lambda_star"] = raps.lambda_star;
    m["raps_auto"] = cfg.auto_raps;
    m["randomized"] = cfg.randomized;
    m["allow_empty_sets"] = cfg.allow_empty_sets;
    m["class_labels"] = b.class_labels;
  }
  nlohmann::ordered_json floors = nlohmann::ordered_json::object();
  for (double a : cfg.alphas) {
    floors[format_double(a)] = coverage_floor(cfg.method, a, cfg.cv_folds, rest.size());
  }
  m["theoretical_coverage"] = floors;
  out.manifest = std::move(m);
  return out;
}

FitOutcome cmd_fit(const RunConfig& cfg, const std::filesystem::path& train_csv, const std::string& target,
                   const std::filesystem::path& bundle_path, const std::optional<std::filesystem::path>& manifest_path,
                   const std::optional<std::filesystem::path>& calib_csv) {
  validate(cfg);
  const LoadedData train = load_csv(train_csv, target, cfg.task);
  std::optional<LoadedData> calib;
  if (calib_csv) {
    require(cfg.method == Method::Split, ErrorCode::InvalidConfig, "--calib is only valid with --method split");
    calib = load_csv(*calib_csv, target, cfg.task);
    if (cfg.task == Task::Classification) {
      // re-encode calibration labels with the training map
      std::map<std::string, int> index;
      for (std::size_t k = 0; k < train.class_labels.size(); ++k) index[train.class_labels[k]] = static_cast<int>(k);
      for (auto& y : calib->data.targets) {
        const auto& label = calib->class_labels[static_cast<std::size_t>(y)];
        auto it = index.find(label);
        require(it != index.end(), ErrorCode::SchemaMismatch, "calibration label '" + label + "' unseen in training");
        y = it->second;
      }
      calib->class_labels = train.class_labels;
      calib->data.n_classes = train.data.n_classes;
    }
  }
  FitOutcome out = fit_bundle(cfg, train, calib);
  save_bundle(out.bundle, bundle_path);
  if (manifest_path) {
    std::ofstream os(*manifest_path);
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + manifest_path->string());
    os << out.manifest.dump(2) << '\n';
  }
  return out;
}

BundlePredictions predict_bundle(const Bundle& bundle, const Matrix& X, double alpha, int threads) {
  require(X.cols() == bundle.feature_names.size(), ErrorCode::SchemaMismatch, "test feature count differs from the bundle");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::AlphaOutOfRange, "alpha must lie in (0, 1)");
  BundlePredictions out;
  const std::uint64_t seed = bundle.seed;
  std::visit(
      [&](const auto& state) {
        using T = std::decay_t<decltype(state)>;
        if (bundle.task == Task::Classification) {
          if constexpr (std::is_same_v<T, SplitConformal>) {
            out.sets = predict_set_split(state, X, alpha, seed, threads);
          } else {
            out.sets = predict_set_cross(state, X, alpha, seed, threads);
          }
        } else {
          const Matrix f = point_outputs(state, X, threads);
          out.point_values.assign(f.data().begin(), f.data().end());
          if constexpr (std::is_same_v<T, SplitConformal>) {
            out.intervals = predict_intervals_split(state, X, alpha, threads);
          } else {
            out.intervals = predict_interval_cross(state, X, alpha, threads);
          }
        }
      },
      bundle.state);
  return out;
}

LoadedData as_loaded(const Dataset& data) {
  LoadedData out;
  out.data = data;
  for (std::size_t f = 0; f < data.n_features(); ++f) out.feature_names.push_back("x" + std::to_string(f));
  if (data.task == Task::Classification) {
    for (int k = 0; k < data.n_classes; ++k) out.class_labels.push_back(std::to_string(k));
  }
  return out;
}

std::string predict_csv(const Bundle& bundle, const CsvTable& test, double alpha, int threads) {
  const Matrix X = features_from_table(test, bundle.feature_names);
  const BundlePredictions p = predict_bundle(bundle, X, alpha, threads);
  std::ostringstream os;
  if (bundle.task == Task::Classification) {
    os << "row,prediction,set\n";
    for (std::size_t j = 0; j < X.rows(); ++j) {
      os << j << ',' << bundle.class_labels[static_cast<std::size_t>(p.sets.point_predictions[j])] << ',';
      bool first = true;
      for (int c : p.sets.sets.classes(j)) {
        if (!first) os << '|';
        os << bundle.class_labels[static_cast<std::size_t>(c)];
        first = false;
      }
      os << '\n';
    }
  } else {
    os << "row,prediction,lo,hi\n";
    for (std::size_t j = 0; j < X.rows(); ++j) {
      os << j << ',' << format_double(p.point_values[j]) << ',' << format_double(p.intervals[j].lo) << ','
         << format_double(p.intervals[j].hi) << '\n';
    }
  }
  return os.str();
}

void cmd_predict(const std::filesystem::path& bundle_path, const std::filesystem::path& test_csv, double alpha,
                 const std::filesystem::path& out_path, int threads) {
  const Bundle bundle = load_bundle(bundle_path);
  const CsvTable test = read_csv(test_csv);
  const std::string text = predict_csv(bundle, test, alpha, threads);
  std::ofstream os(out_path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + out_path.string());
  os << text;
}

namespace {

std::vector<std::string> split_labels(const std::string& cell) {
  std::vector<std::string> out;
  if (cell.empty()) return out;
  std::string cur;
  for (char c : cell) {
    if (c == '|') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_bound(const std::string& cell, const std::string& where) {
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  return parse_number(cell, where);
}

}  // namespace

EvalReport evaluate_predictions(const CsvTable& predictions, const CsvTable& truth, const std::string& target) {
  require(predictions.rows.size() == truth.rows.size(), ErrorCode::LengthMismatch,
          std::to_string(predictions.rows.size()) + " predictions vs " + std::to_string(truth.rows.size()) +
              " truth rows");
  const std::size_t target_col = truth.column(target);
  const bool classification =
      std::find(predictions.header.begin(), predictions.header.end(), "set") != predictions.header.end();

  if (classification) {
    const std::size_t set_col = predictions.column("set");
    std::map<std::string, std::size_t> index;
    auto id = [&](const std::string& label) {
      auto [it, inserted] = index.emplace(label, index.size());
      return it->second;
    };
    std::vector<std::vector<std::size_t>> members;
    std::vector<int> y;
    for (std::size_t r = 0; r < predictions.rows.size(); ++r) {
      std::vector<std::size_t> row;
      for (const auto& l : split_labels(predictions.rows[r][set_col])) row.push_back(id(l));
      members.push_back(std::move(row));
      y.push_back(static_cast<int>(id(truth.rows[r][target_col])));
    }
    SetMatrix sets(members.size(), index.size());
    for (std::size_t r = 0; r < members.size(); ++r) {
      for (auto c : members[r]) sets.set(r, c);
    }
    return evaluate_sets(sets, y);
  }

  const std::size_t lo_col = predictions.column("lo");
  const std::size_t hi_col = predictions.column("hi");
  std::vector<PredictionInterval> intervals;
  std::vector<double> y;
  for (std::size_t r = 0; r < predictions.rows.size(); ++r) {
    const std::string where = "row " + std::to_string(r + 1);
    intervals.push_back({parse_bound(predictions.rows[r][lo_col], where), parse_bound(predictions.rows[r][hi_col], where)});
    y.push_back(parse_number(truth.rows[r][target_col], where + " truth"));
  }
  return evaluate_intervals(intervals, y);
}

nlohmann::ordered_json report_json(const EvalReport& report, bool classification) {
  nlohmann::ordered_json j;
  j["coverage"] = report.coverage;
  const double size = report.mean_size_or_length;
  if (std::isinf(size)) {
    j[classification ? "average_set_size" : "average_interval_length"] = "inf";
  } else {
    j[classification ? "average_set_size" : "average_interval_length"] = size;
  }
  j["n_evaluated"] = report.n_evaluated;
  return j;
}

EvalReport cmd_evaluate(const std::filesystem::path& predictions_csv, const std::filesystem::path& truth_csv,
                        const std::string& target, const std::optional<std::filesystem::path>& json_path,
                        std::ostream& out) {
  const CsvTable preds = read_csv(predictions_csv);
  const CsvTable truth = read_csv(truth_csv);
  const EvalReport report = evaluate_predictions(preds, truth, target);
  const bool classification = std::find(preds.header.begin(), preds.header.end(), "set") != preds.header.end();

  out << std::left << std::setw(26) << "metric" << "value\n";
  out << std::setw(26) << "coverage" << format_double(report.coverage) << '\n';
  out << std::setw(26) << (classification ? "average_set_size" : "average_interval_length")
      << format_double(report.mean_size_or_length) << '\n';
  out << std::setw(26) << "n_evaluated" << report.n_evaluated << '\n';

  const auto j = report_json(report, classification);
  if (json_path) {
    std::ofstream os(*json_path);
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + json_path->string());
    os << j.dump(2) << '\n';
  } else {
    out << j.dump() << '\n';
  }
  return report;
}

// ---------------------------------------------------------------------------
// Benchmark

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<BenchRow> run_benchmark(const BenchConfig& cfg) {
  require(cfg.n_trials >= 1, ErrorCode::InvalidConfig, "n-trials must be >= 1");
  require(!cfg.methods.empty(), ErrorCode::InvalidConfig, "at least one method is required");
  validate(cfg.run);

  std::optional<LoadedData> csv_data;
  if (cfg.generator == Generator::Csv) {
    require(cfg.csv.has_value(), ErrorCode::InvalidConfig, "csv mode needs --data");
    csv_data = load_csv(*cfg.csv, cfg.target, cfg.run.task);
  }
  const BlobsGenerator blobs{cfg.n_classes, cfg.n_features, cfg.cluster_std, 5.0, cfg.run.seed};
  const LinearGenerator linear{cfg.n_features, cfg.noise, cfg.run.seed};

  std::vector<BenchRow> rows;
  for (std::size_t trial = 0; trial < cfg.n_trials; ++trial) {
    const std::uint64_t trial_seed = derive_seed(cfg.run.seed, Stream::Synthetic, 1000 + trial);
    LoadedData train;
    Dataset test;
    switch (cfg.generator) {
      case Generator::Blobs:
        require(cfg.run.task == Task::Classification, ErrorCode::InvalidConfig, "blobs generator is classification-only");
        train = as_loaded(blobs.sample(cfg.n_train, derive_seed(trial_seed, Stream::Synthetic, 0)));
        test = blobs.sample(cfg.n_test, derive_seed(trial_seed, Stream::Synthetic, 1));
        break;
      case Generator::Linear:
        require(cfg.run.task == Task::Regression, ErrorCode::InvalidConfig, "linear generator is regression-only");
        train = as_loaded(linear.sample(cfg.n_train, derive_seed(trial_seed, Stream::Synthetic, 0)));
        test = linear.sample(cfg.n_test, derive_seed(trial_seed, Stream::Synthetic, 1));
        break;
      case Generator::Csv: {
        const Dataset& all = csv_data->data;
        const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(all.size())));
        require(n_test >= 1 && n_test < all.size(), ErrorCode::InvalidConfig, "test-fraction leaves an empty side");
        auto [test_idx, train_idx] = seeded_cut(all.size(), n_test, trial_seed, Stream::CalibSplit);
        train = *csv_data;
        train.data = all.subset(train_idx);
        test = all.subset(test_idx);
        break;
      }
    }

    for (Method method : cfg.methods) {
      RunConfig run = cfg.run;
      run.method = method;
      run.seed = trial_seed;
      const auto t_fit = std::chrono::steady_clock::now();
      const FitOutcome fit = fit_bundle(run, train);
      const double fit_s = seconds_since(t_fit);
      for (double alpha : run.alphas) {
        const auto t_pred = std::chrono::steady_clock::now();
        const BundlePredictions p = predict_bundle(fit.bundle, test.features, alpha, run.threads);
        BenchRow row;
        row.trial = trial;
        row.method = method;
        row.alpha = alpha;
        row.fit_seconds = fit_s;
        row.predict_seconds = seconds_since(t_pred);
        if (run.task == Task::Classification) {
          std::vector<int> y(test.size());
          for (std::size_t i = 0; i < test.size(); ++i) y[i] = test.label(i);
          row.coverage = classification_coverage(p.sets.sets, y);
          row.mean_size = average_set_size(p.sets.sets);
        } else {
          row.coverage = regression_coverage(p.intervals, test.targets);
          row.mean_size = average_interval_length(p.intervals);
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_benchmark_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "trial,method,alpha,coverage,mean_size,fit_seconds,predict_seconds\n";
  std::map<std::pair<int, double>, std::vector<const BenchRow*>> groups;
  for (const auto& r : rows) {
    os << r.trial << ',' << to_string(r.method) << ',' << format_double(r.alpha) << ',' << format_double(r.coverage)
       << ',' << format_double(r.mean_size) << ',' << format_double(r.fit_seconds) << ','
       << format_double(r.predict_seconds) << '\n';
    groups[{static_cast<int>(r.method), r.alpha}].push_back(&r);
  }
  for (const auto& [key, members] : groups) {
    double cov = 0.0, size = 0.0, fit = 0.0, pred = 0.0;
    for (const auto* r : members) {
      cov += r->coverage;
      size += r->mean_size;
      fit += r->fit_seconds;
      pred += r->predict_seconds;
    }
    const double n = static_cast<double>(members.size());
    os << "mean," << to_string(static_cast<Method>(key.first)) << ',' << format_double(key.second) << ','
       << format_double(cov / n) << ',' << format_double(size / n) << ',' << format_double(fit / n) << ','
       << format_double(pred / n) << '\n';
  }
}

}  // namespace cforest
