// cforest: conformal random forests from the command line.
//
//   cforest fit       --train data.csv --target y --task classification --method cv --out model.cfb
//   cforest predict   --bundle model.cfb --test test.csv --alpha 0.05 --out preds.csv
//   cforest evaluate  --predictions preds.csv --truth test.csv --target y
//   cforest benchmark --task regression --generator linear --method split --trials 50
//
// Exit codes: 0 success, 2 validation error, 1 runtime error.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "cforest/commands.hpp"
#include "cforest/error.hpp"

namespace {

using namespace cforest;

struct RawRunOptions {
  std::string task = "classification";
  std::string method = "split";
  std::vector<double> alphas{0.1};
  std::string k_init = "0";
  std::string lambda_init = "0";
  bool no_randomized = false;
  bool no_empty_sets = false;
  bool no_resample = false;
  int max_features = 0;
  int max_depth = 0;
};

void add_run_options(CLI::App* cmd, RunConfig& cfg, RawRunOptions& raw) {
  cmd->add_option("--task", raw.task, "regression | classification")->capture_default_str();
  cmd->add_option("--alpha", raw.alphas, "miscoverage rate(s)")->capture_default_str();
  cmd->add_option("--n-estimators", cfg.n_estimators, "trees per forest (B~ for bootstrap)")->capture_default_str();
  cmd->add_option("--cv-folds", cfg.cv_folds, "K for the cv method")->capture_default_str();
  cmd->add_option("--k-init", raw.k_init, "RAPS k, or \"auto\"")->capture_default_str();
  cmd->add_option("--lambda-init", raw.lambda_init, "RAPS lambda, or \"auto\"")->capture_default_str();
  cmd->add_flag("--no-randomized", raw.no_randomized, "disable APS randomization");
  cmd->add_flag("--no-empty-sets", raw.no_empty_sets, "never return empty prediction sets");
  cmd->add_flag("--no-resample-n-estimators", raw.no_resample, "use exactly n-estimators trees for bootstrap");
  cmd->add_option("--bootstrap-size", cfg.bootstrap_size, "bootstrap draws per tree (0 = n)")->capture_default_str();
  cmd->add_option("--max-features", raw.max_features, "features tried per split (0 = default)");
  cmd->add_option("--min-samples-leaf", cfg.min_samples_leaf)->capture_default_str();
  cmd->add_option("--max-depth", raw.max_depth, "0 = unlimited");
  cmd->add_option("--calib-fraction", cfg.calib_fraction, "split method: calibration share")->capture_default_str();
  cmd->add_option("--seed", cfg.seed)->capture_default_str();
  cmd->add_option("--threads", cfg.threads, "0 = all cores")->capture_default_str();
}

void resolve_run_options(RunConfig& cfg, const RawRunOptions& raw) {
  cfg.task = parse_task(raw.task);
  cfg.alphas = raw.alphas;
  const bool k_auto = raw.k_init == "auto";
  const bool l_auto = raw.lambda_init == "auto";
  require(k_auto == l_auto, ErrorCode::InvalidConfig, "k-init and lambda-init must both be \"auto\" or both numeric");
  cfg.auto_raps = k_auto;
  if (!k_auto) {
    try {
      cfg.k_init = std::stoi(raw.k_init);
      cfg.lambda_init = std::stod(raw.lambda_init);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidConfig, "k-init / lambda-init must be numbers or \"auto\"");
    }
  }
  cfg.randomized = !raw.no_randomized;
  cfg.allow_empty_sets = !raw.no_empty_sets;
  cfg.resample_n_estimators = !raw.no_resample;
  if (raw.max_features > 0) cfg.max_features = raw.max_features;
  if (raw.max_depth > 0) cfg.max_depth = raw.max_depth;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("cforest"));
  spdlog::set_level(spdlog::level::warn);

  CLI::App app{"Conformal prediction with random forests"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");

  RunConfig fit_cfg;
  RawRunOptions fit_raw;
  std::string train_csv, target, out_bundle, manifest, calib_csv;
  auto* fit = app.add_subcommand("fit", "fit and calibrate a conformal forest");
  fit->add_option("--train", train_csv, "training CSV")->required();
  fit->add_option("--target", target, "target column name")->required();
  fit->add_option("--method", fit_raw.method, "split | cv | bootstrap")->capture_default_str();
  fit->add_option("--calib", calib_csv, "split method: explicit calibration CSV");
  fit->add_option("--out", out_bundle, "bundle output path")->required();
  fit->add_option("--manifest", manifest, "run manifest JSON path (default: <out>.json)");
  add_run_options(fit, fit_cfg, fit_raw);

  std::string bundle_path, test_csv, pred_out;
  double alpha = 0.1;
  int pred_threads = 0;
  auto* predict = app.add_subcommand("predict", "predict sets or intervals for a CSV");
  predict->add_option("--bundle", bundle_path)->required();
  predict->add_option("--test", test_csv)->required();
  predict->add_option("--alpha", alpha)->capture_default_str();
  predict->add_option("--out", pred_out)->required();
  predict->add_option("--threads", pred_threads, "0 = all cores")->capture_default_str();

  std::string eval_preds, eval_truth, eval_target, eval_json;
  auto* evaluate = app.add_subcommand("evaluate", "coverage and size of a predictions file");
  evaluate->add_option("--predictions", eval_preds)->required();
  evaluate->add_option("--truth", eval_truth, "CSV holding the true targets")->required();
  evaluate->add_option("--target", eval_target)->required();
  evaluate->add_option("--json", eval_json, "write the JSON report here");

  BenchConfig bench;
  RawRunOptions bench_raw;
  std::vector<std::string> bench_methods{"split"};
  std::string generator = "blobs", bench_out, bench_csv;
  auto* benchmark = app.add_subcommand("benchmark", "Monte Carlo coverage/size table");
  add_run_options(benchmark, bench.run, bench_raw);
  benchmark->add_option("--method", bench_methods, "one or more of split | cv | bootstrap")->capture_default_str();
  benchmark->add_option("--trials", bench.n_trials)->capture_default_str();
  benchmark->add_option("--generator", generator, "blobs | linear | csv")->capture_default_str();
  benchmark->add_option("--n-train", bench.n_train)->capture_default_str();
  benchmark->add_option("--n-test", bench.n_test)->capture_default_str();
  benchmark->add_option("--n-classes", bench.n_classes)->capture_default_str();
  benchmark->add_option("--n-features", bench.n_features)->capture_default_str();
  benchmark->add_option("--noise", bench.noise)->capture_default_str();
  benchmark->add_option("--cluster-std", bench.cluster_std)->capture_default_str();
  benchmark->add_option("--data", bench_csv, "csv mode: data file");
  benchmark->add_option("--target", bench.target, "csv mode: target column");
  benchmark->add_option("--test-fraction", bench.test_fraction)->capture_default_str();
  benchmark->add_option("--out", bench_out, "CSV output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (verbose) spdlog::set_level(spdlog::level::info);

  try {
    if (*fit) {
      resolve_run_options(fit_cfg, fit_raw);
      fit_cfg.method = parse_method(fit_raw.method);
      const std::filesystem::path manifest_path = manifest.empty() ? out_bundle + ".json" : manifest;
      std::optional<std::filesystem::path> calib;
      if (!calib_csv.empty()) calib = calib_csv;
      cmd_fit(fit_cfg, train_csv, target, out_bundle, manifest_path, calib);
      std::cerr << "wrote " << out_bundle << " and " << manifest_path.string() << '\n';
    } else if (*predict) {
      cmd_predict(bundle_path, test_csv, alpha, pred_out, pred_threads);
    } else if (*evaluate) {
      std::optional<std::filesystem::path> json;
      if (!eval_json.empty()) json = eval_json;
      cmd_evaluate(eval_preds, eval_truth, eval_target, json, std::cout);
    } else if (*benchmark) {
      resolve_run_options(bench.run, bench_raw);
      bench.methods.clear();
      for (const auto& m : bench_methods) bench.methods.push_back(parse_method(m));
      if (generator == "blobs") {
        bench.generator = Generator::Blobs;
      } else if (generator == "linear") {
        bench.generator = Generator::Linear;
      } else if (generator == "csv") {
        bench.generator = Generator::Csv;
        if (!bench_csv.empty()) bench.csv = bench_csv;
      } else {
        fail(ErrorCode::InvalidConfig, "unknown generator '" + generator + "'");
      }
      const auto rows = run_benchmark(bench);
      if (bench_out.empty()) {
        write_benchmark_csv(std::cout, rows);
      } else {
        std::ofstream os(bench_out);
        require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + bench_out);
        write_benchmark_csv(os, rows);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_validation(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
