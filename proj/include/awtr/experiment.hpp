#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "awtr/baselines.hpp"
#include "awtr/cohort.hpp"
#include "awtr/config_file.hpp"
#include "awtr/cross_validation.hpp"

namespace awtr {

struct ExperimentConfig {
  Eigen::Index m = 50;
  Eigen::Index n = 250;
  std::vector<double> sparsity_levels{0.5, 0.7, 0.9, 0.95, 0.99};
  std::vector<int> n_values{1, 2, 5, 10};
  std::vector<Method> methods{Method::awtr, Method::prime, Method::lormc};
  std::vector<CorrelationScenario> scenarios{CorrelationScenario::serial(0.0)};
  int replications = 10;
  std::uint64_t base_seed = 20240101;
  bool cv = false;
  int cv_folds = 5;
  CvGrid cv_grid;
  bool eval_exclude_observed = false;
  bool trace = false;
  bool allow_custom = false;
  int workers = 1;
  std::filesystem::path output_dir = "results";
  SolverConfig solver;
  SimulatorParams simulator;

  /// Throws ConfigError before any work is done.
  void validate() const;

  /// "paper" (200 x 1000, 50 reps), "desk" (50 x 250, 10 reps), "smoke" (10 x 20, 2 reps).
  static ExperimentConfig preset(const std::string& name);
};

/// Applies [experiment], [solver] and [simulator] keys. Unknown keys are a
/// ConfigError. A "preset" key in [experiment] is applied first.
void apply_config_file(const ConfigFile& file, ExperimentConfig& config);

/// The configuration as loadable key=value text.
std::string config_to_text(const ExperimentConfig& config);

struct ResultRow {
  std::string method;
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  double sparsity = 0.0;
  int top_n = 0;
  std::string scenario_kind;
  double scenario_param = 0.0;
  int replication = 0;
  double hr = 0.0;
  double ndcg = 0.0;
  double nrmse = 0.0;
  int iterations = 0;
  bool converged = false;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";
};

/// 64-bit mix of (cell, replication), XORed into the base seed.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t cell, std::uint64_t replication);

struct ExperimentOutcome {
  std::vector<ResultRow> rows;
  int failures = 0;
  std::filesystem::path directory;
};

/// Runs every (scenario, sparsity, method, N) cell for each replication and
/// writes results.csv, timings.csv, summary_hr.csv, summary_ndcg.csv and
/// manifest.txt into config.output_dir. Solver failures become rows with a
/// non-"ok" status.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// results.csv header (no wall-clock column, so reruns are byte-identical).
std::string results_header();
std::string format_result_row(const ResultRow& row);
std::vector<ResultRow> read_results(const std::filesystem::path& results_csv);

struct SummaryCell {
  std::string scenario;
  std::string method;
  int top_n = 0;
  double sparsity = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;
};

enum class Metric { hr, ndcg };

/// Mean and standard error over replications of successful rows, grouped by
/// (scenario, method, N, sparsity) in first-appearance order.
std::vector<SummaryCell> summarize(const std::vector<ResultRow>& rows, Metric metric);

struct PlotFilter {
  std::optional<std::string> scenario;  ///< default: first scenario in the file
  std::vector<std::string> methods;     ///< empty: all
};

/// Writes fig_hr_m{m}.csv and fig_ndcg_m{m}.csv (method,sparsity,N,mean,stderr)
/// for each m found in results.csv. Returns the files written.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_dir, const PlotFilter& filter = {});

/// SHA-1 of the content framed as a git blob ("blob <len>\0<content>").
std::string git_blob_hash(const std::string& content);

}  // namespace awtr
