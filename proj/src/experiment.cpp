#include "awtr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "awtr/csv.hpp"
#include "awtr/errors.hpp"
#include "awtr/metrics.hpp"

namespace awtr {

namespace {

constexpr double kStandardSparsity[] = {0.5, 0.7, 0.9, 0.95, 0.99};
constexpr int kStandardTopN[] = {1, 2, 5, 10};
constexpr std::uint64_t kCohortDomain = 0xC0407A11D0D0ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + csv::format_double(v[k]);
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& item : csv::split(text)) {
    const auto t = csv::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  if (!csv::parse_double(text, v)) throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& text) {
  Int v{};
  if (!csv::parse_int(text, v)) throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + text + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_double(key, item));
  return out;
}

std::string init_mode_name(InitMode mode) {
  return mode == InitMode::prime_warm_start ? "prime_warm_start" : "identity_weights";
}

InitMode parse_init_mode(const std::string& text) {
  if (text == "prime_warm_start") return InitMode::prime_warm_start;
  if (text == "identity_weights") return InitMode::identity_weights;
  throw ConfigError("init_mode must be prime_warm_start or identity_weights, got '" + text + "'");
}

// Name -> member binding for the [simulator] section.
std::vector<std::pair<std::string, double SimulatorParams::*>> simulator_keys() {
  return {
      {"kdpi_age_center", &SimulatorParams::kdpi_age_center},
      {"kdpi_age_coef", &SimulatorParams::kdpi_age_coef},
      {"kdpi_creatinine_coef", &SimulatorParams::kdpi_creatinine_coef},
      {"kdpi_egfr_center", &SimulatorParams::kdpi_egfr_center},
      {"kdpi_egfr_coef", &SimulatorParams::kdpi_egfr_coef},
      {"kdpi_hypertension_coef", &SimulatorParams::kdpi_hypertension_coef},
      {"kdpi_diabetes_coef", &SimulatorParams::kdpi_diabetes_coef},
      {"kdpi_aki_coef", &SimulatorParams::kdpi_aki_coef},
      {"lyft_intercept", &SimulatorParams::lyft_intercept},
      {"lyft_age_coef", &SimulatorParams::lyft_age_coef},
      {"lyft_diabetes_coef", &SimulatorParams::lyft_diabetes_coef},
      {"lyft_hypertension_coef", &SimulatorParams::lyft_hypertension_coef},
      {"lyft_albumin_coef", &SimulatorParams::lyft_albumin_coef},
      {"lyft_kdpi_offset", &SimulatorParams::lyft_kdpi_offset},
      {"cpra_zero_prob", &SimulatorParams::cpra_zero_prob},
      {"cpra_min", &SimulatorParams::cpra_min},
      {"cpra_max", &SimulatorParams::cpra_max},
      {"block_offdiag", &SimulatorParams::block_offdiag},
  };
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ':' || c == '/' || c == ' ') c = '-';
  }
  return s;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write " + path.string());
  out << content;
  if (!out) throw FileError("write failed for " + path.string());
}

struct Unit {
  std::size_t scenario = 0;
  int replication = 0;
};

void write_trace(const std::filesystem::path& path, const std::vector<TracePoint>& trace) {
  std::ostringstream out;
  out << "iteration,residual_change,consensus_R,consensus_beta,objective\n";
  for (const auto& t : trace) {
    out << t.iteration << ',' << csv::format_double(t.residual_change) << ',' << csv::format_double(t.consensus_r)
        << ',' << csv::format_double(t.consensus_beta) << ',' << csv::format_double(t.objective) << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<ResultRow> run_unit(const ExperimentConfig& config, const Unit& unit) {
  const auto& scenario = config.scenarios[unit.scenario];
  const auto rep = static_cast<std::uint64_t>(unit.replication);
  std::vector<ResultRow> rows;

  auto base_row = [&](Method method, double level, int top_n, std::uint64_t seed) {
    ResultRow row;
    row.method = std::string(method_name(method));
    row.m = config.m;
    row.n = config.n;
    row.sparsity = level;
    row.top_n = top_n;
    row.scenario_kind = scenario.kind == CorrelationScenario::Kind::serial ? "serial" : "block";
    row.scenario_param = scenario.parameter();
    row.replication = unit.replication;
    row.seed = seed;
    return row;
  };
  auto fail_rows = [&](Method method, double level, std::uint64_t seed, const std::string& why) {
    for (int top : config.n_values) {
      auto row = base_row(method, level, top, seed);
      row.hr = row.ndcg = row.nrmse = std::numeric_limits<double>::quiet_NaN();
      row.status = "error: " + why;
      rows.push_back(std::move(row));
    }
  };

  Cohort cohort;
  KasResult kas;
  std::optional<CovariateTable> x;
  std::string cohort_error;
  try {
    const auto spec = CohortSpec::kidney(config.m, config.n,
                                         derive_seed(config.base_seed ^ kCohortDomain, unit.scenario, rep));
    cohort = sample_cohort(spec, scenario, config.simulator);
    kas = synthesize_kas(cohort, config.simulator);
    x.emplace(build_covariates(cohort));
  } catch (const std::exception& e) {
    cohort_error = e.what();
  }

  for (std::size_t l = 0; l < config.sparsity_levels.size(); ++l) {
    const double level = config.sparsity_levels[l];
    const std::uint64_t cell = unit.scenario * config.sparsity_levels.size() + l;
    const std::uint64_t seed = derive_seed(config.base_seed, cell, rep);
    if (!cohort_error.empty()) {
      for (Method method : config.methods) fail_rows(method, level, seed, cohort_error);
      continue;
    }
    std::optional<MaskedResponseMatrix> y;
    try {
      y.emplace(apply_sparsity(kas.y, level, seed));
    } catch (const std::exception& e) {
      for (Method method : config.methods) fail_rows(method, level, seed, e.what());
      continue;
    }

    std::vector<EntryIndex> held_out;
    for (Eigen::Index i = 0; i < config.m; ++i) {
      for (Eigen::Index j = 0; j < config.n; ++j) {
        if (!y->is_observed(i, j)) held_out.push_back({i, j, i * config.n + j});
      }
    }
    if (held_out.empty()) held_out = y->observed();

    for (Method method : config.methods) {
      try {
        const auto start = std::chrono::steady_clock::now();
        SolverConfig solver = config.solver;
        solver.record_trace = config.trace;
        if (config.cv) {
          solver = cross_validate(method, *y, *x, solver, config.cv_grid, config.cv_folds, seed).config;
          solver.record_trace = config.trace;
        }
        const auto fit = fit_method(method, *y, *x, solver);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (config.trace) {
          const auto dir = config.output_dir / "traces";
          std::filesystem::create_directories(dir);
          write_trace(dir / (sanitize(scenario.label()) + "_sp" + csv::format_double(level) + "_" +
                             std::string(method_name(method)) + "_rep" + std::to_string(unit.replication) + ".csv"),
                      fit.trace);
        }
        const double err = nrmse(kas.y, fit.predicted, held_out);
        for (int top : config.n_values) {
          auto row = base_row(method, level, top, seed);
          const auto report =
              evaluate_top_n(kas.y, fit.predicted, top, config.eval_exclude_observed ? &y->mask() : nullptr);
          row.hr = report.hr;
          row.ndcg = report.ndcg;
          row.nrmse = err;
          row.iterations = fit.iterations_used;
          row.converged = fit.converged;
          row.wall_seconds = seconds;
          rows.push_back(std::move(row));
        }
      } catch (const std::exception& e) {
        fail_rows(method, level, seed, e.what());
      }
    }
  }
  return rows;
}

std::size_t index_in(const std::vector<double>& v, double x) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (m < 1 || n < 1) fail("m and n must be >= 1");
  if (replications < 1) fail("replications must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
  if (sparsity_levels.empty()) fail("at least one sparsity level is required");
  if (n_values.empty()) fail("at least one N value is required");
  if (methods.empty()) fail("at least one method is required");
  if (scenarios.empty()) fail("at least one correlation scenario is required");
  if (cv_folds < 2) fail("cv_folds must be >= 2");
  for (double s : sparsity_levels) {
    if (!(s >= 0.0 && s < 1.0)) fail("sparsity levels must lie in [0, 1)");
    if (!allow_custom && std::find(std::begin(kStandardSparsity), std::end(kStandardSparsity), s) == std::end(kStandardSparsity)) {
      fail("sparsity " + csv::format_double(s) + " is not one of 0.5,0.7,0.9,0.95,0.99 (use --allow-custom)");
    }
  }
  for (int top : n_values) {
    if (top < 1 || top > n) fail("N values must lie in [1, n]");
    if (!allow_custom && std::find(std::begin(kStandardTopN), std::end(kStandardTopN), top) == std::end(kStandardTopN)) {
      fail("N=" + std::to_string(top) + " is not one of 1,2,5,10 (use --allow-custom)");
    }
  }
  {
    std::set<Method> seen(methods.begin(), methods.end());
    if (seen.size() != methods.size()) fail("methods must not repeat");
  }
  for (const auto& s : scenarios) latent_covariance(s, kFeaturesPerSide, simulator);
  solver.validate();
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  ExperimentConfig cfg;
  if (name == "paper") {
    cfg.m = 200;
    cfg.n = 1000;
    cfg.replications = 50;
  } else if (name == "desk") {
    cfg.m = 50;
    cfg.n = 250;
    cfg.replications = 10;
  } else if (name == "smoke") {
    cfg.m = 10;
    cfg.n = 20;
    cfg.replications = 2;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected paper, desk or smoke)");
  }
  return cfg;
}

void apply_config_file(const ConfigFile& file, ExperimentConfig& config) {
  const auto& exp = file.section("experiment");
  if (auto preset = file.get("experiment", "preset")) {
    const auto keep_solver = config.solver;
    const auto keep_sim = config.simulator;
    config = ExperimentConfig::preset(*preset);
    config.solver = keep_solver;
    config.simulator = keep_sim;
  }
  for (const auto& [key, value] : exp) {
    const std::string k = "[experiment] " + key;
    if (key == "preset") continue;
    if (key == "m") config.m = to_int<Eigen::Index>(k, value);
    else if (key == "n") config.n = to_int<Eigen::Index>(k, value);
    else if (key == "sparsity") config.sparsity_levels = to_doubles(k, value);
    else if (key == "N") {
      config.n_values.clear();
      for (const auto& item : split_list(value)) config.n_values.push_back(to_int<int>(k, item));
    } else if (key == "methods") {
      config.methods.clear();
      for (const auto& item : split_list(value)) config.methods.push_back(parse_method(item));
    } else if (key == "scenarios" || key == "scenario") {
      config.scenarios.clear();
      for (const auto& item : split_list(value)) config.scenarios.push_back(CorrelationScenario::parse(item));
    } else if (key == "reps") config.replications = to_int<int>(k, value);
    else if (key == "seed") config.base_seed = to_int<std::uint64_t>(k, value);
    else if (key == "cv") config.cv = to_bool(k, value);
    else if (key == "cv_folds") config.cv_folds = to_int<int>(k, value);
    else if (key == "eval_exclude_observed") config.eval_exclude_observed = to_bool(k, value);
    else if (key == "trace") config.trace = to_bool(k, value);
    else if (key == "allow_custom") config.allow_custom = to_bool(k, value);
    else if (key == "workers") config.workers = to_int<int>(k, value);
    else if (key == "out") config.output_dir = value;
    else throw ConfigError("unknown key " + k);
  }
  for (const auto& [key, value] : file.section("solver")) {
    const std::string k = "[solver] " + key;
    auto& s = config.solver;
    if (key == "lambda1") s.lambda1 = to_double(k, value);
    else if (key == "lambda2") s.lambda2 = to_double(k, value);
    else if (key == "mu1") s.mu1 = to_double(k, value);
    else if (key == "mu2") s.mu2 = to_double(k, value);
    else if (key == "tol") s.tol = to_double(k, value);
    else if (key == "max_iterations") s.max_iterations = to_int<int>(k, value);
    else if (key == "weight_floor") s.weight_floor = to_double(k, value);
    else if (key == "consensus_tol") s.consensus_tol = to_double(k, value);
    else if (key == "init_mode") s.init_mode = parse_init_mode(value);
    else throw ConfigError("unknown key " + k);
  }
  const auto sim_keys = simulator_keys();
  for (const auto& [key, value] : file.section("simulator")) {
    const auto it = std::find_if(sim_keys.begin(), sim_keys.end(), [&](const auto& kv) { return kv.first == key; });
    if (it == sim_keys.end()) throw ConfigError("unknown key [simulator] " + key);
    config.simulator.*(it->second) = to_double("[simulator] " + key, value);
  }
}

std::string config_to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[experiment]\n";
  out << "m=" << c.m << "\nn=" << c.n << '\n';
  out << "sparsity=" << join_doubles(c.sparsity_levels) << '\n';
  out << "N=";
  for (std::size_t k = 0; k < c.n_values.size(); ++k) out << (k ? "," : "") << c.n_values[k];
  out << "\nmethods=";
  for (std::size_t k = 0; k < c.methods.size(); ++k) out << (k ? "," : "") << method_name(c.methods[k]);
  out << "\nscenarios=";
  for (std::size_t k = 0; k < c.scenarios.size(); ++k) out << (k ? "," : "") << c.scenarios[k].label();
  out << "\nreps=" << c.replications << "\nseed=" << c.base_seed << "\ncv=" << (c.cv ? "true" : "false")
      << "\ncv_folds=" << c.cv_folds << "\neval_exclude_observed=" << (c.eval_exclude_observed ? "true" : "false")
      << "\ntrace=" << (c.trace ? "true" : "false") << "\nallow_custom=" << (c.allow_custom ? "true" : "false")
      << "\nout=" << c.output_dir.string() << '\n';
  out << "\n[solver]\n";
  out << "lambda1=" << csv::format_double(c.solver.lambda1) << "\nlambda2=" << csv::format_double(c.solver.lambda2)
      << "\nmu1=" << csv::format_double(c.solver.mu1) << "\nmu2=" << csv::format_double(c.solver.mu2)
      << "\ntol=" << csv::format_double(c.solver.tol) << "\nmax_iterations=" << c.solver.max_iterations
      << "\nweight_floor=" << csv::format_double(c.solver.weight_floor)
      << "\nconsensus_tol=" << csv::format_double(c.solver.consensus_tol)
      << "\ninit_mode=" << init_mode_name(c.solver.init_mode) << '\n';
  out << "\n[simulator]\n";
  for (const auto& [key, member] : simulator_keys()) out << key << '=' << csv::format_double(c.simulator.*member) << '\n';
  return out.str();
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t cell, std::uint64_t replication) {
  return base_seed ^ splitmix64(splitmix64(cell) ^ (replication * 0xD1B54A32D192ED03ULL + 1));
}

std::string results_header() {
  return "method,m,n,sparsity,N,scenario_kind,scenario_param,replication,hr,ndcg,nrmse,iterations,converged,seed,"
         "status";
}

std::string format_result_row(const ResultRow& r) {
  std::string status = r.status;
  std::replace(status.begin(), status.end(), ',', ';');
  std::replace(status.begin(), status.end(), '\n', ' ');
  std::ostringstream out;
  out << r.method << ',' << r.m << ',' << r.n << ',' << csv::format_double(r.sparsity) << ',' << r.top_n << ','
      << r.scenario_kind << ',' << csv::format_double(r.scenario_param) << ',' << r.replication << ','
      << csv::format_double(r.hr) << ',' << csv::format_double(r.ndcg) << ',' << csv::format_double(r.nrmse) << ','
      << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << r.seed << ',' << status;
  return out.str();
}

std::vector<ResultRow> read_results(const std::filesystem::path& results_csv) {
  std::ifstream in(results_csv);
  if (!in) throw FileError("missing results file " + results_csv.string());
  std::string line;
  if (!std::getline(in, line) || csv::trim(line) != results_header()) {
    throw FileError(results_csv.string() + ": unexpected header");
  }
  std::vector<ResultRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    ResultRow r;
    int conv = 0;
    bool ok = f.size() == 15 && csv::parse_int(f[1], r.m) && csv::parse_int(f[2], r.n) &&
              csv::parse_double(f[3], r.sparsity) && csv::parse_int(f[4], r.top_n) &&
              csv::parse_double(f[6], r.scenario_param) && csv::parse_int(f[7], r.replication) &&
              csv::parse_int(f[11], r.iterations) && csv::parse_int(f[12], conv) && csv::parse_int(f[13], r.seed);
    // NaN metrics are written for failed rows.
    auto metric = [](const std::string& s, double& out) {
      if (csv::trim(s) == "nan" || csv::trim(s) == "-nan") {
        out = std::numeric_limits<double>::quiet_NaN();
        return true;
      }
      return csv::parse_double(s, out);
    };
    ok = ok && metric(f[8], r.hr) && metric(f[9], r.ndcg) && metric(f[10], r.nrmse);
    if (!ok) throw FileError(results_csv.string() + ":" + std::to_string(lineno) + ": malformed row");
    r.method = f[0];
    r.scenario_kind = f[5];
    r.converged = conv != 0;
    r.status = f[14];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryCell> summarize(const std::vector<ResultRow>& rows, Metric metric) {
  std::vector<SummaryCell> cells;
  std::map<std::tuple<std::string, std::string, int, double>, std::vector<double>> values;
  for (const auto& r : rows) {
    const std::string scenario = r.scenario_kind + ":" + csv::format_double(r.scenario_param);
    const auto key = std::make_tuple(scenario, r.method, r.top_n, r.sparsity);
    auto [it, inserted] = values.try_emplace(key);
    if (inserted) cells.push_back({scenario, r.method, r.top_n, r.sparsity, 0.0, 0.0, 0});
    if (r.status == "ok") it->second.push_back(metric == Metric::hr ? r.hr : r.ndcg);
  }
  for (auto& c : cells) {
    const auto& v = values[std::make_tuple(c.scenario, c.method, c.top_n, c.sparsity)];
    c.count = static_cast<int>(v.size());
    if (v.empty()) {
      c.mean = c.stderr_ = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    c.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - c.mean) * (x - c.mean);
      c.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    }
  }
  return cells;
}

namespace {

std::string pivot_summary(const std::vector<SummaryCell>& cells) {
  std::vector<double> levels;
  for (const auto& c : cells) {
    if (std::find(levels.begin(), levels.end(), c.sparsity) == levels.end()) levels.push_back(c.sparsity);
  }
  std::ostringstream out;
  out << "scenario,method,N";
  for (double l : levels) out << ",sparsity=" << csv::format_double(l);
  out << '\n';
  std::vector<std::tuple<std::string, std::string, int>> row_keys;
  std::map<std::tuple<std::string, std::string, int>, std::vector<double>> table;
  for (const auto& c : cells) {
    const auto key = std::make_tuple(c.scenario, c.method, c.top_n);
    auto [it, inserted] = table.try_emplace(key, std::vector<double>(levels.size(), std::numeric_limits<double>::quiet_NaN()));
    if (inserted) row_keys.push_back(key);
    it->second[index_in(levels, c.sparsity)] = c.mean;
  }
  for (const auto& key : row_keys) {
    out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key);
    for (double v : table[key]) out << ',' << csv::format_double(v);
    out << '\n';
  }
  return out.str();
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);

  std::vector<Unit> units;
  for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
    for (int r = 0; r < config.replications; ++r) units.push_back({s, r});
  }
  std::vector<std::vector<ResultRow>> unit_rows(units.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t u = next++; u < units.size(); u = next++) unit_rows[u] = run_unit(config, units[u]);
  };
  const int threads = std::min<int>(config.workers, static_cast<int>(units.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentOutcome outcome;
  outcome.directory = config.output_dir;
  for (auto& rows : unit_rows) {
    for (auto& r : rows) outcome.rows.push_back(std::move(r));
  }
  // Ordered by cell (scenario, sparsity, method, N), then replication.
  auto method_rank = [&](const std::string& name) {
    for (std::size_t k = 0; k < config.methods.size(); ++k) {
      if (method_name(config.methods[k]) == name) return k;
    }
    return config.methods.size();
  };
  auto scenario_rank = [&](const ResultRow& r) {
    for (std::size_t k = 0; k < config.scenarios.size(); ++k) {
      const auto& s = config.scenarios[k];
      const bool same_kind = (s.kind == CorrelationScenario::Kind::serial) == (r.scenario_kind == "serial");
      if (same_kind && s.parameter() == r.scenario_param) return k;
    }
    return config.scenarios.size();
  };
  auto n_rank = [&](int top) {
    return static_cast<std::size_t>(std::find(config.n_values.begin(), config.n_values.end(), top) -
                                    config.n_values.begin());
  };
  std::stable_sort(outcome.rows.begin(), outcome.rows.end(), [&](const ResultRow& a, const ResultRow& b) {
    const auto ka = std::make_tuple(scenario_rank(a), index_in(config.sparsity_levels, a.sparsity), method_rank(a.method),
                                    n_rank(a.top_n), a.replication);
    const auto kb = std::make_tuple(scenario_rank(b), index_in(config.sparsity_levels, b.sparsity), method_rank(b.method),
                                    n_rank(b.top_n), b.replication);
    return ka < kb;
  });

  std::ostringstream results;
  std::ostringstream timings;
  results << results_header() << '\n';
  timings << "method,sparsity,N,scenario_kind,scenario_param,replication,wall_seconds\n";
  for (const auto& r : outcome.rows) {
    results << format_result_row(r) << '\n';
    timings << r.method << ',' << csv::format_double(r.sparsity) << ',' << r.top_n << ',' << r.scenario_kind << ','
            << csv::format_double(r.scenario_param) << ',' << r.replication << ',' << csv::format_double(r.wall_seconds)
            << '\n';
    if (r.status != "ok") ++outcome.failures;
  }
  const std::string results_text = results.str();
  write_text_file(config.output_dir / "results.csv", results_text);
  write_text_file(config.output_dir / "timings.csv", timings.str());
  write_text_file(config.output_dir / "summary_hr.csv", pivot_summary(summarize(outcome.rows, Metric::hr)));
  write_text_file(config.output_dir / "summary_ndcg.csv", pivot_summary(summarize(outcome.rows, Metric::ndcg)));

  std::ostringstream manifest;
  manifest << "# awtr experiment manifest\n";
  manifest << config_to_text(config);
  manifest << "\n[run]\nresults_sha1=" << git_blob_hash(results_text) << "\nrows=" << outcome.rows.size()
           << "\nfailures=" << outcome.failures << '\n';
  manifest << "\n# scenario,sparsity,replication -> cohort_seed,mask_seed\n";
  for (const auto& u : units) {
    const auto cohort_seed = derive_seed(config.base_seed ^ kCohortDomain, u.scenario, static_cast<std::uint64_t>(u.replication));
    for (std::size_t l = 0; l < config.sparsity_levels.size(); ++l) {
      const std::uint64_t cell = u.scenario * config.sparsity_levels.size() + l;
      manifest << "# " << config.scenarios[u.scenario].label() << ',' << csv::format_double(config.sparsity_levels[l])
               << ',' << u.replication << " -> " << cohort_seed << ','
               << derive_seed(config.base_seed, cell, static_cast<std::uint64_t>(u.replication)) << '\n';
    }
  }
  write_text_file(config.output_dir / "manifest.txt", manifest.str());
  return outcome;
}

std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_dir, const PlotFilter& filter) {
  const auto rows = read_results(results_dir / "results.csv");
  std::vector<Eigen::Index> ms;
  for (const auto& r : rows) {
    if (std::find(ms.begin(), ms.end(), r.m) == ms.end()) ms.push_back(r.m);
  }
  std::optional<std::string> scenario = filter.scenario;
  if (!scenario && !rows.empty()) scenario = rows.front().scenario_kind + ":" + csv::format_double(rows.front().scenario_param);

  std::vector<std::filesystem::path> written;
  for (Eigen::Index m : ms) {
    std::vector<ResultRow> selected;
    for (const auto& r : rows) {
      if (r.m != m) continue;
      if (scenario && r.scenario_kind + ":" + csv::format_double(r.scenario_param) != *scenario) continue;
      if (!filter.methods.empty() &&
          std::find(filter.methods.begin(), filter.methods.end(), r.method) == filter.methods.end()) {
        continue;
      }
      selected.push_back(r);
    }
    for (Metric metric : {Metric::hr, Metric::ndcg}) {
      std::ostringstream out;
      out << "method,sparsity,N,mean,stderr\n";
      for (const auto& c : summarize(selected, metric)) {
        out << c.method << ',' << csv::format_double(c.sparsity) << ',' << c.top_n << ',' << csv::format_double(c.mean)
            << ',' << csv::format_double(c.stderr_) << '\n';
      }
      const auto path =
          results_dir / ((metric == Metric::hr ? "fig_hr_m" : "fig_ndcg_m") + std::to_string(m) + ".csv");
      write_text_file(path, out.str());
      written.push_back(path);
    }
  }
  return written;
}

std::string git_blob_hash(const std::string& content) {
  const std::string framed = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(framed.data(), framed.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw NumericError("SHA-1 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[digest[k] >> 4];
    out += hex[digest[k] & 0xF];
  }
  return out;
}

}  // namespace awtr
