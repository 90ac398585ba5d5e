#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "awtr/matrix_model.hpp"

namespace awtr {

/// One marginal distribution from the donor/patient feature table.
struct Marginal {
  enum class Kind { normal, bernoulli, categorical };

  std::string name;
  Kind kind = Kind::normal;
  double mean = 0.0;             ///< normal
  double sd = 1.0;               ///< normal
  double p_one = 0.5;            ///< bernoulli: P(encoded value == 1)
  std::vector<double> probs;     ///< categorical, in listing order (codes 0..k-1)
  /// Latent thresholds between consecutive codes (bernoulli and categorical).
  std::vector<double> cuts;

  static Marginal normal(std::string name, double mean, double sd);
  static Marginal bernoulli(std::string name, double p_one);
  static Marginal categorical(std::string name, std::vector<double> probs);

  /// Maps a standard-normal latent value to this marginal.
  double from_latent(double z) const;
};

inline constexpr int kFeaturesPerSide = 11;

// Column positions inside the encoded tables.
namespace patient_col {
inline constexpr int age = 0, bmi = 1, blood_type = 2, gender = 3, ethnicity = 4, waiting_time = 5, albumin = 6,
                     esrd_cause = 7, hypertension = 8, diabetes = 9, prior_transplant = 10;
}
namespace donor_col {
inline constexpr int age = 0, bmi = 1, blood_type = 2, gender = 3, ethnicity = 4, aki = 5, serum_creatinine = 6,
                     death_cause = 7, egfr = 8, hypertension = 9, diabetes = 10;
}

struct CohortSpec {
  Eigen::Index m = 200;  ///< donors (organs)
  Eigen::Index n = 1000; ///< patients
  std::vector<Marginal> patient_features;
  std::vector<Marginal> donor_features;
  std::uint64_t seed = 0;

  /// The published feature marginals for kidney donors and candidates.
  static CohortSpec kidney(Eigen::Index m, Eigen::Index n, std::uint64_t seed);
};

/// Latent Gaussian dependence between the 11 features of each population.
struct CorrelationScenario {
  enum class Kind { serial, block };

  Kind kind = Kind::serial;
  double rho = 0.0;  ///< serial: Sigma_ij = rho^|i-j|
  double phi = 1.0;  ///< block: largest within-block element
  /// Half-open [first, last) feature ranges for the block kind.
  std::vector<std::pair<int, int>> block_layout{{0, 4}, {4, 8}, {8, 11}};

  static CorrelationScenario serial(double rho);
  static CorrelationScenario block(double phi);

  /// "serial:0.5" / "block:1.8".
  std::string label() const;
  double parameter() const { return kind == Kind::serial ? rho : phi; }
  /// Parses "serial:RHO" or "block:PHI"; throws ConfigError.
  static CorrelationScenario parse(const std::string& text);
};

/// Constants behind the synthetic KDPI / LYFT / CPRA proxies and the block
/// covariance. Every value is exposed through the [simulator] config section.
struct SimulatorParams {
  double kdpi_age_center = 40.0;
  double kdpi_age_coef = 0.05;
  double kdpi_creatinine_coef = 0.8;  ///< on the z-scored creatinine
  double kdpi_egfr_center = 80.0;
  double kdpi_egfr_coef = -0.01;
  double kdpi_hypertension_coef = 0.7;
  double kdpi_diabetes_coef = 0.9;
  double kdpi_aki_coef = 0.6;

  double lyft_intercept = 20.0;
  double lyft_age_coef = -0.2;
  double lyft_diabetes_coef = -3.0;
  double lyft_hypertension_coef = -1.0;
  double lyft_albumin_coef = 0.5;
  double lyft_kdpi_offset = 1.5;

  double cpra_zero_prob = 0.5;
  double cpra_min = 1.0;
  double cpra_max = 100.0;

  /// Off-diagonal latent covariance inside a block before normalization.
  double block_offdiag = 0.9;
};

/// Latent covariance before normalization (block kind may be projected to
/// the PSD cone). Throws ConfigError for a serial scenario that is not PSD.
Matrix latent_covariance(const CorrelationScenario& scenario, int dim, const SimulatorParams& params = {});

/// Correlation matrix actually used for sampling.
Matrix latent_correlation(const CorrelationScenario& scenario, int dim, const SimulatorParams& params = {});

/// Nearest positive semidefinite matrix in Frobenius norm (eigenvalue clipping).
Matrix nearest_psd(const Matrix& a);

/// `count` draws (rows) from N(0, correlation).
Matrix sample_latent(const Matrix& correlation, Eigen::Index count, std::mt19937_64& rng);

struct Cohort {
  Matrix donors;               ///< m x 11 encoded donor features
  Matrix patients;             ///< n x 11 encoded patient features
  Matrix donor_locations;      ///< m x 2, unit square
  Matrix patient_locations;    ///< n x 2, unit square
  Vector cpra;                 ///< n, zero-inflated in [0, 100]
  std::vector<std::string> donor_names;
  std::vector<std::string> patient_names;
};

Cohort sample_cohort(const CohortSpec& spec, const CorrelationScenario& scenario, const SimulatorParams& params = {});

inline constexpr int kCovariateCount = kFeaturesPerSide + kFeaturesPerSide + kFeaturesPerSide * kFeaturesPerSide + 1;

/// Covariate rows before z-scoring: 11 donor, 11 patient, 121 donor x patient
/// products (donor-major), 1 Euclidean distance.
Matrix build_covariates_raw(const Cohort& cohort);

/// build_covariates_raw with every column z-scored.
CovariateTable build_covariates(const Cohort& cohort);

/// Names of the 144 covariate columns.
std::vector<std::string> covariate_names(const Cohort& cohort);

struct KasComponents {
  Matrix lyft;  ///< m x n, years
  Vector kdpi;  ///< m, (0, 1)
  Vector dt;    ///< n, years
  Vector cpra;  ///< n, [0, 100]
};

/// 0.8 LYFT (1 - KDPI) + 0.8 DT KDPI + 0.2 DT + 0.04 CPRA.
inline double kas_score(double lyft, double kdpi, double dt, double cpra) {
  return 0.8 * lyft * (1.0 - kdpi) + 0.8 * dt * kdpi + 0.2 * dt + 0.04 * cpra;
}

struct KasResult {
  KasComponents components;
  Matrix y;  ///< full m x n response
};

KasResult synthesize_kas(const Cohort& cohort, const SimulatorParams& params = {});

/// Rebuilds the response from stored components.
Matrix kas_matrix(const KasComponents& components);

/// Hides exactly round(level * m * n) entries chosen uniformly without
/// replacement. Throws ParameterError unless 0 <= level < 1.
MaskedResponseMatrix apply_sparsity(const Matrix& y_full, double level, std::uint64_t seed);

/// donors.csv, patients.csv, kas_components.csv and response.csv in `dir`.
void write_cohort(const std::filesystem::path& dir, const Cohort& cohort, const KasResult& kas);

}  // namespace awtr
