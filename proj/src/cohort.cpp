#include "awtr/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>

#include "awtr/csv.hpp"
#include "awtr/errors.hpp"
#include "awtr/prox.hpp"

namespace awtr {

namespace {

double std_normal_quantile(double p) {
  static const boost::math::normal_distribution<double> standard(0.0, 1.0);
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(standard, p);
}

// Upper cut points between consecutive categories on the latent scale.
std::vector<double> category_cuts(const std::vector<double>& probs) {
  if (probs.size() < 2) throw ParameterError("a discrete marginal needs at least two categories");
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("category probabilities must lie in [0, 1]");
  }
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) throw ParameterError("category probabilities must sum to 1");
  std::vector<double> cuts;
  double cum = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    cum += probs[k];
    cuts.push_back(std_normal_quantile(cum / total));
  }
  return cuts;
}

void require_psd(const Matrix& sigma, const std::string& what) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-10) {
    throw ConfigError(what + ": latent covariance is not positive semidefinite");
  }
}

Matrix table_from_latent(const Matrix& latent, const std::vector<Marginal>& marginals) {
  Matrix out(latent.rows(), latent.cols());
  for (Eigen::Index c = 0; c < latent.cols(); ++c) {
    const auto& marg = marginals[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < latent.rows(); ++r) out(r, c) = marg.from_latent(latent(r, c));
  }
  return out;
}

std::vector<std::string> names_of(const std::vector<Marginal>& marginals) {
  std::vector<std::string> out;
  for (const auto& m : marginals) out.push_back(m.name);
  return out;
}

Matrix uniform_points(Eigen::Index count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix pts(count, 2);
  for (Eigen::Index r = 0; r < count; ++r) {
    pts(r, 0) = unit(rng);
    pts(r, 1) = unit(rng);
  }
  return pts;
}

}  // namespace

Marginal Marginal::normal(std::string name, double mean, double sd) {
  Marginal m;
  m.name = std::move(name);
  m.kind = Kind::normal;
  m.mean = mean;
  m.sd = sd;
  return m;
}

Marginal Marginal::bernoulli(std::string name, double p_one) {
  Marginal m;
  m.name = std::move(name);
  m.kind = Kind::bernoulli;
  m.p_one = p_one;
  m.probs = {1.0 - p_one, p_one};
  m.cuts = category_cuts(m.probs);
  return m;
}

Marginal Marginal::categorical(std::string name, std::vector<double> probs) {
  Marginal m;
  m.name = std::move(name);
  m.kind = Kind::categorical;
  m.probs = std::move(probs);
  m.cuts = category_cuts(m.probs);
  return m;
}

double Marginal::from_latent(double z) const {
  switch (kind) {
    case Kind::normal: return mean + sd * z;
    case Kind::bernoulli:
    case Kind::categorical: {
      int code = 0;
      while (code < static_cast<int>(cuts.size()) && z > cuts[static_cast<std::size_t>(code)]) ++code;
      return static_cast<double>(code);
    }
  }
  return 0.0;
}

CohortSpec CohortSpec::kidney(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  CohortSpec spec;
  spec.m = m;
  spec.n = n;
  spec.seed = seed;
  const std::vector<double> blood{0.45, 0.40, 0.11, 0.04};  // O, A, B, AB
  spec.patient_features = {
      Marginal::normal("age", 46.56, 12.66),
      Marginal::normal("bmi", 25.91, 5.46),
      Marginal::categorical("blood_type", blood),
      Marginal::bernoulli("gender_male", 0.62),
      // White, African-American, Hispanic, Asian, Others
      Marginal::categorical("ethnicity", {0.354, 0.321, 0.208, 0.092, 0.025}),
      Marginal::normal("waiting_time", 3.2, 2.47),
      Marginal::normal("albumin", 3.83, 0.72),
      // Glomerulonephritis, genetic, diabetes, renovascular/hypertension, pyelonephritis, others
      Marginal::categorical("esrd_cause", {0.39, 0.145, 0.138, 0.08, 0.053, 0.194}),
      Marginal::bernoulli("hypertension", 0.16),
      Marginal::bernoulli("diabetes", 0.37),
      Marginal::bernoulli("prior_transplant", 0.12),
  };
  spec.donor_features = {
      Marginal::normal("age", 32.4, 13.8),
      Marginal::normal("bmi", 25.7, 4.3),
      Marginal::categorical("blood_type", blood),
      Marginal::bernoulli("gender_male", 0.60),
      Marginal::categorical("ethnicity", {0.655, 0.151, 0.149, 0.026, 0.019}),
      Marginal::bernoulli("aki", 0.171),
      Marginal::normal("serum_creatinine", 1.05, 0.6),
      // Anoxia, cerebrovascular accident, CNS tumor, head trauma, others
      Marginal::categorical("death_cause", {0.10, 0.31, 0.01, 0.47, 0.11}),
      Marginal::normal("egfr", 83.1, 31.2),
      Marginal::bernoulli("hypertension", 0.14),
      Marginal::bernoulli("diabetes", 0.06),
  };
  return spec;
}

CorrelationScenario CorrelationScenario::serial(double rho) {
  CorrelationScenario s;
  s.kind = Kind::serial;
  s.rho = rho;
  return s;
}

CorrelationScenario CorrelationScenario::block(double phi) {
  CorrelationScenario s;
  s.kind = Kind::block;
  s.phi = phi;
  return s;
}

std::string CorrelationScenario::label() const {
  return (kind == Kind::serial ? "serial:" : "block:") + csv::format_double(parameter());
}

CorrelationScenario CorrelationScenario::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("scenario must look like serial:RHO or block:PHI, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  double value = 0.0;
  if (!csv::parse_double(text.substr(colon + 1), value)) throw ConfigError("bad scenario parameter in '" + text + "'");
  if (kind == "serial") {
    if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("serial rho must lie in [0, 1]");
    return serial(value);
  }
  if (kind == "block") {
    if (!(value > 0.0)) throw ConfigError("block phi must be positive");
    return block(value);
  }
  throw ConfigError("unknown scenario kind '" + kind + "'");
}

Matrix nearest_psd(const Matrix& a) {
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Vector clipped = eig.eigenvalues().cwiseMax(0.0);
  const Matrix psd = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (psd + psd.transpose());
}

Matrix latent_covariance(const CorrelationScenario& scenario, int dim, const SimulatorParams& params) {
  Matrix sigma = Matrix::Zero(dim, dim);
  if (scenario.kind == CorrelationScenario::Kind::serial) {
    if (!(scenario.rho >= 0.0)) throw ConfigError("serial rho must be >= 0");
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) sigma(i, j) = std::pow(scenario.rho, std::abs(i - j));
    }
    require_psd(sigma, scenario.label());
    return sigma;
  }

  if (!(scenario.phi > 0.0)) throw ConfigError("block phi must be positive");
  std::vector<bool> covered(static_cast<std::size_t>(dim), false);
  for (auto [first, last] : scenario.block_layout) {
    if (first < 0 || last > dim || first >= last) throw ConfigError("block layout range out of bounds");
    for (int i = first; i < last; ++i) {
      if (covered[static_cast<std::size_t>(i)]) throw ConfigError("block layout ranges overlap");
      covered[static_cast<std::size_t>(i)] = true;
      for (int j = first; j < last; ++j) sigma(i, j) = i == j ? 0.0 : params.block_offdiag;
    }
  }
  // Scale so the largest element of each block's diagonal equals phi.
  for (int i = 0; i < dim; ++i) sigma(i, i) = covered[static_cast<std::size_t>(i)] ? scenario.phi : 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.eigenvalues().minCoeff() < 0.0) sigma = nearest_psd(sigma);
  return sigma;
}

Matrix latent_correlation(const CorrelationScenario& scenario, int dim, const SimulatorParams& params) {
  const Matrix sigma = latent_covariance(scenario, dim, params);
  const Vector inv_sd = sigma.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  Matrix corr = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
  corr = 0.5 * (corr + corr.transpose());
  corr.diagonal().setOnes();
  return corr;
}

Matrix sample_latent(const Matrix& correlation, Eigen::Index count, std::mt19937_64& rng) {
  // Symmetric square root handles singular (e.g. rho = 1) correlation.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(correlation);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-10) {
    throw ConfigError("latent correlation is not positive semidefinite");
  }
  const Matrix root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                      eig.eigenvectors().transpose();
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix z(count, correlation.rows());
  for (Eigen::Index r = 0; r < count; ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = gauss(rng);
  }
  return z * root;
}

Cohort sample_cohort(const CohortSpec& spec, const CorrelationScenario& scenario, const SimulatorParams& params) {
  if (spec.m <= 0 || spec.n <= 0) throw ConfigError("cohort needs m, n >= 1");
  if (spec.donor_features.size() != kFeaturesPerSide || spec.patient_features.size() != kFeaturesPerSide) {
    throw ConfigError("cohort spec needs 11 donor and 11 patient features");
  }
  const Matrix corr = latent_correlation(scenario, kFeaturesPerSide, params);
  std::mt19937_64 rng(spec.seed);

  Cohort cohort;
  cohort.donors = table_from_latent(sample_latent(corr, spec.m, rng), spec.donor_features);
  cohort.patients = table_from_latent(sample_latent(corr, spec.n, rng), spec.patient_features);
  cohort.donor_locations = uniform_points(spec.m, rng);
  cohort.patient_locations = uniform_points(spec.n, rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> cpra_range(params.cpra_min, params.cpra_max);
  cohort.cpra.resize(spec.n);
  for (Eigen::Index j = 0; j < spec.n; ++j) {
    cohort.cpra(j) = unit(rng) < params.cpra_zero_prob ? 0.0 : cpra_range(rng);
  }
  cohort.donor_names = names_of(spec.donor_features);
  cohort.patient_names = names_of(spec.patient_features);
  return cohort;
}

Matrix build_covariates_raw(const Cohort& cohort) {
  const Eigen::Index m = cohort.donors.rows();
  const Eigen::Index n = cohort.patients.rows();
  if (cohort.donors.cols() != kFeaturesPerSide || cohort.patients.cols() != kFeaturesPerSide) {
    throw DimensionError("build_covariates needs 11 encoded donor and 11 encoded patient features");
  }
  if (cohort.donor_locations.rows() != m || cohort.patient_locations.rows() != n) {
    throw DimensionError("build_covariates: location tables do not match cohort sizes");
  }
  constexpr int side = kFeaturesPerSide;
  Matrix x(m * n, kCovariateCount);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      auto row = x.row(i * n + j);
      row.segment(0, side) = cohort.donors.row(i);
      row.segment(side, side) = cohort.patients.row(j);
      for (int a = 0; a < side; ++a) {
        for (int b = 0; b < side; ++b) row(2 * side + a * side + b) = cohort.donors(i, a) * cohort.patients(j, b);
      }
      row(kCovariateCount - 1) = (cohort.donor_locations.row(i) - cohort.patient_locations.row(j)).norm();
    }
  }
  return x;
}

CovariateTable build_covariates(const Cohort& cohort) {
  Matrix x = build_covariates_raw(cohort);
  standardize_columns(x);
  return CovariateTable(std::move(x), cohort.donors.rows(), cohort.patients.rows());
}

std::vector<std::string> covariate_names(const Cohort& cohort) {
  std::vector<std::string> names;
  for (const auto& d : cohort.donor_names) names.push_back("donor_" + d);
  for (const auto& p : cohort.patient_names) names.push_back("patient_" + p);
  for (const auto& d : cohort.donor_names) {
    for (const auto& p : cohort.patient_names) names.push_back("donor_" + d + "*patient_" + p);
  }
  names.emplace_back("distance");
  return names;
}

KasResult synthesize_kas(const Cohort& cohort, const SimulatorParams& params) {
  const Eigen::Index m = cohort.donors.rows();
  const Eigen::Index n = cohort.patients.rows();
  KasComponents comp;
  comp.kdpi.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto d = cohort.donors.row(i);
    const double creatinine_z = (d(donor_col::serum_creatinine) - 1.05) / 0.6;
    const double score = params.kdpi_age_coef * (d(donor_col::age) - params.kdpi_age_center) +
                         params.kdpi_creatinine_coef * creatinine_z +
                         params.kdpi_egfr_coef * (d(donor_col::egfr) - params.kdpi_egfr_center) +
                         params.kdpi_hypertension_coef * d(donor_col::hypertension) +
                         params.kdpi_diabetes_coef * d(donor_col::diabetes) + params.kdpi_aki_coef * d(donor_col::aki);
    comp.kdpi(i) = sigmoid(score);
  }

  Vector base(n);
  comp.dt.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto p = cohort.patients.row(j);
    base(j) = std::max(0.0, params.lyft_intercept + params.lyft_age_coef * p(patient_col::age) +
                                params.lyft_diabetes_coef * p(patient_col::diabetes) +
                                params.lyft_hypertension_coef * p(patient_col::hypertension) +
                                params.lyft_albumin_coef * p(patient_col::albumin));
    // Normal waiting times can come out negative; dialysis time cannot.
    comp.dt(j) = std::max(0.0, p(patient_col::waiting_time));
  }
  comp.cpra = cohort.cpra;
  comp.lyft.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) comp.lyft(i, j) = base(j) * (params.lyft_kdpi_offset - comp.kdpi(i));
  }
  KasResult out;
  out.y = kas_matrix(comp);
  out.components = std::move(comp);
  return out;
}

Matrix kas_matrix(const KasComponents& c) {
  const Eigen::Index m = c.kdpi.size();
  const Eigen::Index n = c.dt.size();
  if (c.lyft.rows() != m || c.lyft.cols() != n || c.cpra.size() != n) {
    throw DimensionError("KAS components have inconsistent sizes");
  }
  Matrix y(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) y(i, j) = kas_score(c.lyft(i, j), c.kdpi(i), c.dt(j), c.cpra(j));
  }
  return y;
}

MaskedResponseMatrix apply_sparsity(const Matrix& y_full, double level, std::uint64_t seed) {
  if (!(level >= 0.0 && level < 1.0)) {
    throw ParameterError("sparsity level must lie in [0, 1), got " + std::to_string(level));
  }
  const Eigen::Index total = y_full.size();
  const auto hidden = static_cast<Eigen::Index>(std::llround(level * static_cast<double>(total)));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Mask mask = Mask::Constant(y_full.rows(), y_full.cols(), true);
  const Eigen::Index n = y_full.cols();
  for (Eigen::Index k = 0; k < hidden; ++k) {
    const Eigen::Index flat = order[static_cast<std::size_t>(k)];
    mask(flat / n, flat % n) = false;
  }
  return MaskedResponseMatrix(y_full, std::move(mask));
}

void write_cohort(const std::filesystem::path& dir, const Cohort& cohort, const KasResult& kas) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw FileError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("donors.csv");
    out << "donor";
    for (const auto& nm : cohort.donor_names) out << ',' << nm;
    out << ",loc_x,loc_y\n";
    for (Eigen::Index i = 0; i < cohort.donors.rows(); ++i) {
      out << i;
      for (Eigen::Index c = 0; c < cohort.donors.cols(); ++c) out << ',' << csv::format_double(cohort.donors(i, c));
      out << ',' << csv::format_double(cohort.donor_locations(i, 0)) << ','
          << csv::format_double(cohort.donor_locations(i, 1)) << '\n';
    }
  }
  {
    auto out = open("patients.csv");
    out << "patient";
    for (const auto& nm : cohort.patient_names) out << ',' << nm;
    out << ",cpra,loc_x,loc_y\n";
    for (Eigen::Index j = 0; j < cohort.patients.rows(); ++j) {
      out << j;
      for (Eigen::Index c = 0; c < cohort.patients.cols(); ++c) out << ',' << csv::format_double(cohort.patients(j, c));
      out << ',' << csv::format_double(cohort.cpra(j)) << ',' << csv::format_double(cohort.patient_locations(j, 0))
          << ',' << csv::format_double(cohort.patient_locations(j, 1)) << '\n';
    }
  }
  {
    auto out = open("kas_components.csv");
    out << "organ,patient,lyft,kdpi,dt,cpra,kas\n";
    const auto& c = kas.components;
    for (Eigen::Index i = 0; i < c.lyft.rows(); ++i) {
      for (Eigen::Index j = 0; j < c.lyft.cols(); ++j) {
        out << i << ',' << j << ',' << csv::format_double(c.lyft(i, j)) << ',' << csv::format_double(c.kdpi(i)) << ','
            << csv::format_double(c.dt(j)) << ',' << csv::format_double(c.cpra(j)) << ','
            << csv::format_double(kas.y(i, j)) << '\n';
      }
    }
  }
  write_matrix_file(dir / "response.csv", MaskedResponseMatrix::fully_observed(kas.y));
}

}  // namespace awtr
