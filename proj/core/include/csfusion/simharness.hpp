#pragma once

#include "csfusion/dataset.hpp"
#include "csfusion/estimand.hpp"
#include "csfusion/estimator.hpp"
#include "csfusion/numerics.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace csfusion {

// ---------------------------------------------------------------------------
// Data-generating processes

/// Y = b'X + sigma_y eps_y, Z = b'X + sigma_z eps_z with eps = W^3, W ~ N(0, 15^(-1/3))
/// (unit variance, heavy tails), b uniform on the unit sphere, X ~ N(0, I), R ~ Bern(0.5).
struct HeavyTailLinear {
  int p_x = 20;
  double sigma_y = 1.0;
  double sigma_z = 1.0;
  std::uint64_t beta_seed = 0;
};

/// As HeavyTailLinear with standard normal noise.
struct GaussianLinear {
  int p_x = 20;
  double sigma_y = 1.0;
  double sigma_z = 1.0;
  std::uint64_t beta_seed = 0;
};

/// (log Y, log Z) ~ N((b1'X, b0'X), sigma^2 [[1, rho], [rho, 1]]), X ~ N(0, S) with
/// S_ij = 0.3^|i-j|, R | X ~ Bern(logistic(b3'X)), b's ~ N(0, 0.25/p_x I). Target E[Y/Z].
struct LogNormalRelative {
  int p_x = 20;
  double sigma = 0.5;
  double rho = 0.3;
  std::uint64_t beta_seed = 0;
};

/// Z ~ N(0, [[1, rho], [rho, 1]]), X | Z ~ N(Z, sigma^2 [[1, tau], [tau, 1]]),
/// Y | Z, X ~ N(beta1 Z1 + beta2 Z2, sigma_eps^2), R ~ Bern(0.5). Target beta1 =
/// E[Y (Z1 - rho Z2)] / (1 - rho^2).
struct ValidationStudy {
  double tau = 0.3;
  double sigma_eps = 0.5;
  double beta1 = 1.0;
  double beta2 = 1.0;
  double rho = 0.3;
  double sigma = 0.5;
};

/// X ~ N(0, I_2), Z = X1^2, Y = X1 + X2 + beta_z Z, R ~ Bern(0.5): Y and Z are
/// deterministic given X, so the regression coefficient of Z is point identified.
struct ConditionallyDeterministic {
  double beta_z = 1.0;
};

using DgpSpec = std::variant<HeavyTailLinear, GaussianLinear, LogNormalRelative, ValidationStudy,
                             ConditionallyDeterministic>;

/// Throws InvalidSpec on nonpositive scales, |rho| >= 1 or bad dimensions.
void validate_spec(const DgpSpec& spec);
std::string dgp_name(const DgpSpec& spec);

/// Estimator-facing data plus the full (uncensored) responses. Only audits read
/// `y_full` / `z_full`; estimators receive `data`.
struct SimulatedSample {
  FusedDataset data;
  RowMatrix y_full;
  RowMatrix z_full;
};

SimulatedSample sample_dgp(const DgpSpec& spec, Eigen::Index n, std::uint64_t seed);

/// True conditional moments of f and g (default estimand) and the true propensity.
RowMoments true_moments(const DgpSpec& spec, Span x);

/// f and g of the DGP's natural target: Product, Ratio or the beta1 contrast.
DecomposableEstimand default_estimand(const DgpSpec& spec);

struct EstimatorSetup {
  DecomposableEstimand estimand;
  InferenceConfig inference;
};

/// Learners matching each design: known e = 0.5 with homoskedastic ridge for the
/// linear designs, lognormal learners with logistic propensity for the ratio design,
/// ridge with logistic propensity for the validation study.
EstimatorSetup default_setup(const DgpSpec& spec);

struct TrueBounds {
  double lower = 0.0;
  double upper = 0.0;
  double se = 0.0;  // Monte Carlo standard error; 0 for closed forms
  bool analytic = true;
  std::optional<double> point;  // true value of the partially identified target when known

  double width() const { return upper - lower; }
};

/// Closed-form Cauchy-Schwarz bounds of the default estimand.
TrueBounds true_cs_bounds(const DgpSpec& spec);

/// Monte Carlo average of m_y m_z -/+ sqrt(v_y v_z) over `draws` covariate draws.
TrueBounds mc_cs_bounds(const DgpSpec& spec, std::int64_t draws, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Monte Carlo driver

using ReplicationEstimator = std::function<IntervalResult(const FusedDataset&, std::uint64_t seed, double alpha)>;

ReplicationEstimator make_estimator(EstimatorSetup setup);
ReplicationEstimator make_ols_estimator(OlsConfig config);

struct MonteCarloConfig {
  Eigen::Index n = 1000;
  int reps = 500;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int threads = 1;
  std::optional<double> point_theta;  // also report coverage of this value
};

struct ReplicationRecord {
  std::uint64_t data_seed = 0;
  std::uint64_t estimator_seed = 0;
  double theta_l = 0.0;
  double theta_u = 0.0;
  double v_l = 0.0;
  double v_u = 0.0;
  double lcb = 0.0;
  double ucb = 0.0;
  bool covered = false;
  bool lcb_covered = false;
  bool ucb_covered = false;
  std::optional<bool> point_covered;
  std::vector<std::string> warnings;
};

struct CoverageReport {
  std::string dgp;
  Eigen::Index n = 0;
  int reps = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  TrueBounds true_bounds;
  double coverage = 0.0;
  double lcb_coverage = 0.0;
  double ucb_coverage = 0.0;
  std::optional<double> point_coverage;
  double coverage_se = 0.0;  // sqrt(c (1 - c) / reps)
  double mean_width = 0.0;
  double width_se = 0.0;
  double mean_theta_l = 0.0;
  double mean_theta_u = 0.0;
  double mc_var_theta_l = 0.0;  // across-replication variance of the estimates
  double mc_var_theta_u = 0.0;
  double mean_v_l_over_n = 0.0;
  double mean_v_u_over_n = 0.0;
  std::vector<ReplicationRecord> records;
};

/// Replication j draws data with derive_seed(seed, j, 1) and runs the estimator with
/// derive_seed(seed, j, 2). The report does not depend on `threads`.
CoverageReport run_monte_carlo(const DgpSpec& spec, const MonteCarloConfig& config,
                               const ReplicationEstimator& estimator, const TrueBounds& truth);
/// Uses the default setup and closed-form bounds of `spec`.
CoverageReport run_monte_carlo(const DgpSpec& spec, const MonteCarloConfig& config);
CoverageReport run_monte_carlo(const DgpSpec& spec, const MonteCarloConfig& config, const EstimatorSetup& setup);

struct SweepRow {
  double ratio = 0.0;
  double sigma_y = 0.0;
  double sigma_z = 0.0;
  CoverageReport report;
};

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

LinearFit least_squares_line(std::span<const double> x, std::span<const double> y);

/// Width sweep over sigma_y = ratio * sigma_z for the two linear designs; ratio k runs
/// with seed derive_seed(config.seed, 1000 + k). Other designs: UnsupportedSpec.
std::vector<SweepRow> width_sweep(const DgpSpec& base, std::span<const double> ratios,
                                  const MonteCarloConfig& config);

}  // namespace csfusion
