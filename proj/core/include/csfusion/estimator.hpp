#pragma once

#include "csfusion/dataset.hpp"
#include "csfusion/estimand.hpp"
#include "csfusion/numerics.hpp"
#include "csfusion/nuisance.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace csfusion {

// ---------------------------------------------------------------------------
// Plug-in bounds and efficient influence functions

/// Cauchy-Schwarz plug-in bounds averaged over `rows`:
/// mean(m_y m_z -/+ sqrt(v_y v_z)).
Bounds plugin_bounds(const MomentEstimates& moments, std::span<const Eigen::Index> rows);

/// Conditional moments of vector-valued f and g at one covariate value.
struct MatrixMoments {
  Eigen::VectorXd m_y;
  Eigen::VectorXd m_z;
  SymPsdMatrix v_y;
  SymPsdMatrix v_z;
};

/// Multivariate plug-in bounds: mean(m_y^T m_z -/+ tr sqrt(sqrt(v_z) v_y sqrt(v_z))).
/// Point values only.
Bounds plugin_bounds(std::span<const MatrixMoments> rows);

struct RowMoments {
  double m_y = 0.0;
  double m_z = 0.0;
  double v_y = 0.0;
  double v_z = 0.0;
  double e = 0.5;
};

/// One observation as seen by the influence functions: f(y, x) when r = 1,
/// g(z, x) when r = 0. The unused value is ignored.
struct RowObservation {
  int r = 0;
  double f = 0.0;
  double g = 0.0;
};

double eif_upper(const RowObservation& obs, const RowMoments& m, double theta_u_plug);
double eif_lower(const RowObservation& obs, const RowMoments& m, double theta_l_plug);

// ---------------------------------------------------------------------------
// Cross-fitted inference

struct InferenceConfig {
  int k_folds = 2;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  NuisanceConfig nuisance;
};

struct Diagnostics {
  std::optional<PositivityReport> positivity;
  bool degenerate_variance = false;
  bool crossed_bounds = false;
  bool kink_warning = false;
  std::vector<std::string> warnings;
  std::vector<double> fold_plugin_lower;
  std::vector<double> fold_plugin_upper;
};

struct IntervalResult {
  double theta_l = 0.0;
  double theta_u = 0.0;
  double v_l = 0.0;  // asymptotic variance estimates, CI uses sqrt(v / n)
  double v_u = 0.0;
  double lcb = 0.0;
  double ucb = 0.0;
  double alpha = 0.05;
  Eigen::Index n = 0;
  Eigen::VectorXd influence_l;
  Eigen::VectorXd influence_u;
  Diagnostics diagnostics;

  double width() const { return ucb - lcb; }
};

/// Normal quantile q_{1 - alpha/2}; alpha = 1 gives 0.
double two_sided_quantile(double alpha);

/// Cross-fitted, debiased Cauchy-Schwarz bounds with confidence limits.
IntervalResult infer(const FusedDataset& data, const DecomposableEstimand& estimand, const InferenceConfig& config);

/// Identifiable moment E[w(x)], E[w(x) t(y, x)] or E[w(x) t(z, x)].
struct IdentifiableTarget {
  enum class Arm { Covariate, Y, Z };

  std::string name;
  Arm arm = Arm::Covariate;
  std::function<double(Span x)> weight;
  std::function<double(Span v, Span x)> response;  // unused for Arm::Covariate

  static IdentifiableTarget covariate(std::string name, std::function<double(Span)> weight);
  static IdentifiableTarget y_arm(std::string name, std::function<double(Span)> weight,
                                  std::function<double(Span, Span)> response);
  static IdentifiableTarget z_arm(std::string name, std::function<double(Span)> weight,
                                  std::function<double(Span, Span)> response);
};

/// Cross-fitted AIPW estimate (L = U) with the outcome model w(x) * E[t | x, arm]
/// taken from the arm's mean learner.
IntervalResult infer_identifiable(const FusedDataset& data, const IdentifiableTarget& target,
                                  const InferenceConfig& config);

// ---------------------------------------------------------------------------
// Delta-method composition

/// (1/n) sum_i psi_i psi_i^T over the stacked influence vectors.
SymPsdMatrix joint_influence_covariance(std::span<const Eigen::VectorXd> components);

struct ComponentEstimate {
  std::string name;
  double estimate = 0.0;
  Eigen::VectorXd influence;
};

enum class GradientMode { Analytic, FiniteDifference };

struct ComposedTarget {
  using Map = std::function<double(const Eigen::VectorXd&)>;
  using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  std::vector<ComponentEstimate> components;
  Map s_lower;
  Map s_upper;
  Gradient grad_lower;  // required for GradientMode::Analytic
  Gradient grad_upper;
  GradientMode mode = GradientMode::FiniteDifference;
  double rel_step = 1e-6;

  Eigen::VectorXd estimates() const;
};

/// Point bounds s_L(est), s_U(est) with delta-method variances grad^T V grad.
IntervalResult compose_delta(const ComposedTarget& target, double alpha);

struct OlsConfig {
  InferenceConfig inference;
  bool intercept = true;
  GradientMode mode = GradientMode::FiniteDifference;
  double kink_tol_rel = 1e-6;
};

/// Components and maps for the last coefficient of the regression of Y on (1, X, Z).
/// Component order: upper triangle of E[X~ X~^T] (row-major), E[X~_x Y], then the
/// lower and upper Cauchy-Schwarz bounds of E[YZ].
ComposedTarget ols_composed_target(const FusedDataset& data, const OlsConfig& config);

/// v(A) = e_last^T A^{-1} for the E[X~ X~^T] block encoded in `estimates`.
Eigen::VectorXd ols_v_row(const Eigen::VectorXd& estimates, Eigen::Index dim);

IntervalResult ols_coefficient_bounds(const FusedDataset& data, const OlsConfig& config);

}  // namespace csfusion
