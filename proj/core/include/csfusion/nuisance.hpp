#pragma once

#include "csfusion/dataset.hpp"
#include "csfusion/estimand.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace csfusion {

// ---------------------------------------------------------------------------
// Cross-fitting folds

struct FoldAssignment {
  Eigen::Index n = 0;
  int k_folds = 0;
  std::vector<int> fold;

  std::vector<Eigen::Index> rows_in(int k) const;
  std::vector<Eigen::Index> rows_outside(int k) const;
};

/// Fisher-Yates shuffle of 0..n-1 followed by round-robin fold labels.
FoldAssignment kfold_split(Eigen::Index n, int k_folds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Ridge regression

enum class FeatureMap { Linear, Quadratic };

/// Linear: x unchanged. Quadratic: x followed by x_i x_j for i <= j.
Eigen::MatrixXd expand_features(const Eigen::MatrixXd& x, FeatureMap map);
Eigen::VectorXd expand_features(Span x, FeatureMap map);

/// Column centering and scaling (population standard deviation). Columns with
/// zero spread get scale 0 and are dropped from the fit.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct LinearModel {
  double intercept = 0.0;
  Eigen::VectorXd coef;               // raw feature scale
  Eigen::VectorXd standardized_coef;  // coefficients on the standardized design
  double lambda = 0.0;
  double cv_loss = 0.0;

  double predict(Span x) const;
  double predict(const Eigen::VectorXd& x) const { return intercept + coef.dot(x); }
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

/// 20 log-spaced penalties in [1e-4, 1e4] (design columns are standardized).
std::vector<double> default_lambda_grid();

/// Closed-form ridge on the standardized design with an unpenalized intercept.
LinearModel fit_ridge(const Eigen::MatrixXd& xs, const Eigen::VectorXd& targets, double lambda);

/// Ridge with the penalty picked by cv_folds-fold mean squared error; ties go to the
/// smallest lambda. The final model is refit on all rows.
LinearModel fit_ridge_cv(const Eigen::MatrixXd& xs, const Eigen::VectorXd& targets,
                         std::span<const double> lambda_grid, int cv_folds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticModel {
  double intercept = 0.0;
  Eigen::VectorXd coef;
  double lambda = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;  // infinity norm of the penalized score at the returned iterate
  double cv_loss = 0.0;

  double predict(Span x) const;
  double predict(const Eigen::VectorXd& x) const;
};

/// 9 log-spaced penalties in [1e-4, 1e4].
std::vector<double> default_logistic_grid();

/// Damped Newton ascent on sum log-likelihood - lambda/2 |coef|^2 (intercept free).
/// Returns the best iterate with converged = false when max_iter is exhausted.
LogisticModel fit_logistic_ridge(const Eigen::MatrixXd& xs, std::span<const std::uint8_t> labels,
                                 double lambda, int max_iter = 100, double tol = 1e-8,
                                 const LogisticModel* warm_start = nullptr);

/// Penalty chosen by cross-validated log-loss over `lambda_grid`.
LogisticModel fit_logistic_cv(const Eigen::MatrixXd& xs, std::span<const std::uint8_t> labels,
                              std::span<const double> lambda_grid, int cv_folds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Conditional variance

enum class VarianceMode { Homoskedastic, Regression };

struct RidgeSettings {
  std::vector<double> lambda_grid;  // empty: default_lambda_grid()
  int cv_folds = 5;
  FeatureMap features = FeatureMap::Linear;
};

struct VarianceModel {
  VarianceMode mode = VarianceMode::Homoskedastic;
  double constant = 0.0;
  LinearModel regression;
  double floor = 0.0;

  /// Unfloored prediction.
  double raw(Span x) const;
  /// Prediction floored at `floor`; sets *floored when the floor binds.
  double predict(Span x, bool* floored = nullptr) const;
};

VarianceModel fit_conditional_variance(const Eigen::MatrixXd& xs, const Eigen::VectorXd& residuals_sq,
                                       VarianceMode mode, const RidgeSettings& settings,
                                       double variance_floor, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Pluggable learners

/// Fitted conditional mean and variance of a scalar target given x.
class MomentModel {
 public:
  virtual ~MomentModel() = default;
  virtual double mean(Span x) const = 0;
  /// May be negative or zero; callers apply the variance floor.
  virtual double variance(Span x) const = 0;
  /// Named training diagnostics (chosen penalties, CV losses, ...).
  virtual std::vector<std::pair<std::string, double>> diagnostics() const { return {}; }
};

class MomentLearner {
 public:
  virtual ~MomentLearner() = default;
  virtual std::unique_ptr<const MomentModel> fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
                                                 std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
};

class PropensityModel {
 public:
  virtual ~PropensityModel() = default;
  virtual double predict(Span x) const = 0;
};

class PropensityLearner {
 public:
  virtual ~PropensityLearner() = default;
  virtual std::unique_ptr<const PropensityModel> fit(const Eigen::MatrixXd& x,
                                                     std::span<const std::uint8_t> labels,
                                                     std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
};

/// Cross-validated ridge mean; variance from the squared in-sample residuals of that
/// mean, either as their average or through a second ridge fit.
class RidgeMomentLearner final : public MomentLearner {
 public:
  explicit RidgeMomentLearner(RidgeSettings settings = {}, VarianceMode mode = VarianceMode::Homoskedastic)
      : settings_(std::move(settings)), mode_(mode) {}

  std::unique_ptr<const MomentModel> fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
                                         std::uint64_t seed) const override;
  std::string name() const override;

 private:
  RidgeSettings settings_;
  VarianceMode mode_;
};

/// Parametric lognormal target: ridge on log(t), sigma^2 from the residual mean
/// square, then m = exp(mu + s2/2) and v = exp(2 mu + s2)(exp(s2) - 1). Targets must
/// be positive.
class LogNormalMomentLearner final : public MomentLearner {
 public:
  explicit LogNormalMomentLearner(RidgeSettings settings = {}) : settings_(std::move(settings)) {}

  std::unique_ptr<const MomentModel> fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
                                         std::uint64_t seed) const override;
  std::string name() const override { return "lognormal_ridge"; }

 private:
  RidgeSettings settings_;
};

struct LogisticSettings {
  std::vector<double> lambda_grid;  // empty: 9 log-spaced points in [1e-4, 1e4]
  int cv_folds = 5;
  FeatureMap features = FeatureMap::Linear;
};

/// Cross-validated ridge-penalized logistic regression on standardized features.
class LogisticPropensityLearner final : public PropensityLearner {
 public:
  explicit LogisticPropensityLearner(LogisticSettings settings = {}) : settings_(std::move(settings)) {}

  std::unique_ptr<const PropensityModel> fit(const Eigen::MatrixXd& x, std::span<const std::uint8_t> labels,
                                             std::uint64_t seed) const override;
  std::string name() const override { return "logistic_ridge_cv"; }

 private:
  LogisticSettings settings_;
};

/// Bypasses estimation with a supplied propensity function.
class KnownPropensity final : public PropensityLearner {
 public:
  explicit KnownPropensity(std::function<double(Span)> e, std::string label = "known")
      : e_(std::move(e)), label_(std::move(label)) {}
  static std::shared_ptr<const KnownPropensity> constant(double e);

  std::unique_ptr<const PropensityModel> fit(const Eigen::MatrixXd& x, std::span<const std::uint8_t> labels,
                                             std::uint64_t seed) const override;
  std::string name() const override { return label_; }

 private:
  std::function<double(Span)> e_;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Cross-fitted nuisance estimates

struct NuisanceConfig {
  std::shared_ptr<const MomentLearner> y_learner = std::make_shared<RidgeMomentLearner>();
  std::shared_ptr<const MomentLearner> z_learner = std::make_shared<RidgeMomentLearner>();
  std::shared_ptr<const PropensityLearner> propensity = std::make_shared<LogisticPropensityLearner>();
  /// [lo, hi] clip for the propensity; off by default (numeric guard [1e-9, 1 - 1e-9] only).
  std::optional<std::pair<double, double>> propensity_clip;
  /// Floor = variance_floor_rel * mean(t^2) over the fold's training targets.
  double variance_floor_rel = 1e-8;
  std::uint64_t seed = 0;
};

struct FoldFit {
  std::shared_ptr<const MomentModel> y_model;
  std::shared_ptr<const MomentModel> z_model;
  std::shared_ptr<const PropensityModel> propensity;
  double floor_y = 0.0;
  double floor_z = 0.0;
  Eigen::Index train_y = 0;
  Eigen::Index train_z = 0;
};

struct NuisanceFit {
  std::vector<FoldFit> folds;
};

struct MomentEstimates {
  Eigen::VectorXd m_y, m_z, v_y, v_z, e;
  std::vector<std::uint8_t> v_y_floored, v_z_floored, e_clipped;
  std::vector<int> fold;
  double e_floor = 0.0;

  Eigen::Index size() const { return m_y.size(); }
  static MomentEstimates uniform(Eigen::Index n, double m_y, double m_z, double v_y, double v_z, double e);
};

/// Trains the five conditional functions on all rows outside each fold and
/// evaluates them on the fold's rows. Scalar estimands only.
std::pair<NuisanceFit, MomentEstimates> estimate_nuisances(const FusedDataset& data,
                                                           const DecomposableEstimand& estimand,
                                                           const FoldAssignment& folds,
                                                           const NuisanceConfig& config);

// ---------------------------------------------------------------------------
// Positivity diagnostics

struct DistributionSummary {
  double min = 0.0, q05 = 0.0, q50 = 0.0, q95 = 0.0, max = 0.0;
};

struct PositivityReport {
  DistributionSummary e, one_minus_e, v_y, v_z;
  double mean_inv_e4 = 0.0;
  double mean_inv_one_minus_e4 = 0.0;
  double mean_inv_v_y8 = 0.0;
  double mean_inv_v_z8 = 0.0;
  Eigen::Index n = 0;
  Eigen::Index clipped = 0;
  Eigen::Index v_y_floored = 0;
  Eigen::Index v_z_floored = 0;
  bool clip_warning = false;   // clipped fraction > 1%
  bool floor_warning = false;  // floored fraction (either side) > 1%
};

PositivityReport positivity_report(const MomentEstimates& moments);

}  // namespace csfusion
