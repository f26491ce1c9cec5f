#include "csfusion/nuisance.hpp"

#include "csfusion/error.hpp"
#include "csfusion/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace csfusion {

namespace {

class RidgeMomentModel final : public MomentModel {
 public:
  RidgeMomentModel(LinearModel mean, VarianceModel variance, FeatureMap features)
      : mean_(std::move(mean)), variance_(std::move(variance)), features_(features) {}

  double mean(Span x) const override {
    if (features_ == FeatureMap::Linear) return mean_.predict(x);
    return mean_.predict(expand_features(x, features_));
  }

  double variance(Span x) const override {
    if (variance_.mode == VarianceMode::Homoskedastic) return variance_.constant;
    if (features_ == FeatureMap::Linear) return variance_.regression.predict(x);
    return variance_.regression.predict(expand_features(x, features_));
  }

  std::vector<std::pair<std::string, double>> diagnostics() const override {
    std::vector<std::pair<std::string, double>> d{{"mean_lambda", mean_.lambda}, {"mean_cv_mse", mean_.cv_loss}};
    if (variance_.mode == VarianceMode::Homoskedastic) {
      d.emplace_back("variance_constant", variance_.constant);
    } else {
      d.emplace_back("variance_lambda", variance_.regression.lambda);
      d.emplace_back("variance_cv_mse", variance_.regression.cv_loss);
    }
    return d;
  }

 private:
  LinearModel mean_;
  VarianceModel variance_;
  FeatureMap features_;
};

class LogNormalMomentModel final : public MomentModel {
 public:
  LogNormalMomentModel(LinearModel log_mean, double sigma2, FeatureMap features)
      : log_mean_(std::move(log_mean)), sigma2_(sigma2), features_(features) {}

  double mean(Span x) const override { return std::exp(mu(x) + 0.5 * sigma2_); }
  double variance(Span x) const override { return std::exp(2.0 * mu(x) + sigma2_) * std::expm1(sigma2_); }

  std::vector<std::pair<std::string, double>> diagnostics() const override {
    return {{"log_mean_lambda", log_mean_.lambda}, {"log_mean_cv_mse", log_mean_.cv_loss}, {"sigma2", sigma2_}};
  }

 private:
  double mu(Span x) const {
    return features_ == FeatureMap::Linear ? log_mean_.predict(x) : log_mean_.predict(expand_features(x, features_));
  }

  LinearModel log_mean_;
  double sigma2_;
  FeatureMap features_;
};

class LogisticPropensityModel final : public PropensityModel {
 public:
  LogisticPropensityModel(Standardizer st, LogisticModel model, FeatureMap features)
      : st_(std::move(st)), model_(std::move(model)), features_(features) {}

  double predict(Span x) const override {
    Eigen::VectorXd v = expand_features(x, features_);
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = st_.scale(j) > 0.0 ? (v(j) - st_.mean(j)) / st_.scale(j) : 0.0;
    return model_.predict(v);
  }

 private:
  Standardizer st_;
  LogisticModel model_;
  FeatureMap features_;
};

class FunctionPropensityModel final : public PropensityModel {
 public:
  explicit FunctionPropensityModel(std::function<double(Span)> e) : e_(std::move(e)) {}
  double predict(Span x) const override { return e_(x); }

 private:
  std::function<double(Span)> e_;
};

std::vector<double> grid_or_default(const std::vector<double>& grid) {
  return grid.empty() ? default_lambda_grid() : grid;
}

Eigen::MatrixXd gather_x(const FusedDataset& data, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), data.px());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = data.covariates().row(rows[i]);
  }
  return out;
}

double variance_floor(const Eigen::VectorXd& targets, double rel) {
  const double second = targets.squaredNorm() / static_cast<double>(targets.size());
  return rel * (second > 0.0 ? second : 1.0);
}

}  // namespace

std::unique_ptr<const MomentModel> RidgeMomentLearner::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
                                                           std::uint64_t seed) const {
  const Eigen::MatrixXd design = expand_features(x, settings_.features);
  const auto grid = grid_or_default(settings_.lambda_grid);
  LinearModel mean = fit_ridge_cv(design, targets, grid, settings_.cv_folds, derive_seed(seed, 1));
  const Eigen::VectorXd resid_sq = (targets - mean.predict(design)).array().square();
  VarianceModel variance =
      fit_conditional_variance(design, resid_sq, mode_, settings_, 0.0, derive_seed(seed, 2));
  return std::make_unique<RidgeMomentModel>(std::move(mean), std::move(variance), settings_.features);
}

std::string RidgeMomentLearner::name() const {
  std::string n = "ridge_cv";
  if (settings_.features == FeatureMap::Quadratic) n += "_quadratic";
  n += mode_ == VarianceMode::Homoskedastic ? "/homoskedastic" : "/regression";
  return n;
}

std::unique_ptr<const MomentModel> LogNormalMomentLearner::fit(const Eigen::MatrixXd& x,
                                                               const Eigen::VectorXd& targets,
                                                               std::uint64_t seed) const {
  if (targets.size() == 0 || !(targets.minCoeff() > 0.0)) {
    throw Error(ErrorCode::SupportViolation, "lognormal learner needs strictly positive targets");
  }
  const Eigen::MatrixXd design = expand_features(x, settings_.features);
  const Eigen::VectorXd logs = targets.array().log();
  LinearModel log_mean = fit_ridge_cv(design, logs, grid_or_default(settings_.lambda_grid), settings_.cv_folds,
                                      derive_seed(seed, 1));
  const double sigma2 = (logs - log_mean.predict(design)).squaredNorm() / static_cast<double>(logs.size());
  return std::make_unique<LogNormalMomentModel>(std::move(log_mean), sigma2, settings_.features);
}

std::unique_ptr<const PropensityModel> LogisticPropensityLearner::fit(const Eigen::MatrixXd& x,
                                                                      std::span<const std::uint8_t> labels,
                                                                      std::uint64_t seed) const {
  const Eigen::MatrixXd design = expand_features(x, settings_.features);
  Standardizer st = Standardizer::fit(design);
  const auto grid = settings_.lambda_grid.empty() ? default_logistic_grid() : settings_.lambda_grid;
  LogisticModel model = fit_logistic_cv(st.apply(design), labels, grid, settings_.cv_folds, seed);
  return std::make_unique<LogisticPropensityModel>(std::move(st), std::move(model), settings_.features);
}

std::shared_ptr<const KnownPropensity> KnownPropensity::constant(double e) {
  if (!(e > 0.0 && e < 1.0)) throw Error(ErrorCode::InvalidArgument, "known propensity must lie in (0, 1)");
  return std::make_shared<KnownPropensity>([e](Span) { return e; }, "known_constant");
}

std::unique_ptr<const PropensityModel> KnownPropensity::fit(const Eigen::MatrixXd&, std::span<const std::uint8_t>,
                                                            std::uint64_t) const {
  return std::make_unique<FunctionPropensityModel>(e_);
}

MomentEstimates MomentEstimates::uniform(Eigen::Index n, double m_y, double m_z, double v_y, double v_z, double e) {
  MomentEstimates m;
  m.m_y = Eigen::VectorXd::Constant(n, m_y);
  m.m_z = Eigen::VectorXd::Constant(n, m_z);
  m.v_y = Eigen::VectorXd::Constant(n, v_y);
  m.v_z = Eigen::VectorXd::Constant(n, v_z);
  m.e = Eigen::VectorXd::Constant(n, e);
  m.v_y_floored.assign(static_cast<std::size_t>(n), 0);
  m.v_z_floored.assign(static_cast<std::size_t>(n), 0);
  m.e_clipped.assign(static_cast<std::size_t>(n), 0);
  m.fold.assign(static_cast<std::size_t>(n), 0);
  return m;
}

std::pair<NuisanceFit, MomentEstimates> estimate_nuisances(const FusedDataset& data,
                                                           const DecomposableEstimand& estimand,
                                                           const FoldAssignment& folds,
                                                           const NuisanceConfig& config) {
  if (!estimand.scalar()) {
    throw Error(ErrorCode::InvalidArgument, "cross-fitted nuisances support scalar estimands only");
  }
  if (folds.n != data.n()) throw Error(ErrorCode::LengthMismatch, "fold assignment does not match dataset");
  if (!config.y_learner || !config.z_learner || !config.propensity) {
    throw Error(ErrorCode::InvalidArgument, "nuisance config is missing a learner");
  }
  double e_lo = 1e-9;
  double e_hi = 1.0 - 1e-9;
  if (config.propensity_clip) {
    std::tie(e_lo, e_hi) = *config.propensity_clip;
    if (!(e_lo > 0.0 && e_lo < e_hi && e_hi < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "propensity clip must satisfy 0 < lo < hi < 1");
    }
  }

  const Eigen::Index n = data.n();
  MomentEstimates est = MomentEstimates::uniform(n, 0.0, 0.0, 0.0, 0.0, 0.5);
  est.fold = folds.fold;
  est.e_floor = e_lo;
  NuisanceFit fit;
  fit.folds.resize(static_cast<std::size_t>(folds.k_folds));

  for (int k = 0; k < folds.k_folds; ++k) {
    const auto train = folds.rows_outside(k);
    std::vector<Eigen::Index> train_y;
    std::vector<Eigen::Index> train_z;
    std::vector<std::uint8_t> labels;
    labels.reserve(train.size());
    for (auto i : train) {
      (data.observes_y(i) ? train_y : train_z).push_back(i);
      labels.push_back(static_cast<std::uint8_t>(data.r(i)));
    }
    if (train_y.empty() || train_z.empty()) {
      throw Error(ErrorCode::EmptyArm, "training set of fold " + std::to_string(k) + " lacks an arm");
    }
    Eigen::VectorXd t_y(static_cast<Eigen::Index>(train_y.size()));
    for (std::size_t j = 0; j < train_y.size(); ++j) {
      t_y(static_cast<Eigen::Index>(j)) = estimand.f_scalar(data.y(train_y[j]), data.x(train_y[j]));
    }
    Eigen::VectorXd t_z(static_cast<Eigen::Index>(train_z.size()));
    for (std::size_t j = 0; j < train_z.size(); ++j) {
      t_z(static_cast<Eigen::Index>(j)) = estimand.g_scalar(data.z(train_z[j]), data.x(train_z[j]));
    }
    if (!t_y.allFinite() || !t_z.allFinite()) {
      throw Error(ErrorCode::NonFiniteTarget, "estimand produced a non-finite value");
    }

    FoldFit& ff = fit.folds[static_cast<std::size_t>(k)];
    ff.train_y = t_y.size();
    ff.train_z = t_z.size();
    ff.floor_y = variance_floor(t_y, config.variance_floor_rel);
    ff.floor_z = variance_floor(t_z, config.variance_floor_rel);
    ff.y_model = config.y_learner->fit(gather_x(data, train_y), t_y, derive_seed(config.seed, 100 + k, 1));
    ff.z_model = config.z_learner->fit(gather_x(data, train_z), t_z, derive_seed(config.seed, 100 + k, 2));
    ff.propensity = config.propensity->fit(gather_x(data, train), labels, derive_seed(config.seed, 100 + k, 3));

    for (auto i : folds.rows_in(k)) {
      const Span x = data.x(i);
      est.m_y(i) = ff.y_model->mean(x);
      est.m_z(i) = ff.z_model->mean(x);
      const double vy = ff.y_model->variance(x);
      const double vz = ff.z_model->variance(x);
      const double e = ff.propensity->predict(x);
      if (!std::isfinite(est.m_y(i)) || !std::isfinite(est.m_z(i)) || std::isnan(vy) || std::isnan(vz) ||
          std::isnan(e)) {
        throw Error(ErrorCode::NonFiniteEvaluation, "nuisance prediction is not finite at row " + std::to_string(i));
      }
      const auto idx = static_cast<std::size_t>(i);
      est.v_y_floored[idx] = !(vy >= ff.floor_y);
      est.v_y(i) = est.v_y_floored[idx] ? ff.floor_y : vy;
      est.v_z_floored[idx] = !(vz >= ff.floor_z);
      est.v_z(i) = est.v_z_floored[idx] ? ff.floor_z : vz;
      est.e_clipped[idx] = e < e_lo || e > e_hi;
      est.e(i) = std::clamp(e, e_lo, e_hi);
    }
  }
  return {std::move(fit), std::move(est)};
}

namespace {

DistributionSummary summarize(Eigen::VectorXd v) {
  DistributionSummary s;
  if (v.size() == 0) return s;
  std::sort(v.data(), v.data() + v.size());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(pos));
    const auto hi = std::min<Eigen::Index>(lo + 1, v.size() - 1);
    return v(lo) + (pos - static_cast<double>(lo)) * (v(hi) - v(lo));
  };
  s.min = v(0);
  s.q05 = q(0.05);
  s.q50 = q(0.5);
  s.q95 = q(0.95);
  s.max = v(v.size() - 1);
  return s;
}

}  // namespace

PositivityReport positivity_report(const MomentEstimates& m) {
  PositivityReport r;
  r.n = m.size();
  if (r.n == 0) return r;
  r.e = summarize(m.e);
  r.one_minus_e = summarize((1.0 - m.e.array()).matrix());
  r.v_y = summarize(m.v_y);
  r.v_z = summarize(m.v_z);
  r.mean_inv_e4 = m.e.array().pow(-4.0).mean();
  r.mean_inv_one_minus_e4 = (1.0 - m.e.array()).pow(-4.0).mean();
  r.mean_inv_v_y8 = m.v_y.array().pow(-8.0).mean();
  r.mean_inv_v_z8 = m.v_z.array().pow(-8.0).mean();
  for (Eigen::Index i = 0; i < r.n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (idx < m.e_clipped.size()) r.clipped += m.e_clipped[idx];
    if (idx < m.v_y_floored.size()) r.v_y_floored += m.v_y_floored[idx];
    if (idx < m.v_z_floored.size()) r.v_z_floored += m.v_z_floored[idx];
  }
  const double n = static_cast<double>(r.n);
  r.clip_warning = static_cast<double>(r.clipped) / n > 0.01;
  r.floor_warning = static_cast<double>(std::max(r.v_y_floored, r.v_z_floored)) / n > 0.01;
  return r;
}

}  // namespace csfusion
