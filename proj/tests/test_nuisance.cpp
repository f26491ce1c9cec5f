#include "csfusion/nuisance.hpp"
#include "csfusion/simharness.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace csfusion;
using testutil::expect_error;

// ---------------------------------------------------------------------------
// Folds

TEST(KFoldSplit, EvenSplitPartitionsIndices) {
  const auto f = kfold_split(10, 2, 3);
  const auto a = f.rows_in(0);
  const auto b = f.rows_in(1);
  EXPECT_EQ(a.size(), 5u);
  EXPECT_EQ(b.size(), 5u);
  std::set<Eigen::Index> all(a.begin(), a.end());
  all.insert(b.begin(), b.end());
  EXPECT_EQ(all.size(), 10u);
}

TEST(KFoldSplit, RemainderSpread) {
  const auto f = kfold_split(7, 3, 1);
  std::vector<std::size_t> sizes;
  for (int k = 0; k < 3; ++k) sizes.push_back(f.rows_in(k).size());
  std::sort(sizes.rbegin(), sizes.rend());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 2, 2}));
}

TEST(KFoldSplit, Deterministic) {
  EXPECT_EQ(kfold_split(100, 5, 42).fold, kfold_split(100, 5, 42).fold);
  EXPECT_NE(kfold_split(100, 5, 42).fold, kfold_split(100, 5, 43).fold);
}

TEST(KFoldSplit, RowsOutsideIsComplement) {
  const auto f = kfold_split(23, 4, 9);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(f.rows_in(k).size() + f.rows_outside(k).size(), 23u);
}

TEST(KFoldSplit, TooFewObservations) {
  expect_error(ErrorCode::TooFewObservations, [] { kfold_split(3, 4, 0); });
  expect_error(ErrorCode::TooFewObservations, [] { kfold_split(10, 1, 0); });
}

// ---------------------------------------------------------------------------
// Ridge

TEST(Ridge, NoiselessSlopeWithSmallestPenalty) {
  const Eigen::MatrixXd x = testutil::gaussian_matrix(50, 1, 5);
  const Eigen::VectorXd y = 2.0 * x.col(0);
  const std::vector<double> grid{1e-8, 1.0, 10.0};
  const auto m = fit_ridge_cv(x, y, grid, 5, 1);
  EXPECT_EQ(m.lambda, 1e-8);
  EXPECT_NEAR(m.coef(0), 2.0, 1e-4);
}

TEST(Ridge, ConstantTargets) {
  const Eigen::MatrixXd x = testutil::gaussian_matrix(30, 3, 6);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(30, 4.5);
  const auto m = fit_ridge_cv(x, y, default_lambda_grid(), 5, 2);
  EXPECT_NEAR(m.intercept, 4.5, 1e-12);
  EXPECT_LE(m.coef.lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Ridge, MatchesDirectNormalEquations) {
  Eigen::MatrixXd x(6, 2);
  x << 1.0, 0.5, 2.0, -1.0, 3.0, 0.0, 4.0, 2.5, 5.0, 1.0, 6.0, -0.5;
  Eigen::VectorXd y(6);
  y << 1.2, 0.3, 2.9, 4.4, 3.1, 2.2;
  const double lambda = 0.5;
  const auto m = fit_ridge(x, y, lambda);

  // Standardize with population sd, center y, solve (Z'Z + lambda I) b = Z'(y - ybar).
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centred = x.rowwise() - mean;
  const Eigen::RowVectorXd sd = (centred.array().square().colwise().mean()).sqrt();
  const Eigen::MatrixXd z = centred.array().rowwise() / sd.array();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::MatrixXd lhs = z.transpose() * z + lambda * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd b = lhs.ldlt().solve(z.transpose() * yc);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(m.standardized_coef(j), b(j), 1e-10);
    EXPECT_NEAR(m.coef(j), b(j) / sd(j), 1e-10);
  }
  EXPECT_NEAR(m.intercept, y.mean() - (b.array() / sd.transpose().array()).matrix().dot(mean.transpose()), 1e-10);
}

TEST(Ridge, ZeroVarianceColumnGetsZeroCoefficient) {
  Eigen::MatrixXd x = testutil::gaussian_matrix(20, 2, 8);
  x.col(1).setConstant(3.0);
  const Eigen::VectorXd y = x.col(0) * 1.5;
  const auto m = fit_ridge(x, y, 1e-6);
  EXPECT_EQ(m.coef(1), 0.0);
  EXPECT_NEAR(m.coef(0), 1.5, 1e-5);
}

TEST(Ridge, ShrinkageIsMonotoneAlongGrid) {
  const Eigen::MatrixXd x = testutil::gaussian_matrix(80, 4, 9);
  Rng rng(10);
  std::normal_distribution<double> nd;
  Eigen::VectorXd y = x * Eigen::Vector4d(1, -2, 0.5, 3);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += nd(rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : default_lambda_grid()) {
    const double norm = fit_ridge(x, y, lambda).standardized_coef.norm();
    EXPECT_LE(norm, prev + 1e-12);
    prev = norm;
  }
  EXPECT_LE(fit_ridge(x, y, 1e12).standardized_coef.norm(), 1e-6);
}

TEST(Ridge, Errors) {
  const Eigen::MatrixXd x = testutil::gaussian_matrix(1, 1, 1);
  expect_error(ErrorCode::DegenerateDesign, [&] { fit_ridge(x, Eigen::VectorXd::Ones(1), 1.0); });
  const Eigen::MatrixXd x2 = testutil::gaussian_matrix(5, 1, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(5);
  y(2) = NAN;
  expect_error(ErrorCode::NonFiniteTarget, [&] { fit_ridge(x2, y, 1.0); });
}

// ---------------------------------------------------------------------------
// Logistic

namespace {

Eigen::VectorXd penalized_score(const Eigen::MatrixXd& x, const std::vector<std::uint8_t>& labels,
                                const LogisticModel& m) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.cols() + 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double eta = m.intercept + x.row(i).dot(m.coef);
    const double resid = labels[static_cast<std::size_t>(i)] - 1.0 / (1.0 + std::exp(-eta));
    g(0) += resid;
    g.tail(x.cols()) += resid * x.row(i).transpose();
  }
  g.tail(x.cols()) -= m.lambda * m.coef;
  return g;
}

}  // namespace

TEST(Logistic, NoSignalBalancedLabels) {
  Eigen::MatrixXd x(8, 1);
  x << -3, -1, 1, 3, -3, -1, 1, 3;
  const std::vector<std::uint8_t> labels{0, 0, 0, 0, 1, 1, 1, 1};
  for (double lambda : {0.0, 1.0, 100.0}) {
    const auto m = fit_logistic_ridge(x, labels, lambda);
    EXPECT_NEAR(m.intercept, 0.0, 1e-8);
    for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_NEAR(m.predict(Eigen::VectorXd(x.row(i))), 0.5, 1e-8);
  }
}

TEST(Logistic, SeparableDataWithPenaltyConverges) {
  Eigen::MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  const std::vector<std::uint8_t> labels{0, 0, 0, 1, 1, 1};
  const auto m = fit_logistic_ridge(x, labels, 1.0);
  EXPECT_TRUE(std::isfinite(m.coef(0)));
  EXPECT_TRUE(m.converged);
  EXPECT_LE(penalized_score(x, labels, m).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Logistic, InterceptOnlyMle) {
  Rng rng(21);
  std::bernoulli_distribution b(0.8);
  std::vector<std::uint8_t> labels(500);
  for (auto& l : labels) l = b(rng) ? 1 : 0;
  const double mean = std::accumulate(labels.begin(), labels.end(), 0.0) / 500.0;
  const auto m = fit_logistic_ridge(Eigen::MatrixXd(500, 0), labels, 0.0);
  EXPECT_NEAR(m.intercept, std::log(mean / (1 - mean)), 1e-3);
}

TEST(Logistic, SingleClass) {
  const Eigen::MatrixXd x = testutil::gaussian_matrix(5, 1, 2);
  const std::vector<std::uint8_t> labels(5, 1);
  expect_error(ErrorCode::SingleClass, [&] { fit_logistic_ridge(x, labels, 1.0); });
}

TEST(Logistic, CrossValidatedFitRecoversSignal) {
  const Eigen::MatrixXd x = testutil::gaussian_matrix(400, 2, 22);
  Rng rng(23);
  std::uniform_real_distribution<double> u;
  std::vector<std::uint8_t> labels(400);
  for (int i = 0; i < 400; ++i) labels[static_cast<std::size_t>(i)] = u(rng) < 1 / (1 + std::exp(-1.5 * x(i, 0))) ? 1 : 0;
  const auto grid = default_logistic_grid();
  const auto m = fit_logistic_cv(x, labels, grid, 5, 1);
  EXPECT_GT(m.coef(0), 0.8);
  EXPECT_LT(std::abs(m.coef(1)), 0.4);
}

// ---------------------------------------------------------------------------
// Conditional variance

TEST(ConditionalVariance, HomoskedasticMean) {
  const Eigen::MatrixXd x = testutil::gaussian_matrix(2, 1, 1);
  const auto vm = fit_conditional_variance(x, Eigen::Vector2d(1.0, 3.0), VarianceMode::Homoskedastic, {}, 0.0);
  const double x0 = 0.3;
  EXPECT_DOUBLE_EQ(vm.predict(Span(&x0, 1)), 2.0);
}

TEST(ConditionalVariance, RegressionMatchesRidge) {
  const Eigen::MatrixXd x = testutil::gaussian_matrix(60, 1, 3);
  const Eigen::VectorXd r2 = (2.0 + 0.5 * x.col(0).array().tanh()).matrix();  // positive
  Eigen::VectorXd lin = (5.0 + x.col(0).array()).matrix();
  RidgeSettings rs;
  const auto vm = fit_conditional_variance(x, lin, VarianceMode::Regression, rs, 1e-8, 4);
  const auto grid = default_lambda_grid();
  const auto ridge = fit_ridge_cv(x, lin, grid, rs.cv_folds, 4);
  for (Eigen::Index i = 0; i < 10; ++i) {
    bool floored = true;
    const double xi = x(i, 0);
    const double v = vm.predict(Span(&xi, 1), &floored);
    EXPECT_FALSE(floored);
    EXPECT_NEAR(v, ridge.predict(Span(&xi, 1)), 1e-12);
  }
  (void)r2;
}

TEST(ConditionalVariance, NegativePredictionIsFloored) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  const Eigen::Vector4d r2(3.0, 2.0, 1.0, 0.0);  // line 3 - x; at x = 3.3 predicts -0.3
  RidgeSettings rs;
  rs.lambda_grid = {1e-10};
  rs.cv_folds = 2;
  const auto vm = fit_conditional_variance(x, r2, VarianceMode::Regression, rs, 1e-6, 0);
  const double at = 3.3;
  bool floored = false;
  EXPECT_NEAR(vm.raw(Span(&at, 1)), -0.3, 1e-6);
  EXPECT_EQ(vm.predict(Span(&at, 1), &floored), 1e-6);
  EXPECT_TRUE(floored);
}

TEST(ConditionalVariance, EmptyInput) {
  expect_error(ErrorCode::EmptyInput, [] {
    fit_conditional_variance(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), VarianceMode::Homoskedastic, {}, 0.0);
  });
}

// ---------------------------------------------------------------------------
// Cross-fitted nuisances

namespace {

FusedDataset linear_data(Eigen::Index n, std::uint64_t seed, double noise = 1.0) {
  const RowMatrix x = testutil::gaussian_matrix(n, 3, seed);
  Rng rng(seed + 1);
  std::normal_distribution<double> nd;
  Eigen::VectorXd y(n), z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = x(i, 0) - x(i, 1) + noise * nd(rng);
    z(i) = 0.5 * x(i, 2) + noise * nd(rng);
  }
  return FusedDataset::from_scalar(x, testutil::alternating(n), y, z);
}

}  // namespace

TEST(EstimateNuisances, OutOfFoldPurity) {
  const FusedDataset d = linear_data(120, 31);
  const auto folds = kfold_split(d.n(), 3, 5);
  NuisanceConfig cfg;
  cfg.seed = 9;
  const auto base = estimate_nuisances(d, DecomposableEstimand::product(), folds, cfg).second;

  // Perturb responses of fold-0 rows only; fold-0 estimates must not move.
  RowMatrix y(d.n(), 1), z(d.n(), 1);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const double bump = folds.fold[static_cast<std::size_t>(i)] == 0 ? 100.0 : 0.0;
    y(i, 0) = d.observes_y(i) ? d.y(i)[0] + bump : NAN;
    z(i, 0) = d.observes_y(i) ? NAN : d.z(i)[0] - bump;
  }
  const FusedDataset d2(d.covariates(), d.r(), y, z);
  const auto moved = estimate_nuisances(d2, DecomposableEstimand::product(), folds, cfg).second;
  for (auto i : folds.rows_in(0)) {
    EXPECT_EQ(moved.m_y(i), base.m_y(i));
    EXPECT_EQ(moved.m_z(i), base.m_z(i));
    EXPECT_EQ(moved.v_y(i), base.v_y(i));
    EXPECT_EQ(moved.v_z(i), base.v_z(i));
    EXPECT_EQ(moved.e(i), base.e(i));
  }
  bool other_changed = false;
  for (auto i : folds.rows_in(1)) other_changed |= moved.m_y(i) != base.m_y(i);
  EXPECT_TRUE(other_changed);
}

TEST(EstimateNuisances, DeterministicResponsesHitTheFloor) {
  const RowMatrix x = testutil::gaussian_matrix(100, 2, 41);
  const Eigen::VectorXd y = x.col(0);
  const Eigen::VectorXd z = x.col(1);
  const FusedDataset d = FusedDataset::from_scalar(x, testutil::alternating(100), y, z);
  const auto folds = kfold_split(d.n(), 2, 1);
  const auto [fit, m] = estimate_nuisances(d, DecomposableEstimand::product(), folds, NuisanceConfig{});
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const auto& ff = fit.folds[static_cast<std::size_t>(m.fold[static_cast<std::size_t>(i)])];
    EXPECT_EQ(m.v_y(i), ff.floor_y);
    EXPECT_TRUE(m.v_y_floored[static_cast<std::size_t>(i)]);
  }
}

TEST(EstimateNuisances, FloorsAndPropensityRange) {
  const FusedDataset d = linear_data(200, 51);
  const auto folds = kfold_split(d.n(), 2, 2);
  NuisanceConfig cfg;
  cfg.propensity_clip = std::make_pair(0.05, 0.95);
  const auto [fit, m] = estimate_nuisances(d, DecomposableEstimand::product(), folds, cfg);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const auto& ff = fit.folds[static_cast<std::size_t>(m.fold[static_cast<std::size_t>(i)])];
    EXPECT_GE(m.v_y(i), ff.floor_y);
    EXPECT_GE(m.v_z(i), ff.floor_z);
    EXPECT_GE(m.e(i), 0.05);
    EXPECT_LE(m.e(i), 0.95);
  }
}

TEST(EstimateNuisances, DeterministicReplay) {
  const FusedDataset d = linear_data(150, 61);
  const auto folds = kfold_split(d.n(), 2, 3);
  NuisanceConfig cfg;
  cfg.seed = 77;
  const auto a = estimate_nuisances(d, DecomposableEstimand::product(), folds, cfg).second;
  const auto b = estimate_nuisances(d, DecomposableEstimand::product(), folds, cfg).second;
  EXPECT_EQ(a.m_y, b.m_y);
  EXPECT_EQ(a.m_z, b.m_z);
  EXPECT_EQ(a.v_y, b.v_y);
  EXPECT_EQ(a.v_z, b.v_z);
  EXPECT_EQ(a.e, b.e);
}

TEST(EstimateNuisances, KnownPropensityBypassesEstimation) {
  const FusedDataset d = linear_data(100, 71);
  NuisanceConfig cfg;
  cfg.propensity = KnownPropensity::constant(0.3);
  const auto m = estimate_nuisances(d, DecomposableEstimand::product(), kfold_split(100, 2, 1), cfg).second;
  for (Eigen::Index i = 0; i < d.n(); ++i) EXPECT_EQ(m.e(i), 0.3);
}

TEST(EstimateNuisances, EmptyArmInTrainingFold) {
  // Both r = 0 rows sit in fold 0, so fold 0's training rows hold no Z observations.
  RowMatrix x = testutil::gaussian_matrix(10, 1, 3);
  std::vector<std::uint8_t> r(10, 1);
  r[4] = r[5] = 0;
  const auto d = FusedDataset::from_scalar(x, r, Eigen::VectorXd::Ones(10), Eigen::VectorXd::Ones(10));
  FoldAssignment folds{10, 2, {0, 1, 0, 1, 0, 0, 1, 1, 0, 1}};
  expect_error(ErrorCode::EmptyArm,
               [&] { estimate_nuisances(d, DecomposableEstimand::product(), folds, NuisanceConfig{}); });
}

TEST(EstimateNuisances, ConsistencyUnderValidationDesign) {
  const ValidationStudy spec{};
  auto error_at = [&](Eigen::Index n) {
    double total = 0.0;
    int count = 0;
    for (std::uint64_t rep = 0; rep < 5; ++rep) {
      const auto s = sample_dgp(spec, n, 1000 + rep);
      const auto est = default_estimand(spec);
      const auto m = estimate_nuisances(s.data, est, kfold_split(n, 2, rep), default_setup(spec).inference.nuisance).second;
      for (Eigen::Index i = 0; i < n; ++i) {
        total += std::abs(m.m_y(i) - true_moments(spec, s.data.x(i)).m_y);
        ++count;
      }
    }
    return total / count;
  };
  EXPECT_LT(error_at(2000), error_at(500));
}

// ---------------------------------------------------------------------------
// Positivity report

TEST(PositivityReport, ConstantPropensity) {
  const auto m = MomentEstimates::uniform(50, 1.0, 1.0, 1.0, 1.0, 0.5);
  const auto p = positivity_report(m);
  EXPECT_EQ(p.e.min, 0.5);
  EXPECT_NEAR(p.mean_inv_e4, 16.0, 1e-12);
  EXPECT_FALSE(p.clip_warning);
  EXPECT_FALSE(p.floor_warning);
}

TEST(PositivityReport, ClipWarningThreshold) {
  auto m = MomentEstimates::uniform(1000, 1.0, 1.0, 1.0, 1.0, 0.5);
  m.e(0) = 0.05;
  m.e_clipped[0] = 1;
  auto p = positivity_report(m);
  EXPECT_EQ(p.clipped, 1);
  EXPECT_FALSE(p.clip_warning);
  for (int i = 0; i < 50; ++i) m.e_clipped[static_cast<std::size_t>(i)] = 1;
  p = positivity_report(m);
  EXPECT_EQ(p.clipped, 50);
  EXPECT_TRUE(p.clip_warning);
}
