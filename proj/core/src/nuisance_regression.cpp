#include "csfusion/error.hpp"
#include "csfusion/nuisance.hpp"
#include "csfusion/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace csfusion {

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

// Spectral form of the standardized ridge normal equations, reused across penalties.
struct RidgeSystem {
  Standardizer standardizer;
  Eigen::MatrixXd eigvecs;
  Eigen::VectorXd eigvals;
  Eigen::VectorXd projected;  // Q^T X~^T y~
  double y_mean = 0.0;

  RidgeSystem(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    standardizer = Standardizer::fit(x);
    const Eigen::MatrixXd xs = standardizer.apply(x);
    y_mean = y.mean();
    const Eigen::MatrixXd gram = xs.transpose() * xs;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    eigvecs = eig.eigenvectors();
    eigvals = eig.eigenvalues().cwiseMax(0.0);
    projected = eigvecs.transpose() * (xs.transpose() * (y.array() - y_mean).matrix());
  }

  Eigen::VectorXd standardized_coef(double lambda) const {
    const double cutoff = 1e-12 * std::max(1.0, eigvals.size() ? eigvals.maxCoeff() : 0.0);
    Eigen::VectorXd scaled(projected.size());
    for (Eigen::Index i = 0; i < projected.size(); ++i) {
      const double denom = eigvals(i) + lambda;
      scaled(i) = denom > cutoff ? projected(i) / denom : 0.0;
    }
    return eigvecs * scaled;
  }

  LinearModel model(double lambda) const {
    LinearModel m;
    m.lambda = lambda;
    m.standardized_coef = standardized_coef(lambda);
    m.coef = Eigen::VectorXd::Zero(m.standardized_coef.size());
    for (Eigen::Index j = 0; j < m.coef.size(); ++j) {
      if (standardizer.scale(j) > 0.0) m.coef(j) = m.standardized_coef(j) / standardizer.scale(j);
    }
    m.intercept = y_mean - m.coef.dot(standardizer.mean);
    return m;
  }
};

void check_design(const Eigen::MatrixXd& xs, const Eigen::VectorXd& targets) {
  if (xs.rows() != targets.size()) {
    throw Error(ErrorCode::LengthMismatch, "design rows and targets differ in length");
  }
  if (xs.rows() < 2) throw Error(ErrorCode::DegenerateDesign, "ridge needs at least 2 rows");
  if (!targets.allFinite()) throw Error(ErrorCode::NonFiniteTarget, "ridge targets must be finite");
  if (!xs.allFinite()) throw Error(ErrorCode::DegenerateDesign, "design must be finite");
}

double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
  return grid;
}

}  // namespace

// ---------------------------------------------------------------------------

Eigen::MatrixXd expand_features(const Eigen::MatrixXd& x, FeatureMap map) {
  if (map == FeatureMap::Linear) return x;
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd out(x.rows(), p + p * (p + 1) / 2);
  out.leftCols(p) = x;
  Eigen::Index c = p;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) out.col(c++) = x.col(i).cwiseProduct(x.col(j));
  }
  return out;
}

Eigen::VectorXd expand_features(Span x, FeatureMap map) {
  const auto p = static_cast<Eigen::Index>(x.size());
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), p);
  if (map == FeatureMap::Linear) return xv;
  Eigen::VectorXd out(p + p * (p + 1) / 2);
  out.head(p) = xv;
  Eigen::Index c = p;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) out(c++) = xv(i) * xv(j);
  }
  return out;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double sd = std::sqrt((x.col(j).array() - s.mean(j)).square().mean());
    s.scale(j) = sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))) ? sd : 0.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (scale(j) > 0.0) {
      out.col(j) = (x.col(j).array() - mean(j)) / scale(j);
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

double LinearModel::predict(Span x) const {
  return intercept + coef.dot(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& x) const {
  return (x * coef).array() + intercept;
}

std::vector<double> default_lambda_grid() { return log_grid(1e-4, 1e4, 20); }

LinearModel fit_ridge(const Eigen::MatrixXd& xs, const Eigen::VectorXd& targets, double lambda) {
  check_design(xs, targets);
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge penalty must be >= 0");
  return RidgeSystem(xs, targets).model(lambda);
}

LinearModel fit_ridge_cv(const Eigen::MatrixXd& xs, const Eigen::VectorXd& targets,
                         std::span<const double> lambda_grid, int cv_folds, std::uint64_t seed) {
  check_design(xs, targets);
  if (lambda_grid.empty()) throw Error(ErrorCode::InvalidArgument, "lambda grid is empty");
  std::vector<double> grid(lambda_grid.begin(), lambda_grid.end());
  for (double l : grid) {
    if (!(l >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda grid entries must be >= 0");
  }
  std::sort(grid.begin(), grid.end());
  if (grid.size() == 1) return RidgeSystem(xs, targets).model(grid.front());

  const int k = std::min<int>(std::max(cv_folds, 2), static_cast<int>(xs.rows()));
  const FoldAssignment folds = kfold_split(xs.rows(), k, seed);
  std::vector<double> sse(grid.size(), 0.0);
  for (int f = 0; f < k; ++f) {
    const auto train = folds.rows_outside(f);
    const auto test = folds.rows_in(f);
    const RidgeSystem system(take_rows(xs, train), take(targets, train));
    const Eigen::MatrixXd x_test = take_rows(xs, test);
    const Eigen::VectorXd y_test = take(targets, test);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const LinearModel m = system.model(grid[g]);
      sse[g] += (m.predict(x_test) - y_test).squaredNorm();
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (sse[g] < sse[best]) best = g;
  }
  LinearModel model = RidgeSystem(xs, targets).model(grid[best]);
  model.cv_loss = sse[best] / static_cast<double>(xs.rows());
  return model;
}

// ---------------------------------------------------------------------------

double LogisticModel::predict(Span x) const {
  return sigmoid(intercept + coef.dot(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()))));
}

double LogisticModel::predict(const Eigen::VectorXd& x) const { return sigmoid(intercept + coef.dot(x)); }

LogisticModel fit_logistic_ridge(const Eigen::MatrixXd& xs, std::span<const std::uint8_t> labels,
                                 double lambda, int max_iter, double tol, const LogisticModel* warm_start) {
  const Eigen::Index n = xs.rows();
  const Eigen::Index p = xs.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw Error(ErrorCode::LengthMismatch, "labels and design differ in length");
  }
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "logistic penalty must be >= 0");
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  if (y.sum() == 0.0 || y.sum() == static_cast<double>(n)) {
    throw Error(ErrorCode::SingleClass, "logistic regression needs both classes");
  }

  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = xs;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  if (warm_start != nullptr && warm_start->coef.size() == p) {
    theta(0) = warm_start->intercept;
    theta.tail(p) = warm_start->coef;
  }

  auto objective = [&](const Eigen::VectorXd& t) {
    const Eigen::VectorXd eta = design * t;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ll += y(i) * eta(i) - softplus(eta(i));
    return ll - 0.5 * lambda * t.tail(p).squaredNorm();
  };
  auto gradient = [&](const Eigen::VectorXd& t, Eigen::VectorXd& prob) {
    const Eigen::VectorXd eta = design * t;
    prob = eta.unaryExpr([](double v) { return sigmoid(v); });
    Eigen::VectorXd g = design.transpose() * (y - prob);
    g.tail(p) -= lambda * t.tail(p);
    return g;
  };

  LogisticModel out;
  out.lambda = lambda;
  double obj = objective(theta);
  Eigen::VectorXd prob;
  Eigen::VectorXd grad = gradient(theta, prob);
  int it = 0;
  for (; it < max_iter; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() <= tol) {
      out.converged = true;
      break;
    }
    const Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design;
    hess.diagonal().tail(p).array() += lambda;
    hess.diagonal().array() += 1e-10 * std::max(1.0, hess.diagonal().maxCoeff());
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-10) {
      const Eigen::VectorXd cand = theta + t * step;
      const double cand_obj = objective(cand);
      if (std::isfinite(cand_obj) && cand_obj >= obj - 1e-12 * std::abs(obj)) {
        theta = cand;
        obj = cand_obj;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    grad = gradient(theta, prob);
    if (!accepted) break;
  }
  if (!out.converged && grad.lpNorm<Eigen::Infinity>() <= tol) out.converged = true;
  out.iterations = it;
  out.intercept = theta(0);
  out.coef = theta.tail(p);
  out.gradient_norm = grad.lpNorm<Eigen::Infinity>();
  return out;
}

LogisticModel fit_logistic_cv(const Eigen::MatrixXd& xs, std::span<const std::uint8_t> labels,
                              std::span<const double> lambda_grid, int cv_folds, std::uint64_t seed) {
  if (lambda_grid.empty()) throw Error(ErrorCode::InvalidArgument, "lambda grid is empty");
  std::vector<double> grid(lambda_grid.begin(), lambda_grid.end());
  std::sort(grid.begin(), grid.end());
  if (grid.size() == 1) return fit_logistic_ridge(xs, labels, grid.front());

  const int k = std::min<int>(std::max(cv_folds, 2), static_cast<int>(xs.rows()));
  const FoldAssignment folds = kfold_split(xs.rows(), k, seed);
  std::vector<double> loss(grid.size(), 0.0);
  for (int f = 0; f < k; ++f) {
    const auto train = folds.rows_outside(f);
    const auto test = folds.rows_in(f);
    std::vector<std::uint8_t> train_labels;
    train_labels.reserve(train.size());
    for (auto i : train) train_labels.push_back(labels[static_cast<std::size_t>(i)]);
    const Eigen::MatrixXd x_train = take_rows(xs, train);
    const Eigen::MatrixXd x_test = take_rows(xs, test);
    LogisticModel warm;
    bool have_warm = false;
    // Heaviest penalty first so each fit warm-starts from a nearby optimum.
    for (std::size_t g = grid.size(); g-- > 0;) {
      LogisticModel m;
      try {
        m = fit_logistic_ridge(x_train, train_labels, grid[g], 100, 1e-8, have_warm ? &warm : nullptr);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingleClass) throw;
        break;  // fold carries no information about the penalty
      }
      warm = m;
      have_warm = true;
      for (std::size_t t = 0; t < test.size(); ++t) {
        const double pr = std::clamp(m.predict(Eigen::VectorXd(x_test.row(static_cast<Eigen::Index>(t)))), 1e-15, 1.0 - 1e-15);
        loss[g] -= labels[static_cast<std::size_t>(test[t])] ? std::log(pr) : std::log1p(-pr);
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (loss[g] < loss[best]) best = g;
  }
  LogisticModel model = fit_logistic_ridge(xs, labels, grid[best]);
  model.cv_loss = loss[best] / static_cast<double>(xs.rows());
  return model;
}

// ---------------------------------------------------------------------------

double VarianceModel::raw(Span x) const {
  return mode == VarianceMode::Homoskedastic ? constant : regression.predict(x);
}

double VarianceModel::predict(Span x, bool* floored) const {
  const double v = raw(x);
  const bool binds = !(v >= floor);
  if (floored != nullptr) *floored = binds;
  return binds ? floor : v;
}

VarianceModel fit_conditional_variance(const Eigen::MatrixXd& xs, const Eigen::VectorXd& residuals_sq,
                                       VarianceMode mode, const RidgeSettings& settings,
                                       double variance_floor, std::uint64_t seed) {
  if (residuals_sq.size() == 0) throw Error(ErrorCode::EmptyInput, "no residuals to fit a variance on");
  if (!residuals_sq.allFinite() || residuals_sq.minCoeff() < 0.0) {
    throw Error(ErrorCode::NonFiniteTarget, "squared residuals must be finite and nonnegative");
  }
  VarianceModel model;
  model.mode = mode;
  model.floor = variance_floor;
  if (mode == VarianceMode::Homoskedastic) {
    model.constant = residuals_sq.mean();
  } else {
    const auto grid = settings.lambda_grid.empty() ? default_lambda_grid() : settings.lambda_grid;
    model.regression = fit_ridge_cv(xs, residuals_sq, grid, settings.cv_folds, seed);
  }
  return model;
}

std::vector<double> default_logistic_grid() { return log_grid(1e-4, 1e4, 9); }

}  // namespace csfusion
