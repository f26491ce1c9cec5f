#include "csfusion/numerics.hpp"

#include "csfusion/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

namespace csfusion {

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

SymPsdMatrix::SymPsdMatrix(const Eigen::MatrixXd& entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "SymPsdMatrix needs a nonempty square matrix");
  }
  if (!entries.allFinite()) {
    throw Error(ErrorCode::NonFiniteEvaluation, "SymPsdMatrix entries must be finite");
  }
  const double scale = max_abs(entries);
  const double sym_tol = 1e-12 * std::max(1.0, scale);
  if ((entries - entries.transpose()).cwiseAbs().maxCoeff() > sym_tol) {
    throw Error(ErrorCode::NonSymmetric, "matrix is not symmetric within tolerance");
  }
  m_ = 0.5 * (entries + entries.transpose());
  if (m_.rows() == 1) {
    if (m_(0, 0) < -1e-6 * scale) {
      throw Error(ErrorCode::IndefiniteInput, "negative variance");
    }
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-6 * scale) {
    throw Error(ErrorCode::IndefiniteInput, "eigenvalue below -1e-6 * max|a|");
  }
}

SymPsdMatrix SymPsdMatrix::scalar(double value) {
  return SymPsdMatrix(Eigen::MatrixXd::Constant(1, 1, value));
}

SymPsdMatrix SymPsdMatrix::identity(Eigen::Index dim) {
  return SymPsdMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

SymPsdMatrix SymPsdMatrix::diagonal(const Eigen::VectorXd& diag) {
  return SymPsdMatrix(Eigen::MatrixXd(diag.asDiagonal()));
}

double SymPsdMatrix::max_abs_entry() const { return max_abs(m_); }

SymPsdMatrix sym_psd_sqrt(const SymPsdMatrix& a) {
  if (a.dim() == 1) {
    return SymPsdMatrix(Eigen::MatrixXd::Constant(1, 1, std::sqrt(std::max(0.0, a(0, 0)))),
                        SymPsdMatrix::Unchecked{});
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.matrix());
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd s = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  s = 0.5 * (s + s.transpose()).eval();
  return SymPsdMatrix(std::move(s), SymPsdMatrix::Unchecked{});
}

double cs_variance_term(double vy, double vz) {
  return std::sqrt(std::max(0.0, vy) * std::max(0.0, vz));
}

double cs_variance_term(const SymPsdMatrix& vy, const SymPsdMatrix& vz) {
  if (vy.dim() != vz.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "cs_variance_term: vy and vz differ in dimension");
  }
  if (vy.dim() == 1) return cs_variance_term(vy(0, 0), vz(0, 0));
  const Eigen::MatrixXd root_z = sym_psd_sqrt(vz).matrix();
  Eigen::MatrixXd inner = root_z * vy.matrix() * root_z;
  inner = 0.5 * (inner + inner.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

Eigen::VectorXd central_diff_gradient(const std::function<double(const Eigen::VectorXd&)>& fn,
                                      const Eigen::VectorXd& point, double rel_step) {
  if (!(rel_step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "relStep must be positive");
  }
  Eigen::VectorXd grad(point.size());
  Eigen::VectorXd probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(point(i)));
    probe(i) = point(i) + h;
    const double up = fn(probe);
    probe(i) = point(i) - h;
    const double down = fn(probe);
    probe(i) = point(i);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorCode::NonFiniteEvaluation,
                  "function not finite near coordinate " + std::to_string(i));
    }
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "normal_quantile: p outside (0, 1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

}  // namespace csfusion
