#pragma once

#include <Eigen/Dense>

#include <functional>

namespace csfusion {

/// Lower/upper pair shared by bound computations across modules.
struct Bounds {
  double lower = 0.0;
  double upper = 0.0;

  double width() const { return upper - lower; }
};

/// Dense symmetric positive semi-definite matrix.
///
/// Construction checks symmetry (|a_ij - a_ji| <= 1e-12 max(1, max|a|)) and rejects
/// eigenvalues below -1e-6 max|a| as corrupted input. Roundoff-scale negative
/// eigenvalues are accepted and clamped by the operations below.
class SymPsdMatrix {
 public:
  explicit SymPsdMatrix(const Eigen::MatrixXd& entries);

  static SymPsdMatrix scalar(double value);
  static SymPsdMatrix identity(Eigen::Index dim);
  static SymPsdMatrix diagonal(const Eigen::VectorXd& diag);

  Eigen::Index dim() const { return m_.rows(); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  double max_abs_entry() const;

 private:
  struct Unchecked {};
  SymPsdMatrix(Eigen::MatrixXd entries, Unchecked) : m_(std::move(entries)) {}

  Eigen::MatrixXd m_;

  friend SymPsdMatrix sym_psd_sqrt(const SymPsdMatrix& a);
};

/// Symmetric square root via eigendecomposition, negative eigenvalues clamped to 0.
SymPsdMatrix sym_psd_sqrt(const SymPsdMatrix& a);

/// tr( sqrt( sqrt(vz) vy sqrt(vz) ) ), the variance contribution of the Cauchy-Schwarz
/// bound for vector-valued f, g. One-dimensional inputs take the scalar path.
double cs_variance_term(const SymPsdMatrix& vy, const SymPsdMatrix& vz);
double cs_variance_term(double vy, double vz);

/// Central differences with step h_i = rel_step * max(1, |x_i|).
Eigen::VectorXd central_diff_gradient(const std::function<double(const Eigen::VectorXd&)>& fn,
                                      const Eigen::VectorXd& point, double rel_step = 1e-6);

/// Standard normal quantile; p must lie in (0, 1).
double normal_quantile(double p);

}  // namespace csfusion
