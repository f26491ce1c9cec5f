#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace csfusion {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Span = std::span<const double>;

/// Observed data of a fusion problem: covariates for every row, Y only where r = 1,
/// Z only where r = 0.
///
/// Absent entries are stored as NaN and never exposed: y(i) is valid only for
/// r = 1 rows and z(i) only for r = 0 rows.
class FusedDataset {
 public:
  /// `y` is n x p_y and `z` is n x p_z. Rows of the unobserved side must be NaN.
  FusedDataset(RowMatrix x, std::vector<std::uint8_t> r, RowMatrix y, RowMatrix z);

  /// Scalar y and z; values on the unobserved side are ignored.
  static FusedDataset from_scalar(RowMatrix x, std::vector<std::uint8_t> r,
                                  const Eigen::VectorXd& y, const Eigen::VectorXd& z);

  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index px() const { return x_.cols(); }
  Eigen::Index py() const { return y_.cols(); }
  Eigen::Index pz() const { return z_.cols(); }

  bool observes_y(Eigen::Index i) const { return r_[static_cast<std::size_t>(i)] != 0; }
  int r(Eigen::Index i) const { return r_[static_cast<std::size_t>(i)]; }
  const std::vector<std::uint8_t>& r() const { return r_; }

  Span x(Eigen::Index i) const { return {x_.data() + i * x_.cols(), static_cast<std::size_t>(x_.cols())}; }
  Span y(Eigen::Index i) const;
  Span z(Eigen::Index i) const;

  const RowMatrix& covariates() const { return x_; }

  Eigen::Index count_y() const;
  Eigen::Index count_z() const { return n() - count_y(); }

 private:
  RowMatrix x_;
  std::vector<std::uint8_t> r_;
  RowMatrix y_;
  RowMatrix z_;
};

}  // namespace csfusion
