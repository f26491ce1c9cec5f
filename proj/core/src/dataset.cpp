#include "csfusion/dataset.hpp"

#include "csfusion/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace csfusion {

FusedDataset::FusedDataset(RowMatrix x, std::vector<std::uint8_t> r, RowMatrix y, RowMatrix z)
    : x_(std::move(x)), r_(std::move(r)), y_(std::move(y)), z_(std::move(z)) {
  const auto n = x_.rows();
  if (static_cast<Eigen::Index>(r_.size()) != n || y_.rows() != n || z_.rows() != n) {
    throw Error(ErrorCode::LengthMismatch, "x, r, y, z must have the same number of rows");
  }
  if (y_.cols() == 0 || z_.cols() == 0) {
    throw Error(ErrorCode::InvalidDataset, "y and z need at least one column");
  }
  if (!x_.allFinite()) {
    throw Error(ErrorCode::InvalidDataset, "covariates must be finite");
  }
  bool any_y = false;
  bool any_z = false;
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ri = r_[static_cast<std::size_t>(i)];
    if (ri > 1) {
      throw Error(ErrorCode::InvalidDataset, "r must be 0 or 1 (row " + std::to_string(i) + ")");
    }
    if (ri == 1) {
      any_y = true;
      if (!y_.row(i).allFinite()) {
        throw Error(ErrorCode::InvalidDataset, "row " + std::to_string(i) + " has r=1 but y is not finite");
      }
      z_.row(i).setConstant(kNaN);
    } else {
      any_z = true;
      if (!z_.row(i).allFinite()) {
        throw Error(ErrorCode::InvalidDataset, "row " + std::to_string(i) + " has r=0 but z is not finite");
      }
      y_.row(i).setConstant(kNaN);
    }
  }
  if (!any_y || !any_z) {
    throw Error(ErrorCode::EmptyArm, "dataset needs at least one r=1 row and one r=0 row");
  }
}

FusedDataset FusedDataset::from_scalar(RowMatrix x, std::vector<std::uint8_t> r,
                                       const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
  RowMatrix ym = y;
  RowMatrix zm = z;
  return FusedDataset(std::move(x), std::move(r), std::move(ym), std::move(zm));
}

Span FusedDataset::y(Eigen::Index i) const {
  if (!observes_y(i)) throw Error(ErrorCode::InvalidArgument, "y requested on an r=0 row");
  return {y_.data() + i * y_.cols(), static_cast<std::size_t>(y_.cols())};
}

Span FusedDataset::z(Eigen::Index i) const {
  if (observes_y(i)) throw Error(ErrorCode::InvalidArgument, "z requested on an r=1 row");
  return {z_.data() + i * z_.cols(), static_cast<std::size_t>(z_.cols())};
}

Eigen::Index FusedDataset::count_y() const {
  Eigen::Index c = 0;
  for (auto v : r_) c += v;
  return c;
}

}  // namespace csfusion
