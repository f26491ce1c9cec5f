#include "csfusion/estimand.hpp"

#include "csfusion/error.hpp"

#include <array>
#include <cmath>

namespace csfusion {

double DecomposableEstimand::f_scalar(Span y, Span x) const {
  std::array<double, 1> out{};
  f(y, x, out);
  return out[0];
}

double DecomposableEstimand::g_scalar(Span z, Span x) const {
  std::array<double, 1> out{};
  g(z, x, out);
  return out[0];
}

Eigen::VectorXd DecomposableEstimand::f_vector(Span y, Span x) const {
  Eigen::VectorXd out(dim);
  f(y, x, std::span<double>(out.data(), static_cast<std::size_t>(dim)));
  return out;
}

Eigen::VectorXd DecomposableEstimand::g_vector(Span z, Span x) const {
  Eigen::VectorXd out(dim);
  g(z, x, std::span<double>(out.data(), static_cast<std::size_t>(dim)));
  return out;
}

DecomposableEstimand DecomposableEstimand::scalar_pair(std::string name,
                                                       std::function<double(Span, Span)> f,
                                                       std::function<double(Span, Span)> g) {
  DecomposableEstimand e;
  e.name = std::move(name);
  e.dim = 1;
  e.f = [f = std::move(f)](Span v, Span x, std::span<double> out) { out[0] = f(v, x); };
  e.g = [g = std::move(g)](Span v, Span x, std::span<double> out) { out[0] = g(v, x); };
  return e;
}

DecomposableEstimand DecomposableEstimand::product() {
  return scalar_pair(
      "product", [](Span y, Span) { return y[0]; }, [](Span z, Span) { return z[0]; });
}

DecomposableEstimand DecomposableEstimand::ratio() {
  return scalar_pair(
      "ratio", [](Span y, Span) { return y[0]; },
      [](Span z, Span) {
        const double inv = 1.0 / z[0];
        if (!std::isfinite(inv) || std::abs(inv) > 1e12) {
          throw Error(ErrorCode::SupportViolation, "ratio estimand: |1/z| exceeds 1e12");
        }
        return inv;
      });
}

DecomposableEstimand DecomposableEstimand::threshold_product(double c_y, double c_z) {
  return scalar_pair(
      "threshold_product", [c_y](Span y, Span) { return y[0] <= c_y ? 1.0 : 0.0; },
      [c_z](Span z, Span) { return z[0] <= c_z ? 1.0 : 0.0; });
}

DecomposableEstimand DecomposableEstimand::linear_contrast(Eigen::VectorXd a, Eigen::MatrixXd b) {
  if (b.size() != 0 && b.rows() != a.size()) {
    throw Error(ErrorCode::DimensionMismatch, "linear_contrast: B must have dim(a) rows");
  }
  return scalar_pair(
      "linear_contrast", [](Span y, Span) { return y[0]; },
      [a = std::move(a), b = std::move(b)](Span z, Span x) {
        if (static_cast<Eigen::Index>(z.size()) != a.size()) {
          throw Error(ErrorCode::DimensionMismatch, "linear_contrast: dim(z) != dim(a)");
        }
        Eigen::VectorXd w = a;
        if (b.size() != 0) {
          if (static_cast<Eigen::Index>(x.size()) != b.cols()) {
            throw Error(ErrorCode::DimensionMismatch, "linear_contrast: B columns != dim(x)");
          }
          w += b * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
        }
        return w.dot(Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size())));
      });
}

}  // namespace csfusion
