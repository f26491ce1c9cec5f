#pragma once

#include "csfusion/dataset.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>

namespace csfusion {

/// h(y, z, x) = f(y, x)^T g(z, x) with f, g valued in R^dim.
struct DecomposableEstimand {
  using Component = std::function<void(Span v, Span x, std::span<double> out)>;

  std::string name;
  int dim = 1;
  Component f;
  Component g;

  bool scalar() const { return dim == 1; }

  double f_scalar(Span y, Span x) const;
  double g_scalar(Span z, Span x) const;
  Eigen::VectorXd f_vector(Span y, Span x) const;
  Eigen::VectorXd g_vector(Span z, Span x) const;

  /// Scalar estimand from plain callables.
  static DecomposableEstimand scalar_pair(std::string name, std::function<double(Span, Span)> f,
                                          std::function<double(Span, Span)> g);

  /// E[YZ]: f = y, g = z.
  static DecomposableEstimand product();
  /// E[Y/Z]: f = y, g = 1/z. Rejects |1/z| > 1e12.
  static DecomposableEstimand ratio();
  /// P(Y <= c_y, Z <= c_z): f = 1{y <= c_y}, g = 1{z <= c_z}.
  static DecomposableEstimand threshold_product(double c_y, double c_z);
  /// E[Y (a + B x)^T Z]: f = y, g = (a + B x)^T z. B may be empty (rows = dim z).
  static DecomposableEstimand linear_contrast(Eigen::VectorXd a, Eigen::MatrixXd b = {});
};

}  // namespace csfusion
