#include "csfusion/estimator.hpp"

#include "csfusion/error.hpp"
#include "csfusion/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

namespace csfusion {

namespace {

// sqrt(a / b) with the conventions 0/0 -> 0 and a/0 -> inf.
double root_ratio(double a, double b) {
  if (b > 0.0) return std::sqrt(std::max(0.0, a) / b);
  return a > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

// Shared body of the two influence functions; sign = +1 upper, -1 lower.
double eif(const RowObservation& obs, const RowMoments& m, double theta_plug, double sign) {
  const double sd_term = std::sqrt(std::max(0.0, m.v_y) * std::max(0.0, m.v_z));
  const double x_part = m.m_y * m.m_z + sign * sd_term - theta_plug;
  if (obs.r == 1) {
    const double dy = obs.f - m.m_y;
    const double phi_y = dy * m.m_z + sign * 0.5 * (dy * dy - m.v_y) * root_ratio(m.v_z, m.v_y);
    return phi_y / m.e + x_part;
  }
  const double dz = obs.g - m.m_z;
  const double phi_z = dz * m.m_y + sign * 0.5 * (dz * dz - m.v_z) * root_ratio(m.v_y, m.v_z);
  return phi_z / (1.0 - m.e) + x_part;
}

RowMoments row_moments(const MomentEstimates& m, Eigen::Index i) {
  return {m.m_y(i), m.m_z(i), m.v_y(i), m.v_z(i), m.e(i)};
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1]");
}

void finish_interval(IntervalResult& out, double alpha) {
  const double q = two_sided_quantile(alpha);
  const double nn = static_cast<double>(out.n);
  out.alpha = alpha;
  out.lcb = out.theta_l - q * std::sqrt(out.v_l / nn);
  out.ucb = out.theta_u + q * std::sqrt(out.v_u / nn);
  if (out.theta_l > out.theta_u) {
    out.diagnostics.crossed_bounds = true;
    out.diagnostics.warnings.emplace_back("CrossedBounds");
  }
}

Eigen::MatrixXd gather_x(const FusedDataset& data, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), data.px());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = data.covariates().row(rows[i]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Bounds plugin_bounds(const MomentEstimates& moments, std::span<const Eigen::Index> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "plugin_bounds needs at least one row");
  double mean_part = 0.0;
  double sd_part = 0.0;
  for (auto i : rows) {
    mean_part += moments.m_y(i) * moments.m_z(i);
    sd_part += cs_variance_term(moments.v_y(i), moments.v_z(i));
  }
  const double n = static_cast<double>(rows.size());
  return {(mean_part - sd_part) / n, (mean_part + sd_part) / n};
}

Bounds plugin_bounds(std::span<const MatrixMoments> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "plugin_bounds needs at least one row");
  double mean_part = 0.0;
  double sd_part = 0.0;
  for (const auto& r : rows) {
    if (r.m_y.size() != r.m_z.size() || r.m_y.size() != r.v_y.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "matrix moments disagree in dimension");
    }
    mean_part += r.m_y.dot(r.m_z);
    sd_part += cs_variance_term(r.v_y, r.v_z);
  }
  const double n = static_cast<double>(rows.size());
  return {(mean_part - sd_part) / n, (mean_part + sd_part) / n};
}

double eif_upper(const RowObservation& obs, const RowMoments& m, double theta_u_plug) {
  return eif(obs, m, theta_u_plug, 1.0);
}

double eif_lower(const RowObservation& obs, const RowMoments& m, double theta_l_plug) {
  return eif(obs, m, theta_l_plug, -1.0);
}

double two_sided_quantile(double alpha) {
  check_alpha(alpha);
  if (alpha == 1.0) return 0.0;
  return normal_quantile(1.0 - alpha / 2.0);
}

// ---------------------------------------------------------------------------

IntervalResult infer(const FusedDataset& data, const DecomposableEstimand& estimand, const InferenceConfig& config) {
  check_alpha(config.alpha);
  if (!estimand.scalar()) {
    throw Error(ErrorCode::InvalidArgument, "inference is implemented for scalar f and g only");
  }
  const Eigen::Index n = data.n();
  const FoldAssignment folds = kfold_split(n, config.k_folds, derive_seed(config.seed, 1));
  NuisanceConfig nc = config.nuisance;
  nc.seed = derive_seed(config.seed, 2, config.nuisance.seed);
  const auto [fit, moments] = estimate_nuisances(data, estimand, folds, nc);

  IntervalResult out;
  out.n = n;
  out.influence_l.resize(n);
  out.influence_u.resize(n);
  double sum_l = 0.0;
  double sum_u = 0.0;
  for (int k = 0; k < folds.k_folds; ++k) {
    const auto rows = folds.rows_in(k);
    const Bounds plug = plugin_bounds(moments, rows);
    out.diagnostics.fold_plugin_lower.push_back(plug.lower);
    out.diagnostics.fold_plugin_upper.push_back(plug.upper);
    double phi_l_sum = 0.0;
    double phi_u_sum = 0.0;
    for (auto i : rows) {
      RowObservation obs;
      obs.r = data.r(i);
      if (obs.r == 1) {
        obs.f = estimand.f_scalar(data.y(i), data.x(i));
      } else {
        obs.g = estimand.g_scalar(data.z(i), data.x(i));
      }
      const RowMoments rm = row_moments(moments, i);
      out.influence_l(i) = eif_lower(obs, rm, plug.lower);
      out.influence_u(i) = eif_upper(obs, rm, plug.upper);
      phi_l_sum += out.influence_l(i);
      phi_u_sum += out.influence_u(i);
    }
    const double nk = static_cast<double>(rows.size());
    sum_l += plug.lower + phi_l_sum / nk;
    sum_u += plug.upper + phi_u_sum / nk;
  }
  const double k = static_cast<double>(folds.k_folds);
  out.theta_l = sum_l / k;
  out.theta_u = sum_u / k;
  out.v_l = out.influence_l.squaredNorm() / static_cast<double>(n);
  out.v_u = out.influence_u.squaredNorm() / static_cast<double>(n);
  if (!std::isfinite(out.theta_l) || !std::isfinite(out.theta_u) || !std::isfinite(out.v_l) ||
      !std::isfinite(out.v_u)) {
    throw Error(ErrorCode::NonFiniteEvaluation, "debiased estimates are not finite");
  }

  out.diagnostics.positivity = positivity_report(moments);
  if (out.diagnostics.positivity->floor_warning) {
    out.diagnostics.degenerate_variance = true;
    out.diagnostics.warnings.emplace_back("DegenerateVariance");
  }
  if (out.diagnostics.positivity->clip_warning) out.diagnostics.warnings.emplace_back("PropensityClipping");
  finish_interval(out, config.alpha);
  return out;
}

// ---------------------------------------------------------------------------

IdentifiableTarget IdentifiableTarget::covariate(std::string name, std::function<double(Span)> weight) {
  return {std::move(name), Arm::Covariate, std::move(weight), {}};
}

IdentifiableTarget IdentifiableTarget::y_arm(std::string name, std::function<double(Span)> weight,
                                             std::function<double(Span, Span)> response) {
  return {std::move(name), Arm::Y, std::move(weight), std::move(response)};
}

IdentifiableTarget IdentifiableTarget::z_arm(std::string name, std::function<double(Span)> weight,
                                             std::function<double(Span, Span)> response) {
  return {std::move(name), Arm::Z, std::move(weight), std::move(response)};
}

IntervalResult infer_identifiable(const FusedDataset& data, const IdentifiableTarget& target,
                                  const InferenceConfig& config) {
  check_alpha(config.alpha);
  if (!target.weight) throw Error(ErrorCode::InvalidArgument, "identifiable target needs a weight function");
  const Eigen::Index n = data.n();
  IntervalResult out;
  out.n = n;
  Eigen::VectorXd psi(n);

  if (target.arm == IdentifiableTarget::Arm::Covariate) {
    for (Eigen::Index i = 0; i < n; ++i) psi(i) = target.weight(data.x(i));
    const double mean = psi.mean();
    psi.array() -= mean;
    out.theta_l = out.theta_u = mean;
  } else {
    if (!target.response) throw Error(ErrorCode::InvalidArgument, "arm target needs a response function");
    const bool y_arm = target.arm == IdentifiableTarget::Arm::Y;
    const NuisanceConfig& nc = config.nuisance;
    const MomentLearner* learner = y_arm ? nc.y_learner.get() : nc.z_learner.get();
    if (learner == nullptr || !nc.propensity) throw Error(ErrorCode::InvalidArgument, "nuisance config is missing a learner");
    double e_lo = 1e-9;
    double e_hi = 1.0 - 1e-9;
    if (nc.propensity_clip) std::tie(e_lo, e_hi) = *nc.propensity_clip;

    const FoldAssignment folds = kfold_split(n, config.k_folds, derive_seed(config.seed, 1));
    const std::uint64_t nseed = derive_seed(config.seed, 2, nc.seed);
    double total = 0.0;
    for (int k = 0; k < folds.k_folds; ++k) {
      const auto train = folds.rows_outside(k);
      std::vector<Eigen::Index> arm_rows;
      std::vector<std::uint8_t> labels;
      for (auto i : train) {
        if (data.observes_y(i) == y_arm) arm_rows.push_back(i);
        labels.push_back(static_cast<std::uint8_t>(data.r(i)));
      }
      if (arm_rows.empty() || arm_rows.size() == train.size()) {
        throw Error(ErrorCode::EmptyArm, "training set of fold " + std::to_string(k) + " lacks an arm");
      }
      Eigen::VectorXd t(static_cast<Eigen::Index>(arm_rows.size()));
      for (std::size_t j = 0; j < arm_rows.size(); ++j) {
        const auto i = arm_rows[j];
        t(static_cast<Eigen::Index>(j)) = target.response(y_arm ? data.y(i) : data.z(i), data.x(i));
      }
      if (!t.allFinite()) throw Error(ErrorCode::NonFiniteTarget, "target response is not finite");
      const auto model = learner->fit(gather_x(data, arm_rows), t, derive_seed(nseed, 100 + k, y_arm ? 1 : 2));
      const auto prop = nc.propensity->fit(gather_x(data, train), labels, derive_seed(nseed, 100 + k, 3));

      const auto rows = folds.rows_in(k);
      Eigen::VectorXd outcome(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t j = 0; j < rows.size(); ++j) {
        outcome(static_cast<Eigen::Index>(j)) = target.weight(data.x(rows[j])) * model->mean(data.x(rows[j]));
      }
      const double plug = outcome.mean();
      double phi_sum = 0.0;
      for (std::size_t j = 0; j < rows.size(); ++j) {
        const auto i = rows[j];
        const double mhat = outcome(static_cast<Eigen::Index>(j));
        double val = mhat - plug;
        if (data.observes_y(i) == y_arm) {
          const double e = std::clamp(prop->predict(data.x(i)), e_lo, e_hi);
          const double w = y_arm ? 1.0 / e : 1.0 / (1.0 - e);
          const double resp = target.weight(data.x(i)) * target.response(y_arm ? data.y(i) : data.z(i), data.x(i));
          val += w * (resp - mhat);
        }
        psi(i) = val;
        phi_sum += val;
      }
      total += plug + phi_sum / static_cast<double>(rows.size());
    }
    out.theta_l = out.theta_u = total / static_cast<double>(folds.k_folds);
  }
  out.v_l = out.v_u = psi.squaredNorm() / static_cast<double>(n);
  out.influence_l = psi;
  out.influence_u = psi;
  if (!std::isfinite(out.theta_l) || !std::isfinite(out.v_l)) {
    throw Error(ErrorCode::NonFiniteEvaluation, "identifiable estimate is not finite");
  }
  finish_interval(out, config.alpha);
  return out;
}

// ---------------------------------------------------------------------------

SymPsdMatrix joint_influence_covariance(std::span<const Eigen::VectorXd> components) {
  if (components.empty()) throw Error(ErrorCode::EmptyInput, "no influence components");
  const Eigen::Index n = components.front().size();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "influence vectors are empty");
  Eigen::MatrixXd psi(n, static_cast<Eigen::Index>(components.size()));
  for (std::size_t c = 0; c < components.size(); ++c) {
    if (components[c].size() != n) throw Error(ErrorCode::LengthMismatch, "influence vectors differ in length");
    psi.col(static_cast<Eigen::Index>(c)) = components[c];
  }
  Eigen::MatrixXd cov = psi.transpose() * psi / static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose()).eval();
  return SymPsdMatrix(cov);
}

Eigen::VectorXd ComposedTarget::estimates() const {
  Eigen::VectorXd est(static_cast<Eigen::Index>(components.size()));
  for (std::size_t c = 0; c < components.size(); ++c) est(static_cast<Eigen::Index>(c)) = components[c].estimate;
  return est;
}

IntervalResult compose_delta(const ComposedTarget& target, double alpha) {
  check_alpha(alpha);
  if (target.components.empty()) throw Error(ErrorCode::EmptyInput, "composed target has no components");
  if (!target.s_lower || !target.s_upper) throw Error(ErrorCode::InvalidArgument, "composed target needs s_L and s_U");
  std::vector<Eigen::VectorXd> infl;
  infl.reserve(target.components.size());
  for (const auto& c : target.components) infl.push_back(c.influence);
  const SymPsdMatrix cov = joint_influence_covariance(infl);
  const Eigen::VectorXd est = target.estimates();

  Eigen::VectorXd grad_l;
  Eigen::VectorXd grad_u;
  if (target.mode == GradientMode::Analytic) {
    if (!target.grad_lower || !target.grad_upper) {
      throw Error(ErrorCode::InvalidArgument, "analytic mode needs gradient functions");
    }
    grad_l = target.grad_lower(est);
    grad_u = target.grad_upper(est);
  } else {
    grad_l = central_diff_gradient(target.s_lower, est, target.rel_step);
    grad_u = central_diff_gradient(target.s_upper, est, target.rel_step);
  }
  if (grad_l.size() != est.size() || grad_u.size() != est.size()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient length differs from component count");
  }

  IntervalResult out;
  out.n = infl.front().size();
  out.theta_l = target.s_lower(est);
  out.theta_u = target.s_upper(est);
  out.v_l = std::max(0.0, grad_l.dot(cov.matrix() * grad_l));
  out.v_u = std::max(0.0, grad_u.dot(cov.matrix() * grad_u));
  Eigen::MatrixXd psi(out.n, est.size());
  for (Eigen::Index c = 0; c < est.size(); ++c) psi.col(c) = infl[static_cast<std::size_t>(c)];
  out.influence_l = psi * grad_l;
  out.influence_u = psi * grad_u;
  finish_interval(out, alpha);
  return out;
}

// ---------------------------------------------------------------------------
// OLS coefficient of Z in the regression of Y on X~ = (1, X, Z)

namespace {

struct OlsLayout {
  Eigen::Index dim = 0;  // size of X~
  Eigen::Index tri = 0;  // number of upper-triangle entries
  bool intercept = true;

  Eigen::Index xy_offset() const { return tri; }
  Eigen::Index lower_index() const { return tri + dim - 1; }
  Eigen::Index upper_index() const { return tri + dim; }
  Eigen::Index size() const { return tri + dim + 1; }

  Eigen::MatrixXd gram(const Eigen::VectorXd& est) const {
    Eigen::MatrixXd a(dim, dim);
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = i; j < dim; ++j) a(i, j) = a(j, i) = est(c++);
    }
    return a;
  }
};

OlsLayout layout_for(Eigen::Index px, bool intercept) {
  OlsLayout l;
  l.intercept = intercept;
  l.dim = (intercept ? 1 : 0) + px + 1;
  l.tri = l.dim * (l.dim + 1) / 2;
  return l;
}

Eigen::VectorXd solve_last(const Eigen::MatrixXd& a) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible() || lu.rcond() < 1e-13) {
    throw Error(ErrorCode::SingularComposition, "E[X~ X~^T] estimate is not invertible");
  }
  Eigen::VectorXd e = Eigen::VectorXd::Zero(a.rows());
  e(a.rows() - 1) = 1.0;
  return lu.solve(e);
}

struct OlsPieces {
  Eigen::VectorXd u;  // A^{-1} e_last
  Eigen::VectorXd w;  // (theta_XY, L)
  double spread = 0.0;
  double base = 0.0;  // u^T w
};

OlsPieces ols_pieces(const OlsLayout& l, const Eigen::VectorXd& est) {
  OlsPieces p;
  p.u = solve_last(l.gram(est));
  p.w.resize(l.dim);
  p.w.head(l.dim - 1) = est.segment(l.xy_offset(), l.dim - 1);
  p.w(l.dim - 1) = est(l.lower_index());
  p.spread = est(l.upper_index()) - est(l.lower_index());
  p.base = p.u.dot(p.w);
  return p;
}

double relu(double v) { return v > 0.0 ? v : 0.0; }

// Gradient of s = u^T w + c * phi(u_last) * spread, phi = relu(+-u_last).
Eigen::VectorXd ols_gradient(const OlsLayout& l, const Eigen::VectorXd& est, bool upper) {
  const OlsPieces p = ols_pieces(l, est);
  const Eigen::VectorXd b = Eigen::FullPivLU<Eigen::MatrixXd>(l.gram(est)).solve(p.w);
  const double ud = p.u(l.dim - 1);
  // d s / d u_last through the ReLU term; the one-sided derivative at 0 is 0.
  const double relu_slope = upper ? (ud > 0.0 ? 1.0 : 0.0) : (ud < 0.0 ? 1.0 : 0.0);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(l.size());
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < l.dim; ++i) {
    for (Eigen::Index j = i; j < l.dim; ++j) {
      double d_base = -(p.u(i) * b(j));
      double d_ud = -(p.u(i) * p.u(j));
      if (i != j) {
        d_base -= p.u(j) * b(i);
        d_ud *= 2.0;
      }
      g(c++) = d_base + relu_slope * p.spread * d_ud;
    }
  }
  g.segment(l.xy_offset(), l.dim - 1) = p.u.head(l.dim - 1);
  if (upper) {
    g(l.lower_index()) = ud - relu(ud);
    g(l.upper_index()) = relu(ud);
  } else {
    g(l.lower_index()) = ud + relu(-ud);
    g(l.upper_index()) = -relu(-ud);
  }
  return g;
}

}  // namespace

Eigen::VectorXd ols_v_row(const Eigen::VectorXd& estimates, Eigen::Index dim) {
  OlsLayout l;
  l.dim = dim;
  l.tri = dim * (dim + 1) / 2;
  if (estimates.size() < l.tri) throw Error(ErrorCode::DimensionMismatch, "estimate vector too short");
  return solve_last(l.gram(estimates));
}

ComposedTarget ols_composed_target(const FusedDataset& data, const OlsConfig& config) {
  if (data.py() != 1 || data.pz() != 1) {
    throw Error(ErrorCode::DimensionMismatch, "OLS coefficient bounds need scalar y and z");
  }
  const OlsLayout l = layout_for(data.px(), config.intercept);
  const Eigen::Index last = l.dim - 1;
  const bool icpt = config.intercept;
  // Feature j of the covariate part of X~.
  auto feature = [icpt](Eigen::Index j) {
    return [icpt, j](Span x) {
      if (icpt) return j == 0 ? 1.0 : x[static_cast<std::size_t>(j - 1)];
      return x[static_cast<std::size_t>(j)];
    };
  };
  auto label = [icpt](Eigen::Index j, Eigen::Index last_idx) -> std::string {
    if (j == last_idx) return "z";
    if (icpt) return j == 0 ? "1" : "x" + std::to_string(j);
    return "x" + std::to_string(j + 1);
  };

  ComposedTarget target;
  auto add = [&](const std::string& name, const IntervalResult& r) {
    target.components.push_back({name, r.theta_l, r.influence_l});
  };
  for (Eigen::Index i = 0; i < l.dim; ++i) {
    for (Eigen::Index j = i; j < l.dim; ++j) {
      const std::string name = "E[" + label(i, last) + "*" + label(j, last) + "]";
      if (j < last) {
        auto fi = feature(i);
        auto fj = feature(j);
        add(name, infer_identifiable(data, IdentifiableTarget::covariate(name, [fi, fj](Span x) { return fi(x) * fj(x); }),
                                     config.inference));
      } else if (i < last) {
        add(name, infer_identifiable(
                      data, IdentifiableTarget::z_arm(name, feature(i), [](Span z, Span) { return z[0]; }),
                      config.inference));
      } else {
        add(name, infer_identifiable(data,
                                     IdentifiableTarget::z_arm(name, [](Span) { return 1.0; },
                                                               [](Span z, Span) { return z[0] * z[0]; }),
                                     config.inference));
      }
    }
  }
  for (Eigen::Index i = 0; i < last; ++i) {
    const std::string name = "E[" + label(i, last) + "*y]";
    add(name, infer_identifiable(data, IdentifiableTarget::y_arm(name, feature(i), [](Span y, Span) { return y[0]; }),
                                 config.inference));
  }
  const IntervalResult yz = infer(data, DecomposableEstimand::product(), config.inference);
  target.components.push_back({"E[yz].lower", yz.theta_l, yz.influence_l});
  target.components.push_back({"E[yz].upper", yz.theta_u, yz.influence_u});

  target.s_lower = [l](const Eigen::VectorXd& est) {
    const OlsPieces p = ols_pieces(l, est);
    return p.base - relu(-p.u(l.dim - 1)) * p.spread;
  };
  target.s_upper = [l](const Eigen::VectorXd& est) {
    const OlsPieces p = ols_pieces(l, est);
    return p.base + relu(p.u(l.dim - 1)) * p.spread;
  };
  target.grad_lower = [l](const Eigen::VectorXd& est) { return ols_gradient(l, est, false); };
  target.grad_upper = [l](const Eigen::VectorXd& est) { return ols_gradient(l, est, true); };
  target.mode = config.mode;
  return target;
}

IntervalResult ols_coefficient_bounds(const FusedDataset& data, const OlsConfig& config) {
  const ComposedTarget target = ols_composed_target(data, config);
  IntervalResult out = compose_delta(target, config.inference.alpha);
  const Eigen::VectorXd u = ols_v_row(target.estimates(), layout_for(data.px(), config.intercept).dim);
  const double scale = u.cwiseAbs().maxCoeff();
  if (std::abs(u(u.size() - 1)) < config.kink_tol_rel * (scale > 0.0 ? scale : 1.0)) {
    out.diagnostics.kink_warning = true;
    out.diagnostics.warnings.emplace_back("KinkWarning");
  }
  return out;
}

}  // namespace csfusion
