#include "csfusion/simharness.hpp"

#include "csfusion/error.hpp"
#include "csfusion/random.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace csfusion {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double logistic(double t) { return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

Eigen::Map<const Eigen::VectorXd> as_vec(Span x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

Eigen::VectorXd unit_sphere(int p, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 11));
  std::normal_distribution<double> nd;
  Eigen::VectorXd b(p);
  for (int i = 0; i < p; ++i) b(i) = nd(rng);
  return b / b.norm();
}

struct LogNormalParams {
  Eigen::VectorXd beta1, beta0, beta3;
  Eigen::MatrixXd sigma_x;
  Eigen::MatrixXd chol;  // lower factor of sigma_x
};

LogNormalParams lognormal_params(const LogNormalRelative& s) {
  LogNormalParams p;
  Rng rng(derive_seed(s.beta_seed, 12));
  std::normal_distribution<double> nd(0.0, 0.5 / std::sqrt(static_cast<double>(s.p_x)));
  auto draw = [&] {
    Eigen::VectorXd b(s.p_x);
    for (int i = 0; i < s.p_x; ++i) b(i) = nd(rng);
    return b;
  };
  p.beta1 = draw();
  p.beta0 = draw();
  p.beta3 = draw();
  p.sigma_x.resize(s.p_x, s.p_x);
  for (int i = 0; i < s.p_x; ++i) {
    for (int j = 0; j < s.p_x; ++j) p.sigma_x(i, j) = std::pow(0.3, std::abs(i - j));
  }
  p.chol = p.sigma_x.llt().matrixL();
  return p;
}

struct ValidationParams {
  Eigen::Matrix2d sigma_z, sigma_e, sigma_x, sigma_x_inv;
  Eigen::Vector2d beta, contrast;
  double var_y = 0.0;
};

ValidationParams validation_params(const ValidationStudy& s) {
  ValidationParams p;
  p.sigma_z << 1.0, s.rho, s.rho, 1.0;
  p.sigma_e << 1.0, s.tau, s.tau, 1.0;
  p.sigma_e *= s.sigma * s.sigma;
  p.sigma_x = p.sigma_z + p.sigma_e;
  p.sigma_x_inv = p.sigma_x.inverse();
  p.beta << s.beta1, s.beta2;
  p.contrast << 1.0, -s.rho;
  p.contrast /= 1.0 - s.rho * s.rho;
  p.var_y = p.beta.dot(p.sigma_z * p.beta) + s.sigma_eps * s.sigma_eps;
  return p;
}

void need(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidSpec, what);
}

RidgeSettings quadratic_ridge() {
  RidgeSettings rs;
  rs.features = FeatureMap::Quadratic;
  return rs;
}

}  // namespace

void validate_spec(const DgpSpec& spec) {
  std::visit(Overloaded{
                 [](const HeavyTailLinear& s) {
                   need(s.p_x >= 1, "p_x must be positive");
                   need(s.sigma_y >= 0.0 && s.sigma_z >= 0.0 && std::isfinite(s.sigma_y) && std::isfinite(s.sigma_z),
                        "noise scales must be nonnegative");
                 },
                 [](const GaussianLinear& s) {
                   need(s.p_x >= 1, "p_x must be positive");
                   need(s.sigma_y >= 0.0 && s.sigma_z >= 0.0 && std::isfinite(s.sigma_y) && std::isfinite(s.sigma_z),
                        "noise scales must be nonnegative");
                 },
                 [](const LogNormalRelative& s) {
                   need(s.p_x >= 1, "p_x must be positive");
                   need(s.sigma > 0.0 && std::isfinite(s.sigma), "sigma must be positive");
                   need(std::abs(s.rho) < 1.0, "rho must lie in (-1, 1)");
                 },
                 [](const ValidationStudy& s) {
                   need(s.sigma > 0.0 && s.sigma_eps > 0.0, "scales must be positive");
                   need(std::abs(s.rho) < 1.0 && std::abs(s.tau) < 1.0, "rho and tau must lie in (-1, 1)");
                   need(std::isfinite(s.beta1) && std::isfinite(s.beta2), "coefficients must be finite");
                 },
                 [](const ConditionallyDeterministic& s) { need(std::isfinite(s.beta_z), "beta_z must be finite"); },
             },
             spec);
}

std::string dgp_name(const DgpSpec& spec) {
  return std::visit(Overloaded{
                        [](const HeavyTailLinear&) { return std::string("heavy_tail_linear"); },
                        [](const GaussianLinear&) { return std::string("gaussian_linear"); },
                        [](const LogNormalRelative&) { return std::string("lognormal_relative"); },
                        [](const ValidationStudy&) { return std::string("validation_study"); },
                        [](const ConditionallyDeterministic&) { return std::string("conditionally_deterministic"); },
                    },
                    spec);
}

SimulatedSample sample_dgp(const DgpSpec& spec, Eigen::Index n, std::uint64_t seed) {
  validate_spec(spec);
  if (n < 10) throw Error(ErrorCode::InvalidSpec, "sample size must be at least 10");
  Rng rng(seed);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution coin(0.5);
  std::vector<std::uint8_t> r(static_cast<std::size_t>(n));
  RowMatrix x, y(n, 1), z;

  auto linear = [&](int p_x, double sy, double sz, std::uint64_t beta_seed, bool heavy) {
    const Eigen::VectorXd b = unit_sphere(p_x, beta_seed);
    const double w_sd = std::pow(15.0, -1.0 / 6.0);
    auto noise = [&] {
      if (!heavy) return nd(rng);
      const double w = w_sd * nd(rng);
      return w * w * w;
    };
    x.resize(n, p_x);
    z.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < p_x; ++j) x(i, j) = nd(rng);
      const double mean = x.row(i).dot(b);
      y(i, 0) = mean + sy * noise();
      z(i, 0) = mean + sz * noise();
      r[static_cast<std::size_t>(i)] = coin(rng) ? 1 : 0;
    }
  };

  std::visit(Overloaded{
                 [&](const HeavyTailLinear& s) { linear(s.p_x, s.sigma_y, s.sigma_z, s.beta_seed, true); },
                 [&](const GaussianLinear& s) { linear(s.p_x, s.sigma_y, s.sigma_z, s.beta_seed, false); },
                 [&](const LogNormalRelative& s) {
                   const LogNormalParams p = lognormal_params(s);
                   const double c = std::sqrt(1.0 - s.rho * s.rho);
                   x.resize(n, s.p_x);
                   z.resize(n, 1);
                   std::uniform_real_distribution<double> unif(0.0, 1.0);
                   Eigen::VectorXd w(s.p_x);
                   for (Eigen::Index i = 0; i < n; ++i) {
                     for (int j = 0; j < s.p_x; ++j) w(j) = nd(rng);
                     const Eigen::VectorXd xi = p.chol * w;
                     x.row(i) = xi.transpose();
                     const double e1 = nd(rng);
                     const double e2 = s.rho * e1 + c * nd(rng);
                     y(i, 0) = std::exp(p.beta1.dot(xi) + s.sigma * e1);
                     z(i, 0) = std::exp(p.beta0.dot(xi) + s.sigma * e2);
                     r[static_cast<std::size_t>(i)] = unif(rng) < logistic(p.beta3.dot(xi)) ? 1 : 0;
                   }
                 },
                 [&](const ValidationStudy& s) {
                   const ValidationParams p = validation_params(s);
                   const Eigen::Matrix2d lz = p.sigma_z.llt().matrixL();
                   const Eigen::Matrix2d le = p.sigma_e.llt().matrixL();
                   x.resize(n, 2);
                   z.resize(n, 2);
                   for (Eigen::Index i = 0; i < n; ++i) {
                     const Eigen::Vector2d zi = lz * Eigen::Vector2d(nd(rng), nd(rng));
                     const Eigen::Vector2d xi = zi + le * Eigen::Vector2d(nd(rng), nd(rng));
                     x.row(i) = xi.transpose();
                     z.row(i) = zi.transpose();
                     y(i, 0) = p.beta.dot(zi) + s.sigma_eps * nd(rng);
                     r[static_cast<std::size_t>(i)] = coin(rng) ? 1 : 0;
                   }
                 },
                 [&](const ConditionallyDeterministic& s) {
                   x.resize(n, 2);
                   z.resize(n, 1);
                   for (Eigen::Index i = 0; i < n; ++i) {
                     x(i, 0) = nd(rng);
                     x(i, 1) = nd(rng);
                     z(i, 0) = x(i, 0) * x(i, 0);
                     y(i, 0) = x(i, 0) + x(i, 1) + s.beta_z * z(i, 0);
                     r[static_cast<std::size_t>(i)] = coin(rng) ? 1 : 0;
                   }
                 },
             },
             spec);

  // Guarantee both arms are present in tiny samples without disturbing the draws above.
  if (std::all_of(r.begin(), r.end(), [](auto v) { return v == 1; })) r.back() = 0;
  if (std::all_of(r.begin(), r.end(), [](auto v) { return v == 0; })) r.back() = 1;
  RowMatrix y_obs = y;
  RowMatrix z_obs = z;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r[static_cast<std::size_t>(i)]) {
      z_obs.row(i).setConstant(nan);
    } else {
      y_obs.row(i).setConstant(nan);
    }
  }
  return {FusedDataset(std::move(x), std::move(r), std::move(y_obs), std::move(z_obs)), std::move(y), std::move(z)};
}

RowMoments true_moments(const DgpSpec& spec, Span x) {
  validate_spec(spec);
  return std::visit(
      Overloaded{
          [&](const HeavyTailLinear& s) {
            const double m = unit_sphere(s.p_x, s.beta_seed).dot(as_vec(x));
            return RowMoments{m, m, s.sigma_y * s.sigma_y, s.sigma_z * s.sigma_z, 0.5};
          },
          [&](const GaussianLinear& s) {
            const double m = unit_sphere(s.p_x, s.beta_seed).dot(as_vec(x));
            return RowMoments{m, m, s.sigma_y * s.sigma_y, s.sigma_z * s.sigma_z, 0.5};
          },
          [&](const LogNormalRelative& s) {
            const LogNormalParams p = lognormal_params(s);
            const double s2 = s.sigma * s.sigma;
            const double ly = p.beta1.dot(as_vec(x));
            const double lz = -p.beta0.dot(as_vec(x));  // log(1/Z) has mean -b0'x
            const double k = std::expm1(s2);
            return RowMoments{std::exp(ly + s2 / 2), std::exp(lz + s2 / 2), std::exp(2 * ly + s2) * k,
                              std::exp(2 * lz + s2) * k, logistic(p.beta3.dot(as_vec(x)))};
          },
          [&](const ValidationStudy& s) {
            const ValidationParams p = validation_params(s);
            const Eigen::Vector2d xv(x[0], x[1]);
            const Eigen::Vector2d e1(1.0, 0.0);
            const Eigen::Vector2d sz_beta = p.sigma_z * p.beta;
            RowMoments m;
            m.m_y = sz_beta.dot(p.sigma_x_inv * xv);
            m.v_y = p.var_y - sz_beta.dot(p.sigma_x_inv * sz_beta);
            m.m_z = e1.dot(p.sigma_x_inv * xv);
            m.v_z = p.contrast.dot(p.sigma_z * p.contrast) - e1.dot(p.sigma_x_inv * e1);
            m.e = 0.5;
            return m;
          },
          [&](const ConditionallyDeterministic& s) {
            const double z = x[0] * x[0];
            return RowMoments{x[0] + x[1] + s.beta_z * z, z, 0.0, 0.0, 0.5};
          },
      },
      spec);
}

DecomposableEstimand default_estimand(const DgpSpec& spec) {
  if (const auto* s = std::get_if<LogNormalRelative>(&spec)) {
    (void)s;
    return DecomposableEstimand::ratio();
  }
  if (const auto* s = std::get_if<ValidationStudy>(&spec)) {
    return DecomposableEstimand::linear_contrast(validation_params(*s).contrast);
  }
  return DecomposableEstimand::product();
}

EstimatorSetup default_setup(const DgpSpec& spec) {
  EstimatorSetup setup{default_estimand(spec), {}};
  auto& nc = setup.inference.nuisance;
  std::visit(Overloaded{
                 [&](const HeavyTailLinear&) { nc.propensity = KnownPropensity::constant(0.5); },
                 [&](const GaussianLinear&) { nc.propensity = KnownPropensity::constant(0.5); },
                 [&](const LogNormalRelative&) {
                   nc.y_learner = std::make_shared<LogNormalMomentLearner>();
                   nc.z_learner = std::make_shared<LogNormalMomentLearner>();
                 },
                 [&](const ValidationStudy&) {},
                 [&](const ConditionallyDeterministic&) {
                   nc.y_learner = std::make_shared<RidgeMomentLearner>(quadratic_ridge());
                   nc.z_learner = std::make_shared<RidgeMomentLearner>(quadratic_ridge());
                   nc.propensity = KnownPropensity::constant(0.5);
                 },
             },
             spec);
  return setup;
}

TrueBounds true_cs_bounds(const DgpSpec& spec) {
  validate_spec(spec);
  return std::visit(
      Overloaded{
          [](const HeavyTailLinear& s) {
            const double w = s.sigma_y * s.sigma_z;
            return TrueBounds{1.0 - w, 1.0 + w, 0.0, true, std::nullopt};
          },
          [](const GaussianLinear& s) {
            const double w = s.sigma_y * s.sigma_z;
            return TrueBounds{1.0 - w, 1.0 + w, 0.0, true, std::nullopt};
          },
          [](const LogNormalRelative& s) {
            const LogNormalParams p = lognormal_params(s);
            const Eigen::VectorXd d = p.beta1 - p.beta0;
            const double q = 0.5 * d.dot(p.sigma_x * d);
            const double s2 = s.sigma * s.sigma;
            // E[m_y m_z] = exp(s2 + q); sqrt(v_y v_z) adds the factor expm1(s2).
            const double centre = std::exp(s2 + q);
            const double spread = centre * std::expm1(s2);
            return TrueBounds{centre - spread, centre + spread, 0.0, true, std::exp(s2 * (1.0 - s.rho) + q)};
          },
          [](const ValidationStudy& s) {
            const ValidationParams p = validation_params(s);
            const Eigen::Vector2d e1(1.0, 0.0);
            const Eigen::Vector2d sz_beta = p.sigma_z * p.beta;
            const double centre = sz_beta.dot(p.sigma_x_inv * e1);
            const double v_y = p.var_y - sz_beta.dot(p.sigma_x_inv * sz_beta);
            const double v_z = p.contrast.dot(p.sigma_z * p.contrast) - e1.dot(p.sigma_x_inv * e1);
            const double spread = cs_variance_term(v_y, v_z);
            return TrueBounds{centre - spread, centre + spread, 0.0, true, s.beta1};
          },
          [](const ConditionallyDeterministic& s) {
            // E[(X1 + X2 + b X1^2) X1^2] = b E[X1^4] = 3 b.
            return TrueBounds{3.0 * s.beta_z, 3.0 * s.beta_z, 0.0, true, std::nullopt};
          },
      },
      spec);
}

TrueBounds mc_cs_bounds(const DgpSpec& spec, std::int64_t draws, std::uint64_t seed) {
  validate_spec(spec);
  if (draws < 2) throw Error(ErrorCode::InvalidArgument, "need at least two draws");
  Rng rng(seed);
  std::normal_distribution<double> nd;
  std::function<void(Eigen::VectorXd&)> draw_x;
  std::function<RowMoments(const Eigen::VectorXd&)> moments;

  if (const auto* s = std::get_if<LogNormalRelative>(&spec)) {
    // Hoist the parameters out of the per-draw moment evaluation.
    const auto p = std::make_shared<LogNormalParams>(lognormal_params(*s));
    const double s2 = s->sigma * s->sigma;
    const double k = std::expm1(s2);
    draw_x = [&rng, &nd, p](Eigen::VectorXd& x) {
      Eigen::VectorXd w(x.size());
      for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = nd(rng);
      x = p->chol * w;
    };
    moments = [p, s2, k](const Eigen::VectorXd& x) {
      const double ly = p->beta1.dot(x);
      const double lz = -p->beta0.dot(x);
      return RowMoments{std::exp(ly + s2 / 2), std::exp(lz + s2 / 2), std::exp(2 * ly + s2) * k,
                        std::exp(2 * lz + s2) * k, 0.5};
    };
  } else {
    moments = [&spec](const Eigen::VectorXd& x) { return true_moments(spec, {x.data(), static_cast<std::size_t>(x.size())}); };
    draw_x = [&rng, &nd, &spec](Eigen::VectorXd& x) {
      // Covariates of the remaining designs are drawn through sample_dgp's law.
      if (std::holds_alternative<ValidationStudy>(spec)) {
        const auto& s = std::get<ValidationStudy>(spec);
        const ValidationParams p = validation_params(s);
        const Eigen::Matrix2d lx = p.sigma_x.llt().matrixL();
        x = lx * Eigen::Vector2d(nd(rng), nd(rng));
        return;
      }
      for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = nd(rng);
    };
  }
  Eigen::Index p_x = 2;
  std::visit(Overloaded{[&](const HeavyTailLinear& s) { p_x = s.p_x; }, [&](const GaussianLinear& s) { p_x = s.p_x; },
                        [&](const LogNormalRelative& s) { p_x = s.p_x; }, [](const auto&) {}},
             spec);

  // Welford accumulators for both endpoints.
  double mean_l = 0.0, mean_u = 0.0, m2_l = 0.0, m2_u = 0.0;
  Eigen::VectorXd x(p_x);
  for (std::int64_t i = 0; i < draws; ++i) {
    draw_x(x);
    const RowMoments m = moments(x);
    const double c = m.m_y * m.m_z;
    const double sp = cs_variance_term(m.v_y, m.v_z);
    const double k = static_cast<double>(i + 1);
    const double dl = (c - sp) - mean_l;
    mean_l += dl / k;
    m2_l += dl * ((c - sp) - mean_l);
    const double du = (c + sp) - mean_u;
    mean_u += du / k;
    m2_u += du * ((c + sp) - mean_u);
  }
  const double nd_draws = static_cast<double>(draws);
  const double se_l = std::sqrt(m2_l / (nd_draws - 1) / nd_draws);
  const double se_u = std::sqrt(m2_u / (nd_draws - 1) / nd_draws);
  TrueBounds out{mean_l, mean_u, std::max(se_l, se_u), false, std::nullopt};
  out.point = true_cs_bounds(spec).point;
  return out;
}

// ---------------------------------------------------------------------------

ReplicationEstimator make_estimator(EstimatorSetup setup) {
  return [setup = std::move(setup)](const FusedDataset& data, std::uint64_t seed, double alpha) {
    InferenceConfig cfg = setup.inference;
    cfg.seed = seed;
    cfg.alpha = alpha;
    return infer(data, setup.estimand, cfg);
  };
}

ReplicationEstimator make_ols_estimator(OlsConfig config) {
  return [config = std::move(config)](const FusedDataset& data, std::uint64_t seed, double alpha) {
    OlsConfig cfg = config;
    cfg.inference.seed = seed;
    cfg.inference.alpha = alpha;
    return ols_coefficient_bounds(data, cfg);
  };
}

CoverageReport run_monte_carlo(const DgpSpec& spec, const MonteCarloConfig& config,
                               const ReplicationEstimator& estimator, const TrueBounds& truth) {
  validate_spec(spec);
  if (config.reps < 2) throw Error(ErrorCode::InvalidArgument, "need at least two replications");
  if (!estimator) throw Error(ErrorCode::InvalidArgument, "no estimator supplied");
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<ReplicationRecord> records(reps);
  std::vector<std::exception_ptr> errors(reps);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j = next++; j < reps; j = next++) {
      try {
        ReplicationRecord& rec = records[j];
        rec.data_seed = derive_seed(config.seed, j, 1);
        rec.estimator_seed = derive_seed(config.seed, j, 2);
        const SimulatedSample sample = sample_dgp(spec, config.n, rec.data_seed);
        const IntervalResult res = estimator(sample.data, rec.estimator_seed, config.alpha);
        rec.theta_l = res.theta_l;
        rec.theta_u = res.theta_u;
        rec.v_l = res.v_l;
        rec.v_u = res.v_u;
        rec.lcb = res.lcb;
        rec.ucb = res.ucb;
        rec.lcb_covered = res.lcb <= truth.lower;
        rec.ucb_covered = res.ucb >= truth.upper;
        rec.covered = rec.lcb_covered && rec.ucb_covered;
        if (config.point_theta) rec.point_covered = res.lcb <= *config.point_theta && *config.point_theta <= res.ucb;
        rec.warnings = res.diagnostics.warnings;
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(config.threads, config.reps));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  CoverageReport rep;
  rep.dgp = dgp_name(spec);
  rep.n = config.n;
  rep.reps = config.reps;
  rep.alpha = config.alpha;
  rep.seed = config.seed;
  rep.true_bounds = truth;
  const double m = static_cast<double>(reps);
  double covered = 0, lcb_ok = 0, ucb_ok = 0, point_ok = 0;
  Eigen::VectorXd widths(config.reps), tl(config.reps), tu(config.reps);
  for (std::size_t j = 0; j < reps; ++j) {
    const auto& r = records[j];
    covered += r.covered;
    lcb_ok += r.lcb_covered;
    ucb_ok += r.ucb_covered;
    if (r.point_covered && *r.point_covered) point_ok += 1;
    const auto jj = static_cast<Eigen::Index>(j);
    widths(jj) = r.ucb - r.lcb;
    tl(jj) = r.theta_l;
    tu(jj) = r.theta_u;
    rep.mean_v_l_over_n += r.v_l / static_cast<double>(config.n) / m;
    rep.mean_v_u_over_n += r.v_u / static_cast<double>(config.n) / m;
  }
  auto sample_var = [](const Eigen::VectorXd& v) {
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
  };
  rep.coverage = covered / m;
  rep.lcb_coverage = lcb_ok / m;
  rep.ucb_coverage = ucb_ok / m;
  if (config.point_theta) rep.point_coverage = point_ok / m;
  rep.coverage_se = std::sqrt(rep.coverage * (1.0 - rep.coverage) / m);
  rep.mean_width = widths.mean();
  rep.width_se = std::sqrt(sample_var(widths) / m);
  rep.mean_theta_l = tl.mean();
  rep.mean_theta_u = tu.mean();
  rep.mc_var_theta_l = sample_var(tl);
  rep.mc_var_theta_u = sample_var(tu);
  rep.records = std::move(records);
  return rep;
}

CoverageReport run_monte_carlo(const DgpSpec& spec, const MonteCarloConfig& config, const EstimatorSetup& setup) {
  return run_monte_carlo(spec, config, make_estimator(setup), true_cs_bounds(spec));
}

CoverageReport run_monte_carlo(const DgpSpec& spec, const MonteCarloConfig& config) {
  return run_monte_carlo(spec, config, default_setup(spec));
}

LinearFit least_squares_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two matched points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw Error(ErrorCode::InvalidArgument, "x values are constant");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

std::vector<SweepRow> width_sweep(const DgpSpec& base, std::span<const double> ratios,
                                  const MonteCarloConfig& config) {
  if (!std::holds_alternative<HeavyTailLinear>(base) && !std::holds_alternative<GaussianLinear>(base)) {
    throw Error(ErrorCode::UnsupportedSpec, "width sweeps are defined for the linear designs only");
  }
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    DgpSpec spec = base;
    double sy = 0.0, sz = 0.0;
    std::visit(Overloaded{[&](HeavyTailLinear& s) { sy = s.sigma_y = ratios[k] * s.sigma_z; sz = s.sigma_z; },
                          [&](GaussianLinear& s) { sy = s.sigma_y = ratios[k] * s.sigma_z; sz = s.sigma_z; },
                          [](auto&) {}},
               spec);
    MonteCarloConfig cfg = config;
    cfg.seed = derive_seed(config.seed, 1000 + k);
    rows.push_back({ratios[k], sy, sz, run_monte_carlo(spec, cfg)});
  }
  return rows;
}

}  // namespace csfusion
