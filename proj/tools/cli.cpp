#include "cli.hpp"

#include "csfusion/estimator.hpp"
#include "csfusion/oracle.hpp"
#include "csfusion/random.hpp"
#include "csfusion/simharness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#ifndef CSFUSION_VERSION_STRING
#define CSFUSION_VERSION_STRING "0.0.0"
#endif

namespace csfusion::cli {

using Json = nlohmann::ordered_json;

namespace {

// Configuration problems detected after parsing (unknown estimand, ...): exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return v;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& tok : split(s, ',')) {
    const auto v = parse_double(trim(tok));
    if (!v) throw UsageError("cannot parse '" + tok + "' in " + what);
    out.push_back(*v);
  }
  return out;
}

// Column index for a name of the form <prefix><k> with k >= 1.
std::optional<int> numbered(const std::string& name, char prefix) {
  if (name.size() < 2 || name[0] != prefix) return std::nullopt;
  int k = 0;
  const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
  if (ec != std::errc() || ptr != name.data() + name.size() || k < 1 || name[1] == '0') return std::nullopt;
  return k;
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("CSFUSION_THREADS")) {
    int v = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void emit(const Json& doc, const std::string& path, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  f << text;
}

Json tool_info() { return {{"name", "csfusion"}, {"version", version()}}; }

Json summary_json(const DistributionSummary& s) {
  return {{"min", s.min}, {"q05", s.q05}, {"q50", s.q50}, {"q95", s.q95}, {"max", s.max}};
}

Json positivity_json(const PositivityReport& p) {
  return {{"n", p.n},
          {"propensity", summary_json(p.e)},
          {"one_minus_propensity", summary_json(p.one_minus_e)},
          {"variance_y", summary_json(p.v_y)},
          {"variance_z", summary_json(p.v_z)},
          {"mean_inv_e4", p.mean_inv_e4},
          {"mean_inv_one_minus_e4", p.mean_inv_one_minus_e4},
          {"mean_inv_variance_y8", p.mean_inv_v_y8},
          {"mean_inv_variance_z8", p.mean_inv_v_z8},
          {"clipped", p.clipped},
          {"variance_y_floored", p.v_y_floored},
          {"variance_z_floored", p.v_z_floored},
          {"clip_warning", p.clip_warning},
          {"floor_warning", p.floor_warning}};
}

Json result_json(const IntervalResult& r) {
  const double nn = static_cast<double>(r.n);
  return {{"n", r.n},
          {"alpha", r.alpha},
          {"theta_lower", r.theta_l},
          {"theta_upper", r.theta_u},
          {"variance_lower", r.v_l},
          {"variance_upper", r.v_u},
          {"se_lower", std::sqrt(r.v_l / nn)},
          {"se_upper", std::sqrt(r.v_u / nn)},
          {"lcb", r.lcb},
          {"ucb", r.ucb},
          {"width", r.width()}};
}

Json diagnostics_json(const Diagnostics& d) {
  Json j = {{"warnings", d.warnings},
            {"degenerate_variance", d.degenerate_variance},
            {"crossed_bounds", d.crossed_bounds},
            {"kink_warning", d.kink_warning},
            {"fold_plugin_lower", d.fold_plugin_lower},
            {"fold_plugin_upper", d.fold_plugin_upper}};
  j["positivity"] = d.positivity ? positivity_json(*d.positivity) : Json(nullptr);
  return j;
}

Json bounds_json(const TrueBounds& b) {
  Json j = {{"lower", b.lower}, {"upper", b.upper}, {"se", b.se}, {"analytic", b.analytic}};
  j["point"] = b.point ? Json(*b.point) : Json(nullptr);
  return j;
}

Json coverage_json(const CoverageReport& r, bool records) {
  const double z = 1.96;
  Json j = {{"reps", r.reps},
            {"coverage", r.coverage},
            {"coverage_se", r.coverage_se},
            {"coverage_band", {r.coverage - z * r.coverage_se, r.coverage + z * r.coverage_se}},
            {"lcb_coverage", r.lcb_coverage},
            {"ucb_coverage", r.ucb_coverage}};
  j["point_coverage"] = r.point_coverage ? Json(*r.point_coverage) : Json(nullptr);
  j["mean_width"] = r.mean_width;
  j["width_se"] = r.width_se;
  j["width_band"] = {r.mean_width - z * r.width_se, r.mean_width + z * r.width_se};
  j["mean_theta_lower"] = r.mean_theta_l;
  j["mean_theta_upper"] = r.mean_theta_u;
  j["mc_variance_theta_lower"] = r.mc_var_theta_l;
  j["mc_variance_theta_upper"] = r.mc_var_theta_u;
  j["mean_variance_lower_over_n"] = r.mean_v_l_over_n;
  j["mean_variance_upper_over_n"] = r.mean_v_u_over_n;
  if (records) {
    Json recs = Json::array();
    for (const auto& rec : r.records) {
      Json rj = {{"data_seed", rec.data_seed},   {"estimator_seed", rec.estimator_seed},
                 {"theta_lower", rec.theta_l},   {"theta_upper", rec.theta_u},
                 {"variance_lower", rec.v_l},    {"variance_upper", rec.v_u},
                 {"lcb", rec.lcb},               {"ucb", rec.ucb},
                 {"covered", rec.covered},       {"lcb_covered", rec.lcb_covered},
                 {"ucb_covered", rec.ucb_covered}};
      rj["point_covered"] = rec.point_covered ? Json(*rec.point_covered) : Json(nullptr);
      rj["warnings"] = rec.warnings;
      recs.push_back(std::move(rj));
    }
    j["records"] = std::move(recs);
  }
  return j;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  std::string data;
  std::string estimand = "product";
  double alpha = 0.05;
  int k_folds = 2;
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<double> clip;
  std::string variance_mode = "homoskedastic";
  std::vector<double> lambda_grid;
  std::optional<double> known_propensity;
  std::string gradient = "finite-difference";
  std::string out;
};

struct EstimandChoice {
  bool ols = false;
  DecomposableEstimand estimand;
};

EstimandChoice parse_estimand(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto no_args = [&] {
    if (colon != std::string::npos) throw UsageError("estimand '" + name + "' takes no parameters");
  };
  if (name == "product") {
    no_args();
    return {false, DecomposableEstimand::product()};
  }
  if (name == "ratio") {
    no_args();
    return {false, DecomposableEstimand::ratio()};
  }
  if (name == "ols") {
    no_args();
    return {true, DecomposableEstimand::product()};
  }
  if (name == "threshold") {
    const auto v = parse_list(args, "threshold parameters");
    if (v.size() != 2) throw UsageError("threshold expects two cutoffs, e.g. threshold:0,1.5");
    return {false, DecomposableEstimand::threshold_product(v[0], v[1])};
  }
  if (name == "contrast") {
    const auto v = parse_list(args, "contrast weights");
    if (v.empty()) throw UsageError("contrast expects weights, e.g. contrast:1,-0.3");
    return {false, DecomposableEstimand::linear_contrast(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())))};
  }
  throw UsageError("unknown estimand '" + name + "' (product, ratio, threshold:cy,cz, contrast:a1,..., ols)");
}

int cmd_analyze(const AnalyzeOptions& o, std::ostream& out) {
  const EstimandChoice choice = parse_estimand(o.estimand);
  VarianceMode mode = VarianceMode::Homoskedastic;
  if (o.variance_mode == "regression") {
    mode = VarianceMode::Regression;
  } else if (o.variance_mode != "homoskedastic") {
    throw UsageError("variance mode must be homoskedastic or regression");
  }
  if (!o.clip.empty() && (o.clip.size() != 2 || !(0.0 < o.clip[0] && o.clip[0] < o.clip[1] && o.clip[1] < 1.0))) {
    throw UsageError("--clip-propensity expects lo,hi with 0 < lo < hi < 1");
  }
  for (double l : o.lambda_grid) {
    if (!(l > 0.0)) throw UsageError("--lambda-grid values must be positive");
  }
  if (o.known_propensity && !(*o.known_propensity > 0.0 && *o.known_propensity < 1.0)) {
    throw UsageError("--known-propensity must lie in (0, 1)");
  }
  GradientMode gmode = GradientMode::FiniteDifference;
  if (o.gradient == "analytic") {
    gmode = GradientMode::Analytic;
  } else if (o.gradient != "finite-difference") {
    throw UsageError("--gradient must be analytic or finite-difference");
  }

  const FusedDataset data = ingest_csv(o.data);

  InferenceConfig cfg;
  cfg.alpha = o.alpha;
  cfg.k_folds = o.k_folds;
  cfg.seed = o.seed;
  RidgeSettings rs;
  rs.lambda_grid = o.lambda_grid;
  cfg.nuisance.y_learner = std::make_shared<RidgeMomentLearner>(rs, mode);
  cfg.nuisance.z_learner = std::make_shared<RidgeMomentLearner>(rs, mode);
  if (o.known_propensity) cfg.nuisance.propensity = KnownPropensity::constant(*o.known_propensity);
  if (!o.clip.empty()) cfg.nuisance.propensity_clip = std::make_pair(o.clip[0], o.clip[1]);

  Json report;
  report["tool"] = tool_info();
  report["command"] = "analyze";
  Json config = {{"data", o.data},
                 {"estimand", o.estimand},
                 {"alpha", o.alpha},
                 {"k_folds", o.k_folds},
                 {"seed", o.seed},
                 {"variance_mode", o.variance_mode},
                 {"lambda_grid", o.lambda_grid.empty() ? default_lambda_grid() : o.lambda_grid},
                 {"propensity", o.known_propensity ? "known" : "logistic_ridge_cv"}};
  config["known_propensity"] = o.known_propensity ? Json(*o.known_propensity) : Json(nullptr);
  config["clip_propensity"] = o.clip.empty() ? Json(nullptr) : Json(o.clip);
  if (choice.ols) config["gradient"] = o.gradient;
  report["config"] = std::move(config);
  report["seeds"] = {{"seed", o.seed}, {"folds", derive_seed(o.seed, 1)}, {"nuisance", derive_seed(o.seed, 2, 0)}};
  report["data"] = {{"n", data.n()},   {"n_y", data.count_y()}, {"n_z", data.count_z()},
                    {"p_x", data.px()}, {"p_y", data.py()},      {"p_z", data.pz()}};

  IntervalResult res;
  if (choice.ols) {
    OlsConfig oc;
    oc.inference = cfg;
    oc.mode = gmode;
    const ComposedTarget target = ols_composed_target(data, oc);
    res = ols_coefficient_bounds(data, oc);
    Json comps = Json::array();
    for (const auto& c : target.components) comps.push_back({{"name", c.name}, {"estimate", c.estimate}});
    report["components"] = std::move(comps);
  } else {
    res = infer(data, choice.estimand, cfg);
  }
  report["result"] = result_json(res);
  report["diagnostics"] = diagnostics_json(res.diagnostics);
  emit(report, o.out, out);
  return kSuccess;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string dgp = "heavy_tail";
  Eigen::Index n = 0;
  int reps = 500;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  int k_folds = 2;
  int threads = 0;
  int p_x = 20;
  double sigma_y = 1.0, sigma_z = 1.0;
  std::uint64_t beta_seed = 0;
  double sigma = 0.5, rho = 0.3, tau = 0.3, sigma_eps = 0.5, beta1 = 1.0, beta2 = 1.0, beta_z = 1.0;
  std::string sweep;
  bool records = false;
  std::string out;
};

std::pair<DgpSpec, Json> build_spec(const SimulateOptions& o) {
  if (o.dgp == "heavy_tail" || o.dgp == "gaussian") {
    Json j = {{"name", o.dgp}, {"p_x", o.p_x}, {"sigma_y", o.sigma_y}, {"sigma_z", o.sigma_z}, {"beta_seed", o.beta_seed}};
    if (o.dgp == "heavy_tail") return {HeavyTailLinear{o.p_x, o.sigma_y, o.sigma_z, o.beta_seed}, j};
    return {GaussianLinear{o.p_x, o.sigma_y, o.sigma_z, o.beta_seed}, j};
  }
  if (o.dgp == "lognormal") {
    return {LogNormalRelative{o.p_x, o.sigma, o.rho, o.beta_seed},
            {{"name", o.dgp}, {"p_x", o.p_x}, {"sigma", o.sigma}, {"rho", o.rho}, {"beta_seed", o.beta_seed}}};
  }
  if (o.dgp == "validation") {
    return {ValidationStudy{o.tau, o.sigma_eps, o.beta1, o.beta2, o.rho, o.sigma},
            {{"name", o.dgp},
             {"tau", o.tau},
             {"sigma_eps", o.sigma_eps},
             {"beta1", o.beta1},
             {"beta2", o.beta2},
             {"rho", o.rho},
             {"sigma", o.sigma}}};
  }
  if (o.dgp == "deterministic") {
    return {ConditionallyDeterministic{o.beta_z}, {{"name", o.dgp}, {"beta_z", o.beta_z}}};
  }
  throw UsageError("unknown dgp '" + o.dgp + "' (heavy_tail, gaussian, lognormal, validation, deterministic)");
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  const auto [spec, spec_json] = build_spec(o);
  validate_spec(spec);
  const bool ols = std::holds_alternative<ConditionallyDeterministic>(spec);
  MonteCarloConfig mc;
  mc.n = o.n > 0 ? o.n : (std::holds_alternative<ValidationStudy>(spec) ? 2000 : 1000);
  mc.reps = o.reps;
  mc.alpha = o.alpha;
  mc.seed = o.seed;
  mc.threads = resolve_threads(o.threads);

  Json report;
  report["tool"] = tool_info();
  report["command"] = "simulate";
  report["config"] = {{"dgp", spec_json}, {"n", mc.n},         {"reps", mc.reps},
                      {"alpha", mc.alpha}, {"k_folds", o.k_folds}, {"seed", mc.seed},
                      {"target", ols ? "ols_coefficient" : default_estimand(spec).name}};
  report["seeds"] = {{"seed", mc.seed}, {"replication_rule", "data: derive(seed, j, 1); estimator: derive(seed, j, 2)"}};

  if (!o.sweep.empty()) {
    if (ols) throw UsageError("--sweep applies to the heavy_tail and gaussian designs");
    const auto ratios = parse_list(o.sweep, "--sweep");
    report["config"]["sweep"] = ratios;
    const auto rows = width_sweep(spec, ratios, mc);
    Json table = Json::array();
    std::vector<double> sy, width;
    for (const auto& r : rows) {
      Json row = {{"ratio", r.ratio}, {"sigma_y", r.sigma_y}, {"sigma_z", r.sigma_z},
                  {"true_bounds", bounds_json(r.report.true_bounds)}};
      row.update(coverage_json(r.report, o.records));
      table.push_back(std::move(row));
      sy.push_back(r.sigma_y);
      width.push_back(r.report.mean_width);
    }
    report["sweep"] = std::move(table);
    if (rows.size() >= 2) {
      const LinearFit fit = least_squares_line(sy, width);
      report["width_fit"] = {{"intercept", fit.intercept}, {"slope", fit.slope}, {"r2", fit.r2}};
    }
    emit(report, o.out, out);
    return kSuccess;
  }

  CoverageReport rep;
  if (ols) {
    const double b = std::get<ConditionallyDeterministic>(spec).beta_z;
    mc.point_theta = b;
    OlsConfig oc;
    oc.inference = default_setup(spec).inference;
    oc.inference.k_folds = o.k_folds;
    rep = run_monte_carlo(spec, mc, make_ols_estimator(oc), TrueBounds{b, b, 0.0, true, b});
  } else {
    EstimatorSetup setup = default_setup(spec);
    setup.inference.k_folds = o.k_folds;
    const TrueBounds truth = true_cs_bounds(spec);
    mc.point_theta = truth.point;
    rep = run_monte_carlo(spec, mc, make_estimator(setup), truth);
  }
  report["true_bounds"] = bounds_json(rep.true_bounds);
  report["summary"] = coverage_json(rep, o.records);
  emit(report, o.out, out);
  return kSuccess;
}

// ---------------------------------------------------------------------------
// oracle-check

struct OracleOptions {
  int instances = 200;
  int location_scale = 50;
  int exhaustive = 50;
  std::uint64_t seed = 0;
  double tolerance = 1e-10;
  std::string out;
};

int cmd_oracle_check(const OracleOptions& o, std::ostream& out) {
  if (o.instances + o.location_scale <= 0) throw UsageError("oracle-check needs at least one instance");
  const OracleCheckReport r = run_oracle_checks(o.instances, o.location_scale, o.seed, o.tolerance, o.exhaustive);
  Json report;
  report["tool"] = tool_info();
  report["command"] = "oracle-check";
  report["config"] = {{"instances", o.instances},
                      {"location_scale", o.location_scale},
                      {"exhaustive", o.exhaustive},
                      {"seed", o.seed},
                      {"tolerance", o.tolerance}};
  report["result"] = {{"ok", r.ok()},
                      {"sandwich_violations", r.sandwich_violations},
                      {"equality_violations", r.equality_violations},
                      {"exhaustive_violations", r.exhaustive_violations},
                      {"swap_violations", r.swap_violations},
                      {"upper_equality_violations", r.upper_equality_violations},
                      {"max_sandwich_excess", r.max_sandwich_excess},
                      {"max_equality_gap", r.max_equality_gap},
                      {"max_exhaustive_gap", r.max_exhaustive_gap}};
  emit(report, o.out, out);
  return r.ok() ? kSuccess : kEstimation;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string version() { return CSFUSION_VERSION_STRING; }

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::EmptyArm:
    case ErrorCode::InvalidDataset:
    case ErrorCode::SupportViolation:
    case ErrorCode::LengthMismatch:
    case ErrorCode::InvalidSpec:
    case ErrorCode::UnsupportedSpec:
    case ErrorCode::SchemaError:
    case ErrorCode::RowError:
    case ErrorCode::NonSymmetric:
    case ErrorCode::IndefiniteInput:
      return kValidation;
    default:
      return kEstimation;
  }
}

FusedDataset parse_csv(std::istream& in) {
  std::string line;
  long line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!trim(line).empty()) {
      for (const auto& h : split(line, ',')) header.push_back(trim(h));
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::SchemaError, "missing header row");

  std::map<int, std::size_t> xcol, ycol, zcol;
  std::optional<std::size_t> rcol;
  bool y_plain = false, z_plain = false;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    auto dup = [&] { throw Error(ErrorCode::SchemaError, "duplicate column '" + h + "'"); };
    if (h == "r") {
      if (rcol) dup();
      rcol = c;
    } else if (h == "y") {
      if (y_plain) dup();
      y_plain = true;
      ycol[1] = c;
    } else if (h == "z") {
      if (z_plain) dup();
      z_plain = true;
      zcol[1] = c;
    } else if (auto k = numbered(h, 'x')) {
      if (!xcol.emplace(*k, c).second) dup();
    } else if (auto ky = numbered(h, 'y')) {
      if (y_plain || !ycol.emplace(*ky, c).second) dup();
    } else if (auto kz = numbered(h, 'z')) {
      if (z_plain || !zcol.emplace(*kz, c).second) dup();
    } else {
      throw Error(ErrorCode::SchemaError, "unexpected column '" + h + "'");
    }
  }
  auto contiguous = [](const std::map<int, std::size_t>& m, const char* what) {
    if (m.empty()) throw Error(ErrorCode::SchemaError, std::string("missing ") + what + " column(s)");
    if (m.rbegin()->first != static_cast<int>(m.size())) {
      throw Error(ErrorCode::SchemaError, std::string(what) + " columns must be numbered 1..p without gaps");
    }
  };
  contiguous(xcol, "x");
  contiguous(ycol, "y");
  contiguous(zcol, "z");
  if (!rcol) throw Error(ErrorCode::SchemaError, "missing r column");

  std::vector<std::vector<double>> xs, ys, zs;
  std::vector<std::uint8_t> r;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::RowError, "line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != header.size()) {
      fail("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    auto number = [&](std::size_t c) {
      const std::string f = trim(fields[c]);
      if (f.empty()) fail("column '" + header[c] + "' is empty");
      const auto v = parse_double(f);
      if (!v || !std::isfinite(*v)) fail("column '" + header[c] + "' is not a finite number: '" + f + "'");
      return *v;
    };
    const std::string rv = trim(fields[*rcol]);
    if (rv != "0" && rv != "1") fail("r must be 0 or 1, found '" + rv + "'");
    const bool has_y = rv == "1";
    std::vector<double> xrow, yrow, zrow;
    for (const auto& [k, c] : xcol) xrow.push_back(number(c));
    for (const auto& [k, c] : ycol) {
      if (has_y) {
        yrow.push_back(number(c));
      } else {
        if (!trim(fields[c]).empty()) fail("r = 0 but column '" + header[c] + "' is not empty");
        yrow.push_back(nan);
      }
    }
    for (const auto& [k, c] : zcol) {
      if (!has_y) {
        zrow.push_back(number(c));
      } else {
        if (!trim(fields[c]).empty()) fail("r = 1 but column '" + header[c] + "' is not empty");
        zrow.push_back(nan);
      }
    }
    xs.push_back(std::move(xrow));
    ys.push_back(std::move(yrow));
    zs.push_back(std::move(zrow));
    r.push_back(has_y ? 1 : 0);
  }
  if (r.empty()) throw Error(ErrorCode::EmptyArm, "no data rows");

  auto to_matrix = [](const std::vector<std::vector<double>>& rows, std::size_t cols) {
    RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
  };
  return FusedDataset(to_matrix(xs, xcol.size()), std::move(r), to_matrix(ys, ycol.size()), to_matrix(zs, zcol.size()));
}

FusedDataset ingest_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::SchemaError, "cannot open " + path);
  return parse_csv(f);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cauchy-Schwarz bounds and confidence intervals for data-fusion estimands", "csfusion"};
  app.set_version_flag("--version", "csfusion " + version());
  app.require_subcommand(1);

  AnalyzeOptions ao;
  auto* analyze = app.add_subcommand("analyze", "Estimate bounds and confidence limits from a CSV file");
  analyze->add_option("--data", ao.data, "Input CSV (x1..xp, r, y, z)")->required();
  analyze->add_option("--estimand", ao.estimand, "product | ratio | threshold:cy,cz | contrast:a1,... | ols")
      ->capture_default_str();
  analyze->add_option("--alpha", ao.alpha, "Miscoverage level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  analyze->add_option("--k-folds", ao.k_folds, "Cross-fitting folds")->check(CLI::Range(2, 1000))->capture_default_str();
  analyze->add_option("--seed", ao.seed, "Master seed")->capture_default_str();
  analyze->add_option("--threads", ao.threads, "Worker threads (flag > CSFUSION_THREADS > cores)");
  analyze->add_option("--clip-propensity", ao.clip, "Propensity clip lo,hi")->delimiter(',');
  analyze->add_option("--variance-mode", ao.variance_mode, "homoskedastic | regression")->capture_default_str();
  analyze->add_option("--lambda-grid", ao.lambda_grid, "Ridge penalties, comma separated")->delimiter(',');
  analyze->add_option("--known-propensity", ao.known_propensity, "Use this constant propensity instead of fitting one");
  analyze->add_option("--gradient", ao.gradient, "analytic | finite-difference (ols only)")->capture_default_str();
  analyze->add_option("--out", ao.out, "Report path (default: stdout)");

  SimulateOptions so;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo coverage study on a built-in design");
  simulate->add_option("--dgp", so.dgp, "heavy_tail | gaussian | lognormal | validation | deterministic")
      ->capture_default_str();
  simulate->add_option("--n", so.n, "Sample size per replication (default 1000; validation 2000)");
  simulate->add_option("--reps", so.reps, "Replications")->check(CLI::Range(2, 1000000))->capture_default_str();
  simulate->add_option("--seed", so.seed, "Master seed")->required();
  simulate->add_option("--alpha", so.alpha, "Miscoverage level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  simulate->add_option("--k-folds", so.k_folds, "Cross-fitting folds")->check(CLI::Range(2, 1000))->capture_default_str();
  simulate->add_option("--threads", so.threads, "Worker threads (flag > CSFUSION_THREADS > cores)");
  simulate->add_option("--p-x", so.p_x, "Covariate dimension (linear and lognormal designs)")->capture_default_str();
  simulate->add_option("--sigma-y", so.sigma_y, "Noise scale of Y (linear designs)")->capture_default_str();
  simulate->add_option("--sigma-z", so.sigma_z, "Noise scale of Z (linear designs)")->capture_default_str();
  simulate->add_option("--beta-seed", so.beta_seed, "Seed of the coefficient draw")->capture_default_str();
  simulate->add_option("--sigma", so.sigma, "Noise scale (lognormal, validation)")->capture_default_str();
  simulate->add_option("--rho", so.rho, "Correlation (lognormal, validation)")->capture_default_str();
  simulate->add_option("--tau", so.tau, "Measurement-error correlation (validation)")->capture_default_str();
  simulate->add_option("--sigma-eps", so.sigma_eps, "Outcome noise (validation)")->capture_default_str();
  simulate->add_option("--beta1", so.beta1, "Validation coefficient of Z1")->capture_default_str();
  simulate->add_option("--beta2", so.beta2, "Validation coefficient of Z2")->capture_default_str();
  simulate->add_option("--beta-z", so.beta_z, "Coefficient of Z (deterministic design)")->capture_default_str();
  simulate->add_option("--sweep", so.sweep, "Comma-separated sigma_y/sigma_z ratios");
  simulate->add_flag("--records", so.records, "Include per-replication records");
  simulate->add_option("--out", so.out, "Report path (default: stdout)");

  OracleOptions oo;
  auto* oracle = app.add_subcommand("oracle-check", "Check Cauchy-Schwarz bounds against exact tight bounds");
  oracle->add_option("--instances", oo.instances, "Random instances")->check(CLI::NonNegativeNumber)->capture_default_str();
  oracle->add_option("--location-scale", oo.location_scale, "Location-scale instances")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  oracle->add_option("--exhaustive", oo.exhaustive, "Equal-mass instances checked by enumeration")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  oracle->add_option("--seed", oo.seed, "Master seed")->capture_default_str();
  oracle->add_option("--tolerance", oo.tolerance, "Absolute tolerance")->capture_default_str();
  oracle->add_option("--out", oo.out, "Report path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (*analyze) return cmd_analyze(ao, out);
    if (*simulate) return cmd_simulate(so, out);
    return cmd_oracle_check(oo, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kEstimation;
  }
}

}  // namespace csfusion::cli
