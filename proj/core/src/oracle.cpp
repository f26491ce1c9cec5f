#include "csfusion/oracle.hpp"

#include "csfusion/error.hpp"
#include "csfusion/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace csfusion {

namespace {

constexpr double kMassTol = 1e-12;

void check_law(const std::vector<Atom>& atoms, const char* what, std::size_t j) {
  if (atoms.empty()) throw Error(ErrorCode::MassMismatch, std::string(what) + " law of atom " + std::to_string(j) + " is empty");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.prob >= 0.0) || !std::isfinite(a.value)) {
      throw Error(ErrorCode::MassMismatch, std::string(what) + " law of atom " + std::to_string(j) + " has an invalid atom");
    }
    total += a.prob;
  }
  if (std::abs(total - 1.0) > kMassTol) {
    throw Error(ErrorCode::MassMismatch, std::string(what) + " probabilities of atom " + std::to_string(j) + " sum to " +
                                             std::to_string(total));
  }
}

std::vector<Atom> sorted(std::vector<Atom> atoms, bool ascending) {
  std::stable_sort(atoms.begin(), atoms.end(), [ascending](const Atom& a, const Atom& b) {
    return ascending ? a.value < b.value : a.value > b.value;
  });
  return atoms;
}

// E[f g] under the coupling that matches the two lists in order by cumulative mass.
double northwest_corner(const std::vector<Atom>& f, const std::vector<Atom>& g) {
  std::size_t i = 0, j = 0;
  double rf = f[0].prob, rg = g[0].prob;
  double total = 0.0;
  while (i < f.size() && j < g.size()) {
    const double m = std::min(rf, rg);
    total += m * f[i].value * g[j].value;
    rf -= m;
    rg -= m;
    // Whichever side is exhausted advances; a residue below the mass tolerance counts as exhausted.
    const bool next_f = rf <= kMassTol;
    const bool next_g = rg <= kMassTol;
    if (next_f && ++i < f.size()) rf = f[i].prob;
    if (next_g && ++j < g.size()) rg = g[j].prob;
    if (!next_f && !next_g) break;
  }
  return total;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(const std::vector<Atom>& atoms) {
  Moments m;
  for (const auto& a : atoms) m.mean += a.prob * a.value;
  for (const auto& a : atoms) m.var += a.prob * (a.value - m.mean) * (a.value - m.mean);
  return m;
}

std::vector<double> simplex(Rng& rng, int k) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> p(static_cast<std::size_t>(k));
  for (auto& v : p) v = ex(rng) + 1e-3;
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= s;
  return p;
}

std::vector<Atom> random_law(Rng& rng, int k, double range) {
  std::uniform_real_distribution<double> val(-range, range);
  const auto p = simplex(rng, k);
  std::vector<Atom> out;
  for (int i = 0; i < k; ++i) out.push_back({val(rng), p[static_cast<std::size_t>(i)]});
  return out;
}

int draw_count(Rng& rng, int max_count) {
  return std::uniform_int_distribution<int>(1, std::max(1, max_count))(rng);
}

}  // namespace

void DiscreteConditional::validate() const {
  if (x_atoms.empty()) throw Error(ErrorCode::MassMismatch, "no covariate atoms");
  double total = 0.0;
  for (std::size_t j = 0; j < x_atoms.size(); ++j) {
    const auto& a = x_atoms[j];
    if (!(a.weight > 0.0)) throw Error(ErrorCode::MassMismatch, "covariate weight must be positive");
    total += a.weight;
    check_law(a.f_atoms, "f", j);
    check_law(a.g_atoms, "g", j);
  }
  if (std::abs(total - 1.0) > kMassTol) {
    throw Error(ErrorCode::MassMismatch, "covariate weights sum to " + std::to_string(total));
  }
}

DiscreteConditional DiscreteConditional::swapped() const {
  DiscreteConditional out = *this;
  for (auto& a : out.x_atoms) std::swap(a.f_atoms, a.g_atoms);
  return out;
}

Bounds tight_bounds_discrete(const DiscreteConditional& dc) {
  dc.validate();
  Bounds b;
  for (const auto& a : dc.x_atoms) {
    const auto f = sorted(a.f_atoms, true);
    b.upper += a.weight * northwest_corner(f, sorted(a.g_atoms, true));
    b.lower += a.weight * northwest_corner(f, sorted(a.g_atoms, false));
  }
  return b;
}

Bounds tight_bounds_exhaustive(const DiscreteConditional& dc) {
  dc.validate();
  Bounds b;
  for (const auto& a : dc.x_atoms) {
    const std::size_t k = a.f_atoms.size();
    if (k == 0 || k > 4 || a.g_atoms.size() != k) {
      throw Error(ErrorCode::InvalidArgument, "exhaustive path needs k x k atoms with k <= 4");
    }
    const double mass = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i) {
      if (std::abs(a.f_atoms[i].prob - mass) > kMassTol || std::abs(a.g_atoms[i].prob - mass) > kMassTol) {
        throw Error(ErrorCode::InvalidArgument, "exhaustive path needs equal-mass atoms");
      }
    }
    // Extreme couplings of equal-mass marginals are permutations.
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += a.f_atoms[i].value * a.g_atoms[perm[i]].value;
      s *= mass;
      hi = std::max(hi, s);
      lo = std::min(lo, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    b.upper += a.weight * hi;
    b.lower += a.weight * lo;
  }
  return b;
}

Bounds cs_bounds_discrete(const DiscreteConditional& dc) {
  dc.validate();
  Bounds b;
  for (const auto& a : dc.x_atoms) {
    const Moments f = moments(a.f_atoms);
    const Moments g = moments(a.g_atoms);
    const double centre = f.mean * g.mean;
    const double spread = cs_variance_term(f.var, g.var);
    b.lower += a.weight * (centre - spread);
    b.upper += a.weight * (centre + spread);
  }
  return b;
}

DiscreteConditional random_discrete_conditional(std::uint64_t seed, const InstanceShape& shape) {
  Rng rng(seed);
  DiscreteConditional dc;
  const int nx = draw_count(rng, shape.max_x_atoms);
  const auto w = simplex(rng, nx);
  for (int j = 0; j < nx; ++j) {
    CovariateAtom a;
    a.weight = w[static_cast<std::size_t>(j)];
    a.f_atoms = random_law(rng, draw_count(rng, shape.max_f_atoms), shape.value_range);
    a.g_atoms = random_law(rng, draw_count(rng, shape.max_g_atoms), shape.value_range);
    dc.x_atoms.push_back(std::move(a));
  }
  return dc;
}

namespace {

std::vector<Atom> symmetric_law(Rng& rng, int k, double range) {
  std::uniform_real_distribution<double> val(-range, range);
  std::uniform_real_distribution<double> half(0.0, range);
  const double centre = val(rng);
  const int pairs = std::max(1, k / 2);
  const bool middle = k % 2 == 1;
  // Masses: a symmetric simplex over pairs plus an optional central atom.
  auto p = simplex(rng, pairs + (middle ? 1 : 0));
  std::vector<Atom> out;
  for (int i = 0; i < pairs; ++i) {
    const double d = half(rng);
    const double m = p[static_cast<std::size_t>(i)] / 2.0;
    out.push_back({centre - d, m});
    out.push_back({centre + d, m});
  }
  if (middle) out.push_back({centre, p.back()});
  return out;
}

DiscreteConditional affine_instance(std::uint64_t seed, const InstanceShape& shape, bool symmetric) {
  Rng rng(seed);
  std::uniform_real_distribution<double> scale(0.2, 3.0);
  std::uniform_real_distribution<double> shift(-2.0, 2.0);
  std::bernoulli_distribution flip(0.5);
  DiscreteConditional dc;
  const int nx = draw_count(rng, shape.max_x_atoms);
  const auto w = simplex(rng, nx);
  for (int j = 0; j < nx; ++j) {
    CovariateAtom a;
    a.weight = w[static_cast<std::size_t>(j)];
    const int k = draw_count(rng, shape.max_f_atoms);
    a.f_atoms = symmetric ? symmetric_law(rng, k, shape.value_range) : random_law(rng, k, shape.value_range);
    double sa = scale(rng);
    if (symmetric && flip(rng)) sa = -sa;
    const double sb = shift(rng);
    for (const auto& f : a.f_atoms) a.g_atoms.push_back({(f.value - sb) / sa, f.prob});
    // Present g in a different order so the sorting path is exercised.
    std::shuffle(a.g_atoms.begin(), a.g_atoms.end(), rng);
    dc.x_atoms.push_back(std::move(a));
  }
  return dc;
}

}  // namespace

DiscreteConditional location_scale_instance(std::uint64_t seed, const InstanceShape& shape) {
  return affine_instance(seed, shape, true);
}

DiscreteConditional skewed_location_scale_instance(std::uint64_t seed, const InstanceShape& shape) {
  return affine_instance(seed, shape, false);
}

DiscreteConditional equal_mass_instance(std::uint64_t seed, int k, int x_atoms) {
  if (k < 1 || x_atoms < 1) throw Error(ErrorCode::InvalidArgument, "equal_mass_instance needs k >= 1 and x_atoms >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  DiscreteConditional dc;
  const auto w = simplex(rng, x_atoms);
  const double mass = 1.0 / k;
  for (int j = 0; j < x_atoms; ++j) {
    CovariateAtom a;
    a.weight = w[static_cast<std::size_t>(j)];
    for (int i = 0; i < k; ++i) a.f_atoms.push_back({val(rng), mass});
    for (int i = 0; i < k; ++i) a.g_atoms.push_back({val(rng), mass});
    dc.x_atoms.push_back(std::move(a));
  }
  return dc;
}

OracleCheckReport run_oracle_checks(int instances, int location_scale_instances, std::uint64_t seed,
                                    double tolerance, int exhaustive_instances) {
  if (instances < 0 || location_scale_instances < 0 || exhaustive_instances < 0) {
    throw Error(ErrorCode::InvalidArgument, "instance counts must be nonnegative");
  }
  if (instances + location_scale_instances == 0) throw Error(ErrorCode::InvalidArgument, "no oracle instances requested");
  OracleCheckReport rep;
  rep.tolerance = tolerance;
  rep.instances = instances;
  rep.location_scale_instances = location_scale_instances;
  rep.exhaustive_instances = exhaustive_instances;
  rep.max_sandwich_excess = -std::numeric_limits<double>::infinity();

  auto same = [tolerance](const Bounds& a, const Bounds& b) {
    return std::abs(a.lower - b.lower) <= tolerance && std::abs(a.upper - b.upper) <= tolerance;
  };

  for (int i = 0; i < instances; ++i) {
    const auto dc = random_discrete_conditional(derive_seed(seed, 1, static_cast<std::uint64_t>(i)));
    const Bounds t = tight_bounds_discrete(dc);
    const Bounds cs = cs_bounds_discrete(dc);
    const double excess = std::max({cs.lower - t.lower, t.lower - t.upper, t.upper - cs.upper});
    rep.max_sandwich_excess = std::max(rep.max_sandwich_excess, excess);
    if (excess > tolerance) ++rep.sandwich_violations;
    const auto sw = dc.swapped();
    if (!same(t, tight_bounds_discrete(sw)) || !same(cs, cs_bounds_discrete(sw))) ++rep.swap_violations;
  }
  for (int i = 0; i < location_scale_instances; ++i) {
    const auto dc = location_scale_instance(derive_seed(seed, 2, static_cast<std::uint64_t>(i)));
    const Bounds t = tight_bounds_discrete(dc);
    const Bounds cs = cs_bounds_discrete(dc);
    const double gap = std::max(std::abs(cs.lower - t.lower), std::abs(cs.upper - t.upper));
    rep.max_equality_gap = std::max(rep.max_equality_gap, gap);
    if (gap > tolerance) ++rep.equality_violations;

    const auto skewed = skewed_location_scale_instance(derive_seed(seed, 4, static_cast<std::uint64_t>(i)));
    const double upper_gap = std::abs(cs_bounds_discrete(skewed).upper - tight_bounds_discrete(skewed).upper);
    rep.max_equality_gap = std::max(rep.max_equality_gap, upper_gap);
    if (upper_gap > tolerance) ++rep.upper_equality_violations;
  }
  for (int i = 0; i < exhaustive_instances; ++i) {
    const int k = 1 + i % 4;
    const auto dc = equal_mass_instance(derive_seed(seed, 3, static_cast<std::uint64_t>(i)), k);
    const Bounds greedy = tight_bounds_discrete(dc);
    const Bounds brute = tight_bounds_exhaustive(dc);
    const double gap = std::max(std::abs(greedy.lower - brute.lower), std::abs(greedy.upper - brute.upper));
    rep.max_exhaustive_gap = std::max(rep.max_exhaustive_gap, gap);
    if (gap > 1e-12) ++rep.exhaustive_violations;
  }
  if (instances == 0) rep.max_sandwich_excess = 0.0;
  return rep;
}

}  // namespace csfusion
