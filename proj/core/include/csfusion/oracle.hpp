#pragma once

#include "csfusion/numerics.hpp"

#include <cstdint>
#include <vector>

namespace csfusion {

// Exact tight bounds of E[f g] on small discrete instances, for checking the
// Cauchy-Schwarz bounds against.

struct Atom {
  double value = 0.0;
  double prob = 0.0;
};

/// Conditional laws of f and g given one covariate atom of mass `weight`.
struct CovariateAtom {
  double weight = 0.0;
  std::vector<Atom> f_atoms;
  std::vector<Atom> g_atoms;
};

struct DiscreteConditional {
  std::vector<CovariateAtom> x_atoms;

  /// Throws MassMismatch unless weights and per-atom probabilities are
  /// nonnegative and sum to one within 1e-12.
  void validate() const;
  DiscreteConditional swapped() const;
};

/// Sup and inf of E[f g] over all couplings, via the comonotone and antitone
/// couplings (northwest-corner matching of the sorted marginals).
Bounds tight_bounds_discrete(const DiscreteConditional& dc);

/// Brute force over all permutation couplings. Every covariate atom must carry the
/// same number (at most 4) of equal-mass f and g atoms.
Bounds tight_bounds_exhaustive(const DiscreteConditional& dc);

/// sum_j w_j [m_f m_g -/+ sqrt(v_f v_g)] from exact per-atom moments.
Bounds cs_bounds_discrete(const DiscreteConditional& dc);

struct InstanceShape {
  int max_x_atoms = 4;
  int max_f_atoms = 6;
  int max_g_atoms = 6;
  double value_range = 5.0;
};

DiscreteConditional random_discrete_conditional(std::uint64_t seed, const InstanceShape& shape = {});
/// Each covariate atom has a symmetric f-law and g = (f - b) / a with a != 0 of either
/// sign. Symmetry makes the g-law an affine image of the f-law with both signs of the
/// scale, which both Cauchy-Schwarz endpoints need to be tight.
DiscreteConditional location_scale_instance(std::uint64_t seed, const InstanceShape& shape = {});
/// As above with an unrestricted (generally skewed) f-law and a > 0. Only the upper
/// endpoint is tight here; the lower one is tight only when -g is also an affine
/// image of f (e.g. f, g ~ Bernoulli(0.1): tight lower bound 0, CS lower bound -0.08).
DiscreteConditional skewed_location_scale_instance(std::uint64_t seed, const InstanceShape& shape = {});
/// Equal-mass instance with k f atoms and k g atoms per covariate atom.
DiscreteConditional equal_mass_instance(std::uint64_t seed, int k, int x_atoms = 2);

struct OracleCheckReport {
  int instances = 0;
  int location_scale_instances = 0;
  int exhaustive_instances = 0;
  int sandwich_violations = 0;
  int equality_violations = 0;
  int exhaustive_violations = 0;
  int swap_violations = 0;
  int upper_equality_violations = 0;  // skewed location-scale instances, upper endpoint only
  double max_sandwich_excess = 0.0;    // largest amount by which the ordering fails (<= 0 when it holds)
  double max_equality_gap = 0.0;
  double max_exhaustive_gap = 0.0;
  double tolerance = 1e-10;

  bool ok() const {
    return sandwich_violations == 0 && equality_violations == 0 && exhaustive_violations == 0 &&
           swap_violations == 0 && upper_equality_violations == 0;
  }
};

/// Seeded sandwich, tightness, swap-symmetry and greedy-vs-enumeration checks. Each
/// location-scale index runs one symmetric instance (both endpoints) and one skewed
/// instance (upper endpoint).
OracleCheckReport run_oracle_checks(int instances, int location_scale_instances, std::uint64_t seed,
                                    double tolerance = 1e-10, int exhaustive_instances = 50);

}  // namespace csfusion
