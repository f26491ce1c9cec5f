#include "csfusion/oracle.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace csfusion;
using testutil::expect_error;

namespace {

DiscreteConditional single(std::vector<Atom> f, std::vector<Atom> g) {
  return DiscreteConditional{{CovariateAtom{1.0, std::move(f), std::move(g)}}};
}

std::vector<Atom> uniform(std::initializer_list<double> values) {
  std::vector<Atom> out;
  for (double v : values) out.push_back({v, 1.0 / static_cast<double>(values.size())});
  return out;
}

}  // namespace

TEST(TightBounds, PointMasses) {
  const auto dc = single({{2.0, 1.0}}, {{-3.0, 1.0}});
  const Bounds t = tight_bounds_discrete(dc);
  EXPECT_EQ(t.lower, -6.0);
  EXPECT_EQ(t.upper, -6.0);
  const Bounds cs = cs_bounds_discrete(dc);
  EXPECT_EQ(cs.lower, -6.0);
  EXPECT_EQ(cs.upper, -6.0);
}

TEST(TightBounds, TwoByTwoEnumeration) {
  const auto dc = single(uniform({1.0, 3.0}), uniform({0.0, 1.0}));
  const Bounds t = tight_bounds_discrete(dc);
  EXPECT_NEAR(t.lower, 0.5, 1e-15);
  EXPECT_NEAR(t.upper, 1.5, 1e-15);
  const Bounds e = tight_bounds_exhaustive(dc);
  EXPECT_NEAR(e.lower, 0.5, 1e-15);
  EXPECT_NEAR(e.upper, 1.5, 1e-15);
}

TEST(TightBounds, SymmetricSigns) {
  const auto dc = single(uniform({-1.0, 1.0}), uniform({-1.0, 1.0}));
  const Bounds t = tight_bounds_discrete(dc);
  EXPECT_NEAR(t.lower, -1.0, 1e-15);
  EXPECT_NEAR(t.upper, 1.0, 1e-15);
}

TEST(TightBounds, UnequalMasses) {
  // f: 0 w.p. 0.3, 1 w.p. 0.7; g: 0 w.p. 0.6, 2 w.p. 0.4.
  // Comonotone: P(f=1, g=2) = 0.4 -> 0.8. Antitone: P(f=1, g=2) = max(0, 0.7+0.4-1) = 0.1 -> 0.2.
  const auto dc = single({{0.0, 0.3}, {1.0, 0.7}}, {{2.0, 0.4}, {0.0, 0.6}});
  const Bounds t = tight_bounds_discrete(dc);
  EXPECT_NEAR(t.lower, 0.2, 1e-15);
  EXPECT_NEAR(t.upper, 0.8, 1e-15);
}

TEST(CsBounds, LocationScaleEqualsTight) {
  const auto dc = single(uniform({1.0, 3.0}), uniform({0.0, 1.0}));
  const Bounds cs = cs_bounds_discrete(dc);
  EXPECT_NEAR(cs.lower, 0.5, 1e-15);
  EXPECT_NEAR(cs.upper, 1.5, 1e-15);
}

TEST(CsBounds, StrictlyContainsTightOffFamily) {
  const auto dc = single(uniform({0.0, 1.0, 10.0}), uniform({0.0, 1.0, 2.0}));
  const Bounds t = tight_bounds_discrete(dc);
  const Bounds cs = cs_bounds_discrete(dc);
  EXPECT_LT(cs.lower, t.lower - 1e-6);
  EXPECT_GT(cs.upper, t.upper + 1e-6);
}

TEST(CsBounds, ZeroVariancePointValue) {
  DiscreteConditional dc{{CovariateAtom{0.3, {{2.0, 1.0}}, uniform({0.0, 5.0})},
                          CovariateAtom{0.7, {{-1.0, 1.0}}, uniform({1.0, 2.0, 6.0})}}};
  const Bounds cs = cs_bounds_discrete(dc);
  const double expected = 0.3 * 2.0 * 2.5 + 0.7 * -1.0 * 3.0;
  EXPECT_NEAR(cs.lower, expected, 1e-14);
  EXPECT_NEAR(cs.upper, expected, 1e-14);
}

TEST(CsBounds, SkewedBernoulliLowerNotTight) {
  const auto dc = single({{0.0, 0.9}, {1.0, 0.1}}, {{0.0, 0.9}, {1.0, 0.1}});
  const Bounds t = tight_bounds_discrete(dc);
  const Bounds cs = cs_bounds_discrete(dc);
  EXPECT_NEAR(t.lower, 0.0, 1e-15);
  EXPECT_NEAR(cs.lower, -0.08, 1e-14);
  EXPECT_NEAR(t.upper, 0.1, 1e-15);
  EXPECT_NEAR(cs.upper, 0.1, 1e-14);
}

TEST(Oracle, SandwichOnRandomInstances) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto dc = random_discrete_conditional(s);
    dc.validate();
    const Bounds t = tight_bounds_discrete(dc);
    const Bounds cs = cs_bounds_discrete(dc);
    EXPECT_LE(cs.lower, t.lower + 1e-10) << s;
    EXPECT_LE(t.lower, t.upper + 1e-10) << s;
    EXPECT_LE(t.upper, cs.upper + 1e-10) << s;
  }
}

TEST(Oracle, LocationScaleEquality) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto dc = location_scale_instance(s);
    const Bounds t = tight_bounds_discrete(dc);
    const Bounds cs = cs_bounds_discrete(dc);
    EXPECT_NEAR(cs.lower, t.lower, 1e-10) << s;
    EXPECT_NEAR(cs.upper, t.upper, 1e-10) << s;
    const auto sk = skewed_location_scale_instance(s);
    EXPECT_NEAR(cs_bounds_discrete(sk).upper, tight_bounds_discrete(sk).upper, 1e-10) << s;
  }
}

TEST(Oracle, SwapSymmetry) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto dc = random_discrete_conditional(1000 + s);
    const auto sw = dc.swapped();
    EXPECT_NEAR(tight_bounds_discrete(dc).lower, tight_bounds_discrete(sw).lower, 1e-12);
    EXPECT_NEAR(tight_bounds_discrete(dc).upper, tight_bounds_discrete(sw).upper, 1e-12);
    EXPECT_NEAR(cs_bounds_discrete(dc).lower, cs_bounds_discrete(sw).lower, 1e-12);
    EXPECT_NEAR(cs_bounds_discrete(dc).upper, cs_bounds_discrete(sw).upper, 1e-12);
  }
}

TEST(Oracle, GreedyMatchesExhaustive) {
  for (int k = 1; k <= 4; ++k) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto dc = equal_mass_instance(s, k, 3);
      const Bounds g = tight_bounds_discrete(dc);
      const Bounds e = tight_bounds_exhaustive(dc);
      EXPECT_NEAR(g.lower, e.lower, 1e-12);
      EXPECT_NEAR(g.upper, e.upper, 1e-12);
    }
  }
}

TEST(Oracle, ExhaustiveRejectsLargeOrUnequal) {
  expect_error(ErrorCode::InvalidArgument, [] { tight_bounds_exhaustive(equal_mass_instance(1, 5)); });
  expect_error(ErrorCode::InvalidArgument,
               [] { tight_bounds_exhaustive(single({{0.0, 0.3}, {1.0, 0.7}}, {{0.0, 0.3}, {1.0, 0.7}})); });
}

TEST(Oracle, MassMismatch) {
  expect_error(ErrorCode::MassMismatch, [] { single({{0.0, 0.5}}, {{1.0, 1.0}}).validate(); });
  DiscreteConditional dc{{CovariateAtom{0.5, {{0.0, 1.0}}, {{1.0, 1.0}}}}};
  expect_error(ErrorCode::MassMismatch, [&] { dc.validate(); });
  expect_error(ErrorCode::MassMismatch, [] { single({{0.0, 1.5}, {1.0, -0.5}}, {{1.0, 1.0}}).validate(); });
  expect_error(ErrorCode::MassMismatch, [] { tight_bounds_discrete(single({{0.0, 0.5}}, {{1.0, 1.0}})); });
}

TEST(Oracle, CheckReport) {
  const auto rep = run_oracle_checks(200, 50, 1);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.instances, 200);
  EXPECT_EQ(rep.location_scale_instances, 50);
  EXPECT_LE(rep.max_sandwich_excess, 1e-10);
  EXPECT_LE(rep.max_equality_gap, 1e-10);
  expect_error(ErrorCode::InvalidArgument, [] { run_oracle_checks(0, 0, 1); });
}
