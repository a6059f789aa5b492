#include <gtest/gtest.h>

#include "eci/constraints.hpp"

using namespace eci;

namespace {
Domain grid() { return Domain({{0, 1, 12}, {0, 1, 10}}); }

GridFunction noise(const Domain& d, std::uint64_t seed) {
    Rng rng(seed);
    GridFunction g(d);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = standard_normal(rng);
    return g;
}

ValueConstraint scattered(const Domain& d, std::uint64_t seed, std::size_t count) {
    Rng rng(seed);
    return ValueConstraint(scattered_mask(d, count, rng), noise(d, seed + 100));
}

RegionConstraint two_regions(const Domain& d) {
    RegionMask a(d), b(d);
    for (std::size_t k = 0; k < d.size(); ++k) (k % 3 == 0 ? a : b).set(k, k % 5 != 1);
    return RegionConstraint({{a, 0.7}, {b, -1.3}});
}
} // namespace

TEST(ValueCorrection, ExactOnMask) {
    const auto d = grid();
    const auto c = scattered(d, 1, 30);
    const auto u = correct(noise(d, 2), c);
    for (std::size_t k = 0; k < d.size(); ++k)
        if (c.mask()[k]) EXPECT_EQ(u[k], c.targets()[k]);
    EXPECT_EQ(constraint_error(u, c), 0.0);
}

TEST(ValueCorrection, Locality) {
    const auto d = grid();
    const auto c = scattered(d, 3, 30);
    const auto u = noise(d, 4);
    const auto v = correct(u, c);
    for (std::size_t k = 0; k < d.size(); ++k)
        if (!c.mask()[k]) EXPECT_EQ(v[k], u[k]);
}

TEST(ValueCorrection, Idempotent) {
    const auto d = grid();
    const auto c = scattered(d, 5, 50);
    const auto once = correct(noise(d, 6), c);
    EXPECT_EQ(correct(once, c), once);
}

TEST(ValueCorrection, EmptyMaskIsIdentity) {
    const auto d = grid();
    const auto u = noise(d, 7);
    EXPECT_EQ(correct(u, ValueConstraint(RegionMask(d), GridFunction(d))), u);
}

TEST(ValueConstraint, RejectsNonFiniteTargets) {
    const auto d = grid();
    RegionMask m(d);
    m.set(3);
    GridFunction t(d);
    t[3] = std::nan("");
    EXPECT_THROW(ValueConstraint(m, t), data_error);
}

TEST(RegionCorrection, IntegralsHitTargets) {
    const auto d = grid();
    const auto c = two_regions(d);
    const auto u = correct(noise(d, 8), c);
    for (std::size_t r = 0; r < 2; ++r) {
        const double target = c.regions()[r].target;
        EXPECT_NEAR(riemann_sum(u, c.regions()[r].mask), target, 1e-9 * std::max(1.0, std::abs(target)));
    }
}

TEST(RegionCorrection, UniformShiftInsideRegion) {
    const auto d = grid();
    RegionMask m = slice_mask(d, 1, 4);
    RegionConstraint c({{m, 2.0}});
    const auto u = noise(d, 9);
    const auto v = correct(u, c);
    const double shift = (2.0 - riemann_sum(u, m)) / c.measure(0);
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (m[k])
            EXPECT_NEAR(v[k] - u[k], shift, 1e-12);
        else
            EXPECT_EQ(v[k], u[k]);
    }
}

TEST(RegionCorrection, Idempotent) {
    const auto d = grid();
    const auto c = two_regions(d);
    const auto once = correct(noise(d, 10), c);
    const auto twice = correct(once, c);
    for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(twice[k], once[k], 1e-12);
}

// correct(a u + b w) = a correct(u) + b correct(w) when a + b = 1 (affine maps)
TEST(Correction, AffineCombinationsCommute) {
    const auto d = grid();
    const double a = 0.3, b = 0.7;
    for (const Constraint& c : {Constraint{scattered(d, 11, 40)}, Constraint{two_regions(d)}, Constraint{Identity{}}}) {
        const auto u = noise(d, 12), w = noise(d, 13);
        const auto lhs = correct(lincomb(a, u, b, w), c);
        const auto rhs = lincomb(a, correct(u, c), b, correct(w, c));
        for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(lhs[k], rhs[k], 1e-12);
    }
}

// With zero targets the correction is a linear projection.
TEST(Correction, LinearForHomogeneousTargets) {
    const auto d = grid();
    Rng rng(14);
    const ValueConstraint vc(scattered_mask(d, 25, rng), GridFunction(d));
    RegionMask m = slice_mask(d, 0, 2);
    const RegionConstraint rc({{m, 0.0}});
    for (const Constraint& c : {Constraint{vc}, Constraint{rc}}) {
        const auto u = noise(d, 15), w = noise(d, 16);
        const auto lhs = correct(lincomb(2.0, u, -0.5, w), c);
        const auto rhs = lincomb(2.0, correct(u, c), -0.5, correct(w, c));
        for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(lhs[k], rhs[k], 1e-12);
    }
}

TEST(RegionConstraint, Validation) {
    const auto d = grid();
    EXPECT_THROW(RegionConstraint({}), data_error);
    EXPECT_THROW(RegionConstraint({{RegionMask(d), 1.0}}), data_error);
    const auto m = slice_mask(d, 1, 0);
    EXPECT_THROW(RegionConstraint({{m, 1.0}, {m, 2.0}}), data_error);
    EXPECT_THROW(RegionConstraint({{m, std::nan("")}}), data_error);
}

TEST(RegionConstraint, SinglePointHasUnitWeight) {
    const auto d = grid();
    RegionMask m(d);
    m.set(37);
    RegionConstraint c({{m, 5.0}});
    EXPECT_EQ(c.measure(0), 1.0);
    EXPECT_EQ(correct(GridFunction(d), c)[37], 5.0);
}

TEST(Identity, LeavesInputUntouched) {
    const auto u = noise(grid(), 17);
    EXPECT_EQ(correct(u, Identity{}), u);
    EXPECT_EQ(constraint_error(u, Identity{}), 0.0);
    EXPECT_EQ(constrained_points(Identity{}, grid()).count(), 0u);
}

TEST(ConstraintError, MeanSquaredDeviation) {
    const auto d = grid();
    RegionMask m(d);
    m.set(0);
    m.set(1);
    GridFunction t(d);
    t[0] = 1.0;
    t[1] = 3.0;
    EXPECT_DOUBLE_EQ(constraint_error(GridFunction(d), ValueConstraint(m, t)), 5.0);
}

TEST(Builders, IcBcShapes) {
    const Domain d({{0, 1, 8}, {0, 1, 6}});
    const StokesParams p{2.0, 6.0, 5.0};
    const auto ic = make_ic(d, p), bc = make_bc(d, p), both = make_ic_bc(d, p);
    EXPECT_EQ(ic.mask().count(), 8u);
    EXPECT_EQ(bc.mask().count(), 6u);
    EXPECT_EQ(both.mask().count(), 13u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(ic.targets()[i * 6], stokes_exact(p, d.axis(0).coordinate(i), 0.0));
    for (std::size_t j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(bc.targets()[j], stokes_exact(p, 0.0, d.axis(1).coordinate(j)));
    const std::vector<double> bad(5, 0.0);
    EXPECT_THROW(make_ic(d, std::span<const double>(bad)), data_error);
}

TEST(Builders, ConservationMatchesAnalyticIntegrals) {
    const auto d = family_domain(Family::heat, 64, 8);
    const auto c = make_conservation(d, HeatParams{1.0, 0.2});
    EXPECT_EQ(c.regions().size(), 8u);
    for (const auto& r : c.regions()) EXPECT_EQ(r.target, 0.0);
}

TEST(Builders, ScatteredMaskIsDistinct) {
    Rng rng(3);
    EXPECT_EQ(scattered_mask(grid(), 100, rng).count(), 100u);
    EXPECT_THROW(scattered_mask(grid(), 1000, rng), data_error);
}
