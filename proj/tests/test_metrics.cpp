#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "eci/metrics.hpp"

using namespace eci;

namespace {
Domain grid() { return Domain({{0, 1, 4}, {0, 1, 4}}); }

Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index dim, double mean, double sd, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd X(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) X(i, j) = mean + sd * standard_normal(rng);
    return X;
}
} // namespace

TEST(PointwiseStats, PopulationStd) {
    SampleSet s{GridFunction(grid(), 1.0), GridFunction(grid(), 3.0)};
    const auto st = pointwise_stats(s);
    EXPECT_EQ(st.mean[0], 2.0);
    EXPECT_EQ(st.std[5], 1.0);
    EXPECT_THROW(pointwise_stats({GridFunction(grid())}), data_error);
}

TEST(MmseSmse, IdenticalSetsAreZero) {
    SampleSet s{GridFunction(grid(), 1.0), GridFunction(grid(), -2.0), GridFunction(grid(), 0.5)};
    const auto e = mmse_smse(s, s);
    EXPECT_EQ(e.mmse, 0.0);
    EXPECT_EQ(e.smse, 0.0);
}

TEST(MmseSmse, ShiftedSet) {
    SampleSet a{GridFunction(grid(), 1.0), GridFunction(grid(), 3.0)};
    SampleSet b{GridFunction(grid(), 2.0), GridFunction(grid(), 6.0)};
    const auto e = mmse_smse(a, b);
    EXPECT_DOUBLE_EQ(e.mmse, 4.0);
    EXPECT_DOUBLE_EQ(e.smse, 1.0);
}

TEST(LogLikelihood, StandardNormalAtMode) {
    const GridFunction z(grid(), 0.0), one(grid(), 1.0);
    EXPECT_NEAR(log_likelihood(z, z, one), -0.91893853320467274, 1e-9);
    EXPECT_NEAR(log_likelihood(one, z, one), -1.41893853320467274, 1e-9);
}

TEST(LogLikelihood, StdFloor) {
    const GridFunction z(grid(), 0.0);
    const double expect = -std::log(kStdFloor) - 0.5 * std::log(2 * std::numbers::pi);
    EXPECT_NEAR(log_likelihood(z, z, z), expect, 1e-9);
}

TEST(Frechet, MeanShiftClosedForm) {
    const auto a = gaussian(5000, 3, 0.0, 1.0, 1), b = gaussian(5000, 3, 1.0, 1.0, 2);
    // ||mu||^2 = 3
    EXPECT_NEAR(frechet_distance(a, b), 3.0, 0.15);
}

TEST(Frechet, ScaleClosedForm) {
    const auto a = gaussian(5000, 2, 0.0, 1.0, 3), b = gaussian(5000, 2, 0.0, 2.0, 4);
    // sum over dims of (s1 - s2)^2 = 2
    EXPECT_NEAR(frechet_distance(a, b), 2.0, 0.1);
}

TEST(Frechet, SymmetricAndNonnegative) {
    const auto a = gaussian(50, 4, 0.0, 1.0, 5), b = gaussian(60, 4, 0.2, 1.5, 6);
    EXPECT_EQ(frechet_distance(a, b), frechet_distance(b, a));
    EXPECT_GE(frechet_distance(a, a), 0.0);
    EXPECT_LT(frechet_distance(a, a), 1e-6);
}

TEST(Frechet, RejectsMismatchedShapes) {
    EXPECT_THROW(frechet_distance(gaussian(5, 2, 0, 1, 1), gaussian(5, 3, 0, 1, 1)), data_error);
    EXPECT_THROW(frechet_distance(gaussian(1, 2, 0, 1, 1), gaussian(5, 2, 0, 1, 1)), data_error);
}

TEST(Features, ShapeAndConstantField) {
    const Domain d({{0, 1, 16}, {0, 1, 16}});
    const auto X = default_features({GridFunction(d, 2.0), GridFunction(d, -1.0)});
    ASSERT_EQ(X.rows(), 2);
    ASSERT_EQ(X.cols(), 68);
    for (Eigen::Index c = 0; c < 64; ++c) EXPECT_DOUBLE_EQ(X(0, c), 2.0);
    EXPECT_DOUBLE_EQ(X(1, 64), -1.0);
    EXPECT_DOUBLE_EQ(X(1, 65), 0.0);
}

TEST(Evaluate, ReportFields) {
    const Domain d({{0, 1, 8}, {0, 1, 8}});
    Rng rng(1);
    SampleSet g, r;
    for (int i = 0; i < 10; ++i) {
        GridFunction a(d), b(d);
        for (std::size_t k = 0; k < d.size(); ++k) {
            a[k] = standard_normal(rng);
            b[k] = standard_normal(rng);
        }
        g.push_back(a);
        r.push_back(b);
    }
    const auto rep = evaluate(g, r, Identity{});
    EXPECT_EQ(rep.ce, 0.0);
    EXPECT_FALSE(rep.ll.has_value());
    EXPECT_EQ(rep.n_generated, 10u);
    EXPECT_TRUE(evaluate(g, r, Identity{}, r[0]).ll.has_value());
    EXPECT_THROW(evaluate(g, {GridFunction(Domain({{0, 1, 4}, {0, 1, 4}}))}, Identity{}), std::exception);
}
