#include <gtest/gtest.h>

#include <cmath>

#include "eci/noise.hpp"

using namespace eci;

TEST(Matern, ClosedForms) {
    EXPECT_EQ(matern(Smoothness::three_halves, 0.0), 1.0);
    EXPECT_NEAR(matern(Smoothness::three_halves, 20.0), 3.2177e-14, 1e-17);
    EXPECT_NEAR(matern(Smoothness::three_halves, 30.0), 1.4367e-21, 1e-24);
    EXPECT_NEAR(matern(Smoothness::half, 1.0), std::exp(-1.0), 1e-15);
    const double a = std::sqrt(5.0);
    EXPECT_NEAR(matern(Smoothness::five_halves, 1.0), (1 + a + a * a / 3) * std::exp(-a), 1e-15);
}

TEST(Matern, MonotoneDecreasing) {
    for (auto s : {Smoothness::half, Smoothness::three_halves, Smoothness::five_halves}) {
        double prev = 2.0;
        for (double r = 0.0; r < 10.0; r += 0.25) {
            const double v = matern(s, r);
            EXPECT_LT(v, prev);
            prev = v;
        }
    }
}

TEST(Covariance, SymmetricWithVarianceDiagonal) {
    const Domain d({{0, 1, 6}, {0, 1, 5}});
    NoiseSpec s;
    s.variance = 2.0;
    s.length = 0.3;
    auto K = covariance_matrix(normalized_coordinates(d), s);
    EXPECT_TRUE(K.isApprox(K.transpose()));
    for (Eigen::Index i = 0; i < K.rows(); ++i) EXPECT_NEAR(K(i, i), 2.0, 1e-9);
}

TEST(Covariance, WhiteHasNoMatrix) {
    NoiseSpec s;
    s.kind = NoiseKind::white;
    EXPECT_THROW(covariance_matrix({{0.0}}, s), data_error);
}

TEST(NoiseSpec, Validation) {
    NoiseSpec s;
    s.length = 0;
    EXPECT_THROW(s.validate(), data_error);
    s = {};
    s.variance = -1;
    EXPECT_THROW(s.validate(), data_error);
    s = {};
    s.jitter = 1e-2;
    EXPECT_THROW(s.validate(), data_error);
    EXPECT_THROW(parse_noise_kind("pink"), data_error);
    EXPECT_EQ(parse_smoothness("five_halves"), Smoothness::five_halves);
}

TEST(Sampler, FactorReproducesCovariance) {
    const Domain d({{0, 1, 8}, {0, 1, 8}});
    NoiseSpec s;
    s.length = 0.2;
    NoiseSampler ns(d, s);
    const auto& L = ns.cholesky_factor();
    Eigen::MatrixXd K = covariance_matrix(normalized_coordinates(d), s, ns.jitter_used());
    EXPECT_LT((L * L.transpose() - K).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Sampler, SmallLengthEscalatesJitterAndStaysFinite) {
    const Domain d({{0, 1, 32}, {0, 1, 32}});
    NoiseSpec s;
    s.length = 2.0;  // nearly rank deficient
    NoiseSampler ns(d, s);
    EXPECT_GE(ns.jitter_used(), s.jitter);
    EXPECT_LE(ns.jitter_used(), 1e-4 * (1 + 1e-9));
    Rng rng(1);
    EXPECT_TRUE(ns.draw(rng).all_finite());
}

TEST(Sampler, DeterministicPerSeed) {
    const Domain d({{0, 1, 10}, {0, 1, 10}});
    NoiseSampler ns(d, NoiseSpec{});
    Rng a(42), b(42), c(43);
    const auto x = ns.draw(a);
    EXPECT_EQ(x, ns.draw(b));
    EXPECT_NE(x, ns.draw(c));
}

TEST(Sampler, EmpiricalCovarianceMatchesKernel) {
    const Domain d({{0, 1, 6}, {0, 1, 6}});
    NoiseSpec s;
    s.length = 0.25;
    NoiseSampler ns(d, s);
    const auto n = static_cast<Eigen::Index>(d.size());
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
    Rng rng(9);
    const int draws = 20000;
    for (int k = 0; k < draws; ++k) {
        auto g = ns.draw(rng);
        Eigen::Map<const Eigen::VectorXd> v(g.data().data(), n);
        C.noalias() += v * v.transpose();
    }
    C /= draws;
    const auto K = covariance_matrix(normalized_coordinates(d), s);
    // standard error of a covariance entry is about sqrt(2 / draws) ~ 0.01
    EXPECT_LT((C - K).cwiseAbs().maxCoeff(), 0.06);
}

TEST(Sampler, WhiteMomentsAndNoLimit) {
    const Domain d({{0, 1, 100}, {0, 1, 100}});
    NoiseSpec s;
    s.kind = NoiseKind::white;
    s.variance = 4.0;
    NoiseSampler ns(d, s);
    Rng rng(3);
    auto g = ns.draw(rng);
    double m = 0, v = 0;
    for (double x : g.data()) m += x;
    m /= g.size();
    for (double x : g.data()) v += (x - m) * (x - m);
    v /= g.size();
    EXPECT_NEAR(m, 0.0, 0.1);
    EXPECT_NEAR(v, 4.0, 0.2);
}

TEST(Sampler, TooLargeForMatern) {
    EXPECT_THROW(NoiseSampler(Domain({{0, 1, 65}, {0, 1, 64}}), NoiseSpec{}), data_error);
    EXPECT_THROW(NoiseSampler(Domain({{0, 1, 4}, {0, 1, 4}, {0, 1, 4}}), NoiseSpec{}), data_error);
}
