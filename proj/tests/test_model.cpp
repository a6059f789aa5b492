#include <gtest/gtest.h>

#include <cmath>

#include "eci/model.hpp"
#include "eci/noise.hpp"
#include "eci/train.hpp"

using namespace eci;

namespace {
Architecture tiny() {
    Architecture a;
    a.layers = 2;
    a.width = 4;
    a.modes0 = a.modes1 = 4;
    a.projection = 8;
    a.time_embed = 6;
    return a;
}

Domain grid16() { return Domain({{0, 1, 16}, {0, 1, 16}}); }

GridFunction random_field(const Domain& d, Rng& rng, double shift = 0.0) {
    GridFunction g(d);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = shift + standard_normal(rng);
    return g;
}
} // namespace

TEST(Gelu, MatchesTanhForm) {
    detail::RMat z(1, 9);
    for (int i = 0; i < 9; ++i) z(0, i) = -8.0 + 2.0 * i;
    auto g = detail::gelu(z);
    for (int i = 0; i < 9; ++i) {
        const double x = z(0, i);
        const double ref = 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x)));
        EXPECT_NEAR(g(0, i), ref, 1e-12 * std::max(1.0, std::abs(x)));
    }
}

TEST(Gelu, BackwardMatchesFiniteDifference) {
    detail::RMat z(1, 7), ones = detail::RMat::Ones(1, 7);
    for (int i = 0; i < 7; ++i) z(0, i) = -3.0 + i;
    detail::RMat g = ones;
    detail::gelu_backward(z, g);
    for (int i = 0; i < 7; ++i) {
        detail::RMat p = z, m = z;
        p(0, i) += 1e-6;
        m(0, i) -= 1e-6;
        const double fd = (detail::gelu(p)(0, i) - detail::gelu(m)(0, i)) / 2e-6;
        EXPECT_NEAR(g(0, i), fd, 1e-7);
    }
}

TEST(TimeEmbedding, SinCosPairs) {
    auto e = time_embedding(0.0, 6, 1000.0);
    ASSERT_EQ(e.size(), 6u);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(e[j], 0.0);
        EXPECT_EQ(e[3 + j], 1.0);
    }
}

TEST(Model, DeskParameterCount) {
    SpectralVectorField m(Architecture{}, Domain({{0, 1, 32}, {0, 1, 32}}));
    EXPECT_EQ(m.parameter_count(), 529217u);
}

TEST(Model, RejectsCoarseGrid) {
    EXPECT_THROW(SpectralVectorField(Architecture{}, Domain({{0, 1, 12}, {0, 1, 32}})), data_error);
    Architecture bad;
    bad.time_embed = 3;
    EXPECT_THROW(bad.validate(), data_error);
}

TEST(Model, ForwardDeterministicAndFinite) {
    SpectralVectorField m(tiny(), grid16());
    m.init(5);
    Rng rng(1);
    auto u = random_field(grid16(), rng);
    auto a = m(u, 0.3), b = m(u, 0.3);
    EXPECT_EQ(a, b);
    EXPECT_TRUE(a.all_finite());
    EXPECT_NE(a, m(u, 0.7));
}

TEST(Model, InitDependsOnSeed) {
    SpectralVectorField a(tiny(), grid16()), b(tiny(), grid16());
    a.init(1);
    b.init(1);
    EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
    b.init(2);
    EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
}

TEST(Model, GradientMatchesFiniteDifferences) {
    SpectralVectorField m(tiny(), grid16());
    m.init(3);
    Rng rng(5);
    for (auto& p : m.parameters()) p += 0.05 * standard_normal(rng);
    std::vector<FlowSample> batch;
    for (int b = 0; b < 2; ++b) batch.push_back({random_field(grid16(), rng), random_field(grid16(), rng, 0.5), 0.3 + 0.4 * b});
    const auto g = gradient(m, batch);
    auto loss = [&] {
        double s = 0;
        for (auto& b : batch) s += ffm_loss(m, b.u0, b.u1, b.t);
        return s / batch.size();
    };
    const auto& o = m.offsets();
    // one index from every parameter block plus a stride through the rest
    std::vector<std::size_t> idx{o.lift_w, o.lift_b, o.spec_w[0] + 7, o.spec_w[1] + 3, o.pw_w[0], o.pw_b[1],
                                 o.proj1_w + 2, o.proj1_b, o.proj2_w + 1, o.proj2_b};
    for (std::size_t i = 0; i < m.parameter_count(); i += 97) idx.push_back(i);
    for (auto i : idx) {
        const double th = m.parameters()[i], h = 1e-5;
        m.parameters()[i] = th + h;
        const double lp = loss();
        m.parameters()[i] = th - h;
        const double lm = loss();
        m.parameters()[i] = th;
        const double fd = (lp - lm) / (2 * h);
        EXPECT_NEAR(g[i], fd, 1e-6 + 1e-4 * std::abs(fd)) << "param " << i;
    }
}

TEST(Model, GradientIndependentOfWorkers) {
    SpectralVectorField m(tiny(), grid16());
    m.init(8);
    Rng rng(2);
    std::vector<FlowSample> batch;
    for (int b = 0; b < 4; ++b) batch.push_back({random_field(grid16(), rng), random_field(grid16(), rng), 0.25 * b});
    const auto a = loss_and_gradient(m, batch, 1), b = loss_and_gradient(m, batch, 3);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(a.grad, b.grad);
}

namespace {
struct Zero {
    GridFunction operator()(const GridFunction& u, double) const { return GridFunction(u.domain(), 0.0); }
};
struct Exact {
    GridFunction target;
    GridFunction operator()(const GridFunction&, double) const { return target; }
};
} // namespace

TEST(FfmLoss, ZeroForExactVelocity) {
    Rng rng(4);
    auto u0 = random_field(grid16(), rng), u1 = random_field(grid16(), rng);
    for (double t : {0.0, 0.5, 1.0}) EXPECT_EQ(ffm_loss(Exact{u1 - u0}, u0, u1, t), 0.0);
}

TEST(FfmLoss, ZeroFieldGivesDisplacementEnergy) {
    Rng rng(6);
    auto u0 = random_field(grid16(), rng), u1 = random_field(grid16(), rng);
    EXPECT_DOUBLE_EQ(ffm_loss(Zero{}, u0, u1, 0.4), mse(u1, u0));
    EXPECT_GE(ffm_loss(Zero{}, u0, u1, 0.4), 0.0);
}

TEST(FfmLoss, InterpolationEndpoints) {
    Rng rng(7);
    auto u0 = random_field(grid16(), rng), u1 = random_field(grid16(), rng);
    EXPECT_EQ(interpolate_path(u0, u1, 0.0), u0);
    EXPECT_EQ(interpolate_path(u0, u1, 1.0), u1);
}

TEST(Train, LossDecreasesOnToyData) {
    const Domain d = grid16();
    std::vector<GridFunction> data;
    for (int k = 0; k < 4; ++k)
        data.push_back(GridFunction::from_function(d, [&](auto c) { return std::sin(3 * c[0] + k) * c[1]; }));
    SpectralVectorField m(tiny(), d, NoiseSpec{NoiseKind::white, 0.1, 1.0});
    m.init(1);
    TrainConfig cfg;
    cfg.iterations = 150;
    cfg.batch_size = 4;
    cfg.learning_rate = 3e-3;
    cfg.seed = 2;
    NoiseSampler ns(d, m.noise_spec());
    auto rep = train(m, data, ns, cfg, 1);
    ASSERT_EQ(rep.losses.size(), 150u);
    double head = 0, tail = 0;
    for (int i = 0; i < 20; ++i) {
        head += rep.losses[i];
        tail += rep.losses[130 + i];
    }
    EXPECT_LT(tail, 0.8 * head);
}

TEST(Train, DeterministicForSeed) {
    const Domain d = grid16();
    std::vector<GridFunction> data{GridFunction(d, 1.0), GridFunction(d, -1.0)};
    auto run = [&](std::size_t workers) {
        SpectralVectorField m(tiny(), d, NoiseSpec{NoiseKind::white, 0.1, 1.0});
        m.init(1);
        TrainConfig cfg;
        cfg.iterations = 5;
        cfg.batch_size = 2;
        cfg.seed = 9;
        train(m, data, NoiseSampler(d, m.noise_spec()), cfg, workers);
        return std::vector<double>(m.parameters().begin(), m.parameters().end());
    };
    EXPECT_EQ(run(1), run(2));
}
