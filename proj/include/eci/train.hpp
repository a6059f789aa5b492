#pragma once

#include <chrono>
#include <cmath>
#include <span>
#include <vector>

#include "eci/errors.hpp"
#include "eci/model.hpp"
#include "eci/noise.hpp"
#include "eci/parallel.hpp"
#include "eci/rng.hpp"

namespace eci {

struct TrainConfig {
    double learning_rate = 3e-4;
    std::size_t iterations = 2000;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t log_interval = 50;

    void validate() const {
        require(learning_rate > 0.0, "learning rate must be positive");
        require(batch_size >= 1, "batch size must be >= 1");
        require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must lie in [0, 1)");
        require(epsilon > 0.0, "Adam epsilon must be positive");
        require(log_interval >= 1, "log interval must be >= 1");
    }
};

struct TrainReport {
    std::vector<double> losses;      // one per iteration
    std::vector<double> loss_curve;  // mean over each log interval
    double final_loss = 0.0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    TrainConfig config;
};

// Adam with a constant learning rate and no weight decay.
class Adam {
public:
    Adam(std::size_t n, const TrainConfig& cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad) {
        require(params.size() == m_.size() && grad.size() == m_.size(), "Adam: size mismatch");
        ++t_;
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        const double lr = cfg_.learning_rate;
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
            v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
            params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
        }
    }

    std::size_t steps() const { return t_; }

private:
    TrainConfig cfg_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

template <typename F>
concept TrainableField = DifferentiableField<F> && requires(F& f) {
    { f.parameters() } -> std::convertible_to<std::span<double>>;
};

// Each step draws batch_size triples (data index, t ~ U[0,1], u0 ~ noise)
// from the stream derive_rng(seed, iteration).
template <TrainableField F>
TrainReport train(F& model, const std::vector<GridFunction>& data, const NoiseSampler& noise,
                  const TrainConfig& cfg, std::size_t workers = worker_count()) {
    cfg.validate();
    require(!data.empty(), "training needs a nonempty dataset");
    for (const auto& f : data) require_same_domain(noise.domain(), f.domain(), "train");
    const auto start = std::chrono::steady_clock::now();
    TrainReport rep;
    rep.seed = cfg.seed;
    rep.config = cfg;
    Adam opt(model.parameter_count(), cfg);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    double interval_sum = 0.0;
    std::size_t interval_n = 0;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        Rng rng = derive_rng(cfg.seed, it, 0x7a1);
        std::vector<FlowSample> batch;
        batch.reserve(cfg.batch_size);
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const std::size_t idx = pick(rng);
            const double t = uniform(rng, 0.0, 1.0);
            batch.push_back({noise.draw(rng), data[idx], t});
        }
        LossGradient lg;
        try {
            lg = loss_and_gradient(model, std::span<const FlowSample>(batch), workers);
        } catch (const numeric_error& e) {
            throw numeric_error("training diverged at iteration " + std::to_string(it) + ": " + e.what());
        }
        if (!std::isfinite(lg.loss))
            throw numeric_error("training diverged at iteration " + std::to_string(it) + " (loss is not finite)");
        opt.step(model.parameters(), lg.grad);
        rep.losses.push_back(lg.loss);
        interval_sum += lg.loss;
        if (++interval_n == cfg.log_interval || it + 1 == cfg.iterations) {
            rep.loss_curve.push_back(interval_sum / static_cast<double>(interval_n));
            interval_sum = 0.0;
            interval_n = 0;
        }
    }
    rep.final_loss = rep.losses.empty() ? 0.0 : rep.losses.back();
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

} // namespace eci
