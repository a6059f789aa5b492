#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "eci/constraints.hpp"
#include "eci/errors.hpp"
#include "eci/grid.hpp"
#include "eci/model.hpp"
#include "eci/noise.hpp"
#include "eci/parallel.hpp"
#include "eci/rng.hpp"

namespace eci {

enum class Method { euler, eci, final_projection };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::euler: return "euler";
        case Method::eci: return "eci";
        case Method::final_projection: return "final_projection";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "euler") return Method::euler;
    if (s == "eci") return Method::eci;
    if (s == "final_projection") return Method::final_projection;
    throw usage_error("unknown sampling method '" + s + "' (expected euler, eci or final_projection)");
}

struct SamplerConfig {
    std::size_t euler_steps = 100;               // N
    std::size_t mixing = 5;                      // M
    std::optional<std::size_t> resample = 1;     // R; nullopt keeps the first noise draw
    std::uint64_t seed = 0;
    Method method = Method::eci;

    void validate() const {
        require(euler_steps >= 1, "euler_steps must be >= 1");
        require(mixing >= 1, "mixing iterations must be >= 1");
        require(!resample || *resample >= 1, "resample interval must be >= 1");
    }
};

namespace detail {
inline void check_finite(const GridFunction& u, const char* where, std::size_t step) {
    if (!u.all_finite())
        throw numeric_error(std::string(where) + ": non-finite values at step " + std::to_string(step));
}
} // namespace detail

// u <- u + v(u, i/N) / N for i = 0..N-1.
template <VectorField F>
GridFunction euler_sample(const F& field, const GridFunction& u0, std::size_t N) {
    require(N >= 1, "euler_steps must be >= 1");
    GridFunction u = u0;
    const double dt = 1.0 / static_cast<double>(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(N);
        const GridFunction v = field(u, t);
        require_same_domain(u.domain(), v.domain(), "euler_sample");
        for (std::size_t k = 0; k < u.size(); ++k) u[k] += dt * v[k];
        detail::check_finite(u, "euler_sample", i);
    }
    return u;
}

// Extrapolate to t = 1, correct, interpolate back to t' with noise u0.
template <VectorField F>
GridFunction eci_step(const F& field, const Constraint& c, const GridFunction& ut, double t, double t_prime,
                      const GridFunction& u0) {
    require(t >= 0.0 && t <= 1.0 && t_prime >= 0.0 && t_prime <= 1.0, "eci_step: times must lie in [0, 1]");
    if (t_prime < t) throw data_error("eci_step: t' must not be smaller than t");
    require_same_domain(ut.domain(), u0.domain(), "eci_step");
    const GridFunction v = field(ut, t);
    require_same_domain(ut.domain(), v.domain(), "eci_step");
    GridFunction u1(ut.domain());
    for (std::size_t k = 0; k < u1.size(); ++k) u1[k] = ut[k] + (1.0 - t) * v[k];
    const GridFunction u1c = correct(u1, c);
    return lincomb(1.0 - t_prime, u0, t_prime, u1c);
}

// Per Euler iteration: M - 1 mixing steps at t, then one step to t + 1/N.
// The interpolation noise is redrawn before iteration i when R divides i
// (i > 0); without R the initial draw is used throughout.
template <VectorField F>
GridFunction eci_sample(const F& field, const Constraint& c, const NoiseSampler& noise, const SamplerConfig& cfg,
                        Rng& rng) {
    cfg.validate();
    const std::size_t N = cfg.euler_steps;
    GridFunction u0 = noise.draw(rng);
    GridFunction u = u0;
    for (std::size_t i = 0; i < N; ++i) {
        if (cfg.resample && i > 0 && i % *cfg.resample == 0) u0 = noise.draw(rng);
        const double t = static_cast<double>(i) / static_cast<double>(N);
        const double t_next = static_cast<double>(i + 1) / static_cast<double>(N);
        for (std::size_t j = 0; j + 1 < cfg.mixing; ++j) u = eci_step(field, c, u, t, t, u0);
        u = eci_step(field, c, u, t, t_next, u0);
        detail::check_finite(u, "eci_sample", i);
    }
    return u;
}

template <VectorField F>
GridFunction eci_sample(const F& field, const Constraint& c, const Domain& domain, const NoiseSpec& spec,
                        const SamplerConfig& cfg, Rng& rng) {
    return eci_sample(field, c, NoiseSampler(domain, spec), cfg, rng);
}

// Unconstrained Euler, then a single correction of the final state.
template <VectorField F>
GridFunction final_projection_sample(const F& field, const Constraint& c, const NoiseSampler& noise, std::size_t N,
                                     Rng& rng) {
    return correct(euler_sample(field, noise.draw(rng), N), c);
}

template <VectorField F>
GridFunction final_projection_sample(const F& field, const Constraint& c, const Domain& domain,
                                     const NoiseSpec& spec, std::size_t N, Rng& rng) {
    return final_projection_sample(field, c, NoiseSampler(domain, spec), N, rng);
}

struct SampleBatchReport {
    std::vector<double> ce;
    std::vector<std::uint64_t> noise_seeds;
    double wall_seconds = 0.0;
    SamplerConfig config;
};

// Sample i uses the stream derive_rng(cfg.seed, i), so results do not depend
// on the worker count.
template <VectorField F>
std::pair<std::vector<GridFunction>, SampleBatchReport> sample_batch(const F& field, const Constraint& c,
                                                                     const NoiseSampler& noise,
                                                                     const SamplerConfig& cfg, std::size_t n,
                                                                     std::size_t workers = worker_count()) {
    cfg.validate();
    require(n >= 1, "sample_batch needs n >= 1");
    const auto start = std::chrono::steady_clock::now();
    std::vector<GridFunction> out(n);
    SampleBatchReport rep;
    rep.config = cfg;
    rep.ce.assign(n, 0.0);
    rep.noise_seeds.resize(n);
    for (std::size_t i = 0; i < n; ++i) rep.noise_seeds[i] = derive_seed(cfg.seed, i);
    parallel_for(
        n,
        [&](std::size_t i) {
            Rng rng(rep.noise_seeds[i]);
            switch (cfg.method) {
                case Method::euler: out[i] = euler_sample(field, noise.draw(rng), cfg.euler_steps); break;
                case Method::eci: out[i] = eci_sample(field, c, noise, cfg, rng); break;
                case Method::final_projection:
                    out[i] = final_projection_sample(field, c, noise, cfg.euler_steps, rng);
                    break;
            }
            rep.ce[i] = constraint_error(out[i], c);
        },
        workers);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(out), std::move(rep)};
}

} // namespace eci
