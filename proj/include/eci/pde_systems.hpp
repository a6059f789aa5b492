#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "eci/errors.hpp"
#include "eci/grid.hpp"
#include "eci/parallel.hpp"
#include "eci/rng.hpp"

namespace eci {

enum class Family { stokes, heat, pme, stefan };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::stokes: return "stokes";
        case Family::heat: return "heat";
        case Family::pme: return "pme";
        case Family::stefan: return "stefan";
    }
    return "?";
}

inline Family parse_family(const std::string& s) {
    if (s == "stokes") return Family::stokes;
    if (s == "heat") return Family::heat;
    if (s == "pme") return Family::pme;
    if (s == "stefan") return Family::stefan;
    throw data_error("unsupported PDE family '" + s + "' (expected stokes, heat, pme or stefan)");
}

// u_t = nu u_xx on [0,1]^2 with nu = omega / (2 k^2).
struct StokesParams {
    double A = 2.0;
    double omega = 6.0;
    double k = 5.0;
    double viscosity() const { return omega / (2.0 * k * k); }
};

// u_t = alpha u_xx on [0, 2pi] x [0, 1], periodic in x.
struct HeatParams {
    double alpha = 1.0;
    double phi = 0.0;
};

// u_t = (u^m u_x)_x on [0,1]^2.
struct PmeParams {
    double m = 1.0;
};

// Stefan problem on [0,1] x [0,0.1]; alpha is the front coefficient implied
// by u_star (see solve_stefan_alpha).
struct StefanParams {
    double u_star = 0.6;
    double alpha = 0.0;
};

using PdeParams = std::variant<StokesParams, HeatParams, PmeParams, StefanParams>;

inline Family family_of(const PdeParams& p) { return static_cast<Family>(p.index()); }

// ---------------------------------------------------------------------------
// Closed-form solutions

inline double stokes_exact(const StokesParams& p, double x, double t) {
    return p.A * std::exp(-p.k * x) * std::cos(p.k * x - p.omega * t);
}

inline double heat_exact(const HeatParams& p, double x, double t) {
    return std::exp(-p.alpha * t) * std::sin(x + p.phi);
}

inline double pme_exact(const PmeParams& p, double x, double t) {
    const double r = std::max(0.0, t - x);
    if (r == 0.0) return 0.0;
    return std::pow(p.m * r, 1.0 / p.m);
}

// Smooth branch zeroed where it drops strictly below u_star; the value at
// the front itself (branch == u_star) is kept.
inline double stefan_exact(const StefanParams& p, double x, double t) {
    if (!(t > 0.0)) throw data_error("stefan_exact requires t > 0");
    const double v = 1.0 - (1.0 - p.u_star) * std::erf(x / (2.0 * std::sqrt(t))) / std::erf(p.alpha);
    return v >= p.u_star ? v : 0.0;
}

// Residual of (1 - u*)/sqrt(pi) = u* erf(a) a exp(a^2), written as lhs - rhs
// of the rearranged equation; increasing in a.
inline double stefan_alpha_residual(double u_star, double a) {
    return u_star * std::erf(a) * a * std::exp(a * a) - (1.0 - u_star) / std::sqrt(std::numbers::pi);
}

inline double solve_stefan_alpha(double u_star) {
    if (!(u_star > 0.5 && u_star < 0.9))
        throw data_error("solve_stefan_alpha: u_star must lie in (0.5, 0.9)");
    double lo = 1e-6, hi = 3.0;
    double flo = stefan_alpha_residual(u_star, lo);
    const double fhi = stefan_alpha_residual(u_star, hi);
    if (!(flo < 0.0 && fhi > 0.0)) throw numeric_error("solve_stefan_alpha: no sign change in bracket");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = stefan_alpha_residual(u_star, mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline StefanParams make_stefan(double u_star) { return StefanParams{u_star, solve_stefan_alpha(u_star)}; }

// Pointwise value used for dataset fields; for Stefan the t = 0 row takes
// the t -> 0+ limit (1 at x = 0, 0 elsewhere).
inline double exact_solution(const PdeParams& params, double x, double t) {
    return std::visit(
        [&](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, StokesParams>)
                return stokes_exact(p, x, t);
            else if constexpr (std::is_same_v<P, HeatParams>)
                return heat_exact(p, x, t);
            else if constexpr (std::is_same_v<P, PmeParams>)
                return pme_exact(p, x, t);
            else {
                if (t <= 0.0) return x == 0.0 ? 1.0 : 0.0;
                return stefan_exact(p, x, t);
            }
        },
        params);
}

// ---------------------------------------------------------------------------
// Domains and parameter priors

inline Domain family_domain(Family f, std::size_t nx, std::size_t nt) {
    switch (f) {
        case Family::stokes: return Domain({{0.0, 1.0, nx}, {0.0, 1.0, nt}});
        case Family::heat: return Domain({{0.0, 2.0 * std::numbers::pi, nx}, {0.0, 1.0, nt}});
        case Family::pme: return Domain({{0.0, 1.0, nx}, {0.0, 1.0, nt}});
        case Family::stefan: return Domain({{0.0, 1.0, nx}, {0.0, 0.1, nt}});
    }
    throw data_error("unknown family");
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct ParamRange {
    Family family = Family::stokes;
    std::map<std::string, Interval> intervals;

    static ParamRange defaults(Family f) {
        switch (f) {
            case Family::stokes: return {f, {{"A", {2.0, 2.0}}, {"k", {2.0, 20.0}}, {"omega", {2.0, 8.0}}}};
            case Family::heat: return {f, {{"alpha", {1.0, 5.0}}, {"phi", {0.0, std::numbers::pi}}}};
            case Family::pme: return {f, {{"m", {1.0, 5.0}}}};
            case Family::stefan: return {f, {{"u_star", {0.55, 0.7}}}};
        }
        throw data_error("unknown family");
    }

    // Narrow (or widen) one parameter's interval, e.g. set("k", 5, 5).
    ParamRange& set(const std::string& key, double lo, double hi) {
        auto it = intervals.find(key);
        if (it == intervals.end())
            throw data_error("parameter '" + key + "' does not exist for family " + to_string(family));
        if (!(lo <= hi)) throw data_error("empty interval for parameter '" + key + "'");
        it->second = {lo, hi};
        return *this;
    }
};

inline std::map<std::string, double> params_to_map(const PdeParams& params) {
    return std::visit(
        [](const auto& p) -> std::map<std::string, double> {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, StokesParams>)
                return {{"A", p.A}, {"omega", p.omega}, {"k", p.k}};
            else if constexpr (std::is_same_v<P, HeatParams>)
                return {{"alpha", p.alpha}, {"phi", p.phi}};
            else if constexpr (std::is_same_v<P, PmeParams>)
                return {{"m", p.m}};
            else
                return {{"u_star", p.u_star}, {"alpha", p.alpha}};
        },
        params);
}

inline void validate(const PdeParams& params) {
    std::visit(
        [](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, StokesParams>)
                require(p.A > 0 && p.omega > 0 && p.k > 0, "stokes parameters must be positive");
            else if constexpr (std::is_same_v<P, HeatParams>)
                require(p.alpha > 0 && p.phi >= 0 && p.phi <= std::numbers::pi,
                        "heat requires alpha > 0 and phi in [0, pi]");
            else if constexpr (std::is_same_v<P, PmeParams>)
                require(p.m >= 1.0, "pme requires m >= 1");
            else
                require(p.u_star > 0 && p.u_star < 1 &&
                            std::abs(stefan_alpha_residual(p.u_star, p.alpha)) < 1e-10,
                        "stefan requires u_star in (0,1) and a solved alpha");
        },
        params);
}

// Build parameters from named values; missing keys fall back to the midpoint
// of the family's default prior (they only matter where the field depends on
// them).
inline PdeParams params_from_map(Family f, const std::map<std::string, double>& values) {
    const auto defaults = ParamRange::defaults(f);
    for (const auto& [key, _] : values)
        if (!defaults.intervals.contains(key) && !(f == Family::stefan && key == "alpha"))
            throw data_error("parameter '" + key + "' does not exist for family " + to_string(f));
    auto get = [&](const std::string& key) {
        if (auto it = values.find(key); it != values.end()) return it->second;
        const auto& iv = defaults.intervals.at(key);
        return 0.5 * (iv.lo + iv.hi);
    };
    PdeParams p;
    switch (f) {
        case Family::stokes: p = StokesParams{get("A"), get("omega"), get("k")}; break;
        case Family::heat: p = HeatParams{get("alpha"), get("phi")}; break;
        case Family::pme: p = PmeParams{get("m")}; break;
        case Family::stefan: p = make_stefan(get("u_star")); break;
    }
    validate(p);
    return p;
}

// Independent uniform draw per parameter, in key order.
inline PdeParams sample_params(const ParamRange& range, Rng& rng) {
    std::map<std::string, double> v;
    for (const auto& [key, iv] : range.intervals) v[key] = uniform(rng, iv.lo, iv.hi);
    return params_from_map(range.family, v);
}

// ---------------------------------------------------------------------------
// Datasets

struct Dataset {
    Family family = Family::stokes;
    Domain domain;
    std::vector<PdeParams> params;
    std::vector<GridFunction> fields;
};

inline GridFunction evaluate_solution(const PdeParams& p, const Domain& domain) {
    require(domain.ndims() == 2, "analytic families live on (x, t) grids");
    return GridFunction::from_function(domain,
                                       [&](std::span<const double> c) { return exact_solution(p, c[0], c[1]); });
}

inline Dataset generate_dataset(Family family, std::size_t n, const Domain& domain, const ParamRange& range,
                                std::uint64_t seed) {
    require(range.family == family, "parameter range belongs to a different family");
    const auto ref = family_domain(family, 2, 2);
    if (!ref.same_bounds(domain))
        throw data_error("domain bounds " + describe(domain) + " do not match the " + to_string(family) +
                         " domain " + describe(ref));
    Dataset ds{family, domain, std::vector<PdeParams>(n), std::vector<GridFunction>(n)};
    parallel_for(n, [&](std::size_t i) {
        auto rng = derive_rng(seed, i);
        ds.params[i] = sample_params(range, rng);
        ds.fields[i] = evaluate_solution(ds.params[i], domain);
    });
    return ds;
}

// ---------------------------------------------------------------------------
// Conservation laws: value of the spatial integral of u at time t.

inline double conservation_value(const PdeParams& params, double t) {
    return std::visit(
        [&](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, StokesParams>)
                throw data_error("the stokes family has no conservation law");
            else if constexpr (std::is_same_v<P, HeatParams>)
                return 0.0;
            else if constexpr (std::is_same_v<P, PmeParams>)
                return std::pow(p.m * t, 1.0 + 1.0 / p.m) / (p.m + 1.0);
            else
                return 2.0 * (1.0 - p.u_star) / std::erf(p.alpha) * std::sqrt(t / std::numbers::pi);
        },
        params);
}

// Root-mean-square finite-difference PDE residual over interior points.
// Linear families: u_t - nu u_xx with central differences. Nonlinear
// families: conservative form u_t - (k(u) u_x)_x with k at half points taken
// as the mean of pointwise k(u).
inline double residual_check(const GridFunction& f, const PdeParams& params) {
    const Domain& d = f.domain();
    require(d.ndims() == 2, "residual_check expects an (x, t) grid");
    const std::size_t nx = d.axis(0).resolution, nt = d.axis(1).resolution;
    if (nx < 3 || nt < 3) throw data_error("residual_check needs resolution >= 3 on every axis");
    const double hx = d.axis(0).spacing(), ht = d.axis(1).spacing();
    auto u = [&](std::size_t i, std::size_t j) { return f[i * nt + j]; };

    auto conductivity = [&](double v) -> double {
        return std::visit(
            [&](const auto& p) -> double {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, StokesParams>)
                    return p.viscosity();
                else if constexpr (std::is_same_v<P, HeatParams>)
                    return p.alpha;
                else if constexpr (std::is_same_v<P, PmeParams>)
                    return std::pow(std::max(v, 0.0), p.m);
                else
                    return v >= p.u_star ? 1.0 : 0.0;
            },
            params);
    };

    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 1; i + 1 < nx; ++i) {
        for (std::size_t j = 1; j + 1 < nt; ++j) {
            const double ut = (u(i, j + 1) - u(i, j - 1)) / (2.0 * ht);
            const double k0 = conductivity(u(i - 1, j)), k1 = conductivity(u(i, j)),
                         k2 = conductivity(u(i + 1, j));
            const double flux_hi = 0.5 * (k1 + k2) * (u(i + 1, j) - u(i, j));
            const double flux_lo = 0.5 * (k0 + k1) * (u(i, j) - u(i - 1, j));
            const double r = ut - (flux_hi - flux_lo) / (hx * hx);
            sum += r * r;
            ++count;
        }
    }
    return std::sqrt(sum / static_cast<double>(count));
}

} // namespace eci
