#pragma once

#include <cmath>
#include <span>
#include <variant>
#include <vector>

#include "eci/errors.hpp"
#include "eci/grid.hpp"
#include "eci/pde_systems.hpp"

namespace eci {

// Prescribed values on a masked set: u(x) = g(x) for x in the mask.
class ValueConstraint {
public:
    ValueConstraint(RegionMask mask, GridFunction targets) : mask_(std::move(mask)), targets_(std::move(targets)) {
        require_same_domain(mask_.domain(), targets_.domain(), "value constraint");
        for (std::size_t i = 0; i < mask_.size(); ++i)
            if (mask_[i]) require(std::isfinite(targets_[i]), "value constraint target is not finite");
    }

    const Domain& domain() const { return mask_.domain(); }
    const RegionMask& mask() const { return mask_; }
    const GridFunction& targets() const { return targets_; }

private:
    RegionMask mask_;
    GridFunction targets_;
};

// Prescribed integrals over pairwise disjoint regions.
class RegionConstraint {
public:
    struct Region {
        RegionMask mask;
        double target = 0.0;
    };

    explicit RegionConstraint(std::vector<Region> regions) : regions_(std::move(regions)) {
        require(!regions_.empty(), "region constraint needs at least one region");
        const Domain& d = regions_.front().mask.domain();
        for (std::size_t r = 0; r < regions_.size(); ++r) {
            const auto& reg = regions_[r];
            require_same_domain(d, reg.mask.domain(), "region constraint");
            require(!reg.mask.empty(), "region constraint mask " + std::to_string(r) + " is empty");
            require(std::isfinite(reg.target), "region constraint target is not finite");
            for (std::size_t s = 0; s < r; ++s)
                if (reg.mask.overlaps(regions_[s].mask))
                    throw data_error("region constraint masks " + std::to_string(s) + " and " + std::to_string(r) +
                                     " overlap");
            auto w = quadrature_weights(reg.mask);
            double measure = 0.0;
            for (double x : w) measure += x;
            if (!(measure > 0.0))
                throw data_error("region constraint mask " + std::to_string(r) + " has zero measure");
            weights_.push_back(std::move(w));
            measures_.push_back(measure);
        }
    }

    const Domain& domain() const { return regions_.front().mask.domain(); }
    const std::vector<Region>& regions() const { return regions_; }
    std::span<const double> weights(std::size_t r) const { return weights_[r]; }
    double measure(std::size_t r) const { return measures_[r]; }

    double integral(const GridFunction& u, std::size_t r) const {
        const auto& m = regions_[r].mask;
        const auto& w = weights_[r];
        double s = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k)
            if (m[k]) s += u[k] * w[k];
        return s;
    }

private:
    std::vector<Region> regions_;
    std::vector<std::vector<double>> weights_;
    std::vector<double> measures_;
};

struct Identity {
    friend bool operator==(const Identity&, const Identity&) = default;
};

using Constraint = std::variant<Identity, ValueConstraint, RegionConstraint>;

inline GridFunction correct_value(const GridFunction& u1, const ValueConstraint& c) {
    require_same_domain(u1.domain(), c.domain(), "correct_value");
    GridFunction out = u1;
    const auto& m = c.mask();
    for (std::size_t i = 0; i < out.size(); ++i)
        if (m[i]) out[i] = c.targets()[i];
    return out;
}

// Shift each region by a constant so its integral hits the target.
inline GridFunction correct_region(const GridFunction& u1, const RegionConstraint& c) {
    require_same_domain(u1.domain(), c.domain(), "correct_region");
    GridFunction out = u1;
    for (std::size_t r = 0; r < c.regions().size(); ++r) {
        const auto& reg = c.regions()[r];
        const double shift = (reg.target - c.integral(u1, r)) / c.measure(r);
        for (std::size_t i = 0; i < out.size(); ++i)
            if (reg.mask[i]) out[i] = u1[i] + shift;
    }
    return out;
}

inline GridFunction correct(const GridFunction& u1, const Constraint& c) {
    return std::visit(
        [&](const auto& v) -> GridFunction {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Identity>)
                return u1;
            else if constexpr (std::is_same_v<T, ValueConstraint>)
                return correct_value(u1, v);
            else
                return correct_region(u1, v);
        },
        c);
}

// Value: mean over masked points of (u - g)^2. Region: mean over regions of
// (integral - target)^2. Identity: 0.
inline double constraint_error(const GridFunction& u, const Constraint& c) {
    return std::visit(
        [&](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Identity>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, ValueConstraint>) {
                require_same_domain(u.domain(), v.domain(), "constraint_error");
                double s = 0.0;
                std::size_t n = 0;
                for (std::size_t i = 0; i < u.size(); ++i)
                    if (v.mask()[i]) {
                        const double d = u[i] - v.targets()[i];
                        s += d * d;
                        ++n;
                    }
                return n ? s / static_cast<double>(n) : 0.0;
            } else {
                require_same_domain(u.domain(), v.domain(), "constraint_error");
                double s = 0.0;
                for (std::size_t r = 0; r < v.regions().size(); ++r) {
                    const double d = v.integral(u, r) - v.regions()[r].target;
                    s += d * d;
                }
                return s / static_cast<double>(v.regions().size());
            }
        },
        c);
}

// Union of all constrained points; Identity has none.
inline RegionMask constrained_points(const Constraint& c, const Domain& d) {
    RegionMask m(d);
    if (const auto* v = std::get_if<ValueConstraint>(&c)) {
        m |= v->mask();
    } else if (const auto* r = std::get_if<RegionConstraint>(&c)) {
        for (const auto& reg : r->regions()) m |= reg.mask;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Builders. Grids are (x, t): the initial condition is the t = 0 slice and
// the boundary condition the x = 0 slice.

inline RegionMask ic_mask(const Domain& d) {
    require(d.ndims() == 2, "IC mask expects an (x, t) grid");
    return slice_mask(d, 1, 0);
}

inline RegionMask bc_mask(const Domain& d) {
    require(d.ndims() == 2, "BC mask expects an (x, t) grid");
    return slice_mask(d, 0, 0);
}

inline ValueConstraint make_ic(const Domain& d, std::span<const double> g) {
    RegionMask m = ic_mask(d);
    const std::size_t nx = d.axis(0).resolution, nt = d.axis(1).resolution;
    require(g.size() == nx, "IC values: expected " + std::to_string(nx) + ", got " + std::to_string(g.size()));
    GridFunction targets(d);
    for (std::size_t i = 0; i < nx; ++i) targets[i * nt] = g[i];
    return ValueConstraint(std::move(m), std::move(targets));
}

inline ValueConstraint make_bc(const Domain& d, std::span<const double> f) {
    RegionMask m = bc_mask(d);
    const std::size_t nt = d.axis(1).resolution;
    require(f.size() == nt, "BC values: expected " + std::to_string(nt) + ", got " + std::to_string(f.size()));
    GridFunction targets(d);
    for (std::size_t j = 0; j < nt; ++j) targets[j] = f[j];
    return ValueConstraint(std::move(m), std::move(targets));
}

// Targets taken from the analytic solution at the masked points.
inline ValueConstraint make_value_constraint(const RegionMask& mask, const PdeParams& params) {
    const Domain& d = mask.domain();
    require(d.ndims() == 2, "analytic value targets expect an (x, t) grid");
    GridFunction targets(d);
    const std::size_t nt = d.axis(1).resolution;
    for (std::size_t k = 0; k < d.size(); ++k)
        if (mask[k]) targets[k] = exact_solution(params, d.axis(0).coordinate(k / nt), d.axis(1).coordinate(k % nt));
    return ValueConstraint(mask, std::move(targets));
}

inline ValueConstraint make_ic(const Domain& d, const PdeParams& params) {
    return make_value_constraint(ic_mask(d), params);
}

inline ValueConstraint make_bc(const Domain& d, const PdeParams& params) {
    return make_value_constraint(bc_mask(d), params);
}

inline ValueConstraint make_ic_bc(const Domain& d, const PdeParams& params) {
    RegionMask m = ic_mask(d);
    m |= bc_mask(d);
    return make_value_constraint(m, params);
}

// One region per time slice with the analytic conserved quantity as target.
inline RegionConstraint make_conservation(const Domain& d, const PdeParams& params) {
    require(d.ndims() == 2, "conservation constraint expects an (x, t) grid");
    std::vector<RegionConstraint::Region> regions;
    for (std::size_t j = 0; j < d.axis(1).resolution; ++j)
        regions.push_back({slice_mask(d, 1, j), conservation_value(params, d.axis(1).coordinate(j))});
    return RegionConstraint(std::move(regions));
}

// `count` distinct grid points drawn uniformly without replacement.
inline RegionMask scattered_mask(const Domain& d, std::size_t count, Rng& rng) {
    require(count <= d.size(), "more scattered points requested than grid points");
    std::vector<std::size_t> idx(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    RegionMask m(d);
    for (std::size_t i = 0; i < count; ++i) m.set(idx[i]);
    return m;
}

} // namespace eci
