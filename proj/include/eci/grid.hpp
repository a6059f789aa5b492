#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "eci/errors.hpp"

namespace eci {

struct Axis {
    double lower = 0.0;
    double upper = 1.0;
    std::size_t resolution = 2;

    double spacing() const { return (upper - lower) / static_cast<double>(resolution - 1); }
    double coordinate(std::size_t i) const {
        // Pin the last point to the upper bound so both endpoints are exact.
        if (i + 1 == resolution) return upper;
        return lower + static_cast<double>(i) * spacing();
    }

    friend bool operator==(const Axis&, const Axis&) = default;
};

// Uniform rectangular grid. Axis order is (space..., time) when a time axis
// exists; values are stored row-major with the last axis fastest.
class Domain {
public:
    Domain() = default;
    explicit Domain(std::vector<Axis> axes) : axes_(std::move(axes)) {
        require(!axes_.empty(), "domain needs at least one axis");
        for (const auto& a : axes_) {
            require(std::isfinite(a.lower) && std::isfinite(a.upper) && a.upper > a.lower,
                    "domain axis requires upper > lower");
            require(a.resolution >= 2, "domain axis resolution must be >= 2");
        }
    }

    std::size_t ndims() const { return axes_.size(); }
    const Axis& axis(std::size_t i) const { return axes_.at(i); }
    const std::vector<Axis>& axes() const { return axes_; }

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& a : axes_) n *= a.resolution;
        return n;
    }

    std::vector<std::size_t> shape() const {
        std::vector<std::size_t> s;
        for (const auto& a : axes_) s.push_back(a.resolution);
        return s;
    }

    std::vector<std::size_t> strides() const {
        std::vector<std::size_t> s(axes_.size(), 1);
        for (std::size_t i = axes_.size(); i-- > 1;) s[i - 1] = s[i] * axes_[i].resolution;
        return s;
    }

    std::vector<std::size_t> unravel(std::size_t flat) const {
        std::vector<std::size_t> idx(axes_.size());
        for (std::size_t i = axes_.size(); i-- > 0;) {
            idx[i] = flat % axes_[i].resolution;
            flat /= axes_[i].resolution;
        }
        return idx;
    }

    bool same_bounds(const Domain& o) const {
        if (o.ndims() != ndims()) return false;
        for (std::size_t i = 0; i < ndims(); ++i) {
            const double scale = std::max(1.0, std::abs(axes_[i].upper - axes_[i].lower));
            if (std::abs(axes_[i].lower - o.axes_[i].lower) > 1e-12 * scale ||
                std::abs(axes_[i].upper - o.axes_[i].upper) > 1e-12 * scale)
                return false;
        }
        return true;
    }

    Domain with_resolution(std::span<const std::size_t> res) const {
        require(res.size() == ndims(), "resolution rank does not match domain");
        auto axes = axes_;
        for (std::size_t i = 0; i < axes.size(); ++i) axes[i].resolution = res[i];
        return Domain(std::move(axes));
    }

    friend bool operator==(const Domain&, const Domain&) = default;

private:
    std::vector<Axis> axes_;
};

inline std::string describe(const Domain& d) {
    std::string s = "[";
    for (std::size_t i = 0; i < d.ndims(); ++i) {
        const auto& a = d.axis(i);
        if (i) s += ", ";
        s += "(" + std::to_string(a.lower) + ", " + std::to_string(a.upper) + ", " +
             std::to_string(a.resolution) + ")";
    }
    return s + "]";
}

inline void require_same_domain(const Domain& a, const Domain& b, const char* what) {
    if (!(a == b))
        throw domain_mismatch(std::string(what) + ": domain mismatch " + describe(a) + " vs " +
                              describe(b));
}

class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(Domain domain, double fill = 0.0)
        : domain_(std::move(domain)), values_(domain_.size(), fill) {}
    GridFunction(Domain domain, std::vector<double> values)
        : domain_(std::move(domain)), values_(std::move(values)) {
        require(values_.size() == domain_.size(), "grid function length does not match domain");
    }

    // Evaluate f(coords) at every grid point.
    template <typename F>
    static GridFunction from_function(const Domain& domain, F&& f) {
        GridFunction g(domain);
        std::vector<double> x(domain.ndims());
        for (std::size_t k = 0; k < g.size(); ++k) {
            const auto idx = domain.unravel(k);
            for (std::size_t a = 0; a < x.size(); ++a) x[a] = domain.axis(a).coordinate(idx[a]);
            g.values_[k] = f(std::span<const double>(x));
        }
        return g;
    }

    const Domain& domain() const { return domain_; }
    std::size_t size() const { return values_.size(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::vector<double>& data() { return values_; }
    const std::vector<double>& data() const { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    GridFunction& operator+=(const GridFunction& o) {
        require_same_domain(domain_, o.domain_, "operator+=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    GridFunction& operator-=(const GridFunction& o) {
        require_same_domain(domain_, o.domain_, "operator-=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    GridFunction& operator*=(double s) {
        for (auto& v : values_) v *= s;
        return *this;
    }

    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(GridFunction a, double s) { return a *= s; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

    friend bool operator==(const GridFunction&, const GridFunction&) = default;

private:
    Domain domain_;
    std::vector<double> values_;
};

// a*x + b*y, evaluated pointwise in exactly that order.
inline GridFunction lincomb(double a, const GridFunction& x, double b, const GridFunction& y) {
    require_same_domain(x.domain(), y.domain(), "lincomb");
    GridFunction out(x.domain());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
    return out;
}

class RegionMask {
public:
    RegionMask() = default;
    explicit RegionMask(Domain domain, bool fill = false)
        : domain_(std::move(domain)), flags_(domain_.size(), fill ? 1 : 0) {}
    RegionMask(Domain domain, std::vector<std::uint8_t> flags)
        : domain_(std::move(domain)), flags_(std::move(flags)) {
        require(flags_.size() == domain_.size(), "mask length does not match domain");
    }

    const Domain& domain() const { return domain_; }
    std::size_t size() const { return flags_.size(); }
    bool operator[](std::size_t i) const { return flags_[i] != 0; }
    void set(std::size_t i, bool v = true) { flags_[i] = v ? 1 : 0; }
    std::span<const std::uint8_t> flags() const { return flags_; }

    std::size_t count() const {
        return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
    }
    bool empty() const { return count() == 0; }

    bool overlaps(const RegionMask& o) const {
        require_same_domain(domain_, o.domain_, "mask overlap");
        for (std::size_t i = 0; i < flags_.size(); ++i)
            if (flags_[i] && o.flags_[i]) return true;
        return false;
    }

    RegionMask& operator|=(const RegionMask& o) {
        require_same_domain(domain_, o.domain_, "mask union");
        for (std::size_t i = 0; i < flags_.size(); ++i) flags_[i] |= o.flags_[i];
        return *this;
    }

    friend bool operator==(const RegionMask&, const RegionMask&) = default;

private:
    Domain domain_;
    std::vector<std::uint8_t> flags_;
};

// Mask of the hyperplane `axis == index`.
inline RegionMask slice_mask(const Domain& d, std::size_t axis, std::size_t index) {
    require(axis < d.ndims() && index < d.axis(axis).resolution, "slice out of range");
    RegionMask m(d);
    for (std::size_t k = 0; k < d.size(); ++k)
        if (d.unravel(k)[axis] == index) m.set(k);
    return m;
}

// Outermost grid points along the given axes (all axes when empty).
inline RegionMask boundary_shell_mask(const Domain& d, std::vector<std::size_t> axes = {}) {
    if (axes.empty())
        for (std::size_t a = 0; a < d.ndims(); ++a) axes.push_back(a);
    RegionMask m(d);
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto idx = d.unravel(k);
        for (auto a : axes)
            if (idx[a] == 0 || idx[a] + 1 == d.axis(a).resolution) m.set(k);
    }
    return m;
}

inline std::vector<std::vector<double>> grid_coordinates(const Domain& d) {
    std::vector<std::vector<double>> pts;
    pts.reserve(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto idx = d.unravel(k);
        std::vector<double> p(d.ndims());
        for (std::size_t a = 0; a < p.size(); ++a) p[a] = d.axis(a).coordinate(idx[a]);
        pts.push_back(std::move(p));
    }
    return pts;
}

// Trapezoid weights restricted to a mask. Along each axis a masked point gets
// h when both neighbours are masked, h/2 when one is, and 1 when neither is
// (the axis is collapsed, so a single slice integrates over the remaining
// axes only). The total weight is the product over axes.
inline std::vector<double> quadrature_weights(const RegionMask& mask) {
    const Domain& d = mask.domain();
    const auto strides = d.strides();
    std::vector<double> w(d.size(), 0.0);
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (!mask[k]) continue;
        const auto idx = d.unravel(k);
        double wk = 1.0;
        for (std::size_t a = 0; a < d.ndims(); ++a) {
            const bool lo = idx[a] > 0 && mask[k - strides[a]];
            const bool hi = idx[a] + 1 < d.axis(a).resolution && mask[k + strides[a]];
            const double h = d.axis(a).spacing();
            if (lo && hi)
                wk *= h;
            else if (lo || hi)
                wk *= 0.5 * h;
        }
        w[k] = wk;
    }
    return w;
}

inline double riemann_sum(const GridFunction& f, const RegionMask& mask) {
    require_same_domain(f.domain(), mask.domain(), "riemann_sum");
    const auto w = quadrature_weights(mask);
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k)
        if (mask[k]) s += f[k] * w[k];
    return s;
}

inline double mse(const GridFunction& a, const GridFunction& b) {
    require_same_domain(a.domain(), b.domain(), "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

// Multilinear interpolation onto a grid with the same bounds.
inline GridFunction resample(const GridFunction& f, const Domain& target) {
    const Domain& src = f.domain();
    if (!src.same_bounds(target))
        throw domain_mismatch("resample: bounds differ " + describe(src) + " vs " + describe(target));
    if (src == target) return f;

    const std::size_t nd = src.ndims();
    const auto strides = src.strides();
    // Per axis, per target index: lower source index and fractional weight.
    std::vector<std::vector<std::size_t>> lo(nd);
    std::vector<std::vector<double>> frac(nd);
    for (std::size_t a = 0; a < nd; ++a) {
        const auto& sa = src.axis(a);
        const auto& ta = target.axis(a);
        for (std::size_t i = 0; i < ta.resolution; ++i) {
            const double pos = (ta.coordinate(i) - sa.lower) / sa.spacing();
            double fl = std::floor(pos);
            fl = std::clamp(fl, 0.0, static_cast<double>(sa.resolution - 2));
            lo[a].push_back(static_cast<std::size_t>(fl));
            frac[a].push_back(std::clamp(pos - fl, 0.0, 1.0));
        }
    }

    GridFunction out(target);
    const std::size_t corners = std::size_t{1} << nd;
    for (std::size_t k = 0; k < target.size(); ++k) {
        const auto idx = target.unravel(k);
        double v = 0.0;
        for (std::size_t c = 0; c < corners; ++c) {
            double w = 1.0;
            std::size_t off = 0;
            for (std::size_t a = 0; a < nd; ++a) {
                const bool up = (c >> a) & 1u;
                const double fa = frac[a][idx[a]];
                w *= up ? fa : 1.0 - fa;
                off += (lo[a][idx[a]] + (up ? 1 : 0)) * strides[a];
            }
            if (w != 0.0) v += w * f[off];
        }
        out[k] = v;
    }
    return out;
}

} // namespace eci
