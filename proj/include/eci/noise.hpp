#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "eci/errors.hpp"
#include "eci/grid.hpp"
#include "eci/rng.hpp"

namespace eci {

enum class NoiseKind { matern, white };
enum class Smoothness { half, three_halves, five_halves };

inline std::string to_string(NoiseKind k) { return k == NoiseKind::matern ? "matern" : "white"; }
inline std::string to_string(Smoothness s) {
    switch (s) {
        case Smoothness::half: return "half";
        case Smoothness::three_halves: return "three_halves";
        case Smoothness::five_halves: return "five_halves";
    }
    return "?";
}
inline NoiseKind parse_noise_kind(const std::string& s) {
    if (s == "matern") return NoiseKind::matern;
    if (s == "white") return NoiseKind::white;
    throw data_error("unknown noise kind '" + s + "'");
}
inline Smoothness parse_smoothness(const std::string& s) {
    if (s == "half") return Smoothness::half;
    if (s == "three_halves") return Smoothness::three_halves;
    if (s == "five_halves") return Smoothness::five_halves;
    throw data_error("unknown Matern smoothness '" + s + "'");
}

struct NoiseSpec {
    NoiseKind kind = NoiseKind::matern;
    double length = 0.05;  // on coordinates normalised to [0,1] per axis
    double variance = 1.0;
    Smoothness smoothness = Smoothness::three_halves;
    double jitter = 1e-10;

    void validate() const {
        require(length > 0.0, "kernel length must be positive");
        require(variance > 0.0, "kernel variance must be positive");
        require(jitter >= 1e-12 && jitter <= 1e-4, "jitter must lie in [1e-12, 1e-4]");
    }
};

// Standard Matern correlation at scaled distance r = |x - y| / length.
inline double matern(Smoothness s, double r) {
    switch (s) {
        case Smoothness::half: return std::exp(-r);
        case Smoothness::three_halves: {
            const double a = std::sqrt(3.0) * r;
            return (1.0 + a) * std::exp(-a);
        }
        case Smoothness::five_halves: {
            const double a = std::sqrt(5.0) * r;
            return (1.0 + a + a * a / 3.0) * std::exp(-a);
        }
    }
    return 0.0;
}

inline Eigen::MatrixXd covariance_matrix(const std::vector<std::vector<double>>& coords, const NoiseSpec& spec,
                                         double jitter) {
    if (spec.kind != NoiseKind::matern)
        throw data_error("covariance_matrix: white noise has a diagonal covariance; no matrix is built");
    require(!coords.empty(), "covariance_matrix: no points");
    const auto n = static_cast<Eigen::Index>(coords.size());
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = spec.variance + jitter;
        for (Eigen::Index j = 0; j < i; ++j) {
            double d2 = 0.0;
            for (std::size_t a = 0; a < coords[i].size(); ++a) {
                const double d = coords[i][a] - coords[j][a];
                d2 += d * d;
            }
            const double v = spec.variance * matern(spec.smoothness, std::sqrt(d2) / spec.length);
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

inline Eigen::MatrixXd covariance_matrix(const std::vector<std::vector<double>>& coords, const NoiseSpec& spec) {
    return covariance_matrix(coords, spec, spec.jitter);
}

// Grid coordinates mapped to [0,1] per axis; distances for the kernel are
// Euclidean in these units.
inline std::vector<std::vector<double>> normalized_coordinates(const Domain& d) {
    auto pts = grid_coordinates(d);
    for (auto& p : pts)
        for (std::size_t a = 0; a < p.size(); ++a)
            p[a] = (p[a] - d.axis(a).lower) / (d.axis(a).upper - d.axis(a).lower);
    return pts;
}

inline constexpr std::size_t kMaxMaternPoints = 4096;

// Prior noise measure on one grid. For Matern noise the Cholesky factor is
// computed once at construction; draw() is const and thread-safe given a
// per-caller Rng.
class NoiseSampler {
public:
    NoiseSampler(Domain domain, NoiseSpec spec) : domain_(std::move(domain)), spec_(spec) {
        spec_.validate();
        if (spec_.kind == NoiseKind::white) return;
        if (domain_.ndims() > 2)
            throw data_error("Matern noise is limited to grids with at most 2 axes; use white noise");
        if (domain_.size() > kMaxMaternPoints)
            throw data_error("grid too large for Matern noise (" + std::to_string(domain_.size()) + " > " +
                             std::to_string(kMaxMaternPoints) + " points)");
        const auto coords = normalized_coordinates(domain_);
        Eigen::MatrixXd K = covariance_matrix(coords, spec_, 0.0);
        for (double jitter = spec_.jitter; jitter <= 1e-4 * (1 + 1e-9); jitter *= 10.0) {
            Eigen::MatrixXd Kj = K;
            Kj.diagonal().array() += jitter;
            Eigen::LLT<Eigen::MatrixXd> llt(Kj);
            if (llt.info() == Eigen::Success) {
                factor_ = std::make_shared<const Eigen::MatrixXd>(llt.matrixL());
                jitter_ = jitter;
                return;
            }
        }
        throw numeric_error("Cholesky factorisation failed after jitter escalation to 1e-4");
    }

    const Domain& domain() const { return domain_; }
    const NoiseSpec& spec() const { return spec_; }
    double jitter_used() const { return jitter_; }
    const Eigen::MatrixXd& cholesky_factor() const {
        require(factor_ != nullptr, "white noise has no Cholesky factor");
        return *factor_;
    }

    GridFunction draw(Rng& rng) const {
        GridFunction g(domain_);
        const auto n = static_cast<Eigen::Index>(g.size());
        Eigen::VectorXd z(n);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
        if (spec_.kind == NoiseKind::white) {
            const double s = std::sqrt(spec_.variance);
            for (Eigen::Index i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = s * z[i];
        } else {
            Eigen::Map<Eigen::VectorXd>(g.data().data(), n).noalias() =
                factor_->triangularView<Eigen::Lower>() * z;
        }
        return g;
    }

private:
    Domain domain_;
    NoiseSpec spec_;
    std::shared_ptr<const Eigen::MatrixXd> factor_;
    double jitter_ = 0.0;
};

inline GridFunction sample_noise(const Domain& domain, const NoiseSpec& spec, Rng& rng) {
    return NoiseSampler(domain, spec).draw(rng);
}

} // namespace eci
