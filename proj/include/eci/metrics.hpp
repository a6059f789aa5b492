#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "eci/constraints.hpp"
#include "eci/errors.hpp"
#include "eci/grid.hpp"
#include "eci/parallel.hpp"

namespace eci {

using SampleSet = std::vector<GridFunction>;

inline void check_sample_set(const SampleSet& s, const char* what) {
    if (s.empty()) throw data_error(std::string(what) + ": empty sample set");
    for (const auto& f : s) require_same_domain(s.front().domain(), f.domain(), what);
}

struct PointwiseStats {
    GridFunction mean;
    GridFunction std;
};

// Per-point mean and population (divide-by-n) standard deviation.
inline PointwiseStats pointwise_stats(const SampleSet& s) {
    check_sample_set(s, "pointwise_stats");
    if (s.size() < 2) throw data_error("pointwise_stats: need at least 2 samples for a standard deviation");
    const Domain& d = s.front().domain();
    const double n = static_cast<double>(s.size());
    GridFunction mean(d), sd(d);
    for (const auto& f : s)
        for (std::size_t k = 0; k < f.size(); ++k) mean[k] += f[k];
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] /= n;
    for (const auto& f : s)
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double r = f[k] - mean[k];
            sd[k] += r * r;
        }
    for (std::size_t k = 0; k < sd.size(); ++k) sd[k] = std::sqrt(sd[k] / n);
    return {std::move(mean), std::move(sd)};
}

struct MeanStdErrors {
    double mmse = 0.0;
    double smse = 0.0;
};

inline MeanStdErrors mmse_smse(const SampleSet& generated, const SampleSet& reference) {
    const auto g = pointwise_stats(generated);
    const auto r = pointwise_stats(reference);
    require_same_domain(g.mean.domain(), r.mean.domain(), "mmse_smse");
    return {mse(g.mean, r.mean), mse(g.std, r.std)};
}

inline constexpr double kStdFloor = 1e-6;

// Mean over grid points of the Gaussian log-density of truth under
// N(mean, std^2), std floored at kStdFloor.
inline double log_likelihood(const GridFunction& truth, const GridFunction& mean, const GridFunction& std) {
    require_same_domain(truth.domain(), mean.domain(), "log_likelihood");
    require_same_domain(truth.domain(), std.domain(), "log_likelihood");
    const double c = 0.5 * std::log(2.0 * std::numbers::pi);
    double s = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const double sg = std::max(std[k], kStdFloor);
        const double r = truth[k] - mean[k];
        s += -r * r / (2.0 * sg * sg) - std::log(sg) - c;
    }
    return s / static_cast<double>(truth.size());
}

inline constexpr double kCovarianceRidge = 1e-6;

namespace detail {

inline Eigen::MatrixXd covariance(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu) {
    const Eigen::MatrixXd C = X.rowwise() - mu.transpose();
    Eigen::MatrixXd S = (C.transpose() * C) / static_cast<double>(X.rows() - 1);
    S.diagonal().array() += kCovarianceRidge;
    return S;
}

inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw numeric_error("eigendecomposition failed");
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Tr((S1 S2)^{1/2}) via the symmetric product S1^{1/2} S2 S1^{1/2}.
inline double trace_sqrt_product(const Eigen::MatrixXd& S1, const Eigen::MatrixXd& S2) {
    const Eigen::MatrixXd R = sqrt_psd(S1);
    Eigen::MatrixXd M = R * S2 * R;
    M = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw numeric_error("eigendecomposition failed");
    double tr = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(std::max(es.eigenvalues()[i], 0.0));
    return tr;
}

inline double frechet_one_way(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    const Eigen::VectorXd ma = A.colwise().mean().transpose();
    const Eigen::VectorXd mb = B.colwise().mean().transpose();
    const Eigen::MatrixXd Sa = covariance(A, ma), Sb = covariance(B, mb);
    return (ma - mb).squaredNorm() + Sa.trace() + Sb.trace() - 2.0 * trace_sqrt_product(Sa, Sb);
}

} // namespace detail

// Frechet distance between Gaussian fits of two feature matrices (one row
// per sample). Both argument orders are averaged so the result is symmetric.
inline double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() < 2 || b.rows() < 2) throw data_error("frechet_distance: need at least 2 rows per set");
    if (a.cols() != b.cols())
        throw data_error("frechet_distance: feature dimensions differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()) + ")");
    const double d = 0.5 * (detail::frechet_one_way(a, b) + detail::frechet_one_way(b, a));
    return std::max(d, 0.0);
}

using FeatureExtractor = std::function<Eigen::MatrixXd(const SampleSet&)>;

inline constexpr std::size_t kPoolCells = 8;

// Features of one 2-axis frame: means over an 8 x 8 partition of the grid
// (cells by index range) followed by the global mean, std, min and max.
inline std::vector<double> frame_features(std::span<const double> v, std::size_t n0, std::size_t n1) {
    const std::size_t P = kPoolCells;
    std::vector<double> sum(P * P, 0.0), cnt(P * P, 0.0);
    for (std::size_t i = 0; i < n0; ++i)
        for (std::size_t j = 0; j < n1; ++j) {
            const std::size_t c = (i * P / n0) * P + (j * P / n1);
            sum[c] += v[i * n1 + j];
            cnt[c] += 1.0;
        }
    std::vector<double> f(P * P + 4);
    for (std::size_t c = 0; c < P * P; ++c) f[c] = cnt[c] > 0 ? sum[c] / cnt[c] : 0.0;
    double m = 0.0, lo = v[0], hi = v[0];
    for (double x : v) {
        m += x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    f[P * P] = m;
    f[P * P + 1] = std::sqrt(var / static_cast<double>(v.size()));
    f[P * P + 2] = lo;
    f[P * P + 3] = hi;
    return f;
}

// 1-axis fields are treated as n x 1 frames; 3-axis fields are pooled per
// frame along the last axis and the frame features averaged uniformly.
inline Eigen::MatrixXd default_features(const SampleSet& s) {
    check_sample_set(s, "default_features");
    const Domain& d = s.front().domain();
    require(d.ndims() >= 1 && d.ndims() <= 3, "default_features supports 1 to 3 axes");
    const std::size_t dim = kPoolCells * kPoolCells + 4;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(dim));
    parallel_for(s.size(), [&](std::size_t r) {
        const auto v = s[r].values();
        std::vector<double> f;
        if (d.ndims() <= 2) {
            const std::size_t n0 = d.axis(0).resolution, n1 = d.ndims() == 2 ? d.axis(1).resolution : 1;
            f = frame_features(v, n0, n1);
        } else {
            const std::size_t n0 = d.axis(0).resolution, n1 = d.axis(1).resolution, nf = d.axis(2).resolution;
            f.assign(dim, 0.0);
            std::vector<double> frame(n0 * n1);
            for (std::size_t k = 0; k < nf; ++k) {
                for (std::size_t p = 0; p < n0 * n1; ++p) frame[p] = v[p * nf + k];
                const auto g = frame_features(frame, n0, n1);
                for (std::size_t c = 0; c < dim; ++c) f[c] += g[c] / static_cast<double>(nf);
            }
        }
        for (std::size_t c = 0; c < dim; ++c) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f[c];
    });
    return X;
}

struct EvalReport {
    double mmse = 0.0;
    double smse = 0.0;
    double ce = 0.0;
    double fpd = 0.0;
    std::optional<double> ll;
    std::size_t n_generated = 0;
    std::size_t n_reference = 0;
    std::string extractor = "pool8x8+moments";
};

inline double mean_constraint_error(const SampleSet& s, const Constraint& c) {
    double total = 0.0;
    for (const auto& f : s) total += constraint_error(f, c);
    return total / static_cast<double>(s.size());
}

inline EvalReport evaluate(const SampleSet& generated, const SampleSet& reference, const Constraint& c,
                           const std::optional<GridFunction>& truth = std::nullopt,
                           const FeatureExtractor& extractor = default_features,
                           const std::string& extractor_id = "pool8x8+moments") {
    check_sample_set(generated, "evaluate");
    check_sample_set(reference, "evaluate");
    require_same_domain(generated.front().domain(), reference.front().domain(), "evaluate");
    EvalReport r;
    const auto ms = mmse_smse(generated, reference);
    r.mmse = ms.mmse;
    r.smse = ms.smse;
    r.ce = mean_constraint_error(generated, c);
    r.fpd = frechet_distance(extractor(generated), extractor(reference));
    if (truth) {
        const auto st = pointwise_stats(generated);
        r.ll = log_likelihood(*truth, st.mean, st.std);
    }
    r.n_generated = generated.size();
    r.n_reference = reference.size();
    r.extractor = extractor_id;
    for (double v : {r.mmse, r.smse, r.ce, r.fpd})
        if (!std::isfinite(v)) throw numeric_error("evaluate: non-finite metric");
    return r;
}

} // namespace eci
