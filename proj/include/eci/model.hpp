#pragma once

// Spectral (Fourier) neural operator used as the flow vector field
// v(u_t, t), with a hand-written reverse pass for training.
//
// Layout of one forward pass on an n0 x n1 grid (N = n0 * n1 points):
//
//   lift:      h0 = W_u u + W_c [x, t]_rel + (W_e emb(t) + b)      C x N
//   layer l:   z  = SpectralConv_l(h) + W_l h + b_l                 C x N
//              h' = gelu(z)            (identity after the last layer)
//   project:   q  = gelu(Q1 h + c1)                                 P x N
//              v  = Q2 q + c2                                       1 x N
//
// SpectralConv keeps frequencies f0 in {0..m0-1, -m0..-1} along the first
// axis and f1 in {0..m1-1} along the last (real) axis, mixes channels with a
// complex C x C matrix per retained mode, and inverts with Hermitian
// symmetry. Forward DFTs are unnormalised and the inverse carries 1/N, so
// the layer acts on functions rather than on grid samples.

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <concepts>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "eci/errors.hpp"
#include "eci/grid.hpp"
#include "eci/noise.hpp"
#include "eci/parallel.hpp"
#include "eci/rng.hpp"

namespace eci {

// Anything that maps (u_t, t) to a vector field on the same grid.
template <typename F>
concept VectorField = requires(const F& f, const GridFunction& u, double t) {
    { f(u, t) } -> std::convertible_to<GridFunction>;
};

// A vector field with trainable parameters. accumulate_gradient runs one
// forward/backward pass for the squared-error loss against `target`, adds
// scale * dLoss/dtheta into grad, and returns the loss.
template <typename F>
concept DifferentiableField =
    VectorField<F> && requires(const F& f, const GridFunction& u, double t, const GridFunction& target, double scale,
                               std::span<double> grad) {
        { f.parameter_count() } -> std::convertible_to<std::size_t>;
        { f.accumulate_gradient(u, t, target, scale, grad) } -> std::convertible_to<double>;
    };

struct Architecture {
    std::size_t layers = 2;
    std::size_t width = 32;
    std::size_t modes0 = 8;
    std::size_t modes1 = 8;
    std::size_t projection = 64;
    std::size_t time_embed = 16;
    double time_scale = 1000.0;  // t is multiplied by this before the embedding

    std::size_t input_channels() const { return 1 + 2 + time_embed; }
    std::size_t spectral_modes() const { return 2 * modes0 * modes1; }

    void validate() const {
        require(layers >= 1, "architecture needs at least one spectral layer");
        require(width >= 1 && projection >= 1, "architecture widths must be positive");
        require(modes0 >= 1 && modes1 >= 1, "mode cutoffs must be positive");
        require(time_embed >= 2 && time_embed % 2 == 0, "time embedding size must be even and >= 2");
        require(time_scale > 0.0, "time scale must be positive");
    }

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

namespace detail {

using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RMap = Eigen::Map<RMat>;
using CRMap = Eigen::Map<const RMat>;

// GELU in its tanh form, x * sigmoid(c (x + 0.044715 x^3)) with
// c = 2 sqrt(2/pi). The exponential is evaluated with a branch-free
// polynomial so the loops vectorise; relative error is below 1e-15.
inline constexpr double kGeluC = 1.5957691216057308;
inline constexpr double kGeluK = 0.044715;

// a[i] <- 1 / (1 + exp(-a[i])), with a clamped to [-700, 700].
inline void sigmoid_inplace(double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double a = -out[i];
        out[i] = a < -700.0 ? -700.0 : (a > 700.0 ? 700.0 : a);
    }
    constexpr double shift = 6755399441055744.0;  // 1.5 * 2^52, rounds to nearest integer
    for (std::size_t i = 0; i < n; ++i) {
        const double a = out[i];
        const double kshift = a * 1.4426950408889634 + shift;
        const double k = kshift - shift;
        const double r = (a - k * 0.6931471803691238) - k * 1.9082149292705877e-10;
        double p = 1.0 / 479001600.0;
        p = p * r + 1.0 / 39916800.0;
        p = p * r + 1.0 / 3628800.0;
        p = p * r + 1.0 / 362880.0;
        p = p * r + 1.0 / 40320.0;
        p = p * r + 1.0 / 5040.0;
        p = p * r + 1.0 / 720.0;
        p = p * r + 1.0 / 120.0;
        p = p * r + 1.0 / 24.0;
        p = p * r + 1.0 / 6.0;
        p = p * r + 0.5;
        p = p * r + 1.0;
        p = p * r + 1.0;
        const double scale = std::bit_cast<double>((std::bit_cast<std::uint64_t>(kshift) + 1023) << 52);
        out[i] = 1.0 / (1.0 + p * scale);
    }
}

// out = gelu(z)
inline void gelu_block(const double* __restrict z, double* __restrict out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = kGeluC * (z[i] + kGeluK * z[i] * z[i] * z[i]);
    sigmoid_inplace(out, n);
    for (std::size_t i = 0; i < n; ++i) out[i] *= z[i];
}

// g *= gelu'(z)
inline void gelu_backward_block(const double* __restrict z, double* __restrict g, std::size_t n,
                                std::vector<double>& scratch) {
    scratch.resize(n);
    double* s = scratch.data();
    for (std::size_t i = 0; i < n; ++i) s[i] = kGeluC * (z[i] + kGeluK * z[i] * z[i] * z[i]);
    sigmoid_inplace(s, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = z[i];
        const double da = kGeluC * (1.0 + 3.0 * kGeluK * x * x);
        g[i] *= s[i] + x * s[i] * (1.0 - s[i]) * da;
    }
}

inline RMat gelu(const RMat& z) {
    RMat out(z.rows(), z.cols());
    gelu_block(z.data(), out.data(), static_cast<std::size_t>(z.size()));
    return out;
}

inline void gelu_backward(const RMat& z, RMat& g) {
    std::vector<double> scratch;
    gelu_backward_block(z.data(), g.data(), static_cast<std::size_t>(z.size()), scratch);
}

// Truncated real DFT tables for one grid resolution.
struct SpectralBasis {
    std::size_t n0, n1, m0, m1;
    RMat F1;     // n1 x 2m1  : [cos | sin](2 pi b q / n1)
    RMat F1T;    // 2m1 x n1
    RMat Finv;   // 2m1 x n1  : [cos ; -sin]
    RMat FinvT;  // n1 x 2m1
    RMat F0;     // 2K0 x n0  : [cos ; sin](2 pi f_a p / n0)
    RMat F0T;    // n0 x 2K0
    std::vector<double> scale;  // per last-axis mode: c_b / (n0 n1)

    SpectralBasis(std::size_t n0_, std::size_t n1_, std::size_t m0_, std::size_t m1_)
        : n0(n0_), n1(n1_), m0(m0_), m1(m1_) {
        const double two_pi = 2.0 * std::numbers::pi;
        const auto M1 = static_cast<Eigen::Index>(m1);
        const auto K0 = static_cast<Eigen::Index>(2 * m0);
        F1.resize(static_cast<Eigen::Index>(n1), 2 * M1);
        for (std::size_t q = 0; q < n1; ++q)
            for (std::size_t b = 0; b < m1; ++b) {
                const double th = two_pi * static_cast<double>((b * q) % n1) / static_cast<double>(n1);
                F1(q, b) = std::cos(th);
                F1(q, M1 + b) = std::sin(th);
            }
        F1T = F1.transpose();
        Finv = F1T;
        Finv.bottomRows(M1) *= -1.0;
        FinvT = Finv.transpose();
        F0.resize(2 * K0, static_cast<Eigen::Index>(n0));
        for (Eigen::Index a = 0; a < K0; ++a) {
            const long f = a < static_cast<Eigen::Index>(m0) ? a : a - K0;
            const long fm = ((f % static_cast<long>(n0)) + static_cast<long>(n0)) % static_cast<long>(n0);
            for (std::size_t p = 0; p < n0; ++p) {
                const double th = two_pi * static_cast<double>((static_cast<std::size_t>(fm) * p) % n0) /
                                  static_cast<double>(n0);
                F0(a, p) = std::cos(th);
                F0(K0 + a, p) = std::sin(th);
            }
        }
        F0T = F0.transpose();
        scale.resize(m1);
        for (std::size_t b = 0; b < m1; ++b)
            scale[b] = (b == 0 ? 1.0 : 2.0) / static_cast<double>(n0 * n1);
    }
};

// Cached retained-mode coefficients of one spectral layer input.
struct SpectralCache {
    Eigen::MatrixXd Xr, Xi;  // C x K
};

// [c][p][b'] (C*n0 x W) <-> [p][c][b'] (n0 x C*W)
inline void channel_major_to_row_major(const RMat& src, RMat& dst, std::size_t C, std::size_t n0, std::size_t w) {
    dst.resize(static_cast<Eigen::Index>(n0), static_cast<Eigen::Index>(C * w));
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < n0; ++p)
            for (std::size_t b = 0; b < w; ++b) dst(p, c * w + b) = src(c * n0 + p, b);
}
inline void row_major_to_channel_major(const RMat& src, RMat& dst, std::size_t C, std::size_t n0, std::size_t w) {
    dst.resize(static_cast<Eigen::Index>(C * n0), static_cast<Eigen::Index>(w));
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < n0; ++p)
            for (std::size_t b = 0; b < w; ++b) dst(c * n0 + p, b) = src(p, c * w + b);
}

// y (C x N) = SpectralConv(h); weights laid out per mode as [Wr (CxC), Wi (CxC)].
inline void spectral_forward(const SpectralBasis& B, const double* weights, std::size_t C, const RMat& h, RMat& y,
                             SpectralCache& cache) {
    const std::size_t n0 = B.n0, n1 = B.n1, m1 = B.m1, K0 = 2 * B.m0, K = K0 * m1, w2 = 2 * m1;
    const auto Ci = static_cast<Eigen::Index>(C);
    CRMap hv(h.data(), static_cast<Eigen::Index>(C * n0), static_cast<Eigen::Index>(n1));
    RMat A = hv * B.F1;
    RMat A2;
    channel_major_to_row_major(A, A2, C, n0, w2);
    RMat X4 = B.F0 * A2;  // 2K0 x C*2m1

    cache.Xr.resize(Ci, static_cast<Eigen::Index>(K));
    cache.Xi.resize(Ci, static_cast<Eigen::Index>(K));
    for (std::size_t a = 0; a < K0; ++a)
        for (std::size_t b = 0; b < m1; ++b) {
            const auto k = static_cast<Eigen::Index>(a * m1 + b);
            for (std::size_t c = 0; c < C; ++c) {
                const double P = X4(a, c * w2 + b), Q = X4(a, c * w2 + m1 + b);
                const double R = X4(K0 + a, c * w2 + b), T = X4(K0 + a, c * w2 + m1 + b);
                cache.Xr(c, k) = P - T;
                cache.Xi(c, k) = -Q - R;
            }
        }

    Eigen::MatrixXd Yr(Ci, static_cast<Eigen::Index>(K)), Yi(Ci, static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k) {
        CRMap Wr(weights + 2 * k * C * C, Ci, Ci), Wi(weights + (2 * k + 1) * C * C, Ci, Ci);
        const auto ki = static_cast<Eigen::Index>(k);
        Yr.col(ki).noalias() = Wr * cache.Xr.col(ki) - Wi * cache.Xi.col(ki);
        Yi.col(ki).noalias() = Wr * cache.Xi.col(ki) + Wi * cache.Xr.col(ki);
    }

    RMat M(static_cast<Eigen::Index>(2 * K0), static_cast<Eigen::Index>(C * w2));
    for (std::size_t a = 0; a < K0; ++a)
        for (std::size_t b = 0; b < m1; ++b) {
            const auto k = static_cast<Eigen::Index>(a * m1 + b);
            for (std::size_t o = 0; o < C; ++o) {
                const double zr = B.scale[b] * Yr(o, k), zi = B.scale[b] * Yi(o, k);
                M(a, o * w2 + b) = zr;
                M(a, o * w2 + m1 + b) = zi;
                M(K0 + a, o * w2 + b) = -zi;
                M(K0 + a, o * w2 + m1 + b) = zr;
            }
        }
    RMat G = B.F0T * M;  // n0 x C*2m1
    RMat G2;
    row_major_to_channel_major(G, G2, C, n0, w2);
    RMap yv(y.data(), static_cast<Eigen::Index>(C * n0), static_cast<Eigen::Index>(n1));
    yv.noalias() += G2 * B.Finv;
}

// Given gy (C x N): accumulates dL/dh into gh and dL/dW into gw.
inline void spectral_backward(const SpectralBasis& B, const double* weights, std::size_t C, const SpectralCache& cache,
                              const RMat& gy, RMat& gh, double* gw) {
    const std::size_t n0 = B.n0, n1 = B.n1, m1 = B.m1, K0 = 2 * B.m0, K = K0 * m1, w2 = 2 * m1;
    const auto Ci = static_cast<Eigen::Index>(C);
    CRMap gyv(gy.data(), static_cast<Eigen::Index>(C * n0), static_cast<Eigen::Index>(n1));
    RMat gG2 = gyv * B.FinvT;
    RMat gG;
    channel_major_to_row_major(gG2, gG, C, n0, w2);
    RMat gM = B.F0 * gG;  // 2K0 x C*2m1

    Eigen::MatrixXd gYr(Ci, static_cast<Eigen::Index>(K)), gYi(Ci, static_cast<Eigen::Index>(K));
    for (std::size_t a = 0; a < K0; ++a)
        for (std::size_t b = 0; b < m1; ++b) {
            const auto k = static_cast<Eigen::Index>(a * m1 + b);
            for (std::size_t o = 0; o < C; ++o) {
                const double gzr = gM(a, o * w2 + b) + gM(K0 + a, o * w2 + m1 + b);
                const double gzi = gM(a, o * w2 + m1 + b) - gM(K0 + a, o * w2 + b);
                gYr(o, k) = B.scale[b] * gzr;
                gYi(o, k) = B.scale[b] * gzi;
            }
        }

    Eigen::MatrixXd gXr(Ci, static_cast<Eigen::Index>(K)), gXi(Ci, static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        CRMap Wr(weights + 2 * k * C * C, Ci, Ci), Wi(weights + (2 * k + 1) * C * C, Ci, Ci);
        RMap gWr(gw + 2 * k * C * C, Ci, Ci), gWi(gw + (2 * k + 1) * C * C, Ci, Ci);
        gXr.col(ki).noalias() = Wr.transpose() * gYr.col(ki) + Wi.transpose() * gYi.col(ki);
        gXi.col(ki).noalias() = Wr.transpose() * gYi.col(ki) - Wi.transpose() * gYr.col(ki);
        gWr.noalias() += gYr.col(ki) * cache.Xr.col(ki).transpose() + gYi.col(ki) * cache.Xi.col(ki).transpose();
        gWi.noalias() += gYi.col(ki) * cache.Xr.col(ki).transpose() - gYr.col(ki) * cache.Xi.col(ki).transpose();
    }

    RMat gX4(static_cast<Eigen::Index>(2 * K0), static_cast<Eigen::Index>(C * w2));
    for (std::size_t a = 0; a < K0; ++a)
        for (std::size_t b = 0; b < m1; ++b) {
            const auto k = static_cast<Eigen::Index>(a * m1 + b);
            for (std::size_t c = 0; c < C; ++c) {
                gX4(a, c * w2 + b) = gXr(c, k);
                gX4(a, c * w2 + m1 + b) = -gXi(c, k);
                gX4(K0 + a, c * w2 + b) = -gXi(c, k);
                gX4(K0 + a, c * w2 + m1 + b) = -gXr(c, k);
            }
        }
    RMat gA2 = B.F0T * gX4;  // n0 x C*2m1
    RMat gA;
    row_major_to_channel_major(gA2, gA, C, n0, w2);
    RMap ghv(gh.data(), static_cast<Eigen::Index>(C * n0), static_cast<Eigen::Index>(n1));
    ghv.noalias() += gA * B.F1T;
}

} // namespace detail

// Sinusoidal embedding of flow time t in [0,1]: [sin(s t w_j), cos(s t w_j)]
// with w_j = 10000^(-j/half).
inline std::vector<double> time_embedding(double t, std::size_t dim, double scale) {
    const std::size_t half = dim / 2;
    std::vector<double> e(dim);
    for (std::size_t j = 0; j < half; ++j) {
        const double w = std::exp(-std::log(10000.0) * static_cast<double>(j) / static_cast<double>(half));
        e[j] = std::sin(scale * t * w);
        e[half + j] = std::cos(scale * t * w);
    }
    return e;
}

class SpectralVectorField {
public:
    struct Offsets {
        std::size_t lift_w, lift_b;
        std::vector<std::size_t> spec_w, pw_w, pw_b;
        std::size_t proj1_w, proj1_b, proj2_w, proj2_b, total;
    };

    SpectralVectorField() = default;

    // Parameters are zero until init() or set_parameters().
    SpectralVectorField(Architecture arch, Domain domain, NoiseSpec noise = {})
        : arch_(arch), domain_(std::move(domain)), noise_(noise) {
        arch_.validate();
        require(domain_.ndims() == 2, "the vector field operates on 2-axis grids");
        check_resolution(domain_);
        offsets_ = compute_offsets(arch_);
        params_.assign(offsets_.total, 0.0);
    }

    static Offsets compute_offsets(const Architecture& a) {
        Offsets o{};
        std::size_t pos = 0;
        auto take = [&](std::size_t n) {
            const std::size_t at = pos;
            pos += n;
            return at;
        };
        const std::size_t C = a.width;
        o.lift_w = take(C * a.input_channels());
        o.lift_b = take(C);
        for (std::size_t l = 0; l < a.layers; ++l) {
            o.spec_w.push_back(take(a.spectral_modes() * 2 * C * C));
            o.pw_w.push_back(take(C * C));
            o.pw_b.push_back(take(C));
        }
        o.proj1_w = take(a.projection * C);
        o.proj1_b = take(a.projection);
        o.proj2_w = take(a.projection);
        o.proj2_b = take(1);
        o.total = pos;
        return o;
    }

    // Spectral weights ~ N(0, (2/width)^2) / (retained modes); dense weights
    // Kaiming-uniform with bound sqrt(6 / fan_in); biases zero.
    void init(std::uint64_t seed) {
        Rng rng = derive_rng(seed, 0, 0x1417);
        std::normal_distribution<double> normal(0.0, 2.0 / static_cast<double>(arch_.width));
        std::fill(params_.begin(), params_.end(), 0.0);
        auto kaiming = [&](std::size_t off, std::size_t count, std::size_t fan_in) {
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            std::uniform_real_distribution<double> u(-bound, bound);
            for (std::size_t i = 0; i < count; ++i) params_[off + i] = u(rng);
        };
        const std::size_t C = arch_.width;
        kaiming(offsets_.lift_w, C * arch_.input_channels(), arch_.input_channels());
        const double mode_scale = 1.0 / static_cast<double>(arch_.spectral_modes());
        for (std::size_t l = 0; l < arch_.layers; ++l) {
            const std::size_t n = arch_.spectral_modes() * 2 * C * C;
            for (std::size_t i = 0; i < n; ++i) params_[offsets_.spec_w[l] + i] = normal(rng) * mode_scale;
            kaiming(offsets_.pw_w[l], C * C, C);
        }
        kaiming(offsets_.proj1_w, arch_.projection * C, C);
        kaiming(offsets_.proj2_w, arch_.projection, arch_.projection);
    }

    const Architecture& architecture() const { return arch_; }
    const Domain& domain() const { return domain_; }
    const NoiseSpec& noise_spec() const { return noise_; }
    const Offsets& offsets() const { return offsets_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }
    void set_parameters(std::vector<double> p) {
        require(p.size() == offsets_.total, "parameter vector length does not match architecture");
        params_ = std::move(p);
    }

    void check_resolution(const Domain& d) const {
        require(d.ndims() == 2, "the vector field operates on 2-axis grids");
        if (d.axis(0).resolution < 2 * arch_.modes0 || d.axis(1).resolution < 2 * arch_.modes1)
            throw data_error("resolution " + describe(d) + " is below twice the mode cutoff (" +
                             std::to_string(arch_.modes0) + ", " + std::to_string(arch_.modes1) + ")");
    }

    GridFunction operator()(const GridFunction& u, double t) const { return forward(u, t); }

    GridFunction forward(const GridFunction& u, double t) const {
        Tape tape;
        return run_forward(u, t, tape);
    }

    // One forward/backward pass for the loss mean((v - target)^2).
    double accumulate_gradient(const GridFunction& u, double t, const GridFunction& target, double scale,
                               std::span<double> grad) const {
        require(grad.size() == params_.size(), "gradient buffer has wrong length");
        require_same_domain(u.domain(), target.domain(), "accumulate_gradient");
        Tape tape;
        const GridFunction v = run_forward(u, t, tape);
        const std::size_t N = u.size();
        double loss = 0.0;
        detail::RMat gout(1, static_cast<Eigen::Index>(N));
        for (std::size_t i = 0; i < N; ++i) {
            const double d = v[i] - target[i];
            loss += d * d;
            gout(0, static_cast<Eigen::Index>(i)) = 2.0 * d / static_cast<double>(N) * scale;
        }
        run_backward(tape, gout, grad);
        return loss / static_cast<double>(N);
    }

private:
    struct Tape {
        const detail::SpectralBasis* basis = nullptr;
        std::size_t N = 0;
        detail::RMat in_u, in_c;  // 1 x N, 2 x N
        std::vector<double> emb;
        std::vector<detail::RMat> h;  // layer inputs h[0..L], h[L] feeds projection
        std::vector<detail::RMat> z;  // pre-activations per layer
        std::vector<detail::SpectralCache> spec;
        detail::RMat q_pre, q;
    };

    const detail::SpectralBasis& basis_for(std::size_t n0, std::size_t n1) const {
        std::lock_guard lk(*basis_mu_);
        auto& slot = (*bases_)[{n0, n1}];
        if (!slot) slot = std::make_shared<const detail::SpectralBasis>(n0, n1, arch_.modes0, arch_.modes1);
        return *slot;
    }

    GridFunction run_forward(const GridFunction& u, double t, Tape& tp) const {
        using detail::RMat;
        const Domain& d = u.domain();
        if (!d.same_bounds(domain_))
            throw domain_mismatch("forward: input bounds " + describe(d) + " differ from model domain " +
                                  describe(domain_));
        check_resolution(d);
        const std::size_t n0 = d.axis(0).resolution, n1 = d.axis(1).resolution, N = n0 * n1;
        const std::size_t C = arch_.width, L = arch_.layers, P = arch_.projection;
        const auto Ni = static_cast<Eigen::Index>(N), Ci = static_cast<Eigen::Index>(C);
        tp.basis = &basis_for(n0, n1);
        tp.N = N;
        const double* th = params_.data();

        tp.in_u = detail::CRMap(u.values().data(), 1, Ni);
        tp.in_c.resize(2, Ni);
        for (std::size_t p = 0; p < n0; ++p)
            for (std::size_t q = 0; q < n1; ++q) {
                tp.in_c(0, static_cast<Eigen::Index>(p * n1 + q)) =
                    static_cast<double>(p) / static_cast<double>(n0 - 1);
                tp.in_c(1, static_cast<Eigen::Index>(p * n1 + q)) =
                    static_cast<double>(q) / static_cast<double>(n1 - 1);
            }
        tp.emb = time_embedding(t, arch_.time_embed, arch_.time_scale);

        // Lift: the time embedding is constant in space, so it folds into a bias.
        const auto in_ch = static_cast<Eigen::Index>(arch_.input_channels());
        detail::CRMap Wl(th + offsets_.lift_w, Ci, in_ch);
        Eigen::VectorXd bias = Eigen::Map<const Eigen::VectorXd>(th + offsets_.lift_b, Ci);
        bias.noalias() += Wl.rightCols(static_cast<Eigen::Index>(arch_.time_embed)) *
                          Eigen::Map<const Eigen::VectorXd>(tp.emb.data(), static_cast<Eigen::Index>(tp.emb.size()));
        tp.h.assign(L + 1, RMat());
        tp.z.assign(L, RMat());
        tp.spec.assign(L, detail::SpectralCache{});
        tp.h[0].noalias() = Wl.col(0) * tp.in_u + Wl.middleCols(1, 2) * tp.in_c;
        tp.h[0].colwise() += bias;

        for (std::size_t l = 0; l < L; ++l) {
            detail::CRMap W(th + offsets_.pw_w[l], Ci, Ci);
            RMat& z = tp.z[l];
            z.noalias() = W * tp.h[l];
            z.colwise() += Eigen::Map<const Eigen::VectorXd>(th + offsets_.pw_b[l], Ci);
            detail::spectral_forward(*tp.basis, th + offsets_.spec_w[l], C, tp.h[l], z, tp.spec[l]);
            if (l + 1 < L)
                tp.h[l + 1] = detail::gelu(z);
            else
                tp.h[l + 1] = z;
        }

        const auto Pi = static_cast<Eigen::Index>(P);
        detail::CRMap Q1(th + offsets_.proj1_w, Pi, Ci);
        tp.q_pre.noalias() = Q1 * tp.h[L];
        tp.q_pre.colwise() += Eigen::Map<const Eigen::VectorXd>(th + offsets_.proj1_b, Pi);
        tp.q = detail::gelu(tp.q_pre);
        detail::CRMap Q2(th + offsets_.proj2_w, 1, Pi);
        RMat out = Q2 * tp.q;
        out.array() += th[offsets_.proj2_b];

        GridFunction v(d);
        std::copy(out.data(), out.data() + N, v.data().begin());
        if (!v.all_finite()) throw numeric_error("vector field produced non-finite values");
        return v;
    }

    void run_backward(const Tape& tp, const detail::RMat& gout, std::span<double> grad) const {
        using detail::RMat;
        using detail::RMap;
        using detail::CRMap;
        const std::size_t C = arch_.width, L = arch_.layers, P = arch_.projection;
        const auto Ci = static_cast<Eigen::Index>(C), Pi = static_cast<Eigen::Index>(P);
        const double* th = params_.data();
        double* g = grad.data();

        // Projection.
        RMap(g + offsets_.proj2_w, 1, Pi).noalias() += gout * tp.q.transpose();
        g[offsets_.proj2_b] += gout.sum();
        CRMap Q2(th + offsets_.proj2_w, 1, Pi);
        RMat gq = Q2.transpose() * gout;
        detail::gelu_backward(tp.q_pre, gq);
        RMap(g + offsets_.proj1_w, Pi, Ci).noalias() += gq * tp.h[L].transpose();
        Eigen::Map<Eigen::VectorXd>(g + offsets_.proj1_b, Pi) += gq.rowwise().sum();
        CRMap Q1(th + offsets_.proj1_w, Pi, Ci);
        RMat gh = Q1.transpose() * gq;

        for (std::size_t l = L; l-- > 0;) {
            RMat gz = std::move(gh);
            if (l + 1 < L) detail::gelu_backward(tp.z[l], gz);
            RMap(g + offsets_.pw_w[l], Ci, Ci).noalias() += gz * tp.h[l].transpose();
            Eigen::Map<Eigen::VectorXd>(g + offsets_.pw_b[l], Ci) += gz.rowwise().sum();
            CRMap W(th + offsets_.pw_w[l], Ci, Ci);
            gh = W.transpose() * gz;
            detail::spectral_backward(*tp.basis, th + offsets_.spec_w[l], C, tp.spec[l], gz, gh,
                                      g + offsets_.spec_w[l]);
        }

        // Lift.
        const auto in_ch = static_cast<Eigen::Index>(arch_.input_channels());
        RMap gWl(g + offsets_.lift_w, Ci, in_ch);
        gWl.col(0).noalias() += gh * tp.in_u.transpose();
        gWl.middleCols(1, 2).noalias() += gh * tp.in_c.transpose();
        const Eigen::VectorXd gsum = gh.rowwise().sum();
        gWl.rightCols(static_cast<Eigen::Index>(arch_.time_embed)).noalias() +=
            gsum * Eigen::Map<const Eigen::RowVectorXd>(tp.emb.data(), static_cast<Eigen::Index>(tp.emb.size()));
        Eigen::Map<Eigen::VectorXd>(g + offsets_.lift_b, Ci) += gsum;
    }

    Architecture arch_;
    Domain domain_;
    NoiseSpec noise_;
    Offsets offsets_{};
    std::vector<double> params_;
    std::shared_ptr<std::mutex> basis_mu_ = std::make_shared<std::mutex>();
    std::shared_ptr<std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const detail::SpectralBasis>>>
        bases_ = std::make_shared<
            std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const detail::SpectralBasis>>>();
};

// ---------------------------------------------------------------------------
// Flow-matching objective

struct FlowSample {
    GridFunction u0;
    GridFunction u1;
    double t = 0.0;
};

// Point on the straight conditional path: (1 - t) u0 + t u1.
inline GridFunction interpolate_path(const GridFunction& u0, const GridFunction& u1, double t) {
    return lincomb(1.0 - t, u0, t, u1);
}

// mean((v(u_t, t) - (u1 - u0))^2)
template <VectorField F>
double ffm_loss(const F& field, const GridFunction& u0, const GridFunction& u1, double t) {
    require_same_domain(u0.domain(), u1.domain(), "ffm_loss");
    const GridFunction ut = interpolate_path(u0, u1, t);
    return mse(field(ut, t), u1 - u0);
}

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad;
};

// Exact gradient of the batch-mean ffm_loss. Each element writes its own
// buffer and the buffers are summed in batch order, so the result does not
// depend on the worker count.
template <DifferentiableField F>
LossGradient loss_and_gradient(const F& field, std::span<const FlowSample> batch,
                               std::size_t workers = worker_count()) {
    require(!batch.empty(), "gradient needs a nonempty batch");
    const std::size_t P = field.parameter_count();
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<std::vector<double>> grads(batch.size());
    std::vector<double> losses(batch.size());
    parallel_for(
        batch.size(),
        [&](std::size_t b) {
            const auto& s = batch[b];
            require_same_domain(s.u0.domain(), s.u1.domain(), "gradient");
            grads[b].assign(P, 0.0);
            const GridFunction ut = interpolate_path(s.u0, s.u1, s.t);
            losses[b] = field.accumulate_gradient(ut, s.t, s.u1 - s.u0, scale, grads[b]);
        },
        workers);
    LossGradient out{0.0, std::move(grads[0])};
    out.loss = scale * losses[0];
    for (std::size_t b = 1; b < batch.size(); ++b) {
        out.loss += scale * losses[b];
        for (std::size_t i = 0; i < P; ++i) out.grad[i] += grads[b][i];
        std::vector<double>().swap(grads[b]);
    }
    return out;
}

template <DifferentiableField F>
std::vector<double> gradient(const F& field, std::span<const FlowSample> batch) {
    return loss_and_gradient(field, batch).grad;
}

} // namespace eci
