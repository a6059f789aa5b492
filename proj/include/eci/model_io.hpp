#pragma once

#include <string>

#include "eci/binary_io.hpp"
#include "eci/model.hpp"

namespace eci {

// ECIM layout (little-endian):
//   "ECIM", u32 version
//   u64 layers, width, modes0, modes1, projection, time_embed, f64 time_scale
//   u8 ndims, per axis (f64 lower, f64 upper, u64 resolution)
//   u8 noise kind, f64 length, f64 variance, u8 smoothness, f64 jitter
//   u64 parameter count, f64 parameters
inline constexpr std::uint32_t kModelVersion = 1;

inline io::ByteWriter encode_model(const SpectralVectorField& m) {
    io::ByteWriter w;
    w.bytes("ECIM");
    w.u32(kModelVersion);
    const auto& a = m.architecture();
    for (std::size_t v : {a.layers, a.width, a.modes0, a.modes1, a.projection, a.time_embed}) w.u64(v);
    w.f64(a.time_scale);
    w.u8(static_cast<std::uint8_t>(m.domain().ndims()));
    for (const auto& ax : m.domain().axes()) {
        w.f64(ax.lower);
        w.f64(ax.upper);
        w.u64(ax.resolution);
    }
    const auto& n = m.noise_spec();
    w.u8(static_cast<std::uint8_t>(n.kind));
    w.f64(n.length);
    w.f64(n.variance);
    w.u8(static_cast<std::uint8_t>(n.smoothness));
    w.f64(n.jitter);
    w.u64(m.parameter_count());
    for (double p : m.parameters()) w.f64(p);
    return w;
}

inline SpectralVectorField decode_model(io::ByteReader& r) {
    if (r.bytes(4) != "ECIM") throw corrupt_file("not a model file (bad magic)");
    if (const auto v = r.u32(); v != kModelVersion)
        throw version_mismatch("model file version " + std::to_string(v) + " is not supported (expected " +
                               std::to_string(kModelVersion) + ")");
    auto small = [&](const char* what) {
        const std::uint64_t v = r.u64();
        if (v == 0 || v > 65536) throw corrupt_file(std::string("model file: implausible ") + what);
        return static_cast<std::size_t>(v);
    };
    Architecture a;
    a.layers = small("layer count");
    a.width = small("width");
    a.modes0 = small("mode cutoff");
    a.modes1 = small("mode cutoff");
    a.projection = small("projection width");
    a.time_embed = small("time embedding size");
    a.time_scale = r.f64();
    const std::size_t nd = r.u8();
    std::vector<Axis> axes(nd);
    for (auto& ax : axes) {
        ax.lower = r.f64();
        ax.upper = r.f64();
        ax.resolution = r.u64();
    }
    NoiseSpec n;
    const auto kind = r.u8();
    if (kind > 1) throw corrupt_file("model file: bad noise kind");
    n.kind = static_cast<NoiseKind>(kind);
    n.length = r.f64();
    n.variance = r.f64();
    const auto sm = r.u8();
    if (sm > 2) throw corrupt_file("model file: bad smoothness");
    n.smoothness = static_cast<Smoothness>(sm);
    n.jitter = r.f64();
    const std::uint64_t count = r.u64();
    if (count > r.remaining() / 8) throw corrupt_file("model file truncated");
    try {
        a.validate();
        n.validate();
        SpectralVectorField m(a, Domain(std::move(axes)), n);
        if (count != m.parameter_count()) throw corrupt_file("model file: parameter count does not match architecture");
        if (r.remaining() != count * 8) throw corrupt_file("model file: trailing bytes");
        std::vector<double> p(count);
        for (auto& v : p) v = r.f64();
        m.set_parameters(std::move(p));
        return m;
    } catch (const corrupt_file&) {
        throw;
    } catch (const data_error& e) {
        throw corrupt_file(std::string("model file: ") + e.what());
    }
}

inline void save_model(const SpectralVectorField& m, const std::string& path) { encode_model(m).save(path); }

inline SpectralVectorField load_model(const std::string& path) {
    auto r = io::ByteReader::from_file(path);
    return decode_model(r);
}

} // namespace eci
