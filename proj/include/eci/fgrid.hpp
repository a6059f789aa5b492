#pragma once

#include <string>

#include "eci/binary_io.hpp"
#include "eci/grid.hpp"

namespace eci {

// FGRID: "FGRD", u32 version, u8 ndims, per axis (f64 lower, f64 upper,
// u64 resolution), then f64 values row-major. All little-endian.
inline constexpr std::uint32_t kFgridVersion = 1;

inline io::ByteWriter encode_fgrid(const GridFunction& f) {
    io::ByteWriter w;
    w.bytes("FGRD");
    w.u32(kFgridVersion);
    w.u8(static_cast<std::uint8_t>(f.domain().ndims()));
    for (const auto& a : f.domain().axes()) {
        w.f64(a.lower);
        w.f64(a.upper);
        w.u64(a.resolution);
    }
    for (double v : f.values()) w.f64(v);
    return w;
}

inline GridFunction decode_fgrid(io::ByteReader& r) {
    if (r.bytes(4) != "FGRD") throw corrupt_file("not an FGRID file (bad magic)");
    if (const auto v = r.u32(); v != kFgridVersion)
        throw corrupt_file("unsupported FGRID version " + std::to_string(v));
    const std::size_t nd = r.u8();
    if (nd == 0) throw corrupt_file("FGRID with zero axes");
    std::vector<Axis> axes;
    std::size_t total = 1;
    for (std::size_t i = 0; i < nd; ++i) {
        Axis a;
        a.lower = r.f64();
        a.upper = r.f64();
        a.resolution = r.u64();
        if (a.resolution < 2 || a.resolution > (std::size_t{1} << 32))
            throw corrupt_file("FGRID axis resolution out of range");
        total *= a.resolution;
        if (total > r.remaining()) throw corrupt_file("FGRID truncated");
        axes.push_back(a);
    }
    Domain d = [&] {
        try {
            return Domain(std::move(axes));
        } catch (const data_error& e) {
            throw corrupt_file(std::string("FGRID domain invalid: ") + e.what());
        }
    }();
    if (r.remaining() != total * 8) throw corrupt_file("FGRID payload length mismatch");
    std::vector<double> vals(total);
    for (auto& v : vals) v = r.f64();
    return GridFunction(std::move(d), std::move(vals));
}

inline void write_fgrid(const GridFunction& f, const std::string& path) { encode_fgrid(f).save(path); }

inline GridFunction read_fgrid(const std::string& path) {
    auto r = io::ByteReader::from_file(path);
    return decode_fgrid(r);
}

} // namespace eci
