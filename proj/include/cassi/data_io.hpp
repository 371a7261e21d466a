#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "cassi/data.hpp"
#include "cassi/error.hpp"

// File formats (bit-exact):
//
//   CUBE1: one text header line "CUBE1 M N L\n", then M*N*L little-endian
//          IEEE-754 32-bit floats in pixel-major, band-contiguous order
//          (pixel j = m*N + n ascending, bands 0..L-1 within each pixel).
//
//   LBL1:  one text header line "LBL1 M N C\n", then M*N little-endian
//          signed 16-bit integers in row-major pixel order. -1 marks
//          background; classes are 0..C-1.

namespace cassi {

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t x) {
    char b[4] = {static_cast<char>(x & 0xff), static_cast<char>((x >> 8) & 0xff),
                 static_cast<char>((x >> 16) & 0xff), static_cast<char>((x >> 24) & 0xff)};
    os.write(b, 4);
}

inline bool get_u32_le(std::istream& is, std::uint32_t& x) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    x = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

inline void put_f32_le(std::ostream& os, float f) {
    put_u32_le(os, std::bit_cast<std::uint32_t>(f));
}

inline bool get_f32_le(std::istream& is, float& f) {
    std::uint32_t u;
    if (!get_u32_le(is, u)) return false;
    f = std::bit_cast<float>(u);
    return true;
}

inline void put_i16_le(std::ostream& os, std::int16_t v) {
    std::uint16_t x = static_cast<std::uint16_t>(v);
    char b[2] = {static_cast<char>(x & 0xff), static_cast<char>((x >> 8) & 0xff)};
    os.write(b, 2);
}

inline bool get_i16_le(std::istream& is, std::int16_t& v) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2)) return false;
    v = static_cast<std::int16_t>(static_cast<std::uint16_t>(b[0]) |
                                  (static_cast<std::uint16_t>(b[1]) << 8));
    return true;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open file: " + path);
    return is;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open file for writing: " + path);
    return os;
}

} // namespace detail

inline void save_cube(const SpectralCube& cube, const std::string& path) {
    auto os = detail::open_output(path);
    os << "CUBE1 " << cube.height << " " << cube.width << " " << cube.bands << "\n";
    for (double x : cube.voxels) detail::put_f32_le(os, static_cast<float>(x));
    require(static_cast<bool>(os), "write failed: " + path);
}

// Loads a CUBE1 file and applies global min-max normalization to [0,1].
// Rejects size mismatches and non-finite voxels (naming the voxel index).
inline SpectralCube load_cube(const std::string& path) {
    auto is = detail::open_input(path);
    std::string header;
    if (!std::getline(is, header)) throw Error(path + ": missing CUBE1 header");
    std::istringstream hs(header);
    std::string magic;
    long long m = 0, n = 0, l = 0;
    hs >> magic >> m >> n >> l;
    if (magic != "CUBE1" || m <= 0 || n <= 0 || l <= 0)
        throw Error(path + ": bad CUBE1 header: \"" + header + "\"");

    SpectralCube cube(static_cast<std::size_t>(m), static_cast<std::size_t>(n),
                      static_cast<std::size_t>(l));
    for (std::size_t i = 0; i < cube.voxels.size(); ++i) {
        float f;
        if (!detail::get_f32_le(is, f))
            throw Error(path + ": size mismatch, header declares " +
                        std::to_string(cube.voxels.size()) + " values but payload holds " +
                        std::to_string(i));
        cube.voxels[i] = static_cast<double>(f);
    }
    char extra;
    if (is.read(&extra, 1))
        throw Error(path + ": size mismatch, payload longer than header declares");

    cube.validate(); // rejects non-finite voxels with the offending index
    normalize_minmax(cube);
    return cube;
}

inline void save_labels(const LabelMap& labels, const std::string& path) {
    auto os = detail::open_output(path);
    os << "LBL1 " << labels.height << " " << labels.width << " " << labels.classes << "\n";
    for (int v : labels.labels) detail::put_i16_le(os, static_cast<std::int16_t>(v));
    require(static_cast<bool>(os), "write failed: " + path);
}

inline LabelMap load_labels(const std::string& path) {
    auto is = detail::open_input(path);
    std::string header;
    if (!std::getline(is, header)) throw Error(path + ": missing LBL1 header");
    std::istringstream hs(header);
    std::string magic;
    long long m = 0, n = 0, c = 0;
    hs >> magic >> m >> n >> c;
    if (magic != "LBL1" || m <= 0 || n <= 0 || c <= 0)
        throw Error(path + ": bad LBL1 header: \"" + header + "\"");

    LabelMap labels(static_cast<std::size_t>(m), static_cast<std::size_t>(n),
                    static_cast<int>(c));
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        std::int16_t v;
        if (!detail::get_i16_le(is, v))
            throw Error(path + ": size mismatch, header declares " +
                        std::to_string(labels.labels.size()) + " labels but payload holds " +
                        std::to_string(i));
        labels.labels[i] = v;
    }
    char extra;
    if (is.read(&extra, 1))
        throw Error(path + ": size mismatch, payload longer than header declares");

    labels.validate();
    return labels;
}

} // namespace cassi
