#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "cassi/data.hpp"
#include "cassi/error.hpp"

namespace cassi {

// Binary portable graymap (P5), maxval 255, one byte per pixel.
inline void write_pgm(const std::string& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& gray) {
    require(gray.size() == rows * cols, "pgm: pixel count mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open file for writing: " + path);
    os << "P5\n" << cols << " " << rows << "\n255\n";
    os.write(reinterpret_cast<const char*>(gray.data()),
             static_cast<std::streamsize>(gray.size()));
    require(static_cast<bool>(os), "write failed: " + path);
}

// Binary portable pixmap (P6), maxval 255, three bytes per pixel.
inline void write_ppm(const std::string& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& rgb) {
    require(rgb.size() == rows * cols * 3, "ppm: pixel count mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open file for writing: " + path);
    os << "P6\n" << cols << " " << rows << "\n255\n";
    os.write(reinterpret_cast<const char*>(rgb.data()),
             static_cast<std::streamsize>(rgb.size()));
    require(static_cast<bool>(os), "write failed: " + path);
}

// Fixed class palette; class c maps to palette[c % 12], background to black.
inline std::array<std::uint8_t, 3> class_color(int label) {
    static constexpr std::array<std::array<std::uint8_t, 3>, 12> kPalette = {{
        {230, 25, 75},   // red
        {60, 180, 75},   // green
        {0, 130, 200},   // blue
        {255, 225, 25},  // yellow
        {245, 130, 48},  // orange
        {145, 30, 180},  // purple
        {70, 240, 240},  // cyan
        {240, 50, 230},  // magenta
        {210, 245, 60},  // lime
        {250, 190, 212}, // pink
        {0, 128, 128},   // teal
        {220, 190, 255}, // lavender
    }};
    if (label < 0) return {0, 0, 0};
    return kPalette[static_cast<std::size_t>(label) % kPalette.size()];
}

// Renders a label map (ground truth or prediction) with the fixed palette.
inline void write_label_map_ppm(const LabelMap& map, const std::string& path) {
    std::vector<std::uint8_t> rgb;
    rgb.reserve(map.pixels() * 3);
    for (int v : map.labels) {
        auto c = class_color(v);
        rgb.push_back(c[0]);
        rgb.push_back(c[1]);
        rgb.push_back(c[2]);
    }
    write_ppm(path, map.height, map.width, rgb);
}

} // namespace cassi
