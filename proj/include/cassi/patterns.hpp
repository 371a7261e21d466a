#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cassi/error.hpp"
#include "cassi/image.hpp"
#include "cassi/rng.hpp"

namespace cassi {

enum class PatternMode { Continuous, Binary };

// ---------------------------------------------------------------------------
// CodingPatternSet - S coding patterns over L bands, entries[s * L + l].
// Row s is the pattern applied at snapshot s. Continuous mode is the
// training relaxation; binary mode is what a coded aperture can implement.
// ---------------------------------------------------------------------------
struct CodingPatternSet {
    std::size_t shots = 0; // S
    std::size_t bands = 0; // L
    PatternMode mode = PatternMode::Binary;
    std::vector<double> entries;

    CodingPatternSet() = default;
    CodingPatternSet(std::size_t s, std::size_t l, PatternMode m)
        : shots(s), bands(l), mode(m), entries(s * l, 0.0) {}

    double& at(std::size_t s, std::size_t l) { return entries[s * bands + l]; }
    double at(std::size_t s, std::size_t l) const { return entries[s * bands + l]; }

    const double* row(std::size_t s) const { return entries.data() + s * bands; }

    void validate() const {
        require(shots > 0 && bands > 0, "patterns: dimensions must be positive");
        require(shots <= bands, "patterns: S must not exceed L (S=" + std::to_string(shots) +
                                    ", L=" + std::to_string(bands) + ")");
        require(entries.size() == shots * bands, "patterns: entry count mismatch");
        for (double e : entries)
            require(std::isfinite(e), "patterns: non-finite entry");
        if (mode == PatternMode::Binary) {
            for (std::size_t s = 0; s < shots; ++s) {
                bool any = false;
                for (std::size_t l = 0; l < bands; ++l) {
                    double e = at(s, l);
                    require(e == 0.0 || e == 1.0,
                            "patterns: binary mode entry not exactly 0 or 1 at row " +
                                std::to_string(s) + ", band " + std::to_string(l));
                    any = any || e == 1.0;
                }
                require(any, "patterns: binary row " + std::to_string(s) +
                                 " transmits nothing (all zeros)");
            }
        }
    }
};

// i.i.d. Bernoulli(density) binary patterns; any all-zero row is redrawn so
// every pattern transmits at least one band. Deterministic per seed.
inline CodingPatternSet random_design(std::size_t shots, std::size_t bands, double density,
                                      std::uint64_t seed) {
    require(shots >= 1 && shots <= bands, "random_design: need 1 <= S <= L");
    require(density > 0.0 && density < 1.0, "random_design: density must lie in (0,1)");
    CodingPatternSet set(shots, bands, PatternMode::Binary);
    Rng rng(derive_seed(seed, Stream::Design));
    for (std::size_t s = 0; s < shots; ++s) {
        bool any = false;
        while (!any) {
            for (std::size_t l = 0; l < bands; ++l) {
                double e = rng.bernoulli(density) ? 1.0 : 0.0;
                set.at(s, l) = e;
                any = any || e == 1.0;
            }
        }
    }
    set.validate();
    return set;
}

// Contiguous band-pass partition: bands 0..L-1 split into S non-overlapping
// near-equal intervals, longer intervals first (L=8, S=3 -> lengths 3,3,2);
// row s is the indicator of interval s.
inline CodingPatternSet banded_design(std::size_t shots, std::size_t bands) {
    require(shots >= 1 && shots <= bands, "banded_design: need 1 <= S <= L");
    CodingPatternSet set(shots, bands, PatternMode::Binary);
    std::size_t base = bands / shots, rem = bands % shots;
    std::size_t l = 0;
    for (std::size_t s = 0; s < shots; ++s) {
        std::size_t len = base + (s < rem ? 1 : 0);
        for (std::size_t k = 0; k < len; ++k) set.at(s, l++) = 1.0;
    }
    set.validate();
    return set;
}

// S = L identity; the no-compression (full data) sensing matrix.
inline CodingPatternSet identity_design(std::size_t bands) {
    require(bands >= 1, "identity_design: need L >= 1");
    CodingPatternSet set(bands, bands, PatternMode::Binary);
    for (std::size_t s = 0; s < bands; ++s) set.at(s, s) = 1.0;
    return set;
}

// ---------------------------------------------------------------------------
// PAT1 file format: one text header line "PAT1 S L <mode>\n" with mode
// "binary" or "continuous", then S text rows of L space-separated values:
// "0"/"1" in binary mode, shortest round-trip decimal (%.17g) in continuous
// mode. Rows end with "\n".
// ---------------------------------------------------------------------------
inline void save_pattern(const CodingPatternSet& set, const std::string& path) {
    set.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open file for writing: " + path);
    os << "PAT1 " << set.shots << " " << set.bands << " "
       << (set.mode == PatternMode::Binary ? "binary" : "continuous") << "\n";
    char buf[64];
    for (std::size_t s = 0; s < set.shots; ++s) {
        for (std::size_t l = 0; l < set.bands; ++l) {
            if (l) os << ' ';
            if (set.mode == PatternMode::Binary) {
                os << (set.at(s, l) == 1.0 ? '1' : '0');
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", set.at(s, l));
                os << buf;
            }
        }
        os << '\n';
    }
    require(static_cast<bool>(os), "write failed: " + path);
}

inline CodingPatternSet load_pattern(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open file: " + path);
    std::string header;
    if (!std::getline(is, header)) throw Error(path + ": missing PAT1 header");
    std::istringstream hs(header);
    std::string magic, mode_str;
    long long s = 0, l = 0;
    hs >> magic >> s >> l >> mode_str;
    if (magic != "PAT1" || s <= 0 || l <= 0 || (mode_str != "binary" && mode_str != "continuous"))
        throw Error(path + ": bad PAT1 header: \"" + header + "\"");

    CodingPatternSet set(static_cast<std::size_t>(s), static_cast<std::size_t>(l),
                         mode_str == "binary" ? PatternMode::Binary : PatternMode::Continuous);
    for (double& e : set.entries)
        if (!(is >> e)) throw Error(path + ": pattern payload shorter than header declares");
    double extra;
    if (is >> extra) throw Error(path + ": pattern payload longer than header declares");
    set.validate();
    return set;
}

// Pattern visualization: graymap with one row per pattern and one column per
// band (white = transmit). Continuous entries are clamped to [0,1].
inline void write_pattern_pgm(const CodingPatternSet& set, const std::string& path) {
    std::vector<std::uint8_t> gray(set.shots * set.bands);
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        double v = std::min(1.0, std::max(0.0, set.entries[i]));
        gray[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    write_pgm(path, set.shots, set.bands, gray);
}

} // namespace cassi
