#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "cassi/data.hpp"
#include "cassi/error.hpp"
#include "cassi/rng.hpp"

namespace cassi {

// Synthetic benchmark scenes: tiled class regions inside a background
// border, one smooth spectral template per class.
//
// A template is a sum of 4 Gaussians over the band axis: two broad lobes
// shared by the whole scene, one narrow class peak anchored near band
// (c + 0.5) * L / C, and a broad shallow dip of equal area under the same
// center. The dip cancels the peak's integral, so summing all bands (or any
// wide random subset of them) carries almost no class information while a
// narrow band-pass over the peak separates the classes cleanly. Class
// structure therefore rewards coding patterns that concentrate on the
// right bands.

namespace detail {

struct GaussTerm {
    double center, sigma, amp;
};

inline double eval_terms(const std::vector<GaussTerm>& terms, double l) {
    double s = 0.0;
    for (const auto& t : terms) {
        double d = (l - t.center) / t.sigma;
        s += t.amp * std::exp(-0.5 * d * d);
    }
    return s;
}

struct SceneSpectra {
    std::vector<std::vector<double>> templates; // one per class
    std::vector<double> background;             // shared lobes, no class peak
};

inline SceneSpectra make_scene_spectra(std::size_t bands, int classes, std::uint64_t seed) {
    require(classes >= 2, "synth: need at least 2 classes");
    require(bands >= 8, "synth: need at least 8 bands");
    const double L = static_cast<double>(bands);

    Rng base_rng(derive_seed(seed, Stream::SynthBase));
    std::vector<GaussTerm> base;
    base.push_back({L * base_rng.uniform(0.30, 0.40), L * base_rng.uniform(0.24, 0.30),
                    base_rng.uniform(0.40, 0.50)});
    base.push_back({L * base_rng.uniform(0.72, 0.84), L * base_rng.uniform(0.18, 0.24),
                    base_rng.uniform(0.25, 0.35)});

    SceneSpectra out;
    out.background.resize(bands);
    for (std::size_t l = 0; l < bands; ++l)
        out.background[l] = 0.08 + eval_terms(base, static_cast<double>(l));

    Rng bump_rng(derive_seed(seed, Stream::SynthBumps));
    for (int c = 0; c < classes; ++c) {
        auto terms = base;
        // narrow class peak, anchored per class so classes never collide
        double anchor = L * (static_cast<double>(c) + 0.5) / static_cast<double>(classes);
        double center = anchor + L * 0.02 * bump_rng.uniform(-1.0, 1.0);
        double peak_sigma = L * bump_rng.uniform(0.010, 0.015);
        double peak_amp = bump_rng.uniform(0.22, 0.28);
        terms.push_back({center, peak_sigma, peak_amp});
        // equal-area dip: integral of (amp * sigma) cancels the peak's
        double dip_sigma = peak_sigma * bump_rng.uniform(5.5, 7.5);
        terms.push_back({center, dip_sigma, -peak_amp * peak_sigma / dip_sigma});

        std::vector<double> t(bands);
        for (std::size_t l = 0; l < bands; ++l)
            t[l] = 0.08 + eval_terms(terms, static_cast<double>(l));
        out.templates.push_back(std::move(t));
    }
    return out;
}

} // namespace detail

// Per-class band templates in pre-noise units, values in (0, ~1.2). Exposed
// separately so tests can measure pairwise template separation directly.
inline std::vector<std::vector<double>> synth_class_templates(std::size_t bands, int classes,
                                                              std::uint64_t seed) {
    return detail::make_scene_spectra(bands, classes, seed).templates;
}

// Generates a cube plus ground-truth labels. Layout: a background border of
// width max(1, min(M,N)/16) labeled -1 around a grid of square-ish tiles,
// each tile assigned to one class (every class gets at least one tile).
// Voxels are template + i.i.d. Gaussian noise of the given amplitude, then
// the whole cube is min-max normalized to [0,1]. Deterministic per seed;
// noise = 0 makes all signatures of a class bit-identical.
inline std::pair<SpectralCube, LabelMap> synth_dataset(std::size_t height, std::size_t width,
                                                       std::size_t bands, int classes,
                                                       double noise, std::uint64_t seed) {
    require(noise >= 0.0, "synth: noise must be non-negative");
    require(height >= 8 && width >= 8, "synth: scene must be at least 8x8");

    auto spectra = detail::make_scene_spectra(bands, classes, seed);

    std::size_t border = std::max<std::size_t>(1, std::min(height, width) / 16);
    require(height > 2 * border + 1 && width > 2 * border + 1, "synth: scene too small for border");

    // tile grid over the interior; round-robin class assignment, shuffled
    std::size_t grid = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::ceil(std::sqrt(3.0 * static_cast<double>(classes)))));
    std::vector<int> tile_class(grid * grid);
    for (std::size_t t = 0; t < tile_class.size(); ++t)
        tile_class[t] = static_cast<int>(t % static_cast<std::size_t>(classes));
    Rng tile_rng(derive_seed(seed, Stream::SynthTiles));
    tile_rng.shuffle(tile_class);

    LabelMap labels(height, width, classes);
    std::size_t ih = height - 2 * border, iw = width - 2 * border;
    for (std::size_t m = border; m < height - border; ++m) {
        for (std::size_t n = border; n < width - border; ++n) {
            std::size_t tm = (m - border) * grid / ih;
            std::size_t tn = (n - border) * grid / iw;
            labels.at(m, n) = tile_class[tm * grid + tn];
        }
    }
    labels.validate();

    SpectralCube cube(height, width, bands);
    Rng noise_rng(derive_seed(seed, Stream::SynthNoise));
    for (std::size_t m = 0; m < height; ++m) {
        for (std::size_t n = 0; n < width; ++n) {
            int c = labels.at(m, n);
            const std::vector<double>& t = (c == kBackgroundLabel)
                                               ? spectra.background
                                               : spectra.templates[static_cast<std::size_t>(c)];
            double* sig = cube.signature(m * width + n);
            if (noise > 0.0) {
                for (std::size_t l = 0; l < bands; ++l) sig[l] = t[l] + noise * noise_rng.normal();
            } else {
                for (std::size_t l = 0; l < bands; ++l) sig[l] = t[l];
            }
        }
    }
    normalize_minmax(cube);
    return {std::move(cube), std::move(labels)};
}

} // namespace cassi
