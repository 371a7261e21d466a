#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cassi/data.hpp"
#include "cassi/error.hpp"
#include "cassi/patterns.hpp"
#include "cassi/rng.hpp"

namespace cassi {

// ---------------------------------------------------------------------------
// MeasurementMatrix - S x P compressed measurements, values[s * P + j];
// column j holds pixel j's measurements under all S patterns.
// ---------------------------------------------------------------------------
struct MeasurementMatrix {
    std::size_t shots = 0;  // S
    std::size_t pixels = 0; // P
    std::vector<double> values;

    MeasurementMatrix() = default;
    MeasurementMatrix(std::size_t s, std::size_t p) : shots(s), pixels(p), values(s * p, 0.0) {}

    double& at(std::size_t s, std::size_t j) { return values[s * pixels + j]; }
    double at(std::size_t s, std::size_t j) const { return values[s * pixels + j]; }
};

// Gathers measurement columns idx[begin..end) as a {B, S} tensor.
inline Tensor gather_measurements(const MeasurementMatrix& y, const std::vector<std::size_t>& idx,
                                  std::size_t begin, std::size_t end) {
    require(begin <= end && end <= idx.size(), "gather: bad index range");
    std::size_t batch = end - begin;
    Tensor x({batch, y.shots});
    for (std::size_t b = 0; b < batch; ++b) {
        std::size_t j = idx[begin + b];
        require(j < y.pixels, "gather: pixel index out of range");
        for (std::size_t s = 0; s < y.shots; ++s) x.v[b * y.shots + s] = y.values[s * y.pixels + j];
    }
    return x;
}

// Matrix-form sensing, Y = H F: Y[s,j] = sum_l H[s,l] * F[l,j].
//
// Accumulation runs over ascending band index into one scalar. That order is
// a library-wide contract shared with simulate_snapshots and the optical
// layer, so the three compute bit-identical measurements.
//
// noise_std > 0 adds i.i.d. Gaussian detector noise to every measurement
// (off by default; the sensing model itself is noiseless).
inline MeasurementMatrix sense(const CodingPatternSet& patterns, const SignatureMatrix& f,
                               double noise_std = 0.0, std::uint64_t noise_seed = 0) {
    require(patterns.bands == f.bands,
            "sense: band count mismatch (patterns L=" + std::to_string(patterns.bands) +
                ", cube L=" + std::to_string(f.bands) + ")");
    require(noise_std >= 0.0, "sense: noise_std must be non-negative");

    MeasurementMatrix y(patterns.shots, f.pixels);
    for (std::size_t s = 0; s < patterns.shots; ++s) {
        const double* h = patterns.row(s);
        for (std::size_t j = 0; j < f.pixels; ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < f.bands; ++l) acc += h[l] * f.values[l * f.pixels + j];
            y.at(s, j) = acc;
        }
    }
    if (noise_std > 0.0) {
        Rng rng(derive_seed(noise_seed, Stream::SensorNoise));
        for (double& v : y.values) v += noise_std * rng.normal();
    }
    return y;
}

// Snapshot-level simulation of the acquisition. At snapshot s' pixel j is
// coded by pattern (j + s' + assignment_offset) mod S; over S snapshots each
// pixel is coded exactly once by every pattern. The per-snapshot detector
// image Yhat is computed first, then rearranged so that row s of the result
// collects every pixel's measurement under pattern s. Equal to
// sense(patterns, flatten(cube)) bit-for-bit; the offset only permutes which
// snapshot produced each value.
inline MeasurementMatrix simulate_snapshots(const CodingPatternSet& patterns,
                                            const SpectralCube& cube,
                                            std::size_t assignment_offset = 0) {
    require(patterns.mode == PatternMode::Binary, "simulate_snapshots: patterns must be binary");
    require(patterns.bands == cube.bands,
            "simulate_snapshots: band count mismatch (patterns L=" +
                std::to_string(patterns.bands) + ", cube L=" + std::to_string(cube.bands) + ")");

    const std::size_t S = patterns.shots, P = cube.pixels(), L = cube.bands;

    // phase 1: per-snapshot coded integration on the detector
    MeasurementMatrix yhat(S, P);
    std::vector<std::size_t> assigned(S * P);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t j = 0; j < P; ++j) {
            std::size_t a = (j + s + assignment_offset) % S;
            const double* h = patterns.row(a);
            const double* sig = cube.signature(j);
            double acc = 0.0;
            for (std::size_t l = 0; l < L; ++l) acc += h[l] * sig[l];
            yhat.at(s, j) = acc;
            assigned[s * P + j] = a;
        }
    }

    // phase 2: rearrange rows so row a holds the measurements taken with
    // pattern a, whichever snapshot produced them
    MeasurementMatrix y(S, P);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t j = 0; j < P; ++j) y.at(assigned[s * P + j], j) = yhat.at(s, j);
    return y;
}

// Sensing ratio S / L.
inline double sensing_ratio(std::size_t shots, std::size_t bands) {
    require(shots >= 1, "sensing_ratio: need S >= 1");
    require(shots <= bands, "sensing_ratio: S exceeds L");
    return static_cast<double>(shots) / static_cast<double>(bands);
}

// Shot count for a requested ratio: round(ratio * L) clamped to [1, L].
inline std::size_t shots_for_ratio(double ratio, std::size_t bands) {
    require(ratio > 0.0 && ratio <= 1.0, "shots_for_ratio: ratio must lie in (0,1]");
    long long s = std::llround(ratio * static_cast<double>(bands));
    if (s < 1) s = 1;
    if (s > static_cast<long long>(bands)) s = static_cast<long long>(bands);
    return static_cast<std::size_t>(s);
}

} // namespace cassi
