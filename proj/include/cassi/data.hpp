#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cassi/error.hpp"
#include "cassi/rng.hpp"
#include "cassi/tensor.hpp"

namespace cassi {

// ---------------------------------------------------------------------------
// SpectralCube - M x N x L reflectance cube.
//
// Memory layout: pixel-major, band-contiguous.
//   voxels[(m * N + n) * L + l]
// so one pixel's spectral signature occupies L consecutive doubles. Pixel
// ordering is row-major everywhere in this library: j = m * N + n.
// ---------------------------------------------------------------------------
struct SpectralCube {
    std::size_t height = 0; // M
    std::size_t width = 0;  // N
    std::size_t bands = 0;  // L
    std::vector<double> voxels;

    SpectralCube() = default;
    SpectralCube(std::size_t m, std::size_t n, std::size_t l)
        : height(m), width(n), bands(l), voxels(m * n * l, 0.0) {}

    std::size_t pixels() const { return height * width; }

    double& at(std::size_t m, std::size_t n, std::size_t l) {
        return voxels[(m * width + n) * bands + l];
    }
    double at(std::size_t m, std::size_t n, std::size_t l) const {
        return voxels[(m * width + n) * bands + l];
    }

    const double* signature(std::size_t j) const { return voxels.data() + j * bands; }
    double* signature(std::size_t j) { return voxels.data() + j * bands; }

    void validate() const {
        require(height > 0 && width > 0 && bands > 0, "cube: dimensions must be positive");
        require(voxels.size() == height * width * bands,
                "cube: voxel count does not match dimensions");
        for (std::size_t i = 0; i < voxels.size(); ++i) {
            if (!std::isfinite(voxels[i])) {
                throw Error("cube: non-finite voxel at pixel " + std::to_string(i / bands) +
                            ", band " + std::to_string(i % bands) +
                            " (flat index " + std::to_string(i) + ")");
            }
        }
    }
};

// Maps the cube's global minimum to 0 and maximum to 1. A constant cube
// normalizes to all zeros. Returns {min, max} as found.
inline std::pair<double, double> normalize_minmax(SpectralCube& cube) {
    require(!cube.voxels.empty(), "normalize: empty cube");
    auto [lo_it, hi_it] = std::minmax_element(cube.voxels.begin(), cube.voxels.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi > lo) {
        // divide (not multiply by a reciprocal) so min and max land on
        // exactly 0 and 1
        double range = hi - lo;
        for (double& x : cube.voxels) x = (x - lo) / range;
    } else {
        for (double& x : cube.voxels) x = 0.0;
    }
    return {lo, hi};
}

// ---------------------------------------------------------------------------
// SignatureMatrix - the cube in matrix form, L x P with P = M*N.
// values[l * P + j]; column j is the signature of pixel j = m*N + n.
// ---------------------------------------------------------------------------
struct SignatureMatrix {
    std::size_t bands = 0;  // L
    std::size_t pixels = 0; // P
    std::vector<double> values;

    SignatureMatrix() = default;
    SignatureMatrix(std::size_t l, std::size_t p) : bands(l), pixels(p), values(l * p, 0.0) {}

    double& at(std::size_t l, std::size_t j) { return values[l * pixels + j]; }
    double at(std::size_t l, std::size_t j) const { return values[l * pixels + j]; }
};

inline SignatureMatrix flatten(const SpectralCube& cube) {
    SignatureMatrix f(cube.bands, cube.pixels());
    for (std::size_t j = 0; j < f.pixels; ++j)
        for (std::size_t l = 0; l < f.bands; ++l)
            f.values[l * f.pixels + j] = cube.voxels[j * cube.bands + l];
    return f;
}

inline SpectralCube unflatten(const SignatureMatrix& f, std::size_t height, std::size_t width) {
    require(height * width == f.pixels, "unflatten: M*N does not match pixel count");
    SpectralCube cube(height, width, f.bands);
    for (std::size_t j = 0; j < f.pixels; ++j)
        for (std::size_t l = 0; l < f.bands; ++l)
            cube.voxels[j * f.bands + l] = f.values[l * f.pixels + j];
    return cube;
}

// Gathers signatures of idx[begin..end) as a {B, L} tensor (batch rows).
inline Tensor gather_signatures(const SignatureMatrix& f, const std::vector<std::size_t>& idx,
                                std::size_t begin, std::size_t end) {
    require(begin <= end && end <= idx.size(), "gather: bad index range");
    std::size_t batch = end - begin;
    Tensor x({batch, f.bands});
    for (std::size_t b = 0; b < batch; ++b) {
        std::size_t j = idx[begin + b];
        require(j < f.pixels, "gather: pixel index out of range");
        for (std::size_t l = 0; l < f.bands; ++l)
            x.v[b * f.bands + l] = f.values[l * f.pixels + j];
    }
    return x;
}

// ---------------------------------------------------------------------------
// LabelMap - per-pixel class labels; -1 marks background (ignored by
// training, testing, and accuracy).
// ---------------------------------------------------------------------------
constexpr int kBackgroundLabel = -1;

struct LabelMap {
    std::size_t height = 0;
    std::size_t width = 0;
    int classes = 0; // C; labels lie in {-1, 0, ..., C-1}
    std::vector<int> labels;

    LabelMap() = default;
    LabelMap(std::size_t m, std::size_t n, int c)
        : height(m), width(n), classes(c), labels(m * n, kBackgroundLabel) {}

    std::size_t pixels() const { return height * width; }

    int& at(std::size_t m, std::size_t n) { return labels[m * width + n]; }
    int at(std::size_t m, std::size_t n) const { return labels[m * width + n]; }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
        for (int v : labels)
            if (v != kBackgroundLabel) ++counts[static_cast<std::size_t>(v)];
        return counts;
    }

    std::vector<std::size_t> labeled_indices() const {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < labels.size(); ++j)
            if (labels[j] != kBackgroundLabel) idx.push_back(j);
        return idx;
    }

    // Ground-truth maps must satisfy this; prediction maps produced by a
    // classifier are not validated (a model may never emit some class).
    void validate() const {
        require(height > 0 && width > 0, "labels: dimensions must be positive");
        require(labels.size() == height * width, "labels: size does not match dimensions");
        require(classes >= 1, "labels: class count must be positive");
        for (int v : labels)
            require(v >= kBackgroundLabel && v < classes,
                    "labels: value " + std::to_string(v) + " outside {-1,0,...," +
                        std::to_string(classes - 1) + "}");
        auto counts = class_counts();
        for (int c = 0; c < classes; ++c)
            require(counts[static_cast<std::size_t>(c)] > 0,
                    "labels: class " + std::to_string(c) + " has no pixels");
    }
};

// ---------------------------------------------------------------------------
// SplitIndex - stratified train/test partition of the non-background pixels.
// ---------------------------------------------------------------------------
struct SplitIndex {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

// Stratified random split. Per class the train share is floor(fraction * n_c)
// pixels; a class whose share floors to zero is an error. Background pixels
// appear in neither set. Deterministic in (labels, fraction, seed).
inline SplitIndex split(const LabelMap& labels, double fraction, std::uint64_t seed) {
    require(fraction > 0.0 && fraction < 1.0, "split: fraction must lie in (0,1)");
    labels.validate();

    SplitIndex out;
    out.seed = seed;
    for (int c = 0; c < labels.classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t j = 0; j < labels.labels.size(); ++j)
            if (labels.labels[j] == c) members.push_back(j);
        require(!members.empty(), "split: class " + std::to_string(c) + " is empty");

        std::size_t n_train =
            static_cast<std::size_t>(std::floor(fraction * static_cast<double>(members.size())));
        if (n_train == 0)
            throw Error("split: class " + std::to_string(c) + " would receive 0 training pixels (" +
                        std::to_string(members.size()) + " pixels at fraction " +
                        std::to_string(fraction) + ")");

        Rng rng(derive_seed(seed, Stream::Split) ^ splitmix64(static_cast<std::uint64_t>(c) + 101));
        rng.shuffle(members);
        out.train.insert(out.train.end(), members.begin(), members.begin() + n_train);
        out.test.insert(out.test.end(), members.begin() + n_train, members.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

} // namespace cassi
