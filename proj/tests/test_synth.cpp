#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "cassi/synth.hpp"

using namespace cassi;

TEST_CASE("synth with zero noise gives identical signatures per class", "[synth]") {
    auto [cube, labels] = synth_dataset(16, 16, 24, 3, 0.0, 5);

    std::map<int, std::vector<double>> first;
    for (std::size_t j = 0; j < labels.pixels(); ++j) {
        int c = labels.labels[j];
        if (c == kBackgroundLabel) continue;
        std::vector<double> sig(cube.signature(j), cube.signature(j) + cube.bands);
        auto [it, inserted] = first.emplace(c, sig);
        if (!inserted) REQUIRE(it->second == sig); // exact, variance is 0
    }
    REQUIRE(first.size() == 3);
}

TEST_CASE("synth is bit-deterministic per seed", "[synth]") {
    auto [cube_a, labels_a] = synth_dataset(16, 16, 24, 3, 0.05, 9);
    auto [cube_b, labels_b] = synth_dataset(16, 16, 24, 3, 0.05, 9);
    REQUIRE(cube_a.voxels == cube_b.voxels);
    REQUIRE(labels_a.labels == labels_b.labels);

    auto [cube_c, labels_c] = synth_dataset(16, 16, 24, 3, 0.05, 10);
    CHECK(cube_a.voxels != cube_c.voxels);
}

TEST_CASE("synth scene has a background border and all classes", "[synth]") {
    auto [cube, labels] = synth_dataset(64, 64, 32, 3, 0.02, 7);
    (void)cube;

    // border of width 4 at 64x64
    for (std::size_t n = 0; n < 64; ++n) {
        CHECK(labels.at(0, n) == kBackgroundLabel);
        CHECK(labels.at(3, n) == kBackgroundLabel);
        CHECK(labels.at(63, n) == kBackgroundLabel);
    }
    for (std::size_t m = 0; m < 64; ++m) CHECK(labels.at(m, 0) == kBackgroundLabel);

    auto counts = labels.class_counts();
    for (auto c : counts) CHECK(c > 0);
}

TEST_CASE("synth cube is normalized to [0,1]", "[synth]") {
    auto [cube, labels] = synth_dataset(16, 16, 24, 4, 0.1, 3);
    (void)labels;
    double lo = 1e9, hi = -1e9;
    for (double v : cube.voxels) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
}

// Template separation on the committed benchmark geometry (L=96, C=3).
// With i.i.d. per-band noise sigma, the optimal detector for a class pair
// with template difference d errs with probability Phi(-|d| / (2 sigma));
// |d| > 7 sigma leaves a 3.5-sigma margin (pairwise error ~2e-4, so the
// uncompressed classifier can approach accuracy 1). Checked numerically
// for the benchmark seed and a few others at the benchmark noise 0.05.
TEST_CASE("synth class templates are separated well above the noise floor", "[synth]") {
    const double noise = 0.05;
    const std::size_t L = 96;
    for (std::uint64_t seed : {0ull, 1ull, 2ull, 7ull, 42ull}) {
        auto templates = synth_class_templates(L, 3, seed);
        double min_dist = 1e9;
        for (std::size_t a = 0; a < templates.size(); ++a) {
            for (std::size_t b = a + 1; b < templates.size(); ++b) {
                double d2 = 0.0;
                for (std::size_t l = 0; l < L; ++l) {
                    double d = templates[a][l] - templates[b][l];
                    d2 += d * d;
                }
                min_dist = std::min(min_dist, std::sqrt(d2));
            }
        }
        INFO("seed " << seed << " min pairwise distance " << min_dist);
        CHECK(min_dist > 7.0 * noise);
    }
}

TEST_CASE("synth rejects invalid arguments", "[synth]") {
    CHECK_THROWS_AS(synth_dataset(16, 16, 24, 1, 0.0, 1), Error); // C >= 2
    CHECK_THROWS_AS(synth_dataset(16, 16, 4, 3, 0.0, 1), Error);  // L >= 8
    CHECK_THROWS_AS(synth_dataset(16, 16, 24, 3, -0.1, 1), Error);
}
