#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cassi/data.hpp"
#include "cassi/rng.hpp"
#include "cassi/sensing.hpp"
#include "cassi/synth.hpp"

using namespace cassi;

namespace {

SpectralCube random_cube(std::size_t m, std::size_t n, std::size_t l, std::uint64_t seed) {
    SpectralCube cube(m, n, l);
    Rng rng(seed);
    for (double& v : cube.voxels) v = rng.uniform01();
    return cube;
}

} // namespace

TEST_CASE("sense with the identity design returns the signatures", "[sensing]") {
    auto cube = random_cube(4, 4, 6, 1);
    auto f = flatten(cube);
    auto y = sense(identity_design(6), f);
    REQUIRE(y.shots == 6);
    REQUIRE(y.values == f.values);
}

TEST_CASE("sense computes per-pattern band sums", "[sensing]") {
    CodingPatternSet h(1, 3, PatternMode::Binary);
    h.at(0, 0) = 1.0;
    h.at(0, 2) = 1.0; // (1,0,1)
    SignatureMatrix f(3, 1);
    f.at(0, 0) = 2.0;
    f.at(1, 0) = 3.0;
    f.at(2, 0) = 4.0;
    auto y = sense(h, f);
    REQUIRE(y.at(0, 0) == 6.0);

    CodingPatternSet ones(1, 3, PatternMode::Binary);
    std::fill(ones.entries.begin(), ones.entries.end(), 1.0);
    auto ysum = sense(ones, f);
    REQUIRE(ysum.at(0, 0) == 9.0);
}

TEST_CASE("sense rejects band mismatch", "[sensing]") {
    SignatureMatrix f(5, 2);
    REQUIRE_THROWS_AS(sense(identity_design(6), f), Error);
}

TEST_CASE("sense is linear", "[sensing]") {
    Rng rng(77);
    CodingPatternSet h(4, 12, PatternMode::Continuous);
    for (double& e : h.entries) e = rng.uniform01();

    SignatureMatrix f1(12, 9), f2(12, 9), mix(12, 9);
    for (std::size_t i = 0; i < f1.values.size(); ++i) {
        f1.values[i] = rng.uniform(-1.0, 1.0);
        f2.values[i] = rng.uniform(-1.0, 1.0);
    }
    double a = 0.7, b = -1.3;
    for (std::size_t i = 0; i < mix.values.size(); ++i)
        mix.values[i] = a * f1.values[i] + b * f2.values[i];

    auto y1 = sense(h, f1);
    auto y2 = sense(h, f2);
    auto ym = sense(h, mix);
    for (std::size_t i = 0; i < ym.values.size(); ++i) {
        double want = a * y1.values[i] + b * y2.values[i];
        double scale = std::max({1.0, std::abs(want), std::abs(ym.values[i])});
        REQUIRE(std::abs(ym.values[i] - want) / scale < 1e-6);
    }
}

TEST_CASE("snapshot simulation equals the matrix path exactly", "[sensing]") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto cube = random_cube(8, 8, 16, 1000 + seed);
        auto h = random_design(5, 16, 0.5, seed);
        auto direct = sense(h, flatten(cube));
        auto simulated = simulate_snapshots(h, cube);
        REQUIRE(simulated.values == direct.values); // bitwise
    }
}

TEST_CASE("snapshot simulation is invariant to the pattern assignment phase", "[sensing]") {
    auto cube = random_cube(6, 7, 12, 4);
    auto h = random_design(4, 12, 0.4, 9);
    auto base = simulate_snapshots(h, cube, 0);
    for (std::size_t offset = 1; offset < 4; ++offset) {
        auto shifted = simulate_snapshots(h, cube, offset);
        REQUIRE(shifted.values == base.values);
    }
}

TEST_CASE("single-shot simulation applies pattern 0 to every pixel", "[sensing]") {
    auto cube = random_cube(3, 3, 8, 2);
    CodingPatternSet h(1, 8, PatternMode::Binary);
    for (std::size_t l = 0; l < 8; l += 2) h.at(0, l) = 1.0;
    auto y = simulate_snapshots(h, cube);
    REQUIRE(y.shots == 1);
    auto direct = sense(h, flatten(cube));
    REQUIRE(y.values == direct.values);
}

TEST_CASE("snapshot simulation requires binary patterns", "[sensing]") {
    auto cube = random_cube(3, 3, 8, 3);
    CodingPatternSet h(2, 8, PatternMode::Continuous);
    std::fill(h.entries.begin(), h.entries.end(), 0.5);
    REQUIRE_THROWS_AS(simulate_snapshots(h, cube), Error);
}

TEST_CASE("sensing ratio is S over L", "[sensing]") {
    CHECK(sensing_ratio(10, 101) == Catch::Approx(10.0 / 101.0).epsilon(1e-12));
    CHECK(sensing_ratio(96, 96) == 1.0);
    CHECK(sensing_ratio(48, 96) == 0.5);
    CHECK_THROWS_AS(sensing_ratio(7, 6), Error);
    CHECK_THROWS_AS(sensing_ratio(0, 6), Error);
}

TEST_CASE("shots_for_ratio rounds and clamps", "[sensing]") {
    CHECK(shots_for_ratio(0.1, 101) == 10);
    CHECK(shots_for_ratio(1.0, 96) == 96);
    CHECK(shots_for_ratio(0.005, 96) == 1);
    CHECK(shots_for_ratio(0.1, 96) == 10);  // round(9.6)
    CHECK(shots_for_ratio(0.2, 96) == 19);  // round(19.2)
    CHECK_THROWS_AS(shots_for_ratio(0.0, 96), Error);
    CHECK_THROWS_AS(shots_for_ratio(1.5, 96), Error);
}

TEST_CASE("detector noise hook is off by default and seeded when on", "[sensing]") {
    auto cube = random_cube(4, 4, 8, 6);
    auto f = flatten(cube);
    auto h = banded_design(2, 8);
    auto clean = sense(h, f);
    auto clean2 = sense(h, f, 0.0, 99);
    REQUIRE(clean.values == clean2.values);

    auto noisy1 = sense(h, f, 0.01, 42);
    auto noisy2 = sense(h, f, 0.01, 42);
    REQUIRE(noisy1.values == noisy2.values);
    CHECK(noisy1.values != clean.values);
}
