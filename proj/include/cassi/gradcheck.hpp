#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cassi/network.hpp"

namespace cassi {

// Central-difference verification of a layer's backward pass.
//
// A scalar objective J is formed from the layer output contracted with a
// fixed random upstream tensor (for the softmax head J is the loss itself).
// Every parameter and every input coordinate is perturbed by +-step and the
// analytic gradient is compared against (J+ - J-) / (2 step). Dropout masks
// are frozen after the first draw so the function under test is smooth.
//
// Error metric: |a - n| / max(|a|, |n|, 1), reported as the worst case.

namespace detail {

inline double rel_err(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1.0});
}

} // namespace detail

inline double grad_check(const LayerSpec& spec, std::uint64_t seed, double step = 1e-3) {
    using Kind = LayerSpec::Kind;
    Rng rng(derive_seed(seed, Stream::GradCheck));

    // small input shapes per kind; batch 4 satisfies batchnorm
    std::vector<std::size_t> shape;
    switch (spec.kind) {
    case Kind::OpticalDense: shape = {4, spec.bands}; break;
    case Kind::Conv1d: shape = {4, 7, spec.in_channels}; break; // channel-last
    case Kind::BatchNorm: shape = {4, 5, spec.channels}; break;
    case Kind::ReLU:
    case Kind::Dropout: shape = {4, 6}; break;
    case Kind::Dense: shape = {4, spec.in}; break;
    case Kind::SoftmaxXent: shape = {4, spec.classes}; break;
    }

    Tensor x(shape);
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    if (spec.kind == Kind::ReLU) {
        // keep coordinates off the kink so +-step stays on one linear piece
        for (double& v : x.v)
            while (std::abs(v) < 50.0 * step) v = rng.uniform(-1.0, 1.0);
    }

    if (spec.kind == Kind::SoftmaxXent) {
        SoftmaxXent head(spec.classes);
        std::vector<int> labels(shape[0]);
        for (int& y : labels) y = static_cast<int>(rng.index(spec.classes));

        head.forward(x, labels);
        Tensor analytic = head.backward();

        double worst = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double keep = x.v[i];
            x.v[i] = keep + step;
            double jp = head.forward(x, labels);
            x.v[i] = keep - step;
            double jm = head.forward(x, labels);
            x.v[i] = keep;
            worst = std::max(worst, detail::rel_err(analytic.v[i], (jp - jm) / (2.0 * step)));
        }
        return worst;
    }

    auto layer = make_layer(spec, rng, derive_seed(seed, Stream::Dropout));
    if (auto* drop = dynamic_cast<Dropout*>(layer.get())) drop->freeze_mask = true;

    Tensor y0 = layer->forward(x, /*training=*/true); // draws + freezes any mask
    Tensor upstream(y0.shape);
    for (double& v : upstream.v) v = rng.uniform(-1.0, 1.0);

    auto objective = [&]() {
        Tensor y = layer->forward(x, true);
        double j = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) j += upstream.v[i] * y.v[i];
        return j;
    };

    objective(); // populate caches for the analytic pass
    Tensor dx = layer->backward(upstream);

    std::vector<ParamBlock> blocks;
    layer->collect_params(blocks);

    double worst = 0.0;
    auto check_coord = [&](double* coord, double analytic) {
        double keep = *coord;
        *coord = keep + step;
        double jp = objective();
        *coord = keep - step;
        double jm = objective();
        *coord = keep;
        worst = std::max(worst, detail::rel_err(analytic, (jp - jm) / (2.0 * step)));
    };

    for (const auto& block : blocks)
        for (std::size_t i = 0; i < block.n; ++i) check_coord(block.w + i, block.g[i]);
    for (std::size_t i = 0; i < x.size(); ++i) check_coord(&x.v[i], dx.v[i]);
    return worst;
}

} // namespace cassi
