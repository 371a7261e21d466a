#pragma once

#include <cstddef>
#include <vector>

#include "cassi/data.hpp"
#include "cassi/network.hpp"
#include "cassi/sensing.hpp"

namespace cassi {

// Argmax per row; ties break toward the lowest class id.
inline std::vector<int> argmax_rows(const Tensor& logits) {
    require(logits.shape.size() == 2, "argmax: expected {B,C} logits");
    std::size_t batch = logits.shape[0], classes = logits.shape[1];
    std::vector<int> out(batch, 0);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = logits.v.data() + b * classes;
        int best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (row[c] > row[best]) best = static_cast<int>(c);
        out[b] = best;
    }
    return out;
}

// Inference-mode class predictions for the given pixels, batched.
// from_layer = 0 runs the full model (optical layer included); 1 skips the
// optical layer for inputs that are already measurements.
inline std::vector<int> predict(Network& net, const SignatureMatrix& f,
                                const std::vector<std::size_t>& indices,
                                std::size_t eval_batch = 256) {
    std::vector<int> pred;
    pred.reserve(indices.size());
    for (std::size_t start = 0; start < indices.size(); start += eval_batch) {
        std::size_t end = std::min(indices.size(), start + eval_batch);
        Tensor x = gather_signatures(f, indices, start, end);
        auto batch_pred = argmax_rows(net.logits(x, false));
        pred.insert(pred.end(), batch_pred.begin(), batch_pred.end());
    }
    return pred;
}

inline std::vector<int> predict_measurements(Network& net, const MeasurementMatrix& y,
                                             const std::vector<std::size_t>& indices,
                                             std::size_t from_layer,
                                             std::size_t eval_batch = 256) {
    std::vector<int> pred;
    pred.reserve(indices.size());
    for (std::size_t start = 0; start < indices.size(); start += eval_batch) {
        std::size_t end = std::min(indices.size(), start + eval_batch);
        Tensor x = gather_measurements(y, indices, start, end);
        auto batch_pred = argmax_rows(net.logits(x, false, from_layer));
        pred.insert(pred.end(), batch_pred.begin(), batch_pred.end());
    }
    return pred;
}

// Overall accuracy of a full-image prediction (one class per pixel, as
// produced by classify_map) over the indexed pixels.
inline double overall_accuracy(const std::vector<int>& predictions, const LabelMap& labels,
                               const std::vector<std::size_t>& indices) {
    require(!indices.empty(), "accuracy: empty index set");
    require(predictions.size() == labels.pixels(),
            "accuracy: prediction count does not match the image");
    std::size_t hits = 0;
    for (std::size_t j : indices) {
        require(j < labels.pixels(), "accuracy: index out of range");
        int truth = labels.labels[j];
        require(truth != kBackgroundLabel, "accuracy: background pixel indexed");
        if (predictions[j] == truth) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(indices.size());
}

// Same metric for predictions aligned with the index list (pred[i] is the
// prediction for indices[i]).
inline double subset_accuracy(const std::vector<int>& pred_aligned, const LabelMap& labels,
                              const std::vector<std::size_t>& indices) {
    require(!indices.empty(), "accuracy: empty index set");
    require(pred_aligned.size() == indices.size(), "accuracy: prediction/index size mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        int truth = labels.labels[indices[i]];
        require(truth != kBackgroundLabel, "accuracy: background pixel indexed");
        if (pred_aligned[i] == truth) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(indices.size());
}

// Per-pixel classification of the whole scene (background included, for
// visualization): measurements via sense() with the given binary patterns,
// then the model's classifier stage in inference mode.
inline LabelMap classify_map(const CodingPatternSet& patterns, Network& net,
                             const SpectralCube& cube, std::size_t eval_batch = 256) {
    OpticalDense* optical = net.optical();
    require(optical != nullptr, "classify_map: model has no optical layer");
    require(patterns.shots == optical->shots,
            "classify_map: pattern shots S=" + std::to_string(patterns.shots) +
                " does not match the model (S=" + std::to_string(optical->shots) + ")");
    require(patterns.bands == cube.bands, "classify_map: band count mismatch");

    MeasurementMatrix y = sense(patterns, flatten(cube));
    std::vector<std::size_t> all(cube.pixels());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    auto pred = predict_measurements(net, y, all, /*from_layer=*/1, eval_batch);

    LabelMap map(cube.height, cube.width, static_cast<int>(net.head.classes));
    for (std::size_t j = 0; j < all.size(); ++j) map.labels[j] = pred[j];
    return map;
}

} // namespace cassi
