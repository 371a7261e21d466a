#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cassi/adam.hpp"
#include "cassi/data.hpp"
#include "cassi/metrics.hpp"
#include "cassi/network.hpp"

namespace cassi {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch = 64;
    double lr = 1e-3;
    double rho0 = 1e-4;     // regularizer weight at epoch 0
    double rho_gamma = 1.5; // per-epoch growth factor
    double rho_cap = 1000.0;
    // Learning-rate multiplier for the coding patterns in joint mode. The
    // pattern entries have to travel an O(1) distance to reach {0,1} within
    // the fixed epoch budget, which on small training sets (few optimizer
    // steps per epoch) needs a faster rate than the classifier weights.
    double phi_lr_scale = 5.0;
    std::uint64_t seed = 0;
    double bin_threshold = 0.5;
    std::size_t eval_batch = 256;
    ClassifierConfig classifier;

    void validate() const {
        require(epochs >= 1, "config: epochs must be positive");
        require(batch >= 2, "config: batch size must be at least 2");
        require(lr > 0.0, "config: learning rate must be positive");
        require(rho0 > 0.0, "config: rho0 must be positive");
        require(rho_gamma > 1.0, "config: rho growth factor must exceed 1");
        require(rho_cap > 0.0, "config: rho cap must be positive");
        require(bin_threshold > 0.0 && bin_threshold < 1.0,
                "config: binarize threshold must lie strictly inside (0,1)");
        require(phi_lr_scale > 0.0, "config: phi learning-rate scale must be positive");
    }
};

// Exponentially increasing regularizer weight, capped:
// rho(epoch) = min(rho0 * gamma^epoch, cap).
inline double rho_schedule(std::size_t epoch, const TrainConfig& cfg) {
    double rho = cfg.rho0 * std::pow(cfg.rho_gamma, static_cast<double>(epoch));
    return std::min(rho, cfg.rho_cap);
}

// Objective value: classification loss plus the weighted binarization
// penalty over the coding patterns.
inline double total_loss(double classification_loss, const CodingPatternSet& phi, double rho) {
    require(rho >= 0.0, "total_loss: rho must be non-negative");
    return classification_loss + rho * binreg_value(phi);
}

struct EpochRecord {
    std::size_t epoch;
    double class_loss; // mean over the epoch's training samples
    double binreg;     // R(phi) at epoch end
    double rho;
    double train_acc; // running accuracy over the epoch's training batches
    double test_acc;  // held-out accuracy, inference mode, current phi
    double binarity;  // share of phi entries within 1e-2 of {0,1}
};

struct TrainHistory {
    std::vector<EpochRecord> records;
};

struct FinalAccuracy {
    double test_continuous = 0.0;
    double test_binarized = 0.0;
    double all_continuous = 0.0; // over all labeled pixels (train + test)
    double all_binarized = 0.0;
};

struct TrainResult {
    Network net;                     // trained model, optical layer first
    CodingPatternSet phi_continuous; // learned (or frozen) patterns
    CodingPatternSet phi_binary;     // thresholded deployment patterns
    TrainHistory history;
    FinalAccuracy final_accuracy;
};

// Hard-thresholds a pattern set: entry >= threshold -> 1, else 0. A row
// that would become all-zero instead transmits its largest entry (lowest
// band on ties), so every pattern keeps at least one open band.
inline CodingPatternSet binarize(const CodingPatternSet& phi, double threshold) {
    require(threshold > 0.0 && threshold < 1.0, "binarize: threshold must lie inside (0,1)");
    CodingPatternSet out(phi.shots, phi.bands, PatternMode::Binary);
    for (std::size_t s = 0; s < phi.shots; ++s) {
        bool any = false;
        std::size_t largest = 0;
        for (std::size_t l = 0; l < phi.bands; ++l) {
            if (phi.at(s, l) > phi.at(s, largest)) largest = l;
            if (phi.at(s, l) >= threshold) {
                out.at(s, l) = 1.0;
                any = true;
            }
        }
        if (!any) out.at(s, largest) = 1.0;
    }
    out.validate();
    return out;
}

inline double binarity_fraction(const std::vector<double>& entries, double tol = 1e-2) {
    if (entries.empty()) return 1.0;
    std::size_t near = 0;
    for (double e : entries)
        if (std::abs(e) <= tol || std::abs(e - 1.0) <= tol) ++near;
    return static_cast<double>(near) / static_cast<double>(entries.size());
}

// Divergence guard: a non-finite loss aborts the run with its epoch index.
inline void check_loss_finite(double loss, std::size_t epoch) {
    if (!std::isfinite(loss))
        throw Error("train: diverged (non-finite loss) at epoch " + std::to_string(epoch));
}

// Batch index ranges over n samples. A trailing 1-sample batch is merged
// into its predecessor because batchnorm cannot normalize a single sample
// in training mode.
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                                     std::size_t batch) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t start = 0; start < n; start += batch)
        ranges.emplace_back(start, std::min(n, start + batch));
    if (ranges.size() >= 2 && ranges.back().second - ranges.back().first == 1) {
        ranges[ranges.size() - 2].second = ranges.back().second;
        ranges.pop_back();
    }
    return ranges;
}

// ---------------------------------------------------------------------------
// Joint optimization of coding patterns and classifier.
//
// Joint mode (no frozen design): the optical layer starts from U(0.3,0.7)
// and both phi and theta follow Adam; the binarization penalty enters the
// phi gradient with weight rho_schedule(epoch).
//
// Ablation mode (frozen binary design): phi is fixed, rho is forced to 0,
// and only the classifier trains. This is how the random / banded /
// identity baselines are produced, so every design shares the classifier
// and the training budget.
//
// Randomness is split into independent streams of cfg.seed (phi init,
// theta init, shuffling, dropout); results are bit-reproducible.
// ---------------------------------------------------------------------------
inline TrainResult train(const SignatureMatrix& f, const LabelMap& labels,
                         const SplitIndex& split_idx, const TrainConfig& cfg, std::size_t shots,
                         const std::optional<CodingPatternSet>& frozen_design = {}) {
    cfg.validate();
    require(!split_idx.train.empty(), "train: empty training split");
    require(!split_idx.test.empty(), "train: empty test split");

    const std::size_t bands = f.bands;
    const std::size_t classes = static_cast<std::size_t>(labels.classes);
    const bool joint = !frozen_design.has_value();

    std::size_t S = shots;
    if (frozen_design) {
        frozen_design->validate();
        require(frozen_design->mode == PatternMode::Binary,
                "train: a frozen design must be binary");
        require(frozen_design->bands == bands, "train: frozen design band count mismatch");
        S = frozen_design->shots;
    }
    require(S >= 1 && S <= bands, "train: need 1 <= S <= L");

    // independent random streams; the classifier draw order never depends
    // on whether phi is learned or frozen
    Rng theta_rng(derive_seed(cfg.seed, Stream::ThetaInit));
    Rng shuffle_rng(derive_seed(cfg.seed, Stream::Shuffle));

    Network net = build_network(classifier_specs(S, classes, cfg.classifier), theta_rng,
                                derive_seed(cfg.seed, Stream::Dropout));
    auto optical = std::make_unique<OpticalDense>(S, bands);
    if (frozen_design) {
        optical->set_entries(frozen_design->entries);
        optical->trainable = false;
    } else {
        Rng phi_rng(derive_seed(cfg.seed, Stream::PhiInit));
        optical->init_uniform(phi_rng);
        optical->lr_scale = cfg.phi_lr_scale;
    }
    net.layers.insert(net.layers.begin(), std::move(optical));
    OpticalDense* phi_layer = net.optical();

    auto blocks = net.params();
    Adam adam(cfg.lr);
    adam.attach(blocks);

    TrainResult result;
    std::vector<std::size_t> order = split_idx.train;
    std::vector<int> batch_labels;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double rho = joint ? rho_schedule(epoch, cfg) : 0.0;
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t seen = 0, correct = 0;
        for (auto [start, end] : batch_ranges(order.size(), cfg.batch)) {
            Tensor x = gather_signatures(f, order, start, end);
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i)
                batch_labels.push_back(labels.labels[order[i]]);

            net.zero_grads();
            double loss = net.loss(x, batch_labels, /*training=*/true);
            check_loss_finite(loss, epoch);
            net.backward();
            if (joint && rho > 0.0)
                add_binreg_grad(phi_layer->phi.data(), phi_layer->phi.size(), rho,
                                phi_layer->phi_g.data());
            adam.step(blocks);

            auto batch_pred = argmax_rows(net.head.last_probs());
            for (std::size_t i = 0; i < batch_pred.size(); ++i)
                if (batch_pred[i] == batch_labels[i]) ++correct;
            std::size_t batch_n = end - start;
            loss_sum += loss * static_cast<double>(batch_n);
            seen += batch_n;
        }

        auto test_pred = predict(net, f, split_idx.test, cfg.eval_batch);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.class_loss = loss_sum / static_cast<double>(seen);
        rec.binreg = binreg_value(phi_layer->phi.data(), phi_layer->phi.size());
        rec.rho = rho;
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        rec.test_acc = subset_accuracy(test_pred, labels, split_idx.test);
        rec.binarity = binarity_fraction(phi_layer->phi);
        result.history.records.push_back(rec);
    }

    result.phi_continuous = phi_layer->pattern();
    result.phi_binary = binarize(result.phi_continuous, cfg.bin_threshold);

    std::vector<std::size_t> all_labeled;
    all_labeled.reserve(split_idx.train.size() + split_idx.test.size());
    all_labeled.insert(all_labeled.end(), split_idx.train.begin(), split_idx.train.end());
    all_labeled.insert(all_labeled.end(), split_idx.test.begin(), split_idx.test.end());
    std::sort(all_labeled.begin(), all_labeled.end());

    result.final_accuracy.test_continuous =
        subset_accuracy(predict(net, f, split_idx.test, cfg.eval_batch), labels, split_idx.test);
    result.final_accuracy.all_continuous =
        subset_accuracy(predict(net, f, all_labeled, cfg.eval_batch), labels, all_labeled);

    // deployment evaluation: hard-thresholded patterns in the same model
    std::vector<double> keep = phi_layer->phi;
    phi_layer->set_entries(result.phi_binary.entries);
    result.final_accuracy.test_binarized =
        subset_accuracy(predict(net, f, split_idx.test, cfg.eval_batch), labels, split_idx.test);
    result.final_accuracy.all_binarized =
        subset_accuracy(predict(net, f, all_labeled, cfg.eval_batch), labels, all_labeled);
    phi_layer->set_entries(keep);

    result.net = std::move(net);
    return result;
}

// History CSV: one row per epoch, documented column order.
inline void save_history(const TrainHistory& history, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open file for writing: " + path);
    os << "epoch,class_loss,binreg,rho,train_acc,test_acc,binarity\n";
    char buf[256];
    for (const auto& r : history.records) {
        std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.epoch,
                      r.class_loss, r.binreg, r.rho, r.train_acc, r.test_acc, r.binarity);
        os << buf;
    }
    require(static_cast<bool>(os), "write failed: " + path);
}

} // namespace cassi
