#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "cassi/image.hpp"
#include "cassi/metrics.hpp"
#include "cassi/synth.hpp"
#include "cassi/trainer.hpp"

namespace cassi {

inline const std::vector<std::string>& known_designs() {
    static const std::vector<std::string> kDesigns = {"deep", "random", "banded", "identity"};
    return kDesigns;
}

inline bool is_known_design(const std::string& d) {
    for (const auto& k : known_designs())
        if (k == d) return true;
    return false;
}

// Default Bernoulli density of the random design.
inline constexpr double kRandomDesignDensity = 0.5;

struct TrialOutcome {
    double test_continuous = 0.0;
    double test_binarized = 0.0;
    double all_continuous = 0.0;
    double all_binarized = 0.0;
    double final_binarity = 0.0;
};

struct SweepCell {
    std::string design;
    double ratio = 0.0;
    std::size_t shots = 0;
    std::size_t trials = 0;
    // test-split accuracy of the continuous-phi model, across trials
    double best = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t best_trial = 0;
    std::vector<TrialOutcome> outcomes;
    std::string artifact_dir;
};

struct SweepResult {
    std::vector<SweepCell> cells;

    const SweepCell* find(const std::string& design, double ratio) const {
        for (const auto& c : cells)
            if (c.design == design && std::abs(c.ratio - ratio) < 1e-9) return &c;
        return nullptr;
    }
};

// Builds the frozen design for one trial, or nullopt for the learned one.
inline std::optional<CodingPatternSet> design_for_trial(const std::string& design,
                                                        std::size_t shots, std::size_t bands,
                                                        std::uint64_t trial_seed,
                                                        double random_density) {
    if (design == "deep") return std::nullopt;
    if (design == "random") return random_design(shots, bands, random_density, trial_seed);
    if (design == "banded") return banded_design(shots, bands);
    if (design == "identity") return identity_design(bands);
    throw Error("unknown design \"" + design + "\"");
}

namespace detail {

inline std::string ratio_tag(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", ratio);
    return buf;
}

inline void export_trial_artifacts(const std::string& dir, std::size_t trial,
                                   const TrainResult& result) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_history(result.history, dir + "/trial_" + std::to_string(trial) + "_history.csv");
}

inline void export_best_artifacts(const std::string& dir, const SweepCell& cell,
                                  TrainResult& result, const SpectralCube* cube) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_network(result.net, dir + "/checkpoint.mdl1");
    save_pattern(result.phi_continuous, dir + "/pattern_continuous.pat1");
    save_pattern(result.phi_binary, dir + "/pattern_binary.pat1");
    write_pattern_pgm(result.phi_continuous, dir + "/pattern_continuous.pgm");
    write_pattern_pgm(result.phi_binary, dir + "/pattern_binary.pgm");
    if (cube) {
        LabelMap map = classify_map(result.phi_binary, result.net, *cube);
        write_label_map_ppm(map, dir + "/classification_map.ppm");
    }

    std::ofstream marker(dir + "/best_trial.txt", std::ios::binary);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "best_trial %zu\ntest_acc_continuous %.6f\ntest_acc_binarized %.6f\n",
                  cell.best_trial, cell.outcomes[cell.best_trial].test_continuous,
                  cell.outcomes[cell.best_trial].test_binarized);
    marker << buf;
}

} // namespace detail

// Trains every trial of one (design, ratio) cell. Trial t derives all of its
// randomness from master_seed + t; the split is shared by every cell so each
// design sees the same train/test pixels. When out_dir is nonempty each
// trial's history plus the best trial's checkpoint, patterns, and
// classification map are written under out_dir.
inline SweepCell run_cell(const SignatureMatrix& f, const LabelMap& labels,
                          const SplitIndex& split_idx, const std::string& design, double ratio,
                          std::size_t trials, const TrainConfig& base_cfg,
                          std::uint64_t master_seed, const std::string& out_dir = "",
                          const SpectralCube* cube = nullptr,
                          double random_density = kRandomDesignDensity) {
    require(is_known_design(design), "unknown design \"" + design + "\"");
    require(trials >= 1, "sweep: need at least one trial");
    require(ratio > 0.0 && ratio <= 1.0, "sweep: ratio must lie in (0,1]");
    if (design == "identity")
        require(std::abs(ratio - 1.0) < 1e-12,
                "identity design implies ratio 1 (no compression); got ratio " +
                    std::to_string(ratio));

    SweepCell cell;
    cell.design = design;
    cell.ratio = ratio;
    cell.shots = design == "identity" ? f.bands : shots_for_ratio(ratio, f.bands);
    cell.trials = trials;
    if (!out_dir.empty())
        cell.artifact_dir = out_dir + "/" + design + "_r" + detail::ratio_tag(ratio);

    std::optional<TrainResult> best_result;
    for (std::size_t t = 0; t < trials; ++t) {
        std::uint64_t trial_seed = master_seed + t;
        TrainConfig cfg = base_cfg;
        cfg.seed = trial_seed;
        auto frozen = design_for_trial(design, cell.shots, f.bands, trial_seed, random_density);
        TrainResult result = train(f, labels, split_idx, cfg, cell.shots, frozen);

        TrialOutcome outcome;
        outcome.test_continuous = result.final_accuracy.test_continuous;
        outcome.test_binarized = result.final_accuracy.test_binarized;
        outcome.all_continuous = result.final_accuracy.all_continuous;
        outcome.all_binarized = result.final_accuracy.all_binarized;
        outcome.final_binarity = result.history.records.back().binarity;
        cell.outcomes.push_back(outcome);

        if (!cell.artifact_dir.empty())
            detail::export_trial_artifacts(cell.artifact_dir, t, result);
        if (!best_result || outcome.test_continuous > cell.best) {
            cell.best_trial = t;
            best_result = std::move(result);
        }
        cell.best = std::max(cell.best, outcome.test_continuous);
    }

    double sum = 0.0;
    for (const auto& o : cell.outcomes) sum += o.test_continuous;
    cell.mean = sum / static_cast<double>(trials);
    double var = 0.0;
    for (const auto& o : cell.outcomes) {
        double d = o.test_continuous - cell.mean;
        var += d * d;
    }
    cell.stddev = std::sqrt(var / static_cast<double>(trials));

    if (!cell.artifact_dir.empty())
        detail::export_best_artifacts(cell.artifact_dir, cell, *best_result, cube);
    return cell;
}

// The ratio x design sweep. Compressed designs run at every requested
// ratio; the identity (full data) design always contributes exactly one
// cell at ratio 1, as in the published tables. Cells are independent;
// jobs > 1 runs them in worker threads with identical results.
inline SweepResult sweep(const SpectralCube& cube, const LabelMap& labels,
                         std::vector<double> ratios, std::vector<std::string> designs,
                         std::size_t trials, const TrainConfig& base_cfg, double train_fraction,
                         std::uint64_t master_seed, const std::string& out_dir = "",
                         std::size_t jobs = 1, double random_density = kRandomDesignDensity) {
    require(!ratios.empty(), "sweep: need at least one ratio");
    require(!designs.empty(), "sweep: need at least one design");
    for (double r : ratios) require(r > 0.0 && r <= 1.0, "sweep: ratio must lie in (0,1]");
    for (const auto& d : designs) require(is_known_design(d), "unknown design \"" + d + "\"");

    SignatureMatrix f = flatten(cube);
    SplitIndex split_idx = split(labels, train_fraction, master_seed);

    struct Task {
        std::string design;
        double ratio;
    };
    std::vector<Task> tasks;
    for (const auto& d : designs) {
        if (d == "identity") continue; // appended once below
        for (double r : ratios) tasks.push_back({d, r});
    }
    tasks.push_back({"identity", 1.0}); // the full-data row

    SweepResult result;
    result.cells.resize(tasks.size());

    std::size_t workers = std::max<std::size_t>(1, jobs);
    if (workers == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i)
            result.cells[i] = run_cell(f, labels, split_idx, tasks[i].design, tasks[i].ratio,
                                       trials, base_cfg, master_seed, out_dir, &cube,
                                       random_density);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                result.cells[i] = run_cell(f, labels, split_idx, tasks[i].design, tasks[i].ratio,
                                           trials, base_cfg, master_seed, out_dir, &cube,
                                           random_density);
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(workers, tasks.size()); ++w)
            pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return result;
}

// Table in the shape of the published results: one row per ratio, one
// column per design, cells hold the best test accuracy over trials. The
// banded column is the contiguous band-pass stand-in for the traditional
// design. The final row is the uncompressed full-data run.
inline void write_sweep_table(const SweepResult& result, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open file for writing: " + path);
    os << "ratio,random_design,banded_design(traditional_stand_in),deep_design,full_data\n";

    std::vector<double> ratios;
    for (const auto& c : result.cells) {
        if (c.design == "identity") continue;
        bool seen = false;
        for (double r : ratios) seen = seen || std::abs(r - c.ratio) < 1e-9;
        if (!seen) ratios.push_back(c.ratio);
    }
    std::sort(ratios.begin(), ratios.end());

    char buf[64];
    auto cell_text = [&](const std::string& design, double ratio) -> std::string {
        const SweepCell* c = result.find(design, ratio);
        if (!c) return "";
        std::snprintf(buf, sizeof buf, "%.4f", c->best);
        return buf;
    };
    for (double r : ratios) {
        std::snprintf(buf, sizeof buf, "%.2f", r);
        os << buf << "," << cell_text("random", r) << "," << cell_text("banded", r) << ","
           << cell_text("deep", r) << ",\n";
    }
    os << "1.00,,,," << cell_text("identity", 1.0) << "\n";
    require(static_cast<bool>(os), "write failed: " + path);
}

// Full per-cell numbers (both accuracy bases, both pattern forms).
inline void write_sweep_details(const SweepResult& result, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open file for writing: " + path);
    os << "design,ratio,shots,trials,best_trial,best_test_acc,mean_test_acc,std_test_acc,"
          "best_test_acc_binarized,best_all_acc,best_all_acc_binarized,best_final_binarity,"
          "artifact_dir\n";
    char buf[512];
    for (const auto& c : result.cells) {
        const TrialOutcome& b = c.outcomes[c.best_trial];
        std::snprintf(buf, sizeof buf, "%s,%.2f,%zu,%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%s\n",
                      c.design.c_str(), c.ratio, c.shots, c.trials, c.best_trial, c.best, c.mean,
                      c.stddev, b.test_binarized, b.all_continuous, b.all_binarized,
                      b.final_binarity, c.artifact_dir.c_str());
        os << buf;
    }
    require(static_cast<bool>(os), "write failed: " + path);
}

} // namespace cassi
