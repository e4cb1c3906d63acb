#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "switchcodec/trainer.hpp"

namespace switchcodec {

// Inference-time routed-quantizer usage.
struct UsageReport {
    std::vector<std::uint64_t> counts;  // selections per routed quantizer
    std::size_t windows = 0;
    double ever_used_fraction = 0.0;  // quantizers with count > 0, over N_r
    double selection_entropy = 0.0;   // bits, of the normalized selection counts

    static UsageReport from_counts(std::vector<std::uint64_t> counts, std::size_t windows);
};

// Routes every window with frozen bias and tallies the selections.
UsageReport measure_usage(const Model& model, std::span<const LatentWindow> windows);

// Held-out evaluation set used by all sweeps: the source's dataset drawn from
// a seed derived from the training seed.
std::vector<LatentWindow> heldout_windows(const SyntheticLatentSource& source, const TrainConfig& tcfg);

// Sweep cells train `replicates` models with training seeds seed, seed + 1,
// ... and report per-run usage plus replicate means. The held-out set and the
// source are shared by all runs.
struct SweepOptions {
    std::size_t replicates = 5;
    std::size_t jobs = 1;
};

struct UsageRow {
    std::size_t routed = 0;
    std::vector<UsageReport> runs;   // one per replicate
    double ever_used_fraction = 0.0;  // replicate mean
    double selection_entropy = 0.0;   // replicate mean
    double final_loss = 0.0;          // replicate mean of held-out per-window MSE
};

// One REVQ model per (N_r, replicate); gamma forced to 0 when drps_on is false.
std::vector<UsageRow> usage_sweep(std::span<const std::size_t> routed_values, bool drps_on, double gamma,
                                  const SyntheticLatentSource& source, const RevqConfig& base,
                                  const TrainConfig& tcfg, const SweepOptions& options = {});

struct GammaRow {
    double gamma = 0.0;
    std::vector<UsageReport> runs;
    double ever_used_fraction = 0.0;
    double selection_entropy = 0.0;
    double final_loss = 0.0;
    double max_abs_bias = 0.0;  // largest |b_i| seen on any DRPS boundary of any run
};

// Paired runs differing only in gamma (replicate r uses the same seed for every gamma).
std::vector<GammaRow> gamma_sweep(std::span<const double> gammas, const SyntheticLatentSource& source,
                                  const RevqConfig& cfg, const TrainConfig& tcfg, const SweepOptions& options = {});

struct Summary {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    double mean = 0.0, stddev = 0.0;

    static Summary of(std::vector<double> values);
};

struct FixedVsAdaptive {
    std::vector<double> fixed_errors;  // per held-out window
    std::vector<double> revq_errors;
    Summary fixed;
    Summary revq;
};

// Trains a fixed RVQ and a REVQ model with the same number of active
// quantizers and the same codebook size, then compares held-out per-window MSE.
FixedVsAdaptive fixed_vs_adaptive(const SyntheticLatentSource& source, const RevqConfig& cfg_fixed,
                                  const RevqConfig& cfg_revq, const TrainConfig& tcfg);

// CSV writers (one file per sweep).
void write_usage_csv(std::ostream& out, std::span<const UsageRow> rows, bool drps_on);
void write_gamma_csv(std::ostream& out, std::span<const GammaRow> rows);
void write_fixed_vs_adaptive_csv(std::ostream& out, const FixedVsAdaptive& result);
void write_window_errors_csv(std::ostream& out, const FixedVsAdaptive& result);

}  // namespace switchcodec
