#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "switchcodec/revq.hpp"
#include "switchcodec/rng.hpp"

namespace switchcodec {

enum class RoutingMode {
    kRevq,      // gated selection, gate trained, DRPS active
    kFixedRvq,  // first K_r routed quantizers always selected
};

struct TrainConfig {
    std::size_t steps = 200;
    std::size_t batch = 8;
    double lr = 1e-3;
    double commitment_weight = 0.25;
    double ema_decay = 0.99;
    double gamma = 0.01;                // DRPS bias step, 0 disables
    std::size_t drps_window = 100;      // training steps per load accumulation window
    double dead_threshold_frac = 0.1;   // of the uniform expected load
    std::uint64_t seed = 0;
    std::size_t kmeans_iterations = 20;
    std::size_t init_windows = 64;      // windows sampled for k-means initialization
    RoutingMode mode = RoutingMode::kRevq;

    void validate() const;
};

// Gaussian-mixture stand-in for encoder latents. Each utterance (window) is
// drawn from a single mode; its frames are i.i.d. from that mode's
// diagonal Gaussian.
struct SyntheticLatentSource {
    std::vector<std::vector<double>> means;
    std::vector<std::vector<double>> stddevs;
    std::size_t frames = 32;               // frames per utterance
    std::size_t utterances_per_mode = 16;  // size of the evaluation set per mode

    // `count` modes with means ~ N(0, separation^2) per dimension and
    // per-mode axis-aligned spreads (each dimension either wide or narrow).
    static SyntheticLatentSource gaussian_clusters(std::size_t dim, std::size_t count, double separation,
                                                   std::uint64_t seed, std::size_t frames = 32,
                                                   std::size_t utterances_per_mode = 16);

    std::size_t modes() const noexcept { return means.size(); }
    std::size_t dim() const noexcept { return means.empty() ? 0 : means.front().size(); }
    void validate() const;

    LatentWindow sample_window(std::size_t mode, Rng& rng, std::size_t index = 0) const;
    // `count` windows with uniformly drawn modes.
    std::vector<LatentWindow> draw(std::size_t count, Rng& rng) const;
    // utterances_per_mode windows for every mode, mode-major.
    std::vector<LatentWindow> dataset(std::uint64_t seed) const;
};

struct Model {
    RevqConfig cfg;
    RoutingMode mode = RoutingMode::kRevq;
    QuantizerBank bank;
    GateWeights gate;
    GateState state;
    std::size_t steps_since_drps = 0;
};

// Lloyd's k-means with k-means++ seeding. Rows of `data` are points.
Matrix kmeans(const Matrix& data, std::size_t k, std::size_t iterations, std::uint64_t seed);

// Shared codebook from k-means on the sample, routed codebooks from k-means on
// the residual after the shared stage(s), each with its own seed offset.
// Entry 0 of every codebook is the zero vector.
QuantizerBank init_codebooks(const Matrix& sample, const RevqConfig& cfg, std::uint64_t seed,
                             std::size_t kmeans_iterations = 20);

GateWeights init_gate(const RevqConfig& cfg, std::uint64_t seed);

Model init_model(std::span<const LatentWindow> sample, const RevqConfig& cfg, const TrainConfig& tcfg);

// Routed quantizers used for one window: gate decision in REVQ mode, the
// first K_r indices in fixed mode. Loads are updated either way.
std::vector<std::size_t> select_routed(Model& model, const LatentWindow& window, bool training);

struct StepReport {
    double loss_recon = 0.0;
    double loss_commit = 0.0;
    std::vector<std::vector<std::size_t>> selections;  // per window
    std::optional<std::vector<double>> bias_snapshot;  // set when DRPS fired
};

// One optimization step over a batch: route, quantize, EMA codebook update,
// gradient step on W through the straight-through mask, DRPS every
// drps_window steps. Throws NumericalError on a non-finite loss.
StepReport train_step(std::span<const LatentWindow> batch, Model& model, const TrainConfig& tcfg);

// Batch loss (mean of per-window reconstruction MSE) and its gradient with
// respect to W for the current routing. Does not modify the model.
struct GateGradient {
    double loss = 0.0;
    Matrix grad_w;
};
GateGradient gate_gradient(std::span<const LatentWindow> batch, const Model& model);

struct TrainLogRow {
    std::size_t step = 0;
    double loss_recon = 0.0;
    double loss_commit = 0.0;
    std::vector<std::vector<std::size_t>> selections;
    std::optional<std::vector<double>> bias_snapshot;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;

    // Columns: step, loss_recon, loss_commit, selected_subset,
    // bias_vector_snapshot. Subsets are '+'-joined indices, one per window,
    // separated by ';'. The bias column is empty except on DRPS boundaries.
    void write_csv(std::ostream& out) const;
    std::string to_csv() const;
};

struct TrainResult {
    Model model;
    TrainLog log;
};

TrainResult train_run(const SyntheticLatentSource& source, const RevqConfig& cfg, const TrainConfig& tcfg);

// Inference-time reconstruction error per window (bias frozen, loads untouched).
std::vector<double> per_window_mse(const Model& model, std::span<const LatentWindow> windows);
double mean_window_mse(const Model& model, std::span<const LatentWindow> windows);

std::string format_number(double v);

}  // namespace switchcodec
