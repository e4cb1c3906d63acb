#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "switchcodec/matrix.hpp"

namespace switchcodec {

// Bias-free gating matrix W (D rows x N_r columns) and the number of routed
// quantizers activated per window.
struct GateWeights {
    Matrix w;
    std::size_t active = 1;  // K_r

    std::size_t dim() const noexcept { return w.rows(); }
    std::size_t routed() const noexcept { return w.cols(); }

    void validate() const;
};

// Gradient-free selection bias and the load counters it is derived from.
struct GateState {
    std::vector<double> bias;
    std::vector<std::uint64_t> load;
    std::uint64_t steps_in_window = 0;  // routing decisions since the last reset

    static GateState zeros(std::size_t routed);
    std::size_t routed() const noexcept { return bias.size(); }
};

// Forward value of the straight-through mask plus its backward rule.
// value is exactly the hard mask; gradients flow to the scores unchanged.
struct StraightThroughMask {
    std::vector<double> value;

    // d(loss)/d(scores) given d(loss)/d(value).
    std::vector<double> backward(std::span<const double> grad_value) const;
};

struct RoutingDecision {
    std::vector<double> scores;         // S, unbiased
    std::vector<double> biased_scores;  // S + b
    std::vector<std::uint8_t> mask;     // exactly K_r ones
    std::vector<std::size_t> selected;  // ascending support of mask
    std::optional<StraightThroughMask> ste;  // populated when routing for training
};

// Time-mean of per-frame scores: S = (1/T) sum_t Z'[t, :] W.
// frames is Z' (T x D). Throws on T = 0 or mismatched D.
std::vector<double> compute_affinity(const Matrix& frames, const GateWeights& gate);

// dLoss/dW given dLoss/dS for one window (the transpose of compute_affinity).
Matrix affinity_backward(const Matrix& frames, std::span<const double> grad_scores);

// K largest entries; ties resolved toward the lower index.
RoutingDecision topk_mask(std::span<const double> biased_scores, std::size_t k);

StraightThroughMask ste_mask(std::span<const double> scores, std::span<const std::uint8_t> hard_mask);

// Bias maintenance over one accumulation window:
//   load_i < dead_threshold   -> b_i += gamma
//   load_i > mean(load)       -> b_i  = 0
//   otherwise                 -> b_i unchanged
// Loads and the decision counter are reset afterwards.
GateState drps_update(GateState state, double gamma, double dead_threshold);

// Threshold as a fraction of the load a uniform router would have produced
// over the decisions recorded in state.
double default_dead_threshold(const GateState& state, std::size_t active, double fraction = 0.1);

// Affinity -> biased top-k -> load accounting. When training is set the
// decision carries the straight-through mask built from the unbiased scores.
RoutingDecision route_window(const Matrix& frames, const GateWeights& gate, GateState& state,
                             bool training);

}  // namespace switchcodec
