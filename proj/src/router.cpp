#include "switchcodec/router.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "switchcodec/kernels.hpp"

namespace switchcodec {

void GateWeights::validate() const {
    if (routed() == 0 || dim() == 0) throw ContractViolation("gate needs D >= 1 and N_r >= 1");
    if (active < 1 || active > routed()) {
        throw ContractViolation("gate requires 1 <= K_r <= N_r (K_r = " + std::to_string(active) +
                                ", N_r = " + std::to_string(routed()) + ")");
    }
    if (!w.all_finite()) throw ContractViolation("gate weights are not finite");
}

GateState GateState::zeros(std::size_t routed) {
    GateState s;
    s.bias.assign(routed, 0.0);
    s.load.assign(routed, 0);
    return s;
}

std::vector<double> StraightThroughMask::backward(std::span<const double> grad_value) const {
    if (grad_value.size() != value.size()) throw ContractViolation("ste backward: shape mismatch");
    return {grad_value.begin(), grad_value.end()};
}

std::vector<double> compute_affinity(const Matrix& frames, const GateWeights& gate) {
    if (frames.rows() == 0) throw ContractViolation("compute_affinity: empty window (T = 0)");
    if (frames.cols() != gate.dim()) {
        throw ContractViolation("compute_affinity: frame dimension " + std::to_string(frames.cols()) +
                                " does not match gate dimension " + std::to_string(gate.dim()));
    }
    // Mean over time first, then one projection: identical to averaging the
    // per-frame score rows by linearity.
    const std::size_t dim = frames.cols();
    std::vector<double> mean(dim, 0.0);
    const auto& k = kernels::active();
    for (std::size_t t = 0; t < frames.rows(); ++t) k.axpy(1.0, frames.row(t).data(), mean.data(), dim);
    const double inv_t = 1.0 / static_cast<double>(frames.rows());
    for (double& m : mean) m *= inv_t;

    std::vector<double> scores(gate.routed(), 0.0);
    for (std::size_t d = 0; d < dim; ++d) k.axpy(mean[d], gate.w.row(d).data(), scores.data(), scores.size());
    return scores;
}

Matrix affinity_backward(const Matrix& frames, std::span<const double> grad_scores) {
    if (frames.rows() == 0) throw ContractViolation("affinity_backward: empty window");
    Matrix grad(frames.cols(), grad_scores.size());
    std::vector<double> mean(frames.cols(), 0.0);
    for (std::size_t t = 0; t < frames.rows(); ++t) {
        for (std::size_t d = 0; d < frames.cols(); ++d) mean[d] += frames(t, d);
    }
    for (double& m : mean) m /= static_cast<double>(frames.rows());
    for (std::size_t d = 0; d < grad.rows(); ++d) {
        for (std::size_t i = 0; i < grad.cols(); ++i) grad(d, i) = mean[d] * grad_scores[i];
    }
    return grad;
}

RoutingDecision topk_mask(std::span<const double> biased_scores, std::size_t k) {
    const std::size_t n = biased_scores.size();
    if (k > n) {
        throw ContractViolation("topk_mask: K_r (" + std::to_string(k) + ") exceeds N_r (" +
                                std::to_string(n) + ")");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (biased_scores[a] != biased_scores[b]) return biased_scores[a] > biased_scores[b];
                          return a < b;
                      });
    RoutingDecision out;
    out.biased_scores.assign(biased_scores.begin(), biased_scores.end());
    out.mask.assign(n, 0);
    out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.selected.begin(), out.selected.end());
    for (std::size_t i : out.selected) out.mask[i] = 1;
    return out;
}

StraightThroughMask ste_mask(std::span<const double> scores, std::span<const std::uint8_t> hard_mask) {
    if (scores.size() != hard_mask.size()) throw ContractViolation("ste_mask: shape mismatch");
    // S + sg(mask - S) evaluates to mask; computing it literally would leave
    // rounding residue in the forward value.
    StraightThroughMask out;
    out.value.assign(hard_mask.begin(), hard_mask.end());
    return out;
}

GateState drps_update(GateState state, double gamma, double dead_threshold) {
    if (!(gamma >= 0.0)) throw ContractViolation("drps_update: gamma must be >= 0");
    if (state.load.size() != state.bias.size()) throw ContractViolation("drps_update: state shape mismatch");
    const std::size_t n = state.load.size();
    if (n == 0) return state;
    const double mean_load =
        static_cast<double>(std::accumulate(state.load.begin(), state.load.end(), std::uint64_t{0})) /
        static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double load = static_cast<double>(state.load[i]);
        if (load < dead_threshold) {
            state.bias[i] += gamma;
        } else if (load > mean_load) {
            state.bias[i] = 0.0;
        }
    }
    std::fill(state.load.begin(), state.load.end(), 0);
    state.steps_in_window = 0;
    return state;
}

double default_dead_threshold(const GateState& state, std::size_t active, double fraction) {
    if (state.routed() == 0) return 0.0;
    const double uniform_load = static_cast<double>(state.steps_in_window) * static_cast<double>(active) /
                                static_cast<double>(state.routed());
    return fraction * uniform_load;
}

RoutingDecision route_window(const Matrix& frames, const GateWeights& gate, GateState& state,
                             bool training) {
    if (state.routed() != gate.routed() || state.load.size() != gate.routed()) {
        throw ContractViolation("route_window: gate state does not match gate weights");
    }
    auto scores = compute_affinity(frames, gate);
    std::vector<double> biased(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) biased[i] = scores[i] + state.bias[i];
    RoutingDecision decision = topk_mask(biased, gate.active);
    decision.scores = std::move(scores);
    if (training) decision.ste = ste_mask(decision.scores, decision.mask);
    for (std::size_t i : decision.selected) ++state.load[i];
    ++state.steps_in_window;
    return decision;
}

}  // namespace switchcodec
