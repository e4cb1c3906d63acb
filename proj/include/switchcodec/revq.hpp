#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "switchcodec/codebook.hpp"
#include "switchcodec/matrix.hpp"
#include "switchcodec/router.hpp"

namespace switchcodec {

struct RevqConfig {
    std::size_t dim = 8;             // D
    std::size_t routed = 8;          // N_r
    std::size_t active = 2;          // K_r
    std::size_t shared = 1;          // shared quantizers, always applied first
    std::size_t codebook_size = 32;  // C
    std::size_t window_frames = 0;   // frames per routing window, 0 = whole input
    DistanceMode distance = DistanceMode::kRaw;

    // Throws ContractViolation naming the broken constraint.
    void validate() const;

    friend bool operator==(const RevqConfig&, const RevqConfig&) = default;
};

// One or more shared quantizers followed by the routed pool. Read-only during
// inference; may be shared between threads.
struct QuantizerBank {
    std::vector<Codebook> shared;
    std::vector<Codebook> routed;

    static QuantizerBank zeros(const RevqConfig& cfg);
    void validate(const RevqConfig& cfg) const;

    friend bool operator==(const QuantizerBank&, const QuantizerBank&) = default;
};

// A block of latent frames that shares one routing decision. Frames are kept
// frame-major (T x D, i.e. Z transposed) so each frame is contiguous.
struct LatentWindow {
    Matrix frames;
    std::size_t index = 0;

    std::size_t frame_count() const noexcept { return frames.rows(); }
};

struct EncodedWindow {
    std::vector<std::uint8_t> mask;                        // N_r entries in {0, 1}
    std::vector<std::vector<std::uint32_t>> shared_codes;  // n_shared x T
    std::vector<std::vector<std::uint32_t>> routed_codes;  // K_r x T, ascending quantizer index

    std::size_t frame_count() const noexcept {
        return shared_codes.empty() ? (routed_codes.empty() ? 0 : routed_codes.front().size())
                                    : shared_codes.front().size();
    }
    std::vector<std::size_t> selected() const;

    friend bool operator==(const EncodedWindow&, const EncodedWindow&) = default;
};

struct EncodeResult {
    EncodedWindow encoded;
    Matrix reconstruction;  // T x D
    RoutingDecision routing;
};

// Contiguous, non-overlapping windows over a D x T_total latent matrix. The
// last window may be shorter; window_frames = 0 yields one window.
std::vector<LatentWindow> split_windows(const Matrix& latents, std::size_t window_frames);

// Inverse of split_windows: concatenates window frames back into D x T_total.
Matrix join_windows(std::span<const LatentWindow> windows);
Matrix join_frames(std::span<const Matrix> frame_blocks);

// Shared stage(s), then the routed quantizers in `selected` applied to the
// residual in ascending index order. Used directly by fixed-selection RVQ.
EncodeResult encode_selected(const LatentWindow& window, const QuantizerBank& bank,
                             const RevqConfig& cfg, std::span<const std::size_t> selected);

// Full pipeline: route on the window, then encode_selected. Loads in `state`
// are incremented; the bias is read but not updated.
EncodeResult revq_encode(const LatentWindow& window, const QuantizerBank& bank,
                         const GateWeights& gate, GateState& state, const RevqConfig& cfg,
                         bool training = false);

// Table lookups only; the mask decides which routed codebooks are read.
// Returns T x D.
Matrix revq_decode(const EncodedWindow& encoded, const QuantizerBank& bank, const RevqConfig& cfg);

// Forward pass with real-valued routed multipliers, as needed for the
// straight-through gradient. Every routed quantizer with a nonzero multiplier
// (or every quantizer, when evaluate_all is set) quantizes the running
// residual in index order; its output is scaled by its multiplier before being
// added to the reconstruction and subtracted from the residual.
struct ForwardTrace {
    Matrix reconstruction;                          // T x D
    std::vector<Matrix> shared_inputs;              // per shared stage, T x D
    std::vector<std::vector<std::uint32_t>> shared_codes;
    std::vector<Matrix> routed_inputs;              // per routed quantizer (empty if skipped)
    std::vector<Matrix> routed_outputs;             // unscaled codebook outputs q_i
    std::vector<std::vector<std::uint32_t>> routed_codes;
};

ForwardTrace revq_forward(const Matrix& frames, const QuantizerBank& bank, const RevqConfig& cfg,
                          std::span<const double> routed_multipliers, bool evaluate_all);

struct ExpansionStats {
    std::uint64_t space_numerator = 0;    // n_shared + N_r
    std::uint64_t space_denominator = 1;  // n_shared + K_r (reduced)
    std::uint64_t combinations = 0;       // C(N_r, K_r)

    double space_factor() const noexcept {
        return static_cast<double>(space_numerator) / static_cast<double>(space_denominator);
    }
};

ExpansionStats expansion_stats(const RevqConfig& cfg);

std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

double mean_squared_error(const Matrix& a, const Matrix& b);

}  // namespace switchcodec
