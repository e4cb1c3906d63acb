#include "switchcodec/revq.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace switchcodec {

namespace {

// Quantizes every frame of `input` with `cb`; returns the codes and writes the
// selected entries into `output` (same shape as input).
std::vector<std::uint32_t> quantize_frames(const Matrix& input, const Codebook& cb, DistanceMode mode,
                                           Matrix& output) {
    std::vector<std::uint32_t> codes(input.rows());
    output = Matrix(input.rows(), input.cols());
    for (std::size_t t = 0; t < input.rows(); ++t) {
        codes[t] = nearest_code(input.row(t), cb, mode).index;
        const auto entry = cb.entry(codes[t]);
        std::copy(entry.begin(), entry.end(), output.row(t).begin());
    }
    return codes;
}

void check_window(const Matrix& frames, const RevqConfig& cfg) {
    if (frames.rows() == 0) throw ContractViolation("latent window has no frames");
    if (frames.cols() != cfg.dim) {
        throw ContractViolation("latent window dimension " + std::to_string(frames.cols()) +
                                " does not match configured D = " + std::to_string(cfg.dim));
    }
    if (!frames.all_finite()) throw ContractViolation("latent window contains non-finite values");
}

}  // namespace

void RevqConfig::validate() const {
    if (dim == 0) throw ContractViolation("D must be >= 1");
    if (shared < 1) throw ContractViolation("at least one shared quantizer is required");
    if (codebook_size < 1) throw ContractViolation("codebook size C must be >= 1");
    if (routed == 0) throw ContractViolation("N_r must be >= 1");
    if (active < 1) throw ContractViolation("K_r must be >= 1 when N_r > 0");
    if (active > routed) {
        throw ContractViolation("K_r (" + std::to_string(active) + ") must not exceed N_r (" +
                                std::to_string(routed) + ")");
    }
}

QuantizerBank QuantizerBank::zeros(const RevqConfig& cfg) {
    cfg.validate();
    QuantizerBank bank;
    bank.shared.assign(cfg.shared, Codebook(cfg.codebook_size, cfg.dim));
    bank.routed.assign(cfg.routed, Codebook(cfg.codebook_size, cfg.dim));
    return bank;
}

void QuantizerBank::validate(const RevqConfig& cfg) const {
    if (shared.size() != cfg.shared || routed.size() != cfg.routed) {
        throw ContractViolation("quantizer bank does not match configuration (shared " +
                                std::to_string(shared.size()) + ", routed " +
                                std::to_string(routed.size()) + ")");
    }
    auto check = [&](const Codebook& cb) {
        cb.validate();
        if (cb.size() != cfg.codebook_size || cb.dim() != cfg.dim) {
            throw ContractViolation("codebook shape does not match configuration");
        }
    };
    std::for_each(shared.begin(), shared.end(), check);
    std::for_each(routed.begin(), routed.end(), check);
}

std::vector<std::size_t> EncodedWindow::selected() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) out.push_back(i);
    }
    return out;
}

std::vector<LatentWindow> split_windows(const Matrix& latents, std::size_t window_frames) {
    const std::size_t total = latents.cols();
    if (total == 0) throw ContractViolation("split_windows: input has no frames");
    const std::size_t step = window_frames == 0 ? total : window_frames;
    std::vector<LatentWindow> out;
    for (std::size_t start = 0, index = 0; start < total; start += step, ++index) {
        const std::size_t len = std::min(step, total - start);
        LatentWindow w{Matrix(len, latents.rows()), index};
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t d = 0; d < latents.rows(); ++d) w.frames(t, d) = latents(d, start + t);
        }
        out.push_back(std::move(w));
    }
    return out;
}

Matrix join_frames(std::span<const Matrix> frame_blocks) {
    if (frame_blocks.empty()) return {};
    const std::size_t dim = frame_blocks.front().cols();
    std::size_t total = 0;
    for (const auto& m : frame_blocks) {
        if (m.cols() != dim) throw ContractViolation("join_frames: inconsistent dimensions");
        total += m.rows();
    }
    Matrix out(dim, total);
    std::size_t offset = 0;
    for (const auto& m : frame_blocks) {
        for (std::size_t t = 0; t < m.rows(); ++t) {
            for (std::size_t d = 0; d < dim; ++d) out(d, offset + t) = m(t, d);
        }
        offset += m.rows();
    }
    return out;
}

Matrix join_windows(std::span<const LatentWindow> windows) {
    std::vector<Matrix> blocks;
    blocks.reserve(windows.size());
    for (const auto& w : windows) blocks.push_back(w.frames);
    return join_frames(blocks);
}

ForwardTrace revq_forward(const Matrix& frames, const QuantizerBank& bank, const RevqConfig& cfg,
                          std::span<const double> routed_multipliers, bool evaluate_all) {
    check_window(frames, cfg);
    if (routed_multipliers.size() != bank.routed.size()) {
        throw ContractViolation("revq_forward: multiplier count does not match routed quantizers");
    }
    ForwardTrace trace;
    trace.reconstruction = Matrix(frames.rows(), frames.cols());
    Matrix residual = frames;
    Matrix output;

    for (const Codebook& cb : bank.shared) {
        trace.shared_inputs.push_back(residual);
        trace.shared_codes.push_back(quantize_frames(residual, cb, cfg.distance, output));
        for (std::size_t i = 0; i < output.size(); ++i) {
            trace.reconstruction.data()[i] += output.data()[i];
            residual.data()[i] -= output.data()[i];
        }
    }

    trace.routed_inputs.resize(bank.routed.size());
    trace.routed_outputs.resize(bank.routed.size());
    trace.routed_codes.resize(bank.routed.size());
    for (std::size_t q = 0; q < bank.routed.size(); ++q) {
        const double m = routed_multipliers[q];
        if (m == 0.0 && !evaluate_all) continue;
        trace.routed_inputs[q] = residual;
        trace.routed_codes[q] = quantize_frames(residual, bank.routed[q], cfg.distance, output);
        if (m != 0.0) {
            for (std::size_t i = 0; i < output.size(); ++i) {
                const double contribution = m * output.data()[i];
                trace.reconstruction.data()[i] += contribution;
                residual.data()[i] -= contribution;
            }
        }
        trace.routed_outputs[q] = std::move(output);
    }
    return trace;
}

EncodeResult encode_selected(const LatentWindow& window, const QuantizerBank& bank,
                             const RevqConfig& cfg, std::span<const std::size_t> selected) {
    bank.validate(cfg);
    if (selected.size() != cfg.active) {
        throw ContractViolation("encode_selected: expected " + std::to_string(cfg.active) +
                                " routed quantizers, got " + std::to_string(selected.size()));
    }
    std::vector<double> multipliers(cfg.routed, 0.0);
    for (std::size_t q : selected) {
        if (q >= cfg.routed) throw ContractViolation("encode_selected: routed index out of range");
        if (multipliers[q] != 0.0) throw ContractViolation("encode_selected: duplicate routed index");
        multipliers[q] = 1.0;
    }
    ForwardTrace trace = revq_forward(window.frames, bank, cfg, multipliers, false);

    EncodeResult out;
    out.encoded.mask.assign(cfg.routed, 0);
    out.encoded.shared_codes = std::move(trace.shared_codes);
    for (std::size_t q = 0; q < cfg.routed; ++q) {
        if (multipliers[q] == 0.0) continue;
        out.encoded.mask[q] = 1;
        out.encoded.routed_codes.push_back(std::move(trace.routed_codes[q]));
    }
    out.reconstruction = std::move(trace.reconstruction);
    return out;
}

EncodeResult revq_encode(const LatentWindow& window, const QuantizerBank& bank,
                         const GateWeights& gate, GateState& state, const RevqConfig& cfg,
                         bool training) {
    cfg.validate();
    check_window(window.frames, cfg);
    if (gate.routed() != cfg.routed || gate.active != cfg.active || gate.dim() != cfg.dim) {
        throw ContractViolation("revq_encode: gate shape does not match configuration");
    }
    RoutingDecision routing = route_window(window.frames, gate, state, training);
    EncodeResult out = encode_selected(window, bank, cfg, routing.selected);
    out.routing = std::move(routing);
    return out;
}

Matrix revq_decode(const EncodedWindow& encoded, const QuantizerBank& bank, const RevqConfig& cfg) {
    cfg.validate();
    if (encoded.mask.size() != cfg.routed) throw ContractViolation("decode: mask length differs from N_r");
    const auto selected = encoded.selected();
    if (selected.size() != cfg.active) {
        throw ContractViolation("decode: mask popcount " + std::to_string(selected.size()) +
                                " differs from K_r = " + std::to_string(cfg.active));
    }
    if (encoded.shared_codes.size() != cfg.shared || encoded.routed_codes.size() != cfg.active) {
        throw ContractViolation("decode: code stage count does not match configuration");
    }
    const std::size_t frames = encoded.frame_count();
    std::vector<const Codebook*> books;
    std::vector<const std::vector<std::uint32_t>*> codes;
    for (std::size_t s = 0; s < cfg.shared; ++s) {
        books.push_back(&bank.shared.at(s));
        codes.push_back(&encoded.shared_codes[s]);
    }
    for (std::size_t k = 0; k < selected.size(); ++k) {
        books.push_back(&bank.routed.at(selected[k]));
        codes.push_back(&encoded.routed_codes[k]);
    }
    Matrix out(frames, cfg.dim);
    for (std::size_t stage = 0; stage < books.size(); ++stage) {
        const auto& stage_codes = *codes[stage];
        if (stage_codes.size() != frames) throw ContractViolation("decode: ragged code arrays");
        for (std::size_t t = 0; t < frames; ++t) {
            if (stage_codes[t] >= books[stage]->size()) {
                throw ContractViolation("decode: code index " + std::to_string(stage_codes[t]) +
                                        " out of range for C = " + std::to_string(books[stage]->size()));
            }
            const auto entry = books[stage]->entry(stage_codes[t]);
            for (std::size_t d = 0; d < cfg.dim; ++d) out(t, d) += entry[d];
        }
    }
    return out;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t acc = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // acc * (n - k + i) is divisible by i; divide the common factor out first.
        const std::uint64_t g = std::gcd(acc, i);
        const std::uint64_t factor = (n - k + i) / (i / g);
        std::uint64_t next = 0;
        if (__builtin_mul_overflow(acc / g, factor, &next)) {
            throw ContractViolation("binomial coefficient overflows 64 bits");
        }
        acc = next;
    }
    return acc;
}

ExpansionStats expansion_stats(const RevqConfig& cfg) {
    cfg.validate();
    ExpansionStats out;
    const std::uint64_t num = cfg.shared + cfg.routed;
    const std::uint64_t den = cfg.shared + cfg.active;
    const std::uint64_t g = std::gcd(num, den);
    out.space_numerator = num / g;
    out.space_denominator = den / g;
    out.combinations = binomial(cfg.routed, cfg.active);
    return out;
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractViolation("mse: shape mismatch");
    if (a.size() == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace switchcodec
