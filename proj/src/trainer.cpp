#include "switchcodec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "switchcodec/kernels.hpp"

namespace switchcodec {

namespace {

struct WindowPass {
    double mse = 0.0;
    std::vector<double> grad_mask;  // dLoss/dmask_i, empty when not requested
    ForwardTrace trace;
};

std::vector<double> hard_multipliers(std::size_t routed, std::span<const std::size_t> selected) {
    std::vector<double> m(routed, 0.0);
    for (std::size_t q : selected) m[q] = 1.0;
    return m;
}

// Forward pass for a fixed selection. With want_gradient every routed
// quantizer is evaluated on the running residual so that unselected ones also
// receive a mask gradient.
WindowPass window_pass(const Model& model, const LatentWindow& window, std::span<const std::size_t> selected,
                       bool want_gradient) {
    WindowPass pass;
    const auto multipliers = hard_multipliers(model.cfg.routed, selected);
    pass.trace = revq_forward(window.frames, model.bank, model.cfg, multipliers, want_gradient);
    pass.mse = mean_squared_error(window.frames, pass.trace.reconstruction);
    if (!want_gradient) return pass;

    // L = mean((Z - Zhat)^2); dL/dZhat = -2 (Z - Zhat) / (T D);
    // Zhat depends on mask_i through mask_i * q_i (codes are piecewise constant).
    const double scale = -2.0 / static_cast<double>(window.frames.size());
    Matrix residual = window.frames;
    for (std::size_t i = 0; i < residual.size(); ++i) residual.data()[i] -= pass.trace.reconstruction.data()[i];
    const auto& k = kernels::active();
    pass.grad_mask.assign(model.cfg.routed, 0.0);
    for (std::size_t q = 0; q < model.cfg.routed; ++q) {
        const Matrix& out = pass.trace.routed_outputs[q];
        pass.grad_mask[q] = scale * k.dot(residual.data(), out.data(), residual.size());
    }
    return pass;
}

struct EmaAccumulator {
    std::vector<double> counts;
    Matrix sums;

    explicit EmaAccumulator(const Codebook& cb) : counts(cb.size(), 0.0), sums(cb.size(), cb.dim()) {}

    void add(const Matrix& inputs, std::span<const std::uint32_t> codes) {
        for (std::size_t t = 0; t < codes.size(); ++t) {
            counts[codes[t]] += 1.0;
            kernels::active().axpy(1.0, inputs.row(t).data(), sums.row(codes[t]).data(), sums.cols());
        }
    }
};

// Entry 0 stays pinned at zero.
void apply_ema(Codebook& cb, const EmaAccumulator& acc, double decay) {
    auto& counts = cb.ema_counts();
    auto& sums = cb.ema_sums();
    for (std::size_t j = 1; j < cb.size(); ++j) {
        counts[j] = decay * counts[j] + (1.0 - decay) * acc.counts[j];
        auto sum = sums.row(j);
        const auto batch_sum = acc.sums.row(j);
        for (std::size_t d = 0; d < cb.dim(); ++d) sum[d] = decay * sum[d] + (1.0 - decay) * batch_sum[d];
        if (counts[j] > 1e-12) {
            auto entry = cb.entry(j);
            for (std::size_t d = 0; d < cb.dim(); ++d) entry[d] = sum[d] / counts[j];
        }
    }
    std::fill(cb.entry(0).begin(), cb.entry(0).end(), 0.0);
}

Matrix stack_frames(std::span<const LatentWindow> windows) {
    std::size_t rows = 0;
    std::size_t dim = windows.empty() ? 0 : windows.front().frames.cols();
    for (const auto& w : windows) rows += w.frames.rows();
    Matrix out(rows, dim);
    std::size_t r = 0;
    for (const auto& w : windows) {
        for (std::size_t t = 0; t < w.frames.rows(); ++t, ++r) {
            std::copy(w.frames.row(t).begin(), w.frames.row(t).end(), out.row(r).begin());
        }
    }
    return out;
}

// Residual of every sample row after quantization with `cb`.
Matrix residual_after(const Matrix& data, const Codebook& cb, DistanceMode mode) {
    Matrix out = data;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const auto code = nearest_code(data.row(r), cb, mode);
        const auto entry = cb.entry(code.index);
        for (std::size_t d = 0; d < data.cols(); ++d) out(r, d) -= entry[d];
    }
    return out;
}

Codebook codebook_with_zero(const Matrix& data, std::size_t size, std::size_t iterations, std::uint64_t seed) {
    Matrix entries(size, data.cols());
    if (size > 1) {
        const Matrix centroids = kmeans(data, size - 1, iterations, seed);
        for (std::size_t j = 0; j + 1 < size; ++j) {
            std::copy(centroids.row(j).begin(), centroids.row(j).end(), entries.row(j + 1).begin());
        }
    }
    return Codebook(std::move(entries));
}

std::string join_indices(std::span<const std::size_t> idx) {
    std::string s;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) s += '+';
        s += std::to_string(idx[i]);
    }
    return s;
}

}  // namespace

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ContractViolation("train: lr must be > 0");
    if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ContractViolation("train: ema_decay must be in (0, 1)");
    if (!(commitment_weight >= 0.0)) throw ContractViolation("train: commitment_weight must be >= 0");
    if (!(gamma >= 0.0)) throw ContractViolation("train: gamma must be >= 0");
    if (batch == 0) throw ContractViolation("train: batch must be >= 1");
    if (drps_window == 0) throw ContractViolation("train: drps_window must be >= 1");
    if (!(dead_threshold_frac >= 0.0)) throw ContractViolation("train: dead_threshold_frac must be >= 0");
    if (init_windows == 0) throw ContractViolation("train: init_windows must be >= 1");
}

SyntheticLatentSource SyntheticLatentSource::gaussian_clusters(std::size_t dim, std::size_t count,
                                                               double separation, std::uint64_t seed,
                                                               std::size_t frames,
                                                               std::size_t utterances_per_mode) {
    if (dim == 0 || count == 0) throw ContractViolation("synthetic source needs dim >= 1 and >= 1 mode");
    Rng rng(seed);
    SyntheticLatentSource src;
    src.frames = frames;
    src.utterances_per_mode = utterances_per_mode;
    for (std::size_t c = 0; c < count; ++c) {
        std::vector<double> mean(dim), stddev(dim);
        for (double& m : mean) m = rng.normal(0.0, separation);
        for (double& s : stddev) s = rng.uniform() < 0.5 ? 1.0 : 0.25;
        src.means.push_back(std::move(mean));
        src.stddevs.push_back(std::move(stddev));
    }
    return src;
}

void SyntheticLatentSource::validate() const {
    if (means.empty()) throw ContractViolation("synthetic source has no modes");
    if (means.size() != stddevs.size()) throw ContractViolation("synthetic source: means/stddevs mismatch");
    for (std::size_t c = 0; c < means.size(); ++c) {
        if (means[c].size() != dim() || stddevs[c].size() != dim()) {
            throw ContractViolation("synthetic source: inconsistent dimensions");
        }
        for (double s : stddevs[c]) {
            if (!(s >= 0.0)) throw ContractViolation("synthetic source: negative stddev");
        }
    }
    if (frames == 0) throw ContractViolation("synthetic source: frames must be >= 1");
}

LatentWindow SyntheticLatentSource::sample_window(std::size_t mode, Rng& rng, std::size_t index) const {
    LatentWindow w{Matrix(frames, dim()), index};
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t d = 0; d < dim(); ++d) w.frames(t, d) = rng.normal(means[mode][d], stddevs[mode][d]);
    }
    return w;
}

std::vector<LatentWindow> SyntheticLatentSource::draw(std::size_t count, Rng& rng) const {
    std::vector<LatentWindow> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t mode = static_cast<std::size_t>(rng.below(modes()));
        out.push_back(sample_window(mode, rng, i));
    }
    return out;
}

std::vector<LatentWindow> SyntheticLatentSource::dataset(std::uint64_t seed) const {
    validate();
    Rng rng(seed);
    std::vector<LatentWindow> out;
    for (std::size_t mode = 0; mode < modes(); ++mode) {
        for (std::size_t u = 0; u < utterances_per_mode; ++u) out.push_back(sample_window(mode, rng, out.size()));
    }
    return out;
}

Matrix kmeans(const Matrix& data, std::size_t k, std::size_t iterations, std::uint64_t seed) {
    if (k == 0) throw ContractViolation("kmeans: k must be >= 1");
    if (data.rows() < k) {
        throw ContractViolation("kmeans: need at least " + std::to_string(k) + " sample rows, got " +
                                std::to_string(data.rows()));
    }
    const std::size_t n = data.rows();
    const std::size_t dim = data.cols();
    const auto& kern = kernels::active();
    Rng rng(seed);

    // k-means++ seeding: duplicates of an already chosen point have weight 0.
    Matrix centroids(k, dim);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::size_t pick = static_cast<std::size_t>(rng.below(n));
    for (std::size_t c = 0; c < k; ++c) {
        std::copy(data.row(pick).begin(), data.row(pick).end(), centroids.row(c).begin());
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], kern.squared_l2(data.row(i).data(), centroids.row(c).data(), dim));
            total += nearest[i];
        }
        if (c + 1 == k) break;
        if (total <= 0.0) {
            pick = static_cast<std::size_t>(rng.below(n));
            continue;
        }
        double target = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            target -= nearest[i];
            if (target < 0.0 && nearest[i] > 0.0) {
                pick = i;
                break;
            }
        }
    }

    std::vector<std::size_t> assignment(n, 0);
    std::vector<double> distances(k);
    for (std::size_t iter = 0; iter < iterations; ++iter) {
        bool changed = iter == 0;
        for (std::size_t i = 0; i < n; ++i) {
            kern.squared_l2_rows(data.row(i).data(), centroids.data(), k, dim, distances.data());
            const std::size_t best = static_cast<std::size_t>(
                std::min_element(distances.begin(), distances.end()) - distances.begin());
            if (best != assignment[i]) changed = true;
            assignment[i] = best;
        }
        if (!changed) break;
        Matrix sums(k, dim);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            kern.axpy(1.0, data.row(i).data(), sums.row(assignment[i]).data(), dim);
            ++counts[assignment[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            for (std::size_t d = 0; d < dim; ++d) centroids(c, d) = sums(c, d) / static_cast<double>(counts[c]);
        }
    }
    return centroids;
}

QuantizerBank init_codebooks(const Matrix& sample, const RevqConfig& cfg, std::uint64_t seed,
                             std::size_t kmeans_iterations) {
    cfg.validate();
    if (sample.cols() != cfg.dim) throw ContractViolation("init_codebooks: sample dimension mismatch");
    if (sample.rows() < cfg.codebook_size) {
        throw ContractViolation("init_codebooks: sample has " + std::to_string(sample.rows()) +
                                " rows, need at least C = " + std::to_string(cfg.codebook_size));
    }
    QuantizerBank bank;
    Matrix residual = sample;
    for (std::size_t s = 0; s < cfg.shared; ++s) {
        bank.shared.push_back(codebook_with_zero(residual, cfg.codebook_size, kmeans_iterations, seed + s));
        residual = residual_after(residual, bank.shared.back(), cfg.distance);
    }
    for (std::size_t q = 0; q < cfg.routed; ++q) {
        bank.routed.push_back(
            codebook_with_zero(residual, cfg.codebook_size, kmeans_iterations, seed + 1000 + 7919 * (q + 1)));
    }
    return bank;
}

GateWeights init_gate(const RevqConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    GateWeights gate{Matrix(cfg.dim, cfg.routed), cfg.active};
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    for (double& w : gate.w.values()) w = rng.normal(0.0, scale);
    return gate;
}

Model init_model(std::span<const LatentWindow> sample, const RevqConfig& cfg, const TrainConfig& tcfg) {
    Model model;
    model.cfg = cfg;
    model.mode = tcfg.mode;
    model.bank = init_codebooks(stack_frames(sample), cfg, tcfg.seed, tcfg.kmeans_iterations);
    model.gate = init_gate(cfg, tcfg.seed ^ 0x9e3779b97f4a7c15ULL);
    model.state = GateState::zeros(cfg.routed);
    return model;
}

std::vector<std::size_t> select_routed(Model& model, const LatentWindow& window, bool training) {
    if (model.mode == RoutingMode::kRevq) {
        return route_window(window.frames, model.gate, model.state, training).selected;
    }
    std::vector<std::size_t> fixed(model.cfg.active);
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        fixed[i] = i;
        ++model.state.load[i];
    }
    ++model.state.steps_in_window;
    return fixed;
}

StepReport train_step(std::span<const LatentWindow> batch, Model& model, const TrainConfig& tcfg) {
    tcfg.validate();
    if (batch.empty()) throw ContractViolation("train_step: empty batch");
    const bool routing = model.mode == RoutingMode::kRevq;

    std::vector<EmaAccumulator> shared_acc, routed_acc;
    for (const auto& cb : model.bank.shared) shared_acc.emplace_back(cb);
    for (const auto& cb : model.bank.routed) routed_acc.emplace_back(cb);
    Matrix grad_w(model.cfg.dim, model.cfg.routed);

    StepReport report;
    double loss_sum = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const LatentWindow& window : batch) {
        auto selected = select_routed(model, window, true);
        WindowPass pass = window_pass(model, window, selected, routing);
        loss_sum += pass.mse;

        for (std::size_t s = 0; s < model.cfg.shared; ++s) {
            shared_acc[s].add(pass.trace.shared_inputs[s], pass.trace.shared_codes[s]);
        }
        for (std::size_t q : selected) routed_acc[q].add(pass.trace.routed_inputs[q], pass.trace.routed_codes[q]);

        if (routing) {
            // Straight-through: dLoss/dS = dLoss/dmask.
            const Matrix g = affinity_backward(window.frames, pass.grad_mask);
            kernels::active().axpy(inv_batch, g.data(), grad_w.data(), g.size());
        }
        report.selections.push_back(std::move(selected));
    }

    report.loss_recon = loss_sum * inv_batch;
    report.loss_commit = tcfg.commitment_weight * report.loss_recon;
    if (!std::isfinite(report.loss_recon)) {
        throw NumericalError("non-finite reconstruction loss at training step (loss = " +
                             format_number(report.loss_recon) + ")");
    }

    for (std::size_t s = 0; s < model.cfg.shared; ++s) apply_ema(model.bank.shared[s], shared_acc[s], tcfg.ema_decay);
    for (std::size_t q = 0; q < model.cfg.routed; ++q) apply_ema(model.bank.routed[q], routed_acc[q], tcfg.ema_decay);

    if (routing) {
        kernels::active().axpy(-tcfg.lr, grad_w.data(), model.gate.w.data(), grad_w.size());
        if (!model.gate.w.all_finite()) throw NumericalError("gate weights became non-finite");
        if (++model.steps_since_drps >= tcfg.drps_window) {
            const double threshold = default_dead_threshold(model.state, model.cfg.active, tcfg.dead_threshold_frac);
            model.state = drps_update(std::move(model.state), tcfg.gamma, threshold);
            model.steps_since_drps = 0;
            report.bias_snapshot = model.state.bias;
        }
    }
    return report;
}

GateGradient gate_gradient(std::span<const LatentWindow> batch, const Model& model) {
    if (batch.empty()) throw ContractViolation("gate_gradient: empty batch");
    GateGradient out;
    out.grad_w = Matrix(model.cfg.dim, model.cfg.routed);
    GateState scratch = model.state;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const LatentWindow& window : batch) {
        const RoutingDecision decision = route_window(window.frames, model.gate, scratch, true);
        WindowPass pass = window_pass(model, window, decision.selected, true);
        out.loss += pass.mse * inv_batch;
        const Matrix g = affinity_backward(window.frames, decision.ste->backward(pass.grad_mask));
        for (std::size_t i = 0; i < g.size(); ++i) out.grad_w.data()[i] += inv_batch * g.data()[i];
    }
    return out;
}

void TrainLog::write_csv(std::ostream& out) const {
    out << "step,loss_recon,loss_commit,selected_subset,bias_vector_snapshot\n";
    for (const auto& row : rows) {
        out << row.step << ',' << format_number(row.loss_recon) << ',' << format_number(row.loss_commit) << ',';
        for (std::size_t i = 0; i < row.selections.size(); ++i) {
            if (i) out << ';';
            out << join_indices(row.selections[i]);
        }
        out << ',';
        if (row.bias_snapshot) {
            for (std::size_t i = 0; i < row.bias_snapshot->size(); ++i) {
                if (i) out << ';';
                out << format_number((*row.bias_snapshot)[i]);
            }
        }
        out << '\n';
    }
}

std::string TrainLog::to_csv() const {
    std::ostringstream s;
    write_csv(s);
    return s.str();
}

TrainResult train_run(const SyntheticLatentSource& source, const RevqConfig& cfg, const TrainConfig& tcfg) {
    cfg.validate();
    tcfg.validate();
    source.validate();
    if (source.dim() != cfg.dim) throw ContractViolation("train_run: source dimension differs from D");

    Rng rng(tcfg.seed);
    const auto init_sample = source.draw(tcfg.init_windows, rng);
    TrainResult result{init_model(init_sample, cfg, tcfg), {}};
    for (std::size_t step = 0; step < tcfg.steps; ++step) {
        const auto batch = source.draw(tcfg.batch, rng);
        StepReport r = train_step(batch, result.model, tcfg);
        result.log.rows.push_back(
            {step, r.loss_recon, r.loss_commit, std::move(r.selections), std::move(r.bias_snapshot)});
    }
    return result;
}

std::vector<double> per_window_mse(const Model& model, std::span<const LatentWindow> windows) {
    Model scratch = model;  // routing bumps loads; keep the caller's state intact
    std::vector<double> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        const auto selected = select_routed(scratch, w, false);
        out.push_back(window_pass(scratch, w, selected, false).mse);
    }
    return out;
}

double mean_window_mse(const Model& model, std::span<const LatentWindow> windows) {
    const auto errors = per_window_mse(model, windows);
    if (errors.empty()) return 0.0;
    double sum = 0.0;
    for (double e : errors) sum += e;
    return sum / static_cast<double>(errors.size());
}

}  // namespace switchcodec
