#include "switchcodec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <numeric>

#include "switchcodec/error.hpp"

namespace switchcodec {

namespace {

// Runs fn(i) for i in [0, n) on at most `jobs` threads; results keep index order.
template <typename T>
std::vector<T> run_cells(std::size_t n, std::size_t jobs, const std::function<T(std::size_t)>& fn) {
    std::vector<T> out(n);
    jobs = std::max<std::size_t>(1, jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    for (std::size_t start = 0; start < n; start += jobs) {
        std::vector<std::future<T>> batch;
        for (std::size_t i = start; i < std::min(n, start + jobs); ++i) {
            batch.push_back(std::async(std::launch::async, fn, i));
        }
        for (std::size_t i = 0; i < batch.size(); ++i) out[start + i] = batch[i].get();
    }
    return out;
}

double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

UsageReport UsageReport::from_counts(std::vector<std::uint64_t> counts, std::size_t windows) {
    UsageReport r;
    r.windows = windows;
    r.counts = std::move(counts);
    if (r.counts.empty()) return r;
    const double total = static_cast<double>(std::accumulate(r.counts.begin(), r.counts.end(), std::uint64_t{0}));
    std::size_t used = 0;
    for (std::uint64_t c : r.counts) {
        if (c == 0) continue;
        ++used;
        const double p = static_cast<double>(c) / total;
        r.selection_entropy -= p * std::log2(p);
    }
    r.ever_used_fraction = static_cast<double>(used) / static_cast<double>(r.counts.size());
    return r;
}

UsageReport measure_usage(const Model& model, std::span<const LatentWindow> windows) {
    Model scratch = model;
    scratch.state.load.assign(model.cfg.routed, 0);
    scratch.state.steps_in_window = 0;
    for (const auto& w : windows) select_routed(scratch, w, false);
    return UsageReport::from_counts(scratch.state.load, windows.size());
}

std::vector<LatentWindow> heldout_windows(const SyntheticLatentSource& source, const TrainConfig& tcfg) {
    return source.dataset(tcfg.seed ^ 0x5bd1e9955bd1e995ULL);
}

namespace {

struct RunOutcome {
    UsageReport usage;
    double final_loss = 0.0;
    double max_abs_bias = 0.0;
};

RunOutcome train_and_measure(const SyntheticLatentSource& source, const RevqConfig& cfg, const TrainConfig& t,
                             std::span<const LatentWindow> heldout) {
    const TrainResult trained = train_run(source, cfg, t);
    RunOutcome out{measure_usage(trained.model, heldout), mean_window_mse(trained.model, heldout), 0.0};
    for (const auto& row : trained.log.rows) {
        if (!row.bias_snapshot) continue;
        for (double b : *row.bias_snapshot) out.max_abs_bias = std::max(out.max_abs_bias, std::abs(b));
    }
    return out;
}

// Runs every (cell, replicate) pair, then groups the outcomes by cell.
std::vector<std::vector<RunOutcome>> run_grid(std::size_t cells, const SweepOptions& options,
                                              const std::function<RunOutcome(std::size_t, std::size_t)>& fn) {
    if (cells == 0) throw ContractViolation("sweep: no values to sweep over");
    if (options.replicates == 0) throw ContractViolation("sweep: replicates must be >= 1");
    const std::size_t reps = options.replicates;
    const auto flat = run_cells<RunOutcome>(cells * reps, options.jobs,
                                            [&](std::size_t i) { return fn(i / reps, i % reps); });
    std::vector<std::vector<RunOutcome>> grouped(cells);
    for (std::size_t i = 0; i < flat.size(); ++i) grouped[i / reps].push_back(flat[i]);
    return grouped;
}

}  // namespace

std::vector<UsageRow> usage_sweep(std::span<const std::size_t> routed_values, bool drps_on, double gamma,
                                  const SyntheticLatentSource& source, const RevqConfig& base,
                                  const TrainConfig& tcfg, const SweepOptions& options) {
    const auto heldout = heldout_windows(source, tcfg);
    const std::vector<std::size_t> values(routed_values.begin(), routed_values.end());
    const auto grid = run_grid(values.size(), options, [&](std::size_t cell, std::size_t rep) {
        RevqConfig cfg = base;
        cfg.routed = values[cell];
        TrainConfig t = tcfg;
        t.mode = RoutingMode::kRevq;
        t.gamma = drps_on ? gamma : 0.0;
        t.seed = tcfg.seed + rep;
        return train_and_measure(source, cfg, t, heldout);
    });
    std::vector<UsageRow> rows;
    for (std::size_t cell = 0; cell < values.size(); ++cell) {
        UsageRow row;
        row.routed = values[cell];
        const double n = static_cast<double>(grid[cell].size());
        for (const auto& run : grid[cell]) {
            row.ever_used_fraction += run.usage.ever_used_fraction / n;
            row.selection_entropy += run.usage.selection_entropy / n;
            row.final_loss += run.final_loss / n;
            row.runs.push_back(run.usage);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<GammaRow> gamma_sweep(std::span<const double> gammas, const SyntheticLatentSource& source,
                                  const RevqConfig& cfg, const TrainConfig& tcfg, const SweepOptions& options) {
    const auto heldout = heldout_windows(source, tcfg);
    const std::vector<double> values(gammas.begin(), gammas.end());
    const auto grid = run_grid(values.size(), options, [&](std::size_t cell, std::size_t rep) {
        TrainConfig t = tcfg;
        t.mode = RoutingMode::kRevq;
        t.gamma = values[cell];
        t.seed = tcfg.seed + rep;
        return train_and_measure(source, cfg, t, heldout);
    });
    std::vector<GammaRow> rows;
    for (std::size_t cell = 0; cell < values.size(); ++cell) {
        GammaRow row;
        row.gamma = values[cell];
        const double n = static_cast<double>(grid[cell].size());
        for (const auto& run : grid[cell]) {
            row.ever_used_fraction += run.usage.ever_used_fraction / n;
            row.selection_entropy += run.usage.selection_entropy / n;
            row.final_loss += run.final_loss / n;
            row.max_abs_bias = std::max(row.max_abs_bias, run.max_abs_bias);
            row.runs.push_back(run.usage);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Summary Summary::of(std::vector<double> values) {
    Summary s;
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile(values, 0.25);
    s.median = quantile(values, 0.5);
    s.q3 = quantile(values, 0.75);
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.stddev = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    return s;
}

FixedVsAdaptive fixed_vs_adaptive(const SyntheticLatentSource& source, const RevqConfig& cfg_fixed,
                                  const RevqConfig& cfg_revq, const TrainConfig& tcfg) {
    cfg_fixed.validate();
    cfg_revq.validate();
    if (cfg_fixed.shared + cfg_fixed.active != cfg_revq.shared + cfg_revq.active ||
        cfg_fixed.codebook_size != cfg_revq.codebook_size || cfg_fixed.dim != cfg_revq.dim) {
        throw ContractViolation(
            "fixed_vs_adaptive: configurations must activate the same number of quantizers with equal "
            "codebook size and dimension");
    }
    const auto heldout = heldout_windows(source, tcfg);

    TrainConfig fixed_t = tcfg;
    fixed_t.mode = RoutingMode::kFixedRvq;
    TrainConfig revq_t = tcfg;
    revq_t.mode = RoutingMode::kRevq;

    FixedVsAdaptive out;
    out.fixed_errors = per_window_mse(train_run(source, cfg_fixed, fixed_t).model, heldout);
    out.revq_errors = per_window_mse(train_run(source, cfg_revq, revq_t).model, heldout);
    out.fixed = Summary::of(out.fixed_errors);
    out.revq = Summary::of(out.revq_errors);
    return out;
}

namespace {

void write_run_columns(std::ostream& out, std::span<const UsageReport> runs) {
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (r) out << '|';
        out << format_number(runs[r].ever_used_fraction);
    }
    out << ',';
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (r) out << '|';
        for (std::size_t i = 0; i < runs[r].counts.size(); ++i) {
            if (i) out << ';';
            out << runs[r].counts[i];
        }
    }
}

}  // namespace

void write_usage_csv(std::ostream& out, std::span<const UsageRow> rows, bool drps_on) {
    out << "routed,drps,replicates,windows,ever_used_fraction,selection_entropy_bits,final_loss,"
           "run_ever_used_fraction,run_selection_counts\n";
    for (const auto& r : rows) {
        out << r.routed << ',' << (drps_on ? 1 : 0) << ',' << r.runs.size() << ','
            << (r.runs.empty() ? 0 : r.runs.front().windows) << ',' << format_number(r.ever_used_fraction) << ','
            << format_number(r.selection_entropy) << ',' << format_number(r.final_loss) << ',';
        write_run_columns(out, r.runs);
        out << '\n';
    }
}

void write_gamma_csv(std::ostream& out, std::span<const GammaRow> rows) {
    out << "gamma,replicates,windows,ever_used_fraction,selection_entropy_bits,final_loss,max_abs_bias,"
           "run_ever_used_fraction,run_selection_counts\n";
    for (const auto& r : rows) {
        out << format_number(r.gamma) << ',' << r.runs.size() << ',' << (r.runs.empty() ? 0 : r.runs.front().windows)
            << ',' << format_number(r.ever_used_fraction) << ',' << format_number(r.selection_entropy) << ','
            << format_number(r.final_loss) << ',' << format_number(r.max_abs_bias) << ',';
        write_run_columns(out, r.runs);
        out << '\n';
    }
}

void write_fixed_vs_adaptive_csv(std::ostream& out, const FixedVsAdaptive& result) {
    out << "model,windows,min,q1,median,q3,max,mean,stddev\n";
    auto row = [&](const char* name, const Summary& s, std::size_t n) {
        out << name << ',' << n << ',' << format_number(s.min) << ',' << format_number(s.q1) << ','
            << format_number(s.median) << ',' << format_number(s.q3) << ',' << format_number(s.max) << ','
            << format_number(s.mean) << ',' << format_number(s.stddev) << '\n';
    };
    row("fixed_rvq", result.fixed, result.fixed_errors.size());
    row("revq", result.revq, result.revq_errors.size());
}

void write_window_errors_csv(std::ostream& out, const FixedVsAdaptive& result) {
    out << "window,fixed_rvq_mse,revq_mse\n";
    for (std::size_t i = 0; i < result.fixed_errors.size(); ++i) {
        out << i << ',' << format_number(result.fixed_errors[i]) << ',' << format_number(result.revq_errors[i]) << '\n';
    }
}

}  // namespace switchcodec
