// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance <path-to-revq>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cli_harness.hpp"
#include "oracles.hpp"
#include "switchcodec/bitstream.hpp"
#include "switchcodec/config.hpp"
#include "switchcodec/eval.hpp"
#include "switchcodec/spectral.hpp"

using namespace switchcodec;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

// Desk configuration shared by the training criteria.
struct Desk {
    CliConfig cfg = CliConfig::defaults();
    SyntheticLatentSource source = cfg.data.source(cfg.model.dim);
    SweepOptions options{cfg.sweep.replicates, 1};
};

Outcome routing_oracles() {
    const auto start = Clock::now();
    oracle::Gen g(101);
    std::size_t mismatches = 0;
    double worst = 0.0;
    const std::size_t instances = 1000;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::size_t n = g.index(1, 32), d = g.index(1, 64), t = g.index(1, 16), k = g.index(1, n);
        const Matrix frames = g.matrix(t, d);
        GateWeights gate;
        gate.w = g.matrix(d, n, 0.3);
        gate.active = k;
        const auto scores = compute_affinity(frames, gate);
        const auto ref = oracle::naive_affinity(frames, gate.w);
        for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(scores[j] - ref[j]));
        // Half the instances route tie-prone scores to exercise the tie rule.
        const auto biased = (i % 2) ? g.tie_prone(n) : scores;
        if (topk_mask(biased, k).selected != oracle::sort_topk(biased, k)) ++mismatches;
    }
    const double elapsed = seconds_since(start);
    return {mismatches == 0 && worst <= 1e-6 && elapsed < 10.0,
            std::to_string(instances) + " instances, index mismatches " + std::to_string(mismatches) +
                ", max score error " + fmt(worst) + ", " + fmt(elapsed) + " s"};
}

// Nearest-code assignments are discrete decisions like the top-k mask, so the
// primary check holds both at their W0 values. The recomputed-assignment check
// at a step small enough not to cross Voronoi boundaries is also required; at
// 1e-4 it is reported only, since flips there make the loss discontinuous.
Outcome gradient_check(const Desk& desk) {
    const auto start = Clock::now();
    double frozen = 0.0, recomputed_small = 0.0, recomputed_coarse = 0.0;
    std::size_t entries = 0;
    const std::size_t instances = 50;
    for (std::size_t i = 0; i < instances; ++i) {
        TrainConfig tcfg = desk.cfg.train;
        tcfg.seed = 1000 + i;
        Rng rng(tcfg.seed);
        Model model = init_model(desk.source.draw(tcfg.init_windows, rng), desk.cfg.model, tcfg);
        oracle::Gen g(tcfg.seed);
        if (i % 2) {
            for (double& b : model.state.bias) b = g.uniform(0.0, 0.05);
        }
        const auto batch = desk.source.draw(tcfg.batch, rng);
        const auto analytic = gate_gradient(batch, model);
        const auto check = oracle::check_gate_gradient(batch, model, analytic.grad_w, 1e-4, oracle::Assignments::kFrozen);
        frozen = std::max(frozen, check.max_rel_error);
        entries += check.entries;
        recomputed_small = std::max(
            recomputed_small,
            oracle::check_gate_gradient(batch, model, analytic.grad_w, 1e-6, oracle::Assignments::kRecomputed)
                .max_rel_error);
        recomputed_coarse = std::max(
            recomputed_coarse,
            oracle::check_gate_gradient(batch, model, analytic.grad_w, 1e-4, oracle::Assignments::kRecomputed)
                .max_rel_error);
    }
    const double elapsed = seconds_since(start);
    return {frozen < 1e-4 && recomputed_small < 1e-4 && elapsed < 60.0,
            std::to_string(instances) + " instances, " + std::to_string(entries) +
                " entries, max relative error " + fmt(frozen) + " (eps 1e-4, assignments frozen), " +
                fmt(recomputed_small) + " (eps 1e-6, recomputed), " + fmt(recomputed_coarse) +
                " (eps 1e-4, recomputed, not required), " + fmt(elapsed) + " s"};
}

Outcome drps_semantics() {
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };
    // gamma 0.01, loads [0, 50, 10] (mean 20), threshold 2, b [0, .03, .01] -> [0.01, 0, 0.01].
    GateState s = GateState::zeros(3);
    s.load = {0, 50, 10};
    s.bias = {0.0, 0.03, 0.01};
    s.steps_in_window = 30;
    const GateState a = drps_update(s, 0.01, 2.0);
    expect(a.bias[0] == 0.0 + 0.01, "dead quantizer gains gamma");
    expect(a.bias[1] == 0.0, "overloaded quantizer resets to 0");
    expect(a.bias[2] == 0.01, "middle quantizer unchanged");
    expect(a.load == std::vector<std::uint64_t>{0, 0, 0} && a.steps_in_window == 0, "loads reset");

    // Equal loads: nothing above the mean, nothing dead.
    GateState e = GateState::zeros(4);
    e.load = {7, 7, 7, 7};
    e.bias = {0.02, 0.0, 0.05, 0.01};
    expect(drps_update(e, 0.01, 1.0).bias == e.bias, "equal loads leave bias unchanged");

    // Accumulated dead bias keeps growing, an overloaded one drops to exactly zero.
    GateState c = GateState::zeros(4);
    c.load = {1, 0, 30, 9};
    c.bias = {0.25, 0.5, 0.75, 0.125};
    const GateState cb = drps_update(c, 0.25, 2.0);
    expect(cb.bias == std::vector<double>{0.5, 0.75, 0.0, 0.125}, "mixed branches");

    bool rejected = false;
    try {
        drps_update(s, -0.01, 2.0);
    } catch (const ContractViolation&) {
        rejected = true;
    }
    expect(rejected, "negative gamma rejected");

    std::string detail = "4 hand-built cases";
    for (const auto& f : failures) detail += "; failed: " + f;
    return {failures.empty(), detail};
}

Outcome usage_trend(const Desk& desk) {
    const auto start = Clock::now();
    const auto& routed = desk.cfg.sweep.routed_values;
    const auto off = usage_sweep(routed, false, 0.0, desk.source, desk.cfg.model, desk.cfg.train, desk.options);
    const std::vector<std::size_t> eight{8};
    const auto on =
        usage_sweep(eight, true, desk.cfg.sweep.drps_gamma, desk.source, desk.cfg.model, desk.cfg.train, desk.options);
    bool monotone = true;
    std::string detail = "DRPS off";
    double off8 = -1.0;
    for (std::size_t i = 0; i < off.size(); ++i) {
        detail += " N_r=" + std::to_string(off[i].routed) + ":" + fmt(off[i].ever_used_fraction);
        if (i > 0 && off[i].ever_used_fraction > off[i - 1].ever_used_fraction) monotone = false;
        if (off[i].routed == 8) off8 = off[i].ever_used_fraction;
    }
    const double on8 = on[0].ever_used_fraction;
    const double elapsed = seconds_since(start);
    detail += "; DRPS on N_r=8:" + fmt(on8) + "; " + std::to_string(desk.options.replicates) +
              " paired seeds; " + fmt(elapsed) + " s";
    return {monotone && on8 >= off8 && elapsed < 600.0, detail};
}

Outcome gamma_trend(const Desk& desk) {
    const std::vector<double> gammas{0.01, 0.1};
    const auto rows = gamma_sweep(gammas, desk.source, desk.cfg.model, desk.cfg.train, desk.options);
    return {rows[0].final_loss <= rows[1].final_loss,
            "held-out loss gamma=0.01: " + fmt(rows[0].final_loss) + ", gamma=0.1: " + fmt(rows[1].final_loss) +
                " (" + std::to_string(desk.options.replicates) + " paired seeds)"};
}

Outcome fixed_vs_adaptive_trend(const Desk& desk) {
    const auto start = Clock::now();
    RevqConfig fixed = desk.cfg.model;
    fixed.routed = fixed.active;
    const auto r = fixed_vs_adaptive(desk.source, fixed, desk.cfg.model, desk.cfg.train);
    const double elapsed = seconds_since(start);
    return {r.revq.median < r.fixed.median && elapsed < 600.0,
            std::to_string(desk.source.modes()) + " clusters, median MSE REVQ " + fmt(r.revq.median) + " vs fixed " +
                fmt(r.fixed.median) + " (means " + fmt(r.revq.mean) + " vs " + fmt(r.fixed.mean) + "), " +
                fmt(elapsed) + " s"};
}

Outcome combinatorics() {
    RevqConfig cfg;
    cfg.shared = 1;
    cfg.routed = 8;
    cfg.active = 2;
    const auto s = expansion_stats(cfg);
    return {s.combinations == 28 && s.space_factor() == 3.0,
            "combinations " + std::to_string(s.combinations) + ", space factor " +
                std::to_string(s.space_numerator) + "/" + std::to_string(s.space_denominator)};
}

Outcome bitstream_exactness() {
    oracle::Gen g(202);
    std::size_t failures = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const RevqConfig cfg = oracle::random_cfg(g);
        std::vector<EncodedWindow> windows;
        const std::size_t n = g.index(1, 6);
        for (std::size_t w = 0; w < n; ++w) windows.push_back(oracle::random_window(g, cfg, g.index(1, 40)));
        const auto bytes = pack(windows, cfg);
        const auto back = unpack(bytes);
        const auto stats = measure_stream(bytes);
        const auto counted = oracle::count_bits(bytes);
        const bool ok = back.cfg == cfg && back.windows == windows && stats.mask_bits == n * cfg.routed &&
                        counted.mask_bits == n * cfg.routed && counted.windows == n;
        if (!ok) ++failures;
    }
    const double bps = overhead_bps(1, 8, 2.0);
    return {failures == 0 && bps == 4.0,
            "500 streams, failures " + std::to_string(failures) + ", overhead " + fmt(bps) + " bps"};
}

Outcome tier_partition_check() {
    oracle::Gen g(303);
    bool ok = true;
    for (const auto& spec : default_tier_specs()) {
        const Matrix ch = g.matrix(spec.fft_bins, 3);
        const auto tiers = tier_partition(ch, spec.period);
        std::vector<int> seen(spec.fft_bins, 0);
        for (std::size_t t = 0; t < tiers.size(); ++t) {
            ok = ok && tiers[t].rows() == 128;
            for (std::size_t r = 0; r < tiers[t].rows(); ++r) ++seen[t + r * spec.period];
        }
        ok = ok && std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
        const auto idx = tier_source_indices(spec.fft_bins, spec.period);
        std::vector<int> hits(spec.fft_bins, 0);
        for (auto i : idx) ++hits[i];
        ok = ok && std::all_of(hits.begin(), hits.end(), [](int c) { return c == 1; });
        ok = ok && interleave_tiers(tiers) == ch;
    }
    return {ok, "(256,2) (512,4) (1024,8): tier length 128, disjoint cover, interleave identity"};
}

Outcome mtsd_shapes() {
    oracle::Gen g(404);
    const auto audio = g.vec(16384, 0.3);
    const auto weights = MtsdWeights::init(default_tier_specs(), 7);
    const auto out = mtsd_forward(audio, weights);
    const std::vector<std::size_t> expected{32, 64, 128, 256, 1};
    bool ok = out.size() == 3;
    std::string detail;
    for (const auto& sub : out) {
        std::vector<std::size_t> channels;
        for (const auto& f : sub.features) channels.push_back(f.channels);
        ok = ok && channels == expected;
        detail += detail.empty() ? "[" : " [";
        for (std::size_t i = 0; i < channels.size(); ++i) detail += (i ? "," : "") + std::to_string(channels[i]);
        detail += "]";
    }
    return {ok, detail};
}

Outcome cli_determinism(const std::string& binary) {
    const auto start = Clock::now();
    const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
        {"train -o model.rvqm", {"model.rvqm", "model.rvqm.log.csv"}},
        {"synth -o z.lat -n 8", {"z.lat"}},
        {"encode -m model.rvqm -i z.lat -o s.rvqb --recon r.lat --frame-rate 50 --json", {"s.rvqb", "r.lat"}},
        {"decode -m model.rvqm -i s.rvqb -o d.lat", {"d.lat"}},
        {"inspect model.rvqm", {}},
        {"inspect s.rvqb", {}},
        {"sweep usage -o usage", {"usage/usage_drps_off.csv", "usage/usage_drps_on.csv"}},
        {"sweep gamma -o gamma", {"gamma/gamma.csv"}},
        {"sweep fixed-vs-adaptive -o fva", {"fva/fixed_vs_adaptive.csv", "fva/window_errors.csv"}},
        {"spectral -i a.f32 -o sp", {"sp/tiers_256_2.bin", "sp/tiers_512_4.bin", "sp/tiers_1024_8.bin"}},
    };
    cli::Sandbox first(binary, "accept_a"), second(binary, "accept_b");
    oracle::Gen g(505);
    std::vector<float> audio(12000);
    for (float& v : audio) v = static_cast<float>(g.normal(0.0, 0.3));
    for (const cli::Sandbox* box : {&first, &second}) {
        std::ofstream out(box->path("a.f32"), std::ios::binary);
        out.write(reinterpret_cast<const char*>(audio.data()), static_cast<std::streamsize>(audio.size() * 4));
    }
    // Paths inside each sandbox are relative to its directory.
    auto rewrite = [](const cli::Sandbox& box, const std::string& cmd) {
        std::istringstream words(cmd);
        std::string word, out;
        bool first_word = true;
        while (words >> word) {
            if (!first_word) out += ' ';
            first_word = false;
            const bool is_path = word.find('.') != std::string::npos || word == "usage" || word == "gamma" ||
                                 word == "fva" || word == "sp";
            const bool is_flag = word[0] == '-';
            const bool is_number = std::all_of(word.begin(), word.end(), [](char c) { return std::isdigit(c); });
            const bool is_kind = out.ends_with("sweep ");
            out += (is_path && !is_flag && !is_number && !is_kind) ? box.arg(word) : word;
        }
        return out;
    };
    std::vector<std::string> failures;
    for (const auto& [cmd, files] : commands) {
        const auto a = first.run(rewrite(first, cmd));
        const auto b = second.run(rewrite(second, cmd));
        bool same = a.code == 0 && b.code == 0 && a.out == b.out;
        for (const auto& f : files) {
            const auto fa = cli::bytes_of(first.path(f));
            same = same && !fa.empty() && fa == cli::bytes_of(second.path(f));
        }
        if (!same) failures.push_back(cmd.substr(0, cmd.find(" -")) + " (exit " + std::to_string(a.code) + "/" +
                                      std::to_string(b.code) + ")");
    }
    std::string detail = std::to_string(commands.size()) + " commands run twice, " + fmt(seconds_since(start)) + " s";
    for (const auto& f : failures) detail += "; differs: " + f;
    return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: acceptance <path-to-revq>\n";
        return 2;
    }
    const Desk desk;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"routing math matches loop/sort oracles", routing_oracles},
        {"straight-through gradient matches finite differences", [&] { return gradient_check(desk); }},
        {"DRPS update branches", drps_semantics},
        {"usage collapse without DRPS, recovery with DRPS", [&] { return usage_trend(desk); }},
        {"gamma 0.01 reconstructs no worse than gamma 0.1", [&] { return gamma_trend(desk); }},
        {"adaptive routing beats fixed RVQ on clustered latents", [&] { return fixed_vs_adaptive_trend(desk); }},
        {"selection combinatorics", combinatorics},
        {"bitstream roundtrip and overhead", bitstream_exactness},
        {"tier partition", tier_partition_check},
        {"discriminator channel progression", mtsd_shapes},
        {"CLI determinism", [&] { return cli_determinism(argv[1]); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %2zu: %s  %s -- %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
