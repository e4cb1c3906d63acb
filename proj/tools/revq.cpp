#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "switchcodec/bitstream.hpp"
#include "switchcodec/byte_io.hpp"
#include "switchcodec/config.hpp"
#include "switchcodec/error.hpp"
#include "switchcodec/eval.hpp"
#include "switchcodec/model_io.hpp"
#include "switchcodec/spectral.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace switchcodec;

namespace {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfig = 2,
    kData = 3,
    kNumerical = 4,
};

struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("-c,--config", args.path, "Config file (TOML subset)");
    cmd->add_option("--set", args.overrides, "Override a config value, e.g. --set train.steps=100")
        ->allow_extra_args(false);
}

CliConfig resolve_config(const ConfigArgs& args, const std::optional<std::uint64_t>& seed) {
    CliConfig cfg = args.path.empty() ? CliConfig::defaults() : load_config(args.path);
    for (const auto& o : args.overrides) cfg.apply_override(o);
    if (seed) cfg.train.seed = *seed;
    cfg.validate();
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

template <typename Fn>
void write_csv(const fs::path& path, Fn&& fn) {
    std::ostringstream out;
    fn(out);
    write_text(path.string(), out.str());
}

std::string magic_of(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) return {};
    return std::string(reinterpret_cast<const char*>(bytes.data()), 4);
}

json config_json(const RevqConfig& cfg) {
    return json{{"dim", cfg.dim},
                {"routed", cfg.routed},
                {"active", cfg.active},
                {"shared", cfg.shared},
                {"codebook_size", cfg.codebook_size},
                {"window_frames", cfg.window_frames},
                {"distance", cfg.distance == DistanceMode::kRaw ? "raw" : "normalized"}};
}

json stream_json(const StreamStats& s) {
    return json{{"windows", s.windows},
                {"frames", s.frames},
                {"mask_bits", s.mask_bits},
                {"code_bits", s.code_bits},
                {"padding_bits", s.padding_bits},
                {"window_header_bits", s.window_header_bits},
                {"stream_header_bits", s.stream_header_bits},
                {"total_bits", s.total_bits}};
}

int cmd_train(const CliConfig& cfg, const std::string& out_path, std::string log_path) {
    if (log_path.empty()) log_path = out_path + ".log.csv";
    const TrainResult result = train_run(cfg.data.source(cfg.model.dim), cfg.model, cfg.train);
    save_model(out_path, result.model);
    write_text(log_path, result.log.to_csv());
    const auto& last = result.log.rows.back();
    std::cerr << "trained " << result.log.rows.size() << " steps, final loss_recon " << format_number(last.loss_recon)
              << ", model " << out_path << ", log " << log_path << "\n";
    return kOk;
}

int cmd_synth(const CliConfig& cfg, const std::string& out_path, std::size_t windows) {
    const SyntheticLatentSource source = cfg.data.source(cfg.model.dim);
    Rng rng(cfg.data.seed ^ 0x6a09e667f3bcc909ULL);
    const auto drawn = source.draw(windows, rng);
    const Matrix latents = join_windows(drawn);
    save_latents(out_path, latents);
    std::cerr << "wrote " << latents.rows() << " x " << latents.cols() << " latents to " << out_path << "\n";
    return kOk;
}

int cmd_encode(const std::string& model_path, const std::string& in_path, const std::string& out_path,
               const std::string& recon_path, std::optional<double> frame_rate, bool as_json) {
    Model model = load_model(model_path);
    const Matrix latents = load_latents(in_path);
    if (latents.rows() != model.cfg.dim) {
        throw FormatError("latents have D = " + std::to_string(latents.rows()) + " but the model expects D = " +
                          std::to_string(model.cfg.dim));
    }
    if (frame_rate && !(*frame_rate > 0.0)) throw ContractViolation("--frame-rate must be > 0");
    const auto windows = split_windows(latents, model.cfg.window_frames);
    std::vector<EncodedWindow> encoded;
    std::vector<Matrix> recon;
    for (const auto& w : windows) {
        const auto selected = select_routed(model, w, false);
        EncodeResult r = encode_selected(w, model.bank, model.cfg, selected);
        encoded.push_back(std::move(r.encoded));
        recon.push_back(std::move(r.reconstruction));
    }
    const auto bytes = pack(encoded, model.cfg);
    write_file(out_path, bytes);
    if (!recon_path.empty()) save_latents(recon_path, join_frames(recon));

    const StreamStats stats = measure_stream(bytes);
    json report = stream_json(stats);
    std::cerr << "windows " << stats.windows << ", frames " << stats.frames << "\n"
              << "code bits " << stats.code_bits << "\n"
              << "mask bits " << stats.mask_bits << "\n"
              << "padding bits " << stats.padding_bits << "\n"
              << "total bits " << stats.total_bits << "\n";
    if (frame_rate) {
        const double duration = static_cast<double>(stats.frames) / *frame_rate;
        const double overhead = overhead_bps(stats.windows, model.cfg.routed, duration);
        const double code_bps = static_cast<double>(stats.code_bits) / duration;
        report["duration_s"] = duration;
        report["overhead_bps"] = overhead;
        report["code_bps"] = code_bps;
        std::cerr << "duration " << format_number(duration) << " s\n"
                  << "overhead " << format_number(overhead) << " bps\n"
                  << "code rate " << format_number(code_bps) << " bps\n";
    }
    if (as_json) std::cout << report.dump(2) << "\n";
    return kOk;
}

int cmd_decode(const std::string& model_path, const std::string& in_path, const std::string& out_path) {
    const Model model = load_model(model_path);
    const UnpackedStream stream = unpack(read_file(in_path));
    RevqConfig expected = model.cfg;
    expected.distance = stream.cfg.distance;
    if (!(stream.cfg == expected)) {
        throw FormatError("stream header does not match the model configuration");
    }
    std::vector<Matrix> blocks;
    for (const auto& w : stream.windows) blocks.push_back(revq_decode(w, model.bank, model.cfg));
    save_latents(out_path, join_frames(blocks));
    std::cerr << "decoded " << stream.windows.size() << " windows to " << out_path << "\n";
    return kOk;
}

int cmd_sweep(const CliConfig& cfg, const std::string& kind, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const SyntheticLatentSource source = cfg.data.source(cfg.model.dim);
    const SweepOptions options{cfg.sweep.replicates, cfg.sweep.jobs};
    if (kind == "usage") {
        const auto off = usage_sweep(cfg.sweep.routed_values, false, 0.0, source, cfg.model, cfg.train, options);
        const auto on =
            usage_sweep(cfg.sweep.routed_values, true, cfg.sweep.drps_gamma, source, cfg.model, cfg.train, options);
        write_csv(out_dir / "usage_drps_off.csv", [&](std::ostream& o) { write_usage_csv(o, off, false); });
        write_csv(out_dir / "usage_drps_on.csv", [&](std::ostream& o) { write_usage_csv(o, on, true); });
    } else if (kind == "gamma") {
        const auto rows = gamma_sweep(cfg.sweep.gammas, source, cfg.model, cfg.train, options);
        write_csv(out_dir / "gamma.csv", [&](std::ostream& o) { write_gamma_csv(o, rows); });
    } else {
        RevqConfig fixed = cfg.model;
        fixed.routed = cfg.model.active;
        const auto result = fixed_vs_adaptive(source, fixed, cfg.model, cfg.train);
        write_csv(out_dir / "fixed_vs_adaptive.csv", [&](std::ostream& o) { write_fixed_vs_adaptive_csv(o, result); });
        write_csv(out_dir / "window_errors.csv", [&](std::ostream& o) { write_window_errors_csv(o, result); });
    }
    std::cerr << "wrote " << kind << " sweep to " << out_dir.string() << "\n";
    return kOk;
}

int cmd_inspect(const std::string& path) {
    const auto bytes = read_file(path);
    const std::string magic = magic_of(bytes);
    json out;
    if (magic == "RVQM") {
        const Model model = deserialize_model(bytes);
        const ExpansionStats ex = expansion_stats(model.cfg);
        out = {{"kind", "model"},
               {"mode", model.mode == RoutingMode::kRevq ? "revq" : "fixed"},
               {"config", config_json(model.cfg)},
               {"combinations", ex.combinations},
               {"space_factor", {{"numerator", ex.space_numerator}, {"denominator", ex.space_denominator}}},
               {"bias", model.state.bias}};
    } else if (magic == "RVQB") {
        const UnpackedStream stream = unpack(bytes);
        json masks = json::array();
        for (const auto& w : stream.windows) masks.push_back(w.selected());
        out = {{"kind", "bitstream"},
               {"config", config_json(stream.cfg)},
               {"stats", stream_json(measure_stream(bytes))},
               {"selected", masks}};
    } else if (magic == "RVQC") {
        const Codebook cb = deserialize_codebook(bytes);
        out = {{"kind", "codebook"}, {"size", cb.size()}, {"dim", cb.dim()}};
    } else {
        const Matrix latents = deserialize_latents(bytes);
        out = {{"kind", "latents"}, {"dim", latents.rows()}, {"frames", latents.cols()}};
    }
    std::cout << out.dump(2) << "\n";
    return kOk;
}

int cmd_spectral(const CliConfig& cfg, const std::string& in_path, const fs::path& out_dir) {
    const std::vector<double> audio = load_raw_audio(in_path);
    fs::create_directories(out_dir);
    const MtsdWeights weights = MtsdWeights::init(cfg.spectral.tiers, cfg.spectral.seed);
    const auto outputs = mtsd_forward(audio, weights, cfg.spectral.concat);
    json subs = json::array();
    for (std::size_t i = 0; i < cfg.spectral.tiers.size(); ++i) {
        const TierSpec& spec = cfg.spectral.tiers[i];
        const Tensor3 input = mtsd_input(audio, spec, ConcatMode::kTime);
        const std::string name = "tiers_" + std::to_string(spec.fft_bins) + "_" + std::to_string(spec.period) + ".bin";
        write_file((out_dir / name).string(), serialize_tier_dump(spec, input));
        json layers = json::array();
        for (const auto& f : outputs[i].features) layers.push_back({f.channels, f.height, f.width});
        subs.push_back({{"fft_bins", spec.fft_bins},
                        {"period", spec.period},
                        {"tier_len", spec.tier_len()},
                        {"frames", input.width / 2},
                        {"dump", name},
                        {"feature_shapes", layers}});
    }
    std::cout << json{{"samples", audio.size()}, {"sub_discriminators", subs}}.dump(2) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Residual quantization with routed codebooks"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "revq 0.1.0");
    std::optional<std::uint64_t> seed;
    app.add_option("--seed", seed, "Training seed (overrides train.seed)");

    ConfigArgs train_cfg, synth_cfg, sweep_cfg, spectral_cfg;
    std::string train_out, train_log;
    auto* train = app.add_subcommand("train", "Train a model on the synthetic latent source");
    add_config_options(train, train_cfg);
    train->add_option("-o,--out", train_out, "Model output path")->required();
    train->add_option("--log", train_log, "Training log CSV (default: <out>.log.csv)");

    std::string synth_out;
    std::size_t synth_windows = 16;
    auto* synth = app.add_subcommand("synth", "Write synthetic latents in the binary matrix format");
    add_config_options(synth, synth_cfg);
    synth->add_option("-o,--out", synth_out, "Latents output path")->required();
    synth->add_option("-n,--windows", synth_windows, "Number of utterances to draw")->check(CLI::PositiveNumber);

    std::string enc_model, enc_in, enc_out, enc_recon;
    std::optional<double> frame_rate;
    bool enc_json = false;
    auto* encode = app.add_subcommand("encode", "Encode latents into an .rvqb stream");
    encode->add_option("-m,--model", enc_model, "Model file")->required();
    encode->add_option("-i,--in", enc_in, "Latents file")->required();
    encode->add_option("-o,--out", enc_out, "Stream output path")->required();
    encode->add_option("--recon", enc_recon, "Also write the encoder-side reconstruction");
    encode->add_option("--frame-rate", frame_rate, "Latent frames per second, enables bps reporting");
    encode->add_flag("--json", enc_json, "Print the bit report as JSON on stdout");

    std::string dec_model, dec_in, dec_out;
    auto* decode = app.add_subcommand("decode", "Decode an .rvqb stream into latents");
    decode->add_option("-m,--model", dec_model, "Model file")->required();
    decode->add_option("-i,--in", dec_in, "Stream file")->required();
    decode->add_option("-o,--out", dec_out, "Latents output path")->required();

    std::string sweep_kind, sweep_out;
    std::optional<std::size_t> jobs;
    auto* sweep = app.add_subcommand("sweep", "Run an experiment sweep and write CSVs");
    add_config_options(sweep, sweep_cfg);
    sweep->add_option("kind", sweep_kind, "usage | gamma | fixed-vs-adaptive")
        ->required()
        ->check(CLI::IsMember({"usage", "gamma", "fixed-vs-adaptive"}));
    sweep->add_option("-o,--out-dir", sweep_out, "Output directory")->required();
    sweep->add_option("-j,--jobs", jobs, "Concurrent sweep cells")->check(CLI::PositiveNumber);

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "Describe a model, stream, codebook or latents file");
    inspect->add_option("file", inspect_path, "File to inspect")->required();

    std::string spec_in, spec_out;
    auto* spectral = app.add_subcommand("spectral", "Tier-partition audio and run the discriminator front end");
    add_config_options(spectral, spectral_cfg);
    spectral->add_option("-i,--in", spec_in, "Raw little-endian float32 audio")->required();
    spectral->add_option("-o,--out-dir", spec_out, "Output directory for tier dumps")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*train) return cmd_train(resolve_config(train_cfg, seed), train_out, train_log);
        if (*synth) return cmd_synth(resolve_config(synth_cfg, seed), synth_out, synth_windows);
        if (*encode) return cmd_encode(enc_model, enc_in, enc_out, enc_recon, frame_rate, enc_json);
        if (*decode) return cmd_decode(dec_model, dec_in, dec_out);
        if (*sweep) {
            CliConfig cfg = resolve_config(sweep_cfg, seed);
            if (jobs) cfg.sweep.jobs = *jobs;
            return cmd_sweep(cfg, sweep_kind, sweep_out);
        }
        if (*inspect) return cmd_inspect(inspect_path);
        if (*spectral) return cmd_spectral(resolve_config(spectral_cfg, seed), spec_in, spec_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ContractViolation& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kConfig;
    } catch (const FormatError& e) {
        std::cerr << "data format error: " << e.what() << "\n";
        return kData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kData;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
