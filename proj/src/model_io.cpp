#include "switchcodec/model_io.hpp"

#include <cmath>

#include "switchcodec/byte_io.hpp"
#include "switchcodec/error.hpp"

namespace switchcodec {

namespace {

constexpr std::string_view kModelMagic = "RVQM";
constexpr std::uint32_t kFlagNormalized = 1u << 0;
constexpr std::uint32_t kFlagFixed = 1u << 1;

std::uint32_t narrow(std::size_t v, const char* what) {
    if (v > 0xffffffffu) throw ContractViolation(std::string(what) + " does not fit in 32 bits");
    return static_cast<std::uint32_t>(v);
}

double read_finite(ByteReader& in, const char* what) {
    const double v = in.get_f32();
    if (!std::isfinite(v)) throw FormatError(std::string(what) + " contains a non-finite value");
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
    const RevqConfig& cfg = model.cfg;
    cfg.validate();
    model.bank.validate(cfg);
    if (model.gate.dim() != cfg.dim || model.gate.routed() != cfg.routed || model.state.bias.size() != cfg.routed) {
        throw ContractViolation("serialize_model: gate shape does not match configuration");
    }
    ByteWriter out;
    out.put_bytes(kModelMagic);
    out.put_u32(kModelFormatVersion);
    out.put_u32(narrow(cfg.dim, "D"));
    out.put_u32(narrow(cfg.routed, "N_r"));
    out.put_u32(narrow(cfg.active, "K_r"));
    out.put_u32(narrow(cfg.shared, "n_shared"));
    out.put_u32(narrow(cfg.codebook_size, "C"));
    out.put_u32(narrow(cfg.window_frames, "window_frames"));
    std::uint32_t flags = 0;
    if (cfg.distance == DistanceMode::kNormalized) flags |= kFlagNormalized;
    if (model.mode == RoutingMode::kFixedRvq) flags |= kFlagFixed;
    out.put_u32(flags);
    for (const auto& cb : model.bank.shared) append_codebook(out, cb);
    for (const auto& cb : model.bank.routed) append_codebook(out, cb);
    out.put_u32(narrow(cfg.routed, "N_r"));
    out.put_u32(narrow(cfg.active, "K_r"));
    for (double v : model.gate.w.values()) out.put_f32(static_cast<float>(v));
    for (double b : model.state.bias) out.put_f32(static_cast<float>(b));
    return out.take();
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    if (in.get_bytes(4) != kModelMagic) throw FormatError("bad model magic (expected RVQM)");
    const std::uint32_t version = in.get_u32();
    if (version != kModelFormatVersion) {
        throw FormatError("unsupported model format version " + std::to_string(version));
    }
    Model model;
    RevqConfig& cfg = model.cfg;
    cfg.dim = in.get_u32();
    cfg.routed = in.get_u32();
    cfg.active = in.get_u32();
    cfg.shared = in.get_u32();
    cfg.codebook_size = in.get_u32();
    cfg.window_frames = in.get_u32();
    const std::uint32_t flags = in.get_u32();
    if (flags & ~(kFlagNormalized | kFlagFixed)) throw FormatError("model header has unknown flag bits");
    cfg.distance = (flags & kFlagNormalized) ? DistanceMode::kNormalized : DistanceMode::kRaw;
    model.mode = (flags & kFlagFixed) ? RoutingMode::kFixedRvq : RoutingMode::kRevq;
    try {
        cfg.validate();
    } catch (const ContractViolation& e) {
        throw FormatError(std::string("model header: ") + e.what());
    }
    for (std::size_t s = 0; s < cfg.shared; ++s) model.bank.shared.push_back(read_codebook(in));
    for (std::size_t q = 0; q < cfg.routed; ++q) model.bank.routed.push_back(read_codebook(in));
    try {
        model.bank.validate(cfg);
    } catch (const ContractViolation& e) {
        throw FormatError(std::string("model codebooks: ") + e.what());
    }
    if (in.get_u32() != cfg.routed || in.get_u32() != cfg.active) {
        throw FormatError("model gate block disagrees with header N_r/K_r");
    }
    model.gate.active = cfg.active;
    model.gate.w = Matrix(cfg.dim, cfg.routed);
    for (double& v : model.gate.w.values()) v = read_finite(in, "gate weights");
    model.state = GateState::zeros(cfg.routed);
    for (double& b : model.state.bias) b = read_finite(in, "gate bias");
    if (!in.at_end()) throw FormatError("model file has " + std::to_string(in.remaining()) + " trailing bytes");
    return model;
}

void save_model(const std::string& path, const Model& model) { write_file(path, serialize_model(model)); }

Model load_model(const std::string& path) { return deserialize_model(read_file(path)); }

std::vector<std::uint8_t> serialize_latents(const Matrix& latents) {
    ByteWriter out;
    out.put_u32(narrow(latents.rows(), "D"));
    out.put_u32(narrow(latents.cols(), "T_total"));
    for (double v : latents.values()) out.put_f32(static_cast<float>(v));
    return out.take();
}

Matrix deserialize_latents(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    const std::size_t dim = in.get_u32();
    const std::size_t total = in.get_u32();
    if (dim == 0 || total == 0) throw FormatError("latents file declares an empty matrix");
    if (in.remaining() != dim * total * 4) {
        throw FormatError("latents file holds " + std::to_string(in.remaining()) + " payload bytes, header implies " +
                          std::to_string(dim * total * 4));
    }
    Matrix out(dim, total);
    for (double& v : out.values()) v = read_finite(in, "latents");
    return out;
}

void save_latents(const std::string& path, const Matrix& latents) { write_file(path, serialize_latents(latents)); }

Matrix load_latents(const std::string& path) { return deserialize_latents(read_file(path)); }

std::vector<double> load_raw_audio(const std::string& path) {
    const auto bytes = read_file(path);
    if (bytes.size() % 4 != 0) throw FormatError("raw audio size is not a multiple of 4 bytes");
    if (bytes.empty()) throw FormatError("raw audio file is empty");
    ByteReader in(bytes);
    std::vector<double> out(bytes.size() / 4);
    for (double& v : out) v = read_finite(in, "audio");
    return out;
}

std::vector<std::uint8_t> serialize_tier_dump(const TierSpec& spec, const Tensor3& input) {
    if (input.channels != spec.tier_len() || input.height != spec.period || input.width % 2 != 0) {
        throw ContractViolation("serialize_tier_dump: tensor shape does not match the tier spec");
    }
    ByteWriter out;
    out.put_u32(narrow(spec.fft_bins, "f"));
    out.put_u32(narrow(spec.period, "p"));
    out.put_u32(narrow(input.width / 2, "T_s"));
    for (std::size_t tier = 0; tier < input.height; ++tier) {
        for (std::size_t row = 0; row < input.channels; ++row) {
            for (std::size_t w = 0; w < input.width; ++w) out.put_f32(static_cast<float>(input.at(row, tier, w)));
        }
    }
    return out.take();
}

}  // namespace switchcodec
