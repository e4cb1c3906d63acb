#include "switchcodec/bitstream.hpp"

#include <bit>
#include <string>

#include "switchcodec/byte_io.hpp"

namespace switchcodec {

namespace {

constexpr std::string_view kStreamMagic = "RVQB";

std::uint32_t to_u32(std::size_t v, const char* what) {
    if (v > UINT32_MAX) throw ContractViolation(std::string(what) + " does not fit in 32 bits");
    return static_cast<std::uint32_t>(v);
}

struct Header {
    RevqConfig cfg;
    std::uint32_t window_count = 0;
};

Header read_header(ByteReader& in) {
    if (in.remaining() < 4 || in.get_bytes(4) != kStreamMagic) {
        throw FormatError("bad stream magic (expected RVQB)");
    }
    if (in.remaining() < kBitstreamHeaderBytes - 4) throw FormatError("stream header truncated");
    const std::uint16_t version = in.get_u16();
    if (version != kBitstreamVersion) {
        throw FormatError("unsupported stream version " + std::to_string(version));
    }
    Header h;
    h.cfg.dim = in.get_u32();
    h.cfg.routed = in.get_u32();
    h.cfg.active = in.get_u32();
    h.cfg.shared = in.get_u32();
    h.cfg.codebook_size = in.get_u32();
    h.cfg.window_frames = in.get_u32();
    h.window_count = in.get_u32();
    try {
        h.cfg.validate();
        code_bits(h.cfg.codebook_size);
    } catch (const ContractViolation& e) {
        throw FormatError(std::string("stream header carries an invalid configuration: ") + e.what());
    }
    return h;
}

void check_window(const EncodedWindow& w, const RevqConfig& cfg, std::size_t index) {
    const std::string where = "window " + std::to_string(index) + ": ";
    if (w.mask.size() != cfg.routed) throw ContractViolation(where + "mask length differs from N_r");
    std::size_t ones = 0;
    for (std::uint8_t b : w.mask) {
        if (b > 1) throw ContractViolation(where + "mask entries must be 0 or 1");
        ones += b;
    }
    if (ones != cfg.active) {
        throw ContractViolation(where + "mask popcount " + std::to_string(ones) + " differs from K_r " +
                                std::to_string(cfg.active));
    }
    if (w.shared_codes.size() != cfg.shared || w.routed_codes.size() != cfg.active) {
        throw ContractViolation(where + "wrong number of code stages");
    }
    const std::size_t frames = w.frame_count();
    if (frames == 0) throw ContractViolation(where + "window has no frames");
    auto check_stage = [&](const std::vector<std::uint32_t>& codes) {
        if (codes.size() != frames) throw ContractViolation(where + "ragged code arrays");
        for (std::uint32_t c : codes) {
            if (c >= cfg.codebook_size) {
                throw ContractViolation(where + "code index " + std::to_string(c) + " >= C (" +
                                        std::to_string(cfg.codebook_size) + ")");
            }
        }
    };
    for (const auto& s : w.shared_codes) check_stage(s);
    for (const auto& s : w.routed_codes) check_stage(s);
}

}  // namespace

void BitWriter::put(std::uint32_t value, unsigned bits) {
    for (unsigned i = bits; i-- > 0;) {
        if (bit_count_ % 8 == 0) bytes_.push_back(0);
        if ((value >> i) & 1u) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bit_count_ % 8));
        ++bit_count_;
    }
}

void BitWriter::align() { bit_count_ = bytes_.size() * 8; }

std::uint32_t BitReader::get(unsigned bits) {
    if (bits > bits_remaining()) throw FormatError("bit payload truncated");
    std::uint32_t v = 0;
    for (unsigned i = 0; i < bits; ++i, ++pos_) {
        v = (v << 1) | ((bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u);
    }
    return v;
}

unsigned code_bits(std::size_t codebook_size) {
    if (codebook_size == 0 || !std::has_single_bit(codebook_size)) {
        throw ContractViolation("codebook size C = " + std::to_string(codebook_size) +
                                " must be a power of two for bit packing");
    }
    return static_cast<unsigned>(std::countr_zero(codebook_size));
}

std::size_t window_payload_bits(const RevqConfig& cfg, std::size_t frames) {
    return cfg.routed + (cfg.shared + cfg.active) * frames * code_bits(cfg.codebook_size);
}

std::vector<std::uint8_t> pack(std::span<const EncodedWindow> windows, const RevqConfig& cfg) {
    cfg.validate();
    const unsigned bits = code_bits(cfg.codebook_size);
    ByteWriter out;
    out.put_bytes(kStreamMagic);
    out.put_u16(kBitstreamVersion);
    out.put_u32(to_u32(cfg.dim, "D"));
    out.put_u32(to_u32(cfg.routed, "N_r"));
    out.put_u32(to_u32(cfg.active, "K_r"));
    out.put_u32(to_u32(cfg.shared, "n_shared"));
    out.put_u32(to_u32(cfg.codebook_size, "C"));
    out.put_u32(to_u32(cfg.window_frames, "window_frames"));
    out.put_u32(to_u32(windows.size(), "window count"));

    for (std::size_t index = 0; index < windows.size(); ++index) {
        const EncodedWindow& w = windows[index];
        check_window(w, cfg, index);
        out.put_u32(to_u32(w.frame_count(), "T"));
        BitWriter payload;
        for (std::uint8_t b : w.mask) payload.put(b, 1);
        for (const auto& stage : w.shared_codes) {
            for (std::uint32_t c : stage) payload.put(c, bits);
        }
        for (const auto& stage : w.routed_codes) {
            for (std::uint32_t c : stage) payload.put(c, bits);
        }
        payload.align();
        out.append(payload.bytes());
    }
    return out.take();
}

UnpackedStream unpack(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    const Header header = read_header(in);
    const RevqConfig& cfg = header.cfg;
    const unsigned bits = code_bits(cfg.codebook_size);

    UnpackedStream out;
    out.cfg = cfg;
    out.windows.reserve(header.window_count);
    for (std::size_t index = 0; index < header.window_count; ++index) {
        const std::string where = "window " + std::to_string(index);
        if (in.remaining() < 4) throw TruncationError(index, "stream truncated in " + where + " (frame count)");
        const std::uint32_t frames = in.get_u32();
        if (frames == 0) throw FormatError(where + " declares zero frames");
        const std::size_t payload_bits = window_payload_bits(cfg, frames);
        const std::size_t payload_bytes = (payload_bits + 7) / 8;
        if (in.remaining() < payload_bytes) {
            throw TruncationError(index, "stream truncated in " + where + ": need " +
                                             std::to_string(payload_bytes) + " payload bytes, have " +
                                             std::to_string(in.remaining()));
        }
        BitReader payload(in.get_span(payload_bytes));
        EncodedWindow w;
        w.mask.resize(cfg.routed);
        std::size_t ones = 0;
        for (auto& b : w.mask) {
            b = static_cast<std::uint8_t>(payload.get(1));
            ones += b;
        }
        if (ones != cfg.active) {
            throw IntegrityError(where + ": mask popcount " + std::to_string(ones) + " differs from K_r " +
                                 std::to_string(cfg.active));
        }
        auto read_stage = [&] {
            std::vector<std::uint32_t> codes(frames);
            for (auto& c : codes) c = payload.get(bits);
            return codes;
        };
        for (std::size_t s = 0; s < cfg.shared; ++s) w.shared_codes.push_back(read_stage());
        for (std::size_t k = 0; k < cfg.active; ++k) w.routed_codes.push_back(read_stage());
        out.windows.push_back(std::move(w));
    }
    if (!in.at_end()) throw FormatError("trailing bytes after the last window");
    return out;
}

StreamStats measure_stream(std::span<const std::uint8_t> bytes) {
    // Walks the layout independently of unpack so the two can cross-check.
    ByteReader in(bytes);
    const Header header = read_header(in);
    const unsigned bits = code_bits(header.cfg.codebook_size);
    StreamStats stats;
    stats.stream_header_bits = kBitstreamHeaderBytes * 8;
    for (std::size_t index = 0; index < header.window_count; ++index) {
        if (in.remaining() < 4) throw TruncationError(index, "stream truncated");
        const std::uint32_t frames = in.get_u32();
        const std::size_t mask = header.cfg.routed;
        const std::size_t codes = (header.cfg.shared + header.cfg.active) * frames * bits;
        const std::size_t padded = (mask + codes + 7) / 8 * 8;
        if (in.remaining() * 8 < padded) throw TruncationError(index, "stream truncated");
        in.get_span(padded / 8);
        stats.windows += 1;
        stats.frames += frames;
        stats.mask_bits += mask;
        stats.code_bits += codes;
        stats.padding_bits += padded - mask - codes;
        stats.window_header_bits += 32;
    }
    stats.total_bits = bytes.size() * 8;
    return stats;
}

double overhead_bps(std::size_t n_windows, std::size_t routed, double duration_s) {
    if (!(duration_s > 0.0)) throw ContractViolation("overhead_bps: duration must be positive");
    return static_cast<double>(n_windows) * static_cast<double>(routed) / duration_s;
}

}  // namespace switchcodec
