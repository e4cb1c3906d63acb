#pragma once

// ".rvqb" container.
//
//   header   "RVQB" | u16 version | u32 D | u32 N_r | u32 K_r | u32 n_shared
//            | u32 C | u32 window_frames | u32 window_count        (LE)
//   window   u32 T | bit payload, byte-aligned per window
//   payload  N_r mask bits, then (n_shared + K_r) * T code indices of
//            ceil(log2 C) bits each, all MSB-first. Code order is stage-major:
//            shared stages first, then routed stages in ascending quantizer
//            index, each contributing T consecutive frames.

#include <cstdint>
#include <span>
#include <vector>

#include "switchcodec/revq.hpp"

namespace switchcodec {

inline constexpr std::uint16_t kBitstreamVersion = 1;
inline constexpr std::size_t kBitstreamHeaderBytes = 4 + 2 + 7 * 4;

// MSB-first bit packer.
class BitWriter {
public:
    void put(std::uint32_t value, unsigned bits);
    // Zero-pads to the next byte boundary.
    void align();
    std::size_t bit_count() const noexcept { return bit_count_; }
    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
    std::vector<std::uint8_t> take() noexcept { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t bit_count_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    std::uint32_t get(unsigned bits);
    std::size_t bits_remaining() const noexcept { return bytes_.size() * 8 - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

// ceil(log2 C); throws unless C is a power of two.
unsigned code_bits(std::size_t codebook_size);

// Unpadded payload size of one window.
std::size_t window_payload_bits(const RevqConfig& cfg, std::size_t frames);

std::vector<std::uint8_t> pack(std::span<const EncodedWindow> windows, const RevqConfig& cfg);

struct UnpackedStream {
    RevqConfig cfg;
    std::vector<EncodedWindow> windows;
};

// Throws FormatError (bad magic/version/header), TruncationError (names the
// window) or IntegrityError (mask popcount).
UnpackedStream unpack(std::span<const std::uint8_t> bytes);

// Bit accounting measured from an encoded stream.
struct StreamStats {
    std::size_t windows = 0;
    std::size_t frames = 0;
    std::size_t mask_bits = 0;
    std::size_t code_bits = 0;
    std::size_t padding_bits = 0;
    std::size_t window_header_bits = 0;  // the per-window T fields
    std::size_t stream_header_bits = 0;
    std::size_t total_bits = 0;
};

StreamStats measure_stream(std::span<const std::uint8_t> bytes);

// Routing-mask side information in bits per second.
double overhead_bps(std::size_t n_windows, std::size_t routed, double duration_s);

}  // namespace switchcodec
