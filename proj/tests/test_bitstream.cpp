#include <gtest/gtest.h>

#include "oracles.hpp"
#include "switchcodec/bitstream.hpp"
#include "switchcodec/error.hpp"

using namespace switchcodec;

namespace {

using oracle::random_cfg;
using oracle::random_window;

RevqConfig reference_cfg() {
    RevqConfig cfg;
    cfg.dim = 8;
    cfg.routed = 8;
    cfg.active = 2;
    cfg.shared = 1;
    cfg.codebook_size = 1024;
    return cfg;
}

TEST(BitIo, MsbFirst) {
    BitWriter w;
    w.put(0b101, 3);
    w.put(0b1, 1);
    w.align();
    w.put(0xA, 4);
    const auto bytes = w.take();
    ASSERT_EQ(bytes.size(), 2u);
    EXPECT_EQ(bytes[0], 0b10110000);
    EXPECT_EQ(bytes[1], 0xA0);
    BitReader r(bytes);
    EXPECT_EQ(r.get(3), 0b101u);
    EXPECT_EQ(r.get(5), 0b10000u);
    EXPECT_EQ(r.get(4), 0xAu);
}

TEST(CodeBits, PowersOfTwo) {
    EXPECT_EQ(code_bits(1), 0u);
    EXPECT_EQ(code_bits(512), 9u);
    EXPECT_EQ(code_bits(1024), 10u);
    EXPECT_THROW(code_bits(0), ContractViolation);
    EXPECT_THROW(code_bits(1000), ContractViolation);
}

TEST(Pack, RoundTripRandomStreams) {
    oracle::Gen g(1);
    for (int trial = 0; trial < 500; ++trial) {
        const RevqConfig cfg = random_cfg(g);
        std::vector<EncodedWindow> windows;
        const std::size_t n = g.index(0, 6);
        for (std::size_t i = 0; i < n; ++i) windows.push_back(random_window(g, cfg, g.index(1, 40)));
        const auto bytes = pack(windows, cfg);
        const auto back = unpack(bytes);
        ASSERT_EQ(back.cfg, cfg) << "trial " << trial;
        ASSERT_EQ(back.windows, windows) << "trial " << trial;
        EXPECT_EQ(pack(back.windows, back.cfg), bytes);

        const auto oracle_count = oracle::count_bits(bytes);
        const auto stats = measure_stream(bytes);
        EXPECT_EQ(oracle_count.windows, n);
        EXPECT_EQ(stats.mask_bits, n * cfg.routed);
        EXPECT_EQ(oracle_count.mask_bits, stats.mask_bits);
        EXPECT_EQ(stats.mask_bits + stats.code_bits, oracle_count.payload_bits);
        EXPECT_EQ(stats.total_bits, bytes.size() * 8);
    }
}

TEST(Pack, PayloadBitsExample) {
    const RevqConfig cfg = reference_cfg();
    oracle::Gen g(2);
    const std::vector<EncodedWindow> one{random_window(g, cfg, 100)};
    EXPECT_EQ(window_payload_bits(cfg, 100), 3008u);
    const auto bytes = pack(one, cfg);
    const auto count = oracle::count_bits(bytes);
    EXPECT_EQ(count.payload_bits, 3008u);
    EXPECT_EQ(bytes.size(), kBitstreamHeaderBytes + 4 + 376);
    const auto stats = measure_stream(bytes);
    EXPECT_EQ(stats.code_bits, 3000u);
    EXPECT_EQ(stats.padding_bits, 0u);
}

TEST(Pack, NineBitCodesForC512) {
    RevqConfig cfg = reference_cfg();
    cfg.codebook_size = 512;
    EXPECT_EQ(window_payload_bits(cfg, 1), 8u + 3 * 9);
}

TEST(Pack, RejectsInvalidWindows) {
    const RevqConfig cfg = reference_cfg();
    oracle::Gen g(3);
    auto w = random_window(g, cfg, 4);
    w.routed_codes[0][1] = 1024;
    EXPECT_THROW(pack(std::vector<EncodedWindow>{w}, cfg), ContractViolation);
    w = random_window(g, cfg, 4);
    w.mask.assign(8, 0);
    w.mask[3] = 1;
    EXPECT_THROW(pack(std::vector<EncodedWindow>{w}, cfg), ContractViolation);
}

TEST(Unpack, DistinctErrors) {
    const RevqConfig cfg = reference_cfg();
    oracle::Gen g(4);
    const std::vector<EncodedWindow> windows{random_window(g, cfg, 10), random_window(g, cfg, 10),
                                             random_window(g, cfg, 10)};
    const auto good = pack(windows, cfg);

    auto bad_magic = good;
    bad_magic[1] = 'X';
    EXPECT_THROW(unpack(bad_magic), FormatError);

    const std::vector<std::uint8_t> cut(good.begin(), good.end() - 3);
    try {
        unpack(cut);
        FAIL() << "expected truncation";
    } catch (const TruncationError& e) {
        EXPECT_EQ(e.window_index(), 2u);
    }

    // Flip the first mask bit of window 0 (the byte after its T field).
    auto popcount = good;
    popcount[kBitstreamHeaderBytes + 4] ^= 0x80;
    EXPECT_THROW(unpack(popcount), IntegrityError);

    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(unpack(trailing), FormatError);
}

TEST(Unpack, ErrorKindsAreDistinguishable) {
    const RevqConfig cfg = reference_cfg();
    oracle::Gen g(5);
    const auto good = pack(std::vector<EncodedWindow>{random_window(g, cfg, 3)}, cfg);
    auto popcount = good;
    popcount[kBitstreamHeaderBytes + 4] ^= 0x80;
    bool integrity = false, truncation = false;
    try {
        unpack(popcount);
    } catch (const IntegrityError&) {
        integrity = true;
    } catch (const TruncationError&) {
        truncation = true;
    }
    EXPECT_TRUE(integrity);
    EXPECT_FALSE(truncation);
}

TEST(Overhead, Examples) {
    EXPECT_DOUBLE_EQ(overhead_bps(1, 8, 2.0), 4.0);
    EXPECT_DOUBLE_EQ(overhead_bps(0, 8, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(overhead_bps(10, 8, 2.0), 40.0);
    EXPECT_THROW(overhead_bps(1, 8, 0.0), ContractViolation);
    EXPECT_THROW(overhead_bps(1, 8, -1.0), ContractViolation);
}

TEST(Overhead, CrossCheckedAgainstPackedMaskBits) {
    const RevqConfig cfg = reference_cfg();
    oracle::Gen g(6);
    std::vector<EncodedWindow> windows;
    for (int i = 0; i < 10; ++i) windows.push_back(random_window(g, cfg, 5));
    const auto count = oracle::count_bits(pack(windows, cfg));
    EXPECT_DOUBLE_EQ(static_cast<double>(count.mask_bits) / 2.0, overhead_bps(10, 8, 2.0));
}

TEST(Pack, PlatformIndependentBytes) {
    RevqConfig cfg;
    cfg.dim = 1;
    cfg.routed = 3;
    cfg.active = 1;
    cfg.shared = 1;
    cfg.codebook_size = 4;
    EncodedWindow w;
    w.mask = {0, 1, 0};
    w.shared_codes = {{3}};
    w.routed_codes = {{1}};
    const auto bytes = pack(std::vector<EncodedWindow>{w}, cfg);
    const std::vector<std::uint8_t> expected{'R', 'V', 'Q', 'B', 1, 0,  // magic, version
                                             1, 0, 0, 0, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 4, 0, 0, 0,
                                             0, 0, 0, 0, 1, 0, 0, 0,  // window_frames, window_count
                                             1, 0, 0, 0,              // T
                                             0b01011010};             // mask 010, codes 11 01, pad 0
    EXPECT_EQ(bytes, expected);
}

}  // namespace
