#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "switchcodec/error.hpp"
#include "switchcodec/spectral.hpp"

using namespace switchcodec;

namespace {

std::vector<double> tone(std::size_t n, double cycles_per_sample, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::sin(2.0 * std::numbers::pi * cycles_per_sample * static_cast<double>(i) + phase);
    }
    return x;
}

TEST(TierSpecs, DefaultsGive128BinTiers) {
    const auto specs = default_tier_specs();
    ASSERT_EQ(specs.size(), 3u);
    for (const auto& s : specs) {
        EXPECT_EQ(s.tier_len(), 128u);
        EXPECT_EQ(s.fft_size(), 2 * s.fft_bins);
        EXPECT_EQ(s.hop(), s.fft_size() / 4);
    }
    EXPECT_THROW((TierSpec{256, 3}.validate()), ContractViolation);
}

TEST(Hann, PeriodicWindow) {
    const auto w = hann_window(8);
    EXPECT_EQ(w[0], 0.0);
    EXPECT_NEAR(w[4], 1.0, 1e-15);
    EXPECT_NEAR(w[2], 0.5, 1e-15);
    EXPECT_NEAR(w[1], w[7], 1e-15);
}

TEST(Dft, MatchesNaiveSum) {
    oracle::Gen g(1);
    for (std::size_t n : {2u, 8u, 64u, 512u}) {
        const auto x = g.vec(n);
        const auto fast = real_dft(x);
        const auto ref = oracle::naive_dft(x);
        ASSERT_EQ(fast.size(), ref.size());
        for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_LT(std::abs(fast[k] - ref[k]), 1e-9 * n);
    }
}

TEST(Stft, ZeroSignalZeroMagnitude) {
    const std::vector<double> zeros(4096, 0.0);
    const auto s = stft(zeros, 512, 128);
    EXPECT_EQ(s.bins(), 256u);
    EXPECT_EQ(s.frames(), 1u + (4096 - 512) / 128);
    for (double m : s.magnitude.values()) EXPECT_EQ(m, 0.0);
}

TEST(Stft, BinCentreToneArgmax) {
    const std::size_t fft = 1024, bin = 37;
    const auto x = tone(8192, static_cast<double>(bin) / fft, 0.3);
    const auto s = stft(x, fft, fft / 4);
    for (std::size_t f = 0; f < s.frames(); ++f) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < s.bins(); ++k) {
            if (s.magnitude(k, f) > s.magnitude(best, f)) best = k;
        }
        EXPECT_EQ(best, bin) << "frame " << f;
    }
}

TEST(Stft, ParsevalOverOneSidedSpectrum) {
    oracle::Gen g(2);
    const std::size_t n = 512;
    for (int trial = 0; trial < 20; ++trial) {
        auto x = g.vec(n);
        const auto w = hann_window(n);
        double time_energy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] *= w[i];
            time_energy += x[i] * x[i];
        }
        const auto spec = real_dft(x);
        double freq = std::norm(spec.front()) + std::norm(spec.back());
        for (std::size_t k = 1; k + 1 < spec.size(); ++k) freq += 2.0 * std::norm(spec[k]);
        freq /= static_cast<double>(n);
        EXPECT_NEAR(freq / time_energy, 1.0, 1e-3);
    }
}

TEST(Stft, PhaseRangeAndShortSignal) {
    oracle::Gen g(3);
    const auto s = stft(g.vec(3000), 256, 64);
    for (double p : s.phase.values()) {
        EXPECT_GT(p, -std::numbers::pi);
        EXPECT_LE(p, std::numbers::pi);
    }
    for (double m : s.magnitude.values()) EXPECT_GE(m, 0.0);
    const auto short_sig = stft(g.vec(100), 256, 64);
    EXPECT_EQ(short_sig.frames(), 1u);
    EXPECT_THROW(stft(g.vec(100), 250, 64), ContractViolation);
    EXPECT_THROW(stft(g.vec(100), 256, 0), ContractViolation);
}

TEST(Tiers, PartitionContentsAndIdentity) {
    oracle::Gen g(4);
    for (const auto& spec : default_tier_specs()) {
        const Matrix ch = g.matrix(spec.fft_bins, 5);
        const auto tiers = tier_partition(ch, spec.period);
        ASSERT_EQ(tiers.size(), spec.period);
        for (std::size_t t = 0; t < spec.period; ++t) {
            ASSERT_EQ(tiers[t].rows(), 128u);
            for (std::size_t r = 0; r < 128; ++r) {
                for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(tiers[t](r, c), ch(t + r * spec.period, c));
            }
        }
        EXPECT_EQ(interleave_tiers(tiers), ch);
    }
    const Matrix ch = g.matrix(16, 3);
    const auto single = tier_partition(ch, 1);
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(single[0], ch);
    EXPECT_THROW(tier_partition(ch, 3), ContractViolation);
}

TEST(Tiers, SourceIndicesAreABijection) {
    for (const auto& spec : default_tier_specs()) {
        auto idx = tier_source_indices(spec.fft_bins, spec.period);
        ASSERT_EQ(idx.size(), spec.fft_bins);
        for (std::size_t t = 0; t < spec.period; ++t) {
            for (std::size_t r = 0; r + 1 < spec.tier_len(); ++r) {
                EXPECT_LT(idx[t * spec.tier_len() + r], idx[t * spec.tier_len() + r + 1]);
            }
        }
        std::sort(idx.begin(), idx.end());
        for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(idx[i], i);
    }
}

// Direct seven-loop convolution.
Tensor3 naive_conv(const Tensor3& x, const Conv2d& l) {
    const std::size_t oh = oracle::conv_out(x.height, l.kernel_h, l.stride_h, l.pad_h);
    const std::size_t ow = oracle::conv_out(x.width, l.kernel_w, l.stride_w, l.pad_w);
    Tensor3 y(l.out_channels, oh, ow);
    for (std::size_t o = 0; o < l.out_channels; ++o) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                double acc = l.bias[o];
                for (std::size_t c = 0; c < l.in_channels; ++c) {
                    for (std::size_t a = 0; a < l.kernel_h; ++a) {
                        for (std::size_t b = 0; b < l.kernel_w; ++b) {
                            const auto h = static_cast<long>(i * l.stride_h + a) - static_cast<long>(l.pad_h);
                            const auto w = static_cast<long>(j * l.stride_w + b) - static_cast<long>(l.pad_w);
                            if (h < 0 || w < 0 || h >= static_cast<long>(x.height) || w >= static_cast<long>(x.width)) {
                                continue;
                            }
                            acc += l.weight[((o * l.in_channels + c) * l.kernel_h + a) * l.kernel_w + b] *
                                   x.at(c, static_cast<std::size_t>(h), static_cast<std::size_t>(w));
                        }
                    }
                }
                y.at(o, i, j) = acc;
            }
        }
    }
    return y;
}

TEST(Conv, MatchesDirectConvolution) {
    oracle::Gen g(5);
    for (int trial = 0; trial < 20; ++trial) {
        Conv2d l;
        l.in_channels = g.index(1, 4);
        l.out_channels = g.index(1, 4);
        l.kernel_h = g.index(1, 3);
        l.kernel_w = g.index(1, 9);
        l.stride_h = g.index(1, 2);
        l.stride_w = g.index(1, 2);
        l.pad_h = g.index(0, 1);
        l.pad_w = g.index(0, 4);
        l.weight = g.vec(l.out_channels * l.in_channels * l.kernel_h * l.kernel_w);
        l.bias = g.vec(l.out_channels);
        Tensor3 x(l.in_channels, g.index(l.kernel_h, 6), g.index(l.kernel_w, 20));
        for (double& v : x.data) v = g.normal();
        const Tensor3 fast = conv2d_forward(x, l);
        const Tensor3 ref = naive_conv(x, l);
        ASSERT_EQ(fast.channels, ref.channels);
        ASSERT_EQ(fast.height, ref.height);
        ASSERT_EQ(fast.width, ref.width);
        for (std::size_t i = 0; i < ref.data.size(); ++i) EXPECT_NEAR(fast.data[i], ref.data[i], 1e-10);
    }
}

TEST(Mtsd, WidthTableFor64) {
    const auto weights = MtsdWeights::init(default_tier_specs(), 3);
    const auto& layers = weights.subs[0].layers;
    Tensor3 x(128, 2, 64);
    oracle::Gen g(6);
    for (double& v : x.data) v = g.normal();
    const std::size_t expected_w[] = {32, 16, 8, 4, 4};
    const std::size_t expected_c[] = {32, 64, 128, 256, 1};
    for (std::size_t i = 0; i < layers.size(); ++i) {
        x = conv2d_forward(x, layers[i]);
        EXPECT_EQ(x.width, expected_w[i]);
        EXPECT_EQ(x.channels, expected_c[i]);
        EXPECT_EQ(x.height, 2u);
    }
    // Hand formula: floor((W - 9 + 2 * 4) / 2) + 1.
    std::size_t w = 64;
    for (int k = 0; k < 4; ++k) w = (w - 9 + 8) / 2 + 1;
    EXPECT_EQ(w, 4u);
}

TEST(Mtsd, ChannelProgressionAndInputLayout) {
    oracle::Gen g(7);
    const auto audio = g.vec(8192, 0.3);
    const auto weights = MtsdWeights::init(default_tier_specs(), 11);
    const auto out = mtsd_forward(audio, weights);
    ASSERT_EQ(out.size(), 3u);
    for (std::size_t s = 0; s < 3; ++s) {
        std::vector<std::size_t> channels;
        for (const auto& f : out[s].features) channels.push_back(f.channels);
        EXPECT_EQ(channels, (std::vector<std::size_t>{32, 64, 128, 256, 1}));
        const auto spec = default_tier_specs()[s];
        const Tensor3 in = mtsd_input(audio, spec);
        EXPECT_EQ(in.channels, 128u);
        EXPECT_EQ(in.height, spec.period);
        const auto spectrum = stft(audio, spec.fft_size(), spec.hop());
        EXPECT_EQ(in.width, 2 * spectrum.frames());
        // Channel c of tier h is bin h + c * p; magnitude first, phase after.
        EXPECT_EQ(in.at(5, 1, 0), spectrum.magnitude(1 + 5 * spec.period, 0));
        EXPECT_EQ(in.at(5, 1, spectrum.frames()), spectrum.phase(1 + 5 * spec.period, 0));
    }
}

TEST(Mtsd, HeightConcatAlternative) {
    oracle::Gen g(8);
    const auto audio = g.vec(4096, 0.3);
    const TierSpec spec{256, 2};
    const Tensor3 in = mtsd_input(audio, spec, ConcatMode::kHeight);
    EXPECT_EQ(in.channels, 128u);
    EXPECT_EQ(in.height, 4u);
    const auto weights = MtsdWeights::init(std::vector<TierSpec>{spec}, 1);
    const auto out = mtsd_forward(audio, weights, ConcatMode::kHeight);
    EXPECT_EQ(out[0].features.back().channels, 1u);
}

TEST(Mtsd, DeterministicAndContentSensitive) {
    oracle::Gen g(9);
    const auto a = g.vec(6000, 0.3);
    const auto b = tone(6000, 0.05);
    const auto weights = MtsdWeights::init(default_tier_specs(), 5);
    const auto again = MtsdWeights::init(default_tier_specs(), 5);
    const auto fa = mtsd_forward(a, weights);
    const auto fa2 = mtsd_forward(a, again);
    const auto fb = mtsd_forward(b, weights);
    for (std::size_t s = 0; s < 3; ++s) {
        EXPECT_EQ(fa[s].features.back().data, fa2[s].features.back().data);
        EXPECT_NE(fa[s].features.back().data, fb[s].features.back().data);
    }
}

}  // namespace
