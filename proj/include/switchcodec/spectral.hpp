#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "switchcodec/matrix.hpp"

namespace switchcodec {

// Frequency bins f split into `period` interleaved tiers of f / period bins.
struct TierSpec {
    std::size_t fft_bins = 256;
    std::size_t period = 2;

    std::size_t tier_len() const noexcept { return period == 0 ? 0 : fft_bins / period; }
    // FFT length producing fft_bins bins below Nyquist.
    std::size_t fft_size() const noexcept { return 2 * fft_bins; }
    std::size_t hop() const noexcept { return fft_size() / 4; }
    void validate() const;
};

// The three sub-discriminator resolutions: (256, 2), (512, 4), (1024, 8).
std::vector<TierSpec> default_tier_specs();

struct Spectrum {
    Matrix magnitude;  // f x T_s
    Matrix phase;      // f x T_s, radians in (-pi, pi]

    std::size_t bins() const noexcept { return magnitude.rows(); }
    std::size_t frames() const noexcept { return magnitude.cols(); }
};

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

// One-sided DFT of a real frame: fft_size / 2 + 1 bins including DC and Nyquist.
std::vector<std::complex<double>> real_dft(std::span<const double> frame);

// Hann-windowed STFT without centering. Keeps bins 0 .. fft_size/2 - 1 so the
// bin count is a power of two. A signal shorter than fft_size produces a
// single zero-padded frame.
Spectrum stft(std::span<const double> signal, std::size_t fft_size, std::size_t hop);

// Rows {t, t + p, t + 2p, ...} of `channel` for each tier t.
std::vector<Matrix> tier_partition(const Matrix& channel, std::size_t period);

// Inverse of tier_partition.
Matrix interleave_tiers(std::span<const Matrix> tiers);

// Source bin index of every row of every tier, tier-major.
std::vector<std::size_t> tier_source_indices(std::size_t bins, std::size_t period);

// channels x height x width, row-major.
struct Tensor3 {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(std::size_t c, std::size_t h, std::size_t w) : channels(c), height(h), width(w), data(c * h * w) {}

    double& at(std::size_t c, std::size_t h, std::size_t w) { return data[(c * height + h) * width + w]; }
    double at(std::size_t c, std::size_t h, std::size_t w) const { return data[(c * height + h) * width + w]; }
};

struct Conv2d {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 3, kernel_w = 9;
    std::size_t stride_h = 1, stride_w = 2;
    std::size_t pad_h = 1, pad_w = 4;
    std::vector<double> weight;  // out x in x kernel_h x kernel_w
    std::vector<double> bias;    // out

    std::size_t output_height(std::size_t h) const;
    std::size_t output_width(std::size_t w) const;
};

Tensor3 conv2d_forward(const Tensor3& input, const Conv2d& layer);

// How magnitude and phase are combined before tier partitioning.
enum class ConcatMode {
    kTime,    // width = 2 * T_s: magnitude frames followed by phase frames
    kHeight,  // height = 2 * p: magnitude tiers followed by phase tiers
};

struct SubDiscriminator {
    TierSpec spec;
    std::vector<Conv2d> layers;  // 128->32->64->128->256, then 256->1
};

struct MtsdWeights {
    std::vector<SubDiscriminator> subs;

    // Kaiming-uniform (fan-in) initialization from a fixed seed.
    static MtsdWeights init(std::span<const TierSpec> specs, std::uint64_t seed);
};

// Input tensor for one sub-discriminator: channels = f / p.
Tensor3 mtsd_input(std::span<const double> audio, const TierSpec& spec, ConcatMode mode = ConcatMode::kTime);

struct SubDiscriminatorOutput {
    std::vector<Tensor3> features;  // every post-convolution map; the last one is the logit map
};

std::vector<SubDiscriminatorOutput> mtsd_forward(std::span<const double> audio, const MtsdWeights& weights,
                                                 ConcatMode mode = ConcatMode::kTime);

inline constexpr double kMtsdLeakySlope = 0.1;

}  // namespace switchcodec
