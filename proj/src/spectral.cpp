#include "switchcodec/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "switchcodec/kernels.hpp"
#include "switchcodec/rng.hpp"

namespace switchcodec {

namespace {

// fftw planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
        out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    double* input() { return in_; }
    void run() { fftw_execute(plan_); }
    std::complex<double> bin(std::size_t k) const { return {out_[k][0], out_[k][1]}; }

private:
    std::size_t n_;
    double* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

double wrap_phase(double phase) {
    // atan2 may return -pi exactly; fold it onto +pi.
    return phase <= -std::numbers::pi ? std::numbers::pi : phase;
}

void leaky_relu(Tensor3& t, double slope) {
    for (double& x : t.data) x = x > 0.0 ? x : slope * x;
}

Conv2d make_conv(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw, std::size_t sh,
                 std::size_t sw, std::size_t ph, std::size_t pw, Rng& rng) {
    Conv2d c;
    c.in_channels = in;
    c.out_channels = out;
    c.kernel_h = kh;
    c.kernel_w = kw;
    c.stride_h = sh;
    c.stride_w = sw;
    c.pad_h = ph;
    c.pad_w = pw;
    const double fan_in = static_cast<double>(in * kh * kw);
    const double bound = std::sqrt(6.0 / fan_in);
    c.weight.resize(out * in * kh * kw);
    for (double& w : c.weight) w = rng.uniform(-bound, bound);
    c.bias.resize(out);
    const double bias_bound = 1.0 / std::sqrt(fan_in);
    for (double& b : c.bias) b = rng.uniform(-bias_bound, bias_bound);
    return c;
}

}  // namespace

void TierSpec::validate() const {
    if (fft_bins == 0 || !std::has_single_bit(fft_bins)) {
        throw ContractViolation("tier spec: bin count must be a power of two");
    }
    if (period == 0 || fft_bins % period != 0) {
        throw ContractViolation("tier spec: period " + std::to_string(period) + " does not divide " +
                                std::to_string(fft_bins) + " bins");
    }
}

std::vector<TierSpec> default_tier_specs() { return {{256, 2}, {512, 4}, {1024, 8}}; }

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return w;
}

std::vector<std::complex<double>> real_dft(std::span<const double> frame) {
    if (frame.empty()) throw ContractViolation("real_dft: empty frame");
    RealFft fft(frame.size());
    std::copy(frame.begin(), frame.end(), fft.input());
    fft.run();
    std::vector<std::complex<double>> out(frame.size() / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = fft.bin(k);
    return out;
}

Spectrum stft(std::span<const double> signal, std::size_t fft_size, std::size_t hop) {
    if (fft_size < 2 || !std::has_single_bit(fft_size)) {
        throw ContractViolation("stft: fft_size must be a power of two >= 2");
    }
    if (hop == 0) throw ContractViolation("stft: hop must be >= 1");
    const std::size_t frames = signal.size() <= fft_size ? 1 : 1 + (signal.size() - fft_size) / hop;
    const std::size_t bins = fft_size / 2;
    const auto window = hann_window(fft_size);

    Spectrum out{Matrix(bins, frames), Matrix(bins, frames)};
    RealFft fft(fft_size);
    for (std::size_t f = 0; f < frames; ++f) {
        double* buf = fft.input();
        const std::size_t start = f * hop;
        for (std::size_t i = 0; i < fft_size; ++i) {
            const double x = start + i < signal.size() ? signal[start + i] : 0.0;
            buf[i] = x * window[i];
        }
        fft.run();
        for (std::size_t k = 0; k < bins; ++k) {
            const auto c = fft.bin(k);
            out.magnitude(k, f) = std::abs(c);
            out.phase(k, f) = wrap_phase(std::arg(c));
        }
    }
    return out;
}

std::vector<Matrix> tier_partition(const Matrix& channel, std::size_t period) {
    if (period == 0 || channel.rows() % period != 0) {
        throw ContractViolation("tier_partition: period " + std::to_string(period) + " does not divide " +
                                std::to_string(channel.rows()) + " bins");
    }
    const std::size_t len = channel.rows() / period;
    std::vector<Matrix> tiers(period, Matrix(len, channel.cols()));
    for (std::size_t bin = 0; bin < channel.rows(); ++bin) {
        const auto src = channel.row(bin);
        std::copy(src.begin(), src.end(), tiers[bin % period].row(bin / period).begin());
    }
    return tiers;
}

Matrix interleave_tiers(std::span<const Matrix> tiers) {
    if (tiers.empty()) throw ContractViolation("interleave_tiers: no tiers");
    const std::size_t period = tiers.size();
    const std::size_t len = tiers.front().rows();
    const std::size_t width = tiers.front().cols();
    Matrix out(len * period, width);
    for (std::size_t t = 0; t < period; ++t) {
        if (tiers[t].rows() != len || tiers[t].cols() != width) {
            throw ContractViolation("interleave_tiers: tiers differ in shape");
        }
        for (std::size_t r = 0; r < len; ++r) {
            const auto src = tiers[t].row(r);
            std::copy(src.begin(), src.end(), out.row(r * period + t).begin());
        }
    }
    return out;
}

std::vector<std::size_t> tier_source_indices(std::size_t bins, std::size_t period) {
    if (period == 0 || bins % period != 0) throw ContractViolation("tier_source_indices: period must divide bins");
    std::vector<std::size_t> out;
    out.reserve(bins);
    for (std::size_t t = 0; t < period; ++t) {
        for (std::size_t bin = t; bin < bins; bin += period) out.push_back(bin);
    }
    return out;
}

std::size_t Conv2d::output_height(std::size_t h) const {
    if (h + 2 * pad_h < kernel_h) throw ContractViolation("conv2d: input height smaller than kernel");
    return (h + 2 * pad_h - kernel_h) / stride_h + 1;
}

std::size_t Conv2d::output_width(std::size_t w) const {
    if (w + 2 * pad_w < kernel_w) throw ContractViolation("conv2d: input width smaller than kernel");
    return (w + 2 * pad_w - kernel_w) / stride_w + 1;
}

Tensor3 conv2d_forward(const Tensor3& input, const Conv2d& layer) {
    if (input.channels != layer.in_channels) {
        throw ContractViolation("conv2d: expected " + std::to_string(layer.in_channels) + " input channels, got " +
                                std::to_string(input.channels));
    }
    const std::size_t patch = layer.in_channels * layer.kernel_h * layer.kernel_w;
    if (layer.weight.size() != layer.out_channels * patch || layer.bias.size() != layer.out_channels) {
        throw ContractViolation("conv2d: weight shape mismatch");
    }
    const std::size_t oh = layer.output_height(input.height);
    const std::size_t ow = layer.output_width(input.width);
    Tensor3 out(layer.out_channels, oh, ow);
    const auto& k = kernels::active();

    // im2col one output position at a time, then one dot product per filter.
    std::vector<double> column(patch);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            std::size_t idx = 0;
            for (std::size_t c = 0; c < layer.in_channels; ++c) {
                for (std::size_t ky = 0; ky < layer.kernel_h; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * layer.stride_h + ky) -
                                              static_cast<std::ptrdiff_t>(layer.pad_h);
                    for (std::size_t kx = 0; kx < layer.kernel_w; ++kx, ++idx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * layer.stride_w + kx) -
                                                  static_cast<std::ptrdiff_t>(layer.pad_w);
                        const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(input.height) &&
                                            ix < static_cast<std::ptrdiff_t>(input.width);
                        column[idx] = inside ? input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix))
                                             : 0.0;
                    }
                }
            }
            for (std::size_t o = 0; o < layer.out_channels; ++o) {
                out.at(o, y, x) = layer.bias[o] + k.dot(layer.weight.data() + o * patch, column.data(), patch);
            }
        }
    }
    return out;
}

MtsdWeights MtsdWeights::init(std::span<const TierSpec> specs, std::uint64_t seed) {
    MtsdWeights weights;
    Rng rng(seed);
    for (const TierSpec& spec : specs) {
        spec.validate();
        SubDiscriminator sub{spec, {}};
        const std::size_t channels[] = {spec.tier_len(), 32, 64, 128, 256};
        for (std::size_t i = 0; i + 1 < std::size(channels); ++i) {
            sub.layers.push_back(make_conv(channels[i], channels[i + 1], 3, 9, 1, 2, 1, 4, rng));
        }
        sub.layers.push_back(make_conv(256, 1, 3, 3, 1, 1, 1, 1, rng));
        weights.subs.push_back(std::move(sub));
    }
    return weights;
}

Tensor3 mtsd_input(std::span<const double> audio, const TierSpec& spec, ConcatMode mode) {
    spec.validate();
    const Spectrum s = stft(audio, spec.fft_size(), spec.hop());
    const std::size_t frames = s.frames();
    const auto mag_tiers = tier_partition(s.magnitude, spec.period);
    const auto phase_tiers = tier_partition(s.phase, spec.period);
    const std::size_t channels = spec.tier_len();

    if (mode == ConcatMode::kTime) {
        Tensor3 t(channels, spec.period, 2 * frames);
        for (std::size_t h = 0; h < spec.period; ++h) {
            for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t w = 0; w < frames; ++w) {
                    t.at(c, h, w) = mag_tiers[h](c, w);
                    t.at(c, h, frames + w) = phase_tiers[h](c, w);
                }
            }
        }
        return t;
    }
    Tensor3 t(channels, 2 * spec.period, frames);
    for (std::size_t h = 0; h < spec.period; ++h) {
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t w = 0; w < frames; ++w) {
                t.at(c, h, w) = mag_tiers[h](c, w);
                t.at(c, spec.period + h, w) = phase_tiers[h](c, w);
            }
        }
    }
    return t;
}

std::vector<SubDiscriminatorOutput> mtsd_forward(std::span<const double> audio, const MtsdWeights& weights,
                                                 ConcatMode mode) {
    std::vector<SubDiscriminatorOutput> out;
    for (const SubDiscriminator& sub : weights.subs) {
        Tensor3 x = mtsd_input(audio, sub.spec, mode);
        SubDiscriminatorOutput result;
        for (std::size_t i = 0; i < sub.layers.size(); ++i) {
            x = conv2d_forward(x, sub.layers[i]);
            if (i + 1 < sub.layers.size()) leaky_relu(x, kMtsdLeakySlope);
            result.features.push_back(x);
        }
        out.push_back(std::move(result));
    }
    return out;
}

}  // namespace switchcodec
