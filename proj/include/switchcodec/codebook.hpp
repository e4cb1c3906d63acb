#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "switchcodec/matrix.hpp"

namespace switchcodec {

class ByteReader;
class ByteWriter;

enum class DistanceMode {
    kRaw,         // squared L2 on raw vectors
    kNormalized,  // squared L2 between L2-normalized input and entries
};

// One quantizer's entry table (C x D, row-major) together with the EMA
// statistics used for training. Entries and statistics share storage so the
// same object serves training and inference.
class Codebook {
public:
    Codebook() = default;
    Codebook(std::size_t size, std::size_t dim);
    explicit Codebook(Matrix entries);

    std::size_t size() const noexcept { return entries_.rows(); }
    std::size_t dim() const noexcept { return entries_.cols(); }

    std::span<const double> entry(std::size_t i) const { return entries_.row(i); }
    std::span<double> entry(std::size_t i) { return entries_.row(i); }

    const Matrix& entries() const noexcept { return entries_; }
    Matrix& entries() noexcept { return entries_; }

    const std::vector<double>& ema_counts() const noexcept { return ema_counts_; }
    std::vector<double>& ema_counts() noexcept { return ema_counts_; }
    const Matrix& ema_sums() const noexcept { return ema_sums_; }
    Matrix& ema_sums() noexcept { return ema_sums_; }

    // counts <- 1, sums <- entries, so each entry is its own EMA mean.
    void reset_statistics();

    // Checks the type invariants (C, D >= 1, finite entries, counts >= 0).
    void validate() const;

    friend bool operator==(const Codebook& a, const Codebook& b) {
        return a.entries_ == b.entries_;
    }

private:
    Matrix entries_;
    std::vector<double> ema_counts_;
    Matrix ema_sums_;
};

struct QuantCode {
    std::uint32_t index = 0;
    double distance = 0.0;  // squared L2 in the active distance mode
};

struct QuantizeResult {
    QuantCode code;
    std::vector<double> quantized;
    std::vector<double> residual;
};

// Nearest entry by squared L2, lowest index on ties. Throws ContractViolation
// on dimension mismatch or non-finite input.
QuantCode nearest_code(std::span<const double> v, const Codebook& cb,
                       DistanceMode mode = DistanceMode::kRaw);

QuantizeResult quantize_nearest(std::span<const double> v, const Codebook& cb,
                                DistanceMode mode = DistanceMode::kRaw);

struct ChainResult {
    std::vector<QuantCode> codes;
    std::vector<double> reconstruction;
    std::vector<double> final_residual;
    // ||r_k||^2 after each stage k (stage_energy[k] belongs to codes[k]).
    std::vector<double> stage_energy;
};

// Classic residual chain: stage k quantizes the residual left by stage k-1.
ChainResult rvq_chain(std::span<const double> v, std::span<const Codebook* const> stages,
                      DistanceMode mode = DistanceMode::kRaw);
ChainResult rvq_chain(std::span<const double> v, std::span<const Codebook> stages,
                      DistanceMode mode = DistanceMode::kRaw);

// "RVQC" container: magic, u32 version, u32 C, u32 D, C*D float32 (LE).
// EMA statistics are not serialized.
inline constexpr std::uint32_t kCodebookFormatVersion = 1;
std::vector<std::uint8_t> serialize_codebook(const Codebook& cb);
void append_codebook(ByteWriter& out, const Codebook& cb);
Codebook deserialize_codebook(std::span<const std::uint8_t> bytes);
Codebook read_codebook(ByteReader& in);

}  // namespace switchcodec
