#include "switchcodec/codebook.hpp"

#include <cmath>
#include <string>

#include "switchcodec/byte_io.hpp"
#include "switchcodec/kernels.hpp"

namespace switchcodec {

namespace {

constexpr std::string_view kCodebookMagic = "RVQC";

void check_input(std::span<const double> v, const Codebook& cb) {
    if (cb.size() == 0 || cb.dim() == 0) throw ContractViolation("codebook is empty");
    if (v.size() != cb.dim()) {
        throw ContractViolation("dimension mismatch: vector has " + std::to_string(v.size()) +
                                " components, codebook expects " + std::to_string(cb.dim()));
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw ContractViolation("non-finite input to quantizer");
    }
}

std::vector<double> l2_normalized(std::span<const double> v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::max(std::sqrt(norm), 1e-12);
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= norm;
    return out;
}

}  // namespace

Codebook::Codebook(std::size_t size, std::size_t dim) : Codebook(Matrix(size, dim)) {}

Codebook::Codebook(Matrix entries) : entries_(std::move(entries)) { reset_statistics(); }

void Codebook::reset_statistics() {
    ema_counts_.assign(entries_.rows(), 1.0);
    ema_sums_ = entries_;
}

void Codebook::validate() const {
    if (size() == 0 || dim() == 0) throw ContractViolation("codebook must have C >= 1 and D >= 1");
    if (!entries_.all_finite()) throw ContractViolation("codebook has non-finite entries");
    for (double c : ema_counts_) {
        if (!(c >= 0.0)) throw ContractViolation("codebook EMA count is negative");
    }
}

QuantCode nearest_code(std::span<const double> v, const Codebook& cb, DistanceMode mode) {
    check_input(v, cb);
    const auto& k = kernels::active();
    std::vector<double> distances(cb.size());
    if (mode == DistanceMode::kRaw) {
        k.squared_l2_rows(v.data(), cb.entries().data(), cb.size(), cb.dim(), distances.data());
    } else {
        const auto query = l2_normalized(v);
        for (std::size_t i = 0; i < cb.size(); ++i) {
            const auto e = l2_normalized(cb.entry(i));
            distances[i] = k.squared_l2(query.data(), e.data(), cb.dim());
        }
    }
    QuantCode best{0, distances[0]};
    for (std::size_t i = 1; i < distances.size(); ++i) {
        if (distances[i] < best.distance) best = {static_cast<std::uint32_t>(i), distances[i]};
    }
    return best;
}

QuantizeResult quantize_nearest(std::span<const double> v, const Codebook& cb, DistanceMode mode) {
    QuantizeResult out;
    out.code = nearest_code(v, cb, mode);
    const auto entry = cb.entry(out.code.index);
    out.quantized.assign(entry.begin(), entry.end());
    out.residual.resize(v.size());
    for (std::size_t d = 0; d < v.size(); ++d) out.residual[d] = v[d] - entry[d];
    return out;
}

ChainResult rvq_chain(std::span<const double> v, std::span<const Codebook* const> stages,
                      DistanceMode mode) {
    if (stages.empty()) throw ContractViolation("rvq_chain needs at least one codebook");
    for (const Codebook* cb : stages) {
        if (cb == nullptr || cb->dim() != v.size()) {
            throw ContractViolation("rvq_chain: all codebooks must share the input dimension");
        }
    }
    ChainResult out;
    out.reconstruction.assign(v.size(), 0.0);
    out.final_residual.assign(v.begin(), v.end());
    for (const Codebook* cb : stages) {
        const QuantCode code = nearest_code(out.final_residual, *cb, mode);
        const auto entry = cb->entry(code.index);
        double energy = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d) {
            out.reconstruction[d] += entry[d];
            out.final_residual[d] -= entry[d];
            energy += out.final_residual[d] * out.final_residual[d];
        }
        out.codes.push_back(code);
        out.stage_energy.push_back(energy);
    }
    return out;
}

ChainResult rvq_chain(std::span<const double> v, std::span<const Codebook> stages,
                      DistanceMode mode) {
    std::vector<const Codebook*> ptrs;
    ptrs.reserve(stages.size());
    for (const auto& cb : stages) ptrs.push_back(&cb);
    return rvq_chain(v, std::span<const Codebook* const>(ptrs), mode);
}

void append_codebook(ByteWriter& out, const Codebook& cb) {
    out.put_bytes(kCodebookMagic);
    out.put_u32(kCodebookFormatVersion);
    out.put_u32(static_cast<std::uint32_t>(cb.size()));
    out.put_u32(static_cast<std::uint32_t>(cb.dim()));
    for (double x : cb.entries().values()) out.put_f32(static_cast<float>(x));
}

std::vector<std::uint8_t> serialize_codebook(const Codebook& cb) {
    ByteWriter out;
    append_codebook(out, cb);
    return out.take();
}

Codebook read_codebook(ByteReader& in) {
    if (in.remaining() < 16) throw FormatError("codebook header truncated");
    if (in.get_bytes(4) != kCodebookMagic) throw FormatError("bad codebook magic (expected RVQC)");
    const std::uint32_t version = in.get_u32();
    if (version != kCodebookFormatVersion) {
        throw FormatError("unsupported codebook version " + std::to_string(version));
    }
    const std::uint32_t size = in.get_u32();
    const std::uint32_t dim = in.get_u32();
    if (size == 0 || dim == 0) throw FormatError("codebook header declares an empty table");
    const std::size_t count = static_cast<std::size_t>(size) * dim;
    if (in.remaining() < count * 4) throw FormatError("codebook entries truncated");
    Matrix entries(size, dim);
    for (std::size_t i = 0; i < count; ++i) entries.data()[i] = in.get_f32();
    if (!entries.all_finite()) throw FormatError("codebook contains non-finite entries");
    return Codebook(std::move(entries));
}

Codebook deserialize_codebook(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    Codebook cb = read_codebook(in);
    if (!in.at_end()) throw FormatError("trailing bytes after codebook");
    return cb;
}

}  // namespace switchcodec
