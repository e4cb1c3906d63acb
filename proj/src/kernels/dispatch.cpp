#include <atomic>
#include <cstdlib>
#include <string>

#include "switchcodec/error.hpp"
#include "switchcodec/kernels.hpp"
#include "variants.hpp"

namespace switchcodec::kernels {
namespace {

constexpr KernelSet kScalarSet{Isa::kScalar, "scalar", scalar::dot, scalar::squared_l2,
                               scalar::squared_l2_rows, scalar::axpy};

#if defined(SWITCHCODEC_HAVE_AVX2)
constexpr KernelSet kAvx2Set{Isa::kAvx2, "avx2", avx2::dot, avx2::squared_l2,
                             avx2::squared_l2_rows, avx2::axpy};
#endif

#if defined(SWITCHCODEC_HAVE_NEON)
constexpr KernelSet kNeonSet{Isa::kNeon, "neon", neon::dot, neon::squared_l2,
                             neon::squared_l2_rows, neon::axpy};
#endif

bool cpu_supports(Isa isa) {
    switch (isa) {
        case Isa::kScalar:
            return true;
        case Isa::kAvx2:
#if defined(SWITCHCODEC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::kNeon:
#if defined(SWITCHCODEC_HAVE_NEON)
            return true;  // Advanced SIMD is mandatory on AArch64.
#else
            return false;
#endif
    }
    return false;
}

const KernelSet* pick_default() {
    if (const char* env = std::getenv("SWITCHCODEC_ISA")) {
        const std::string requested(env);
        for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
            if (requested == isa_name(isa) && available(isa)) return &get(isa);
        }
    }
    if (available(Isa::kAvx2)) return &get(Isa::kAvx2);
    if (available(Isa::kNeon)) return &get(Isa::kNeon);
    return &kScalarSet;
}

std::atomic<const KernelSet*>& current() {
    static std::atomic<const KernelSet*> selected{pick_default()};
    return selected;
}

}  // namespace

bool available(Isa isa) { return cpu_supports(isa); }

std::vector<Isa> available_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
        if (available(isa)) out.push_back(isa);
    }
    return out;
}

const KernelSet& get(Isa isa) {
    if (!available(isa)) {
        throw ContractViolation("kernel variant '" + std::string(isa_name(isa)) +
                                "' is not available on this CPU/build");
    }
    switch (isa) {
#if defined(SWITCHCODEC_HAVE_AVX2)
        case Isa::kAvx2:
            return kAvx2Set;
#endif
#if defined(SWITCHCODEC_HAVE_NEON)
        case Isa::kNeon:
            return kNeonSet;
#endif
        default:
            return kScalarSet;
    }
}

const KernelSet& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) { current().store(&get(isa), std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::kScalar:
            return "scalar";
        case Isa::kAvx2:
            return "avx2";
        case Isa::kNeon:
            return "neon";
    }
    return "unknown";
}

}  // namespace switchcodec::kernels
