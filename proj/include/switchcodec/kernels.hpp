#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference version and
// optional AVX2+FMA / NEON versions; the fastest one supported by the running
// CPU is selected once at startup and can be overridden for testing.
//
// Set SWITCHCODEC_ISA=scalar|avx2|neon in the environment to force a variant.

#include <cstddef>
#include <string_view>
#include <vector>

namespace switchcodec::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

using DotFn = double (*)(const double* a, const double* b, std::size_t n);
using SquaredL2Fn = double (*)(const double* a, const double* b, std::size_t n);
// out[r] = || query - entries[r, :] ||^2 for a row-major rows x dim table.
using SquaredL2RowsFn = void (*)(const double* query, const double* entries,
                                 std::size_t rows, std::size_t dim, double* out);
// y += alpha * x
using AxpyFn = void (*)(double alpha, const double* x, double* y, std::size_t n);

struct KernelSet {
    Isa isa;
    const char* name;
    DotFn dot;
    SquaredL2Fn squared_l2;
    SquaredL2RowsFn squared_l2_rows;
    AxpyFn axpy;
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_l2(const double* a, const double* b, std::size_t n);
void squared_l2_rows(const double* query, const double* entries, std::size_t rows,
                     std::size_t dim, double* out);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

// True when the variant was compiled in and the CPU supports it.
bool available(Isa isa);
std::vector<Isa> available_isas();

// Kernel table for a specific variant; throws ContractViolation if unavailable.
const KernelSet& get(Isa isa);

// Currently selected kernel table.
const KernelSet& active();

// Overrides the selection (tests, benchmarking). Not thread-safe with
// concurrent kernel use.
void select(Isa isa);

std::string_view isa_name(Isa isa);

}  // namespace switchcodec::kernels
