#pragma once

#include <cstddef>

// Per-ISA kernel entry points. Only the variants enabled at configure time
// (SWITCHCODEC_HAVE_AVX2 / SWITCHCODEC_HAVE_NEON) are defined.

namespace switchcodec::kernels::avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_l2(const double* a, const double* b, std::size_t n);
void squared_l2_rows(const double* query, const double* entries, std::size_t rows,
                     std::size_t dim, double* out);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace switchcodec::kernels::avx2

namespace switchcodec::kernels::neon {
double dot(const double* a, const double* b, std::size_t n);
double squared_l2(const double* a, const double* b, std::size_t n);
void squared_l2_rows(const double* query, const double* entries, std::size_t rows,
                     std::size_t dim, double* out);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace switchcodec::kernels::neon
