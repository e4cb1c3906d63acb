#include "switchcodec/kernels.hpp"

namespace switchcodec::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double squared_l2(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void squared_l2_rows(const double* query, const double* entries, std::size_t rows,
                     std::size_t dim, double* out) {
    for (std::size_t r = 0; r < rows; ++r) out[r] = squared_l2(query, entries + r * dim, dim);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace switchcodec::kernels::scalar
