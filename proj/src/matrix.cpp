#include "switchcodec/matrix.hpp"

#include <cmath>

namespace switchcodec {

bool Matrix::all_finite() const noexcept {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace switchcodec
