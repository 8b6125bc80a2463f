#include "qte/kernels.hpp"

#include <algorithm>

namespace qte::kernels::detail {

PairMoments pair_moments_scalar(const double* a, const double* b, std::size_t n) {
    PairMoments m;
    for (std::size_t i = 0; i < n; ++i) {
        m.sum_a += a[i];
        m.sum_b += b[i];
        m.sum_aa += a[i] * a[i];
        m.sum_bb += b[i] * b[i];
        m.sum_ab += a[i] * b[i];
    }
    return m;
}

void vec_add_scalar(double* dst, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void clamp_array_scalar(double* v, std::size_t n, double lo, double hi) {
    for (std::size_t i = 0; i < n; ++i) v[i] = std::clamp(v[i], lo, hi);
}

}  // namespace qte::kernels::detail
