#include "qte/kernels.hpp"

#include <optional>

namespace qte::kernels {

namespace {

Backend detect() {
#if defined(__x86_64__)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return Backend::avx2;
#endif
    return Backend::scalar;
}

std::optional<Backend> forced;

Backend current() {
    if (forced) return *forced;
    static const Backend b = detect();
    return b;
}

}  // namespace

Backend active_backend() { return current(); }

const char* backend_name() {
    return current() == Backend::avx2 ? "avx2" : "scalar";
}

void force_backend(Backend b) { forced = b; }
void reset_backend() { forced.reset(); }

PairMoments pair_moments(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__)
    if (current() == Backend::avx2) return detail::pair_moments_avx2(a, b, n);
#endif
    return detail::pair_moments_scalar(a, b, n);
}

void vec_add(double* dst, const double* src, std::size_t n) {
#if defined(__x86_64__)
    if (current() == Backend::avx2) {
        detail::vec_add_avx2(dst, src, n);
        return;
    }
#endif
    detail::vec_add_scalar(dst, src, n);
}

void clamp_array(double* v, std::size_t n, double lo, double hi) {
#if defined(__x86_64__)
    if (current() == Backend::avx2) {
        detail::clamp_array_avx2(v, n, lo, hi);
        return;
    }
#endif
    detail::clamp_array_scalar(v, n, lo, hi);
}

}  // namespace qte::kernels
