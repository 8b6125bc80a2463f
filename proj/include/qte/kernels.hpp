#pragma once

#include <cstddef>

// Arithmetic inner loops used by the estimator and the simulation harness.
// Each kernel has a scalar reference implementation and an AVX2 variant;
// dispatch picks the widest one the CPU supports at first use.

namespace qte::kernels {

struct PairMoments {
    double sum_a = 0.0;
    double sum_b = 0.0;
    double sum_aa = 0.0;
    double sum_bb = 0.0;
    double sum_ab = 0.0;
};

// First and second raw moments of two parallel arrays.
PairMoments pair_moments(const double* a, const double* b, std::size_t n);

// dst[i] += src[i]
void vec_add(double* dst, const double* src, std::size_t n);

// v[i] = min(max(v[i], lo), hi)
void clamp_array(double* v, std::size_t n, double lo, double hi);

enum class Backend { scalar, avx2 };

Backend active_backend();
const char* backend_name();

// Test hook: pin the backend regardless of CPU support. Forcing avx2 on a
// CPU without it is undefined.
void force_backend(Backend b);
void reset_backend();

namespace detail {
PairMoments pair_moments_scalar(const double* a, const double* b, std::size_t n);
void vec_add_scalar(double* dst, const double* src, std::size_t n);
void clamp_array_scalar(double* v, std::size_t n, double lo, double hi);
#if defined(__x86_64__)
PairMoments pair_moments_avx2(const double* a, const double* b, std::size_t n);
void vec_add_avx2(double* dst, const double* src, std::size_t n);
void clamp_array_avx2(double* v, std::size_t n, double lo, double hi);
#endif
}  // namespace detail

}  // namespace qte::kernels
