// Compiled with -mavx2 for this translation unit only; callers must go
// through the dispatch layer.

#include "qte/kernels.hpp"

#if defined(__x86_64__)

#include <immintrin.h>

namespace qte::kernels::detail {

namespace {
inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}
}  // namespace

PairMoments pair_moments_avx2(const double* a, const double* b, std::size_t n) {
    __m256d sa = _mm256_setzero_pd();
    __m256d sb = _mm256_setzero_pd();
    __m256d saa = _mm256_setzero_pd();
    __m256d sbb = _mm256_setzero_pd();
    __m256d sab = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d va = _mm256_loadu_pd(a + i);
        __m256d vb = _mm256_loadu_pd(b + i);
        sa = _mm256_add_pd(sa, va);
        sb = _mm256_add_pd(sb, vb);
        saa = _mm256_fmadd_pd(va, va, saa);
        sbb = _mm256_fmadd_pd(vb, vb, sbb);
        sab = _mm256_fmadd_pd(va, vb, sab);
    }
    PairMoments m;
    m.sum_a = hsum(sa);
    m.sum_b = hsum(sb);
    m.sum_aa = hsum(saa);
    m.sum_bb = hsum(sbb);
    m.sum_ab = hsum(sab);
    for (; i < n; ++i) {
        m.sum_a += a[i];
        m.sum_b += b[i];
        m.sum_aa += a[i] * a[i];
        m.sum_bb += b[i] * b[i];
        m.sum_ab += a[i] * b[i];
    }
    return m;
}

void vec_add_avx2(double* dst, const double* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_loadu_pd(dst + i);
        __m256d s = _mm256_loadu_pd(src + i);
        _mm256_storeu_pd(dst + i, _mm256_add_pd(d, s));
    }
    for (; i < n; ++i) dst[i] += src[i];
}

void clamp_array_avx2(double* v, std::size_t n, double lo, double hi) {
    __m256d vlo = _mm256_set1_pd(lo);
    __m256d vhi = _mm256_set1_pd(hi);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d x = _mm256_loadu_pd(v + i);
        x = _mm256_min_pd(_mm256_max_pd(x, vlo), vhi);
        _mm256_storeu_pd(v + i, x);
    }
    for (; i < n; ++i) {
        double x = v[i];
        v[i] = x < lo ? lo : (x > hi ? hi : x);
    }
}

}  // namespace qte::kernels::detail

#endif  // __x86_64__
