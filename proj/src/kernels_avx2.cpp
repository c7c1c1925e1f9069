// Compiled with -mavx2 -mfma. Keep standard-library includes out of this
// translation unit so no AVX2-encoded inline functions leak to the linker.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "salt/kernels.hpp"

namespace salt::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Two 4-lane accumulators over 8-float strides, then a scalar tail. Every
// product of two floats is exact in double, so fma and mul+add agree.
double dot_f32(const float* a, const float* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                           _mm256_cvtps_pd(_mm256_castps256_ps128(vb)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                           _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)), acc1);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return hsum(_mm256_add_pd(acc0, acc1)) + tail;
}

// Same accumulation structure as dot_f32 per query, with the row loaded once.
void dot_f32_x4(const float* const* q, const float* row, std::size_t n, double* out) {
  __m256d a0[4], a1[4];
  for (int k = 0; k < 4; ++k) {
    a0[k] = _mm256_setzero_pd();
    a1[k] = _mm256_setzero_pd();
  }
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vr = _mm256_loadu_ps(row + i);
    const __m256d rlo = _mm256_cvtps_pd(_mm256_castps256_ps128(vr));
    const __m256d rhi = _mm256_cvtps_pd(_mm256_extractf128_ps(vr, 1));
    for (int k = 0; k < 4; ++k) {
      const __m256 vq = _mm256_loadu_ps(q[k] + i);
      a0[k] = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(vq)), rlo, a0[k]);
      a1[k] = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(vq, 1)), rhi, a1[k]);
    }
  }
  for (int k = 0; k < 4; ++k) {
    double tail = 0.0;
    for (std::size_t j = i; j < n; ++j) tail += static_cast<double>(q[k][j]) * static_cast<double>(row[j]);
    out[k] = hsum(_mm256_add_pd(a0[k], a1[k])) + tail;
  }
}

void axpy_f32(double w, const float* x, double* acc, std::size_t n) {
  const __m256d vw = _mm256_set1_pd(w);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(vw, vx, _mm256_loadu_pd(acc + i)));
  }
  for (; i < n; ++i) {
    const __m128d r = _mm_fmadd_sd(_mm_set_sd(w), _mm_set_sd(static_cast<double>(x[i])), _mm_set_sd(acc[i]));
    acc[i] = _mm_cvtsd_f64(r);
  }
}

void sqdev_f32(const float* x, const double* mean, double* acc, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_cvtps_pd(_mm_loadu_ps(x + i)), _mm256_loadu_pd(mean + i));
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(d, d, _mm256_loadu_pd(acc + i)));
  }
  for (; i < n; ++i) {
    const __m128d d = _mm_set_sd(static_cast<double>(x[i]) - mean[i]);
    acc[i] = _mm_cvtsd_f64(_mm_fmadd_sd(d, d, _mm_set_sd(acc[i])));
  }
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{Isa::avx2, "avx2", &dot_f32, &dot_f32_x4, &axpy_f32, &sqdev_f32};
}

}  // namespace salt::kernels

#endif
