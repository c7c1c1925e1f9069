#if defined(__aarch64__)

#include <arm_neon.h>

#include "salt/kernels.hpp"

namespace salt::kernels {
namespace {

double dot_f32(const float* a, const float* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t va = vld1q_f32(a + i);
    const float32x4_t vb = vld1q_f32(b + i);
    acc0 = vfmaq_f64(acc0, vcvt_f64_f32(vget_low_f32(va)), vcvt_f64_f32(vget_low_f32(vb)));
    acc1 = vfmaq_f64(acc1, vcvt_high_f64_f32(va), vcvt_high_f64_f32(vb));
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return vaddvq_f64(vaddq_f64(acc0, acc1)) + tail;
}

void dot_f32_x4(const float* const* q, const float* row, std::size_t n, double* out) {
  for (int k = 0; k < 4; ++k) out[k] = dot_f32(q[k], row, n);
}

void axpy_f32(double w, const float* x, double* acc, std::size_t n) {
  const float64x2_t vw = vdupq_n_f64(w);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vx = vcvt_f64_f32(vld1_f32(x + i));
    vst1q_f64(acc + i, vfmaq_f64(vld1q_f64(acc + i), vw, vx));
  }
  for (; i < n; ++i) acc[i] = __builtin_fma(w, static_cast<double>(x[i]), acc[i]);
}

void sqdev_f32(const float* x, const double* mean, double* acc, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vcvt_f64_f32(vld1_f32(x + i)), vld1q_f64(mean + i));
    vst1q_f64(acc + i, vfmaq_f64(vld1q_f64(acc + i), d, d));
  }
  for (; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - mean[i];
    acc[i] = __builtin_fma(d, d, acc[i]);
  }
}

}  // namespace

namespace detail {
const KernelTable kNeonTable{Isa::neon, "neon", &dot_f32, &dot_f32_x4, &axpy_f32, &sqdev_f32};
}

}  // namespace salt::kernels

#endif
