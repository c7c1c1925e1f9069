#include <cmath>

#include "salt/kernels.hpp"

namespace salt::kernels {
namespace {

double dot_f32(const float* a, const float* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

void dot_f32_x4(const float* const* queries, const float* row, std::size_t n, double* out) {
  for (int q = 0; q < 4; ++q) out[q] = dot_f32(queries[q], row, n);
}

void axpy_f32(double w, const float* x, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = std::fma(w, static_cast<double>(x[i]), acc[i]);
}

void sqdev_f32(const float* x, const double* mean, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - mean[i];
    acc[i] = std::fma(d, d, acc[i]);
  }
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::scalar, "scalar", &dot_f32, &dot_f32_x4, &axpy_f32, &sqdev_f32};
}

}  // namespace salt::kernels
