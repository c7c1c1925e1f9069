#pragma once

// Inner-loop kernels with a scalar reference implementation and SIMD variants
// selected once at runtime. All kernels read 32-bit floats and accumulate in
// 64-bit doubles.
//
// Equivalence contract between ISAs:
//   axpy_f32 / sqdev_f32  bitwise identical (elementwise fused multiply-add)
//   dot_f32 / dot_f32_x4  equal up to summation order (relative ~1e-15)
// Within one ISA, dot_f32_x4 is bitwise identical to four dot_f32 calls.

#include <cstddef>
#include <string_view>

namespace salt::kernels {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  const char* name;
  // sum_i double(a[i]) * double(b[i])
  double (*dot_f32)(const float* a, const float* b, std::size_t n);
  // out[q] = dot_f32(queries[q], row, n) for q in [0, 4)
  void (*dot_f32_x4)(const float* const* queries, const float* row, std::size_t n, double* out);
  // acc[i] = fma(w, double(x[i]), acc[i])
  void (*axpy_f32)(double w, const float* x, double* acc, std::size_t n);
  // d = double(x[i]) - mean[i]; acc[i] = fma(d, d, acc[i])
  void (*sqdev_f32)(const float* x, const double* mean, double* acc, std::size_t n);
};

// Tables compiled into this binary. The AVX2/NEON tables exist only on their
// target architectures; supported() reports whether the CPU can run them.
const KernelTable& scalar_table();
bool supported(Isa isa);
const KernelTable& table(Isa isa);

// Best supported ISA, unless overridden with SALT_KERNELS=scalar|avx2|neon.
const KernelTable& active();

// Test hook: pin the active table. Throws std::invalid_argument if unsupported.
void force(Isa isa);

std::string_view isa_name(Isa isa);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2Table;
#endif
#if defined(__aarch64__)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace salt::kernels
