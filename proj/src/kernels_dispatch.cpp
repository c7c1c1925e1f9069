#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "salt/kernels.hpp"

namespace salt::kernels {
namespace {

const KernelTable* select_default() {
  if (const char* env = std::getenv("SALT_KERNELS")) {
    const std::string want(env);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
      if (want == isa_name(isa) && supported(isa)) return &table(isa);
    }
  }
  if (supported(Isa::avx2)) return &table(Isa::avx2);
  if (supported(Isa::neon)) return &table(Isa::neon);
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{select_default()};
  return ptr;
}

}  // namespace

const KernelTable& scalar_table() { return detail::kScalarTable; }

bool supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw std::invalid_argument("kernel ISA not supported on this CPU: " + std::string(isa_name(isa)));
  }
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::avx2:
      return detail::kAvx2Table;
#endif
#if defined(__aarch64__)
    case Isa::neon:
      return detail::kNeonTable;
#endif
    default:
      return detail::kScalarTable;
  }
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void force(Isa isa) { current().store(&table(isa), std::memory_order_release); }

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

}  // namespace salt::kernels
