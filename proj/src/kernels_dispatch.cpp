#include <atomic>
#include <cstdlib>
#include <string>

#include "embedopt/errors.hpp"
#include "embedopt/kernels.hpp"

namespace embedopt::simd {

#if defined(EMBEDOPT_HAVE_AVX2)
const KernelTable* avx2_kernels_unchecked() noexcept;
#endif

namespace {

bool cpu_has_avx2() noexcept {
#if defined(EMBEDOPT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_selection() noexcept {
  const char* env = std::getenv("EMBEDOPT_SIMD");
  const std::string want = env ? env : "";
  if (want == "scalar") return &scalar_kernels();
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& selected() noexcept {
  static std::atomic<const KernelTable*> table{initial_selection()};
  return table;
}

}  // namespace

const KernelTable* avx2_kernels() noexcept {
#if defined(EMBEDOPT_HAVE_AVX2)
  if (cpu_has_avx2()) return avx2_kernels_unchecked();
#endif
  return nullptr;
}

bool isa_available(Isa isa) noexcept {
  return isa == Isa::scalar || avx2_kernels() != nullptr;
}

std::string_view isa_name(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

const KernelTable& active() noexcept { return *selected().load(std::memory_order_acquire); }

Isa active_isa() noexcept { return active().isa; }

void force_isa(Isa isa) {
  if (isa == Isa::scalar) {
    selected().store(&scalar_kernels(), std::memory_order_release);
    return;
  }
  const KernelTable* t = avx2_kernels();
  if (!t) throw InvalidArgument("AVX2 kernels are not available on this host");
  selected().store(t, std::memory_order_release);
}

void gemv(const Matrix& m, std::span<const double> x, std::span<double> y) {
  require(x.size() == m.cols && y.size() == m.rows, "gemv: shape mismatch");
  const KernelTable& k = active();
  for (std::size_t i = 0; i < m.rows; ++i) y[i] = k.dot(m.data.data() + i * m.cols, x.data(), m.cols);
}

void gemv_transpose_accumulate(const Matrix& m, std::span<const double> v, std::span<double> y,
                               double scale) {
  require(v.size() == m.rows && y.size() == m.cols, "gemv_transpose: shape mismatch");
  const KernelTable& k = active();
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double a = scale * v[i];
    if (a != 0.0) k.axpy(a, m.data.data() + i * m.cols, y.data(), m.cols);
  }
}

}  // namespace embedopt::simd
