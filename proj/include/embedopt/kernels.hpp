#pragma once
/**
 * Dense double-precision kernels used by the denoisers, rewards and map
 * renderer. Every kernel has a scalar reference implementation; on x86-64
 * hosts with AVX2+FMA an intrinsic variant is selected at first use.
 *
 * Selection can be pinned with the environment variable EMBEDOPT_SIMD
 * ("scalar" or "avx2") or programmatically with force_isa(). Variants agree
 * to rounding (summation order differs), never bit-for-bit.
 */

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace embedopt::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  // sum_i (a_i - b_i)^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
// Null when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels() noexcept;

bool isa_available(Isa isa) noexcept;
std::string_view isa_name(Isa isa) noexcept;

// Currently selected table.
const KernelTable& active() noexcept;
Isa active_isa() noexcept;
// Throws InvalidArgument if the ISA is unavailable on this host.
void force_isa(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> a) {
  return active().sum(a.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}
inline double squared_norm(std::span<const double> a) { return dot(a, a); }

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// y = M x
void gemv(const Matrix& m, std::span<const double> x, std::span<double> y);
// y += M^T v
void gemv_transpose_accumulate(const Matrix& m, std::span<const double> v, std::span<double> y,
                               double scale = 1.0);

}  // namespace embedopt::simd
