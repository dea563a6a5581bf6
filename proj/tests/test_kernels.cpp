#include <doctest.h>

#include <random>
#include <vector>

#include "embedopt/errors.hpp"
#include "embedopt/kernels.hpp"
#include "embedopt/models.hpp"
#include "embedopt/rewards.hpp"
#include "oracles.hpp"

using namespace embedopt;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Restores the startup selection after a test pins an ISA.
struct IsaGuard {
  simd::Isa saved = simd::active_isa();
  ~IsaGuard() { simd::force_isa(saved); }
};

std::vector<const simd::KernelTable*> tables() {
  std::vector<const simd::KernelTable*> out{&simd::scalar_kernels()};
  if (const auto* t = simd::avx2_kernels()) out.push_back(t);
  return out;
}

}  // namespace

TEST_CASE("every kernel table matches long-double reference loops, including tails") {
  std::mt19937_64 rng(11);
  for (const auto* t : tables()) {
    CAPTURE(simd::isa_name(t->isa));
    for (std::size_t n = 0; n <= 67; ++n) {
      const auto a = random_vec(n, rng), b = random_vec(n, rng);
      long double dot = 0, sum = 0, sq = 0;
      for (std::size_t i = 0; i < n; ++i) {
        dot += (long double)a[i] * b[i];
        sum += a[i];
        sq += (long double)(a[i] - b[i]) * (a[i] - b[i]);
      }
      CHECK(t->dot(a.data(), b.data(), n) == doctest::Approx((double)dot).epsilon(1e-13).scale(10));
      CHECK(t->sum(a.data(), n) == doctest::Approx((double)sum).epsilon(1e-13).scale(10));
      CHECK(t->squared_distance(a.data(), b.data(), n) == doctest::Approx((double)sq).epsilon(1e-13).scale(10));
      auto y = b;
      t->axpy(0.37, a.data(), y.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(b[i] + 0.37 * a[i]).epsilon(1e-15));
    }
  }
}

TEST_CASE("avx2 and scalar variants agree to rounding on long vectors") {
  if (!simd::avx2_kernels()) {
    MESSAGE("avx2 variant unavailable on this host; equivalence not exercised");
    return;
  }
  std::mt19937_64 rng(12);
  const auto& s = simd::scalar_kernels();
  const auto& v = *simd::avx2_kernels();
  for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 15u, 16u, 17u, 1000u, 4099u}) {
    const auto a = random_vec(n, rng), b = random_vec(n, rng);
    const double scale = oracle::norm(a) * oracle::norm(b) + 1.0;
    CHECK(std::abs(s.dot(a.data(), b.data(), n) - v.dot(a.data(), b.data(), n)) <= 1e-13 * scale);
    CHECK(std::abs(s.sum(a.data(), n) - v.sum(a.data(), n)) <= 1e-13 * (n + 1.0));
    CHECK(std::abs(s.squared_distance(a.data(), b.data(), n) - v.squared_distance(a.data(), b.data(), n)) <=
          1e-13 * scale * 4);
  }
}

TEST_CASE("gemv and transposed accumulate match explicit loops") {
  std::mt19937_64 rng(13);
  simd::Matrix m(7, 13);
  m.data = random_vec(7 * 13, rng);
  const auto x = random_vec(13, rng), v = random_vec(7, rng);
  std::vector<double> y(7);
  simd::gemv(m, x, y);
  for (std::size_t i = 0; i < 7; ++i) {
    double r = 0;
    for (std::size_t j = 0; j < 13; ++j) r += m(i, j) * x[j];
    CHECK(y[i] == doctest::Approx(r).epsilon(1e-13));
  }
  std::vector<double> z(13, 1.0);
  simd::gemv_transpose_accumulate(m, v, z, 2.0);
  for (std::size_t j = 0; j < 13; ++j) {
    double r = 1.0;
    for (std::size_t i = 0; i < 7; ++i) r += 2.0 * m(i, j) * v[i];
    CHECK(z[j] == doctest::Approx(r).epsilon(1e-13));
  }
}

TEST_CASE("forcing an ISA switches the active table; unavailable ISAs are rejected") {
  IsaGuard guard;
  simd::force_isa(simd::Isa::scalar);
  CHECK(simd::active_isa() == simd::Isa::scalar);
  CHECK(simd::isa_name(simd::Isa::scalar) == "scalar");
  if (simd::isa_available(simd::Isa::avx2)) {
    simd::force_isa(simd::Isa::avx2);
    CHECK(simd::active_isa() == simd::Isa::avx2);
  } else {
    CHECK_THROWS_AS(simd::force_isa(simd::Isa::avx2), InvalidArgument);
  }
}

TEST_CASE("mixture denoiser and map renderer agree across ISAs") {
  IsaGuard guard;
  if (!simd::isa_available(simd::Isa::avx2)) return;
  Rng rng(14);
  const Embedding layout = make_layout({{"single", 9}, {"pair", 16}});
  const MixturePriorModel mix = random_mixture_model(RandomMixtureSpec{24}, layout, rng);
  const Embedding c = Embedding::unflatten(layout, random_vec(25, rng));
  const State x(random_vec(24, rng));
  const std::vector<double> v = random_vec(24, rng);
  MapGrid grid{{11, 9, 10}, {-5.0, -4.0, -4.5}, 1.0};

  simd::force_isa(simd::Isa::scalar);
  const State d_s = mix.denoise(x, c, 0.7);
  const Vector vc_s = mix.vjp_c(x, c, 0.7, v).flatten();
  const VoxelMap m_s = render_raw_map(x, grid, 1.5);
  simd::force_isa(simd::Isa::avx2);
  const State d_v = mix.denoise(x, c, 0.7);
  const Vector vc_v = mix.vjp_c(x, c, 0.7, v).flatten();
  const VoxelMap m_v = render_raw_map(x, grid, 1.5);

  CHECK(oracle::rel_err(d_v.coords, d_s.coords) < 1e-12);
  CHECK(oracle::rel_err(vc_v, vc_s) < 1e-12);
  CHECK(oracle::rel_err(m_v.values, m_s.values) < 1e-12);
}
