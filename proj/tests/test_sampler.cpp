#include <doctest.h>

#include <cmath>
#include <sstream>

#include "embedopt/errors.hpp"
#include "embedopt/sampler.hpp"
#include "oracles.hpp"

using namespace embedopt;

namespace {

Embedding scalar_c(const DenoiserModel& m, double value) {
  Embedding c = m.embedding_layout();
  c.components()[0].values[0] = value;
  return c;
}

}  // namespace

TEST_CASE("euler step") {
  const State x(Vector{20.0}), xh(Vector{8.0});
  CHECK(euler_step(x, xh, 1.0, 0.9).coords[0] == doctest::Approx(18.8).epsilon(1e-14));
  CHECK(euler_step(x, xh, 1.0, 0.0).coords[0] == 8.0);
  CHECK(euler_step(x, x, 1.0, 0.5).coords[0] == 20.0);
  CHECK(euler_step(x, xh, 1.0, 0.5, DenominatorMode::previous).coords[0] == doctest::Approx(8.0));
  CHECK_THROWS_AS(euler_step(x, xh, 1.0, 0.0, DenominatorMode::previous), DivisionByZero);
}

TEST_CASE("af3 noise inflation") {
  Af3SamplerParams p;
  p.gamma = 0.8;
  p.rho_noise = 1.003;
  Rng rng(41);
  const State x(Vector(1, 0.0));
  const auto [once, sigma] = af3_noise_inflate(x, 1.0, p, rng);
  CHECK(sigma == doctest::Approx(1.8));

  // Injected noise std rho * sqrt((gamma+1)^2 - 1) and the variance bookkeeping.
  const double injected = 1.003 * std::sqrt(1.8 * 1.8 - 1.0);
  CHECK(injected == doctest::Approx(1.5012).epsilon(1e-4));
  std::normal_distribution<double> normal(0.0, 1.0);
  oracle::Vec added(100000), total(100000);
  for (std::size_t i = 0; i < added.size(); ++i) {
    const double x_true = 0.0;
    const double x_t = x_true + normal(rng);  // sigma_t = 1
    const double x_new = af3_noise_inflate(State(Vector{x_t}), 1.0, p, rng).first.coords[0];
    added[i] = x_new - x_t;
    total[i] = x_new - x_true;
  }
  CHECK(oracle::sample_std(added) == doctest::Approx(injected).epsilon(0.01));
  const double expect_var = 1.003 * 1.003 * (1.8 * 1.8 - 1.0) + 1.0;
  CHECK(oracle::sample_std(total) * oracle::sample_std(total) == doctest::Approx(expect_var).epsilon(0.02));

  p.gamma = 0.0;
  const auto [same, s0] = af3_noise_inflate(State(Vector{3.0}), 0.7, p, rng);
  CHECK(s0 == 0.7);
  CHECK(same.coords[0] == 3.0);
}

TEST_CASE("af3 parameters are validated") {
  Af3SamplerParams p;
  p.gamma = -0.1;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.eta_scale = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("single-step deterministic sampling collapses to one denoiser call") {
  const GaussianPriorModel g = scalar_gaussian_model(0.5);
  const Embedding c = scalar_c(g, 5.0);
  Rng rng(42);
  const auto r = sample_unguided(g, c, build_linear_schedule(1, 1.0), rng);
  REQUIRE(r.record.entries.front().snapshot.has_value());
  const State xT = *r.record.entries.front().snapshot;
  CHECK(r.x0.coords[0] == g.denoise(xT, c, 1.0).coords[0]);
}

TEST_CASE("unguided gaussian sampling reproduces the prior over 2000 seeds") {
  const GaussianPriorModel g = scalar_gaussian_model(0.5);
  const Embedding c = scalar_c(g, 5.0);
  const auto sched = build_linear_schedule(1000, 1.0);
  SamplerOptions opts;
  opts.init = InitMode::marginal;
  oracle::Vec xs;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    Rng rng(s);
    xs.push_back(sample_unguided(g, c, sched, rng, opts).x0.coords[0]);
  }
  CHECK(std::abs(oracle::mean(xs) - 5.0) < 0.05);
  CHECK(std::abs(oracle::sample_std(xs) - 0.5) < 0.05);
}

TEST_CASE("unguided mixture sampling matches ancestral mode occupancy") {
  const Embedding layout = make_layout({{"single", 1}});
  AffineMeanMap a = AffineMeanMap::identity(1), b = AffineMeanMap::identity(1);
  a.offset[0] = -10.0;
  b.offset[0] = 10.0;
  const MixturePriorModel mix({{0.5, a, 0.5}, {0.5, b, 0.5}}, layout);
  const auto sched = build_power_schedule(200, 0.01, 80.0, 7.0);
  int diffusion_left = 0, ancestral_left = 0;
  const int n = 2000;
  for (int s = 0; s < n; ++s) {
    Rng rng(s);
    diffusion_left += sample_unguided(mix, layout, sched, rng).x0.coords[0] < 0.0;
    Rng rng2(100000 + s);
    ancestral_left += mix.sample_prior(layout, rng2).coords[0] < 0.0;
  }
  CHECK(std::abs(diffusion_left / double(n) - 0.5) < 0.05);
  CHECK(std::abs(ancestral_left / double(n) - 0.5) < 0.05);
}

TEST_CASE("trajectory record layout and determinism") {
  const GaussianPriorModel g = scalar_gaussian_model(0.5);
  const Embedding c = scalar_c(g, 5.0);
  const GaussianMeasurementReward r(Vector{20.0}, 1.0);
  const auto sched = build_linear_schedule(250, 1.0);
  Rng a(7), b(7);
  const auto ra = sample_unguided(g, c, sched, a, {}, &r);
  const auto rb = sample_unguided(g, c, sched, b, {}, &r);
  CHECK(ra.x0 == rb.x0);
  CHECK(ra.record.entries.size() == 251);
  CHECK(ra.record.entries.front().step == 250);
  CHECK(ra.record.entries.back().step == 0);
  CHECK(ra.record.snapshot_stride == 2);
  CHECK(snapshot_stride_for(50) == 1);
  CHECK(snapshot_stride_for(1000) == 10);
  std::size_t snaps = 0;
  for (const auto& e : ra.record.entries) {
    snaps += e.snapshot.has_value();
    CHECK(std::isfinite(e.surrogate_reward));
    CHECK(e.embed_drift == 0.0);
  }
  CHECK(snaps == 126);
  CHECK(ra.record.skip_count() == 0);

  std::ostringstream os;
  ra.record.write_csv(os);
  const std::string csv = os.str();
  CHECK(csv.rfind("step,sigma,F,grad_norm,embed_drift\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 252);
}

TEST_CASE("af3 sampler with gamma 0 and unit step scale equals the deterministic sampler") {
  Rng mrng(43);
  const Embedding layout = make_layout({{"single", 3}});
  const MixturePriorModel mix = random_mixture_model(RandomMixtureSpec{}, layout, mrng);
  const auto sched = build_power_schedule(40, 0.05, 20.0, 7.0);
  SamplerOptions det, af3;
  af3.mode = SamplerMode::af3;
  af3.af3.gamma = 0.0;
  af3.af3.eta_scale = 1.0;
  Rng a(1), b(1);
  const auto ra = sample_unguided(mix, layout, sched, a, det);
  const auto rb = sample_unguided(mix, layout, sched, b, af3);
  CHECK(oracle::rel_err(ra.x0.coords, rb.x0.coords) <= 1e-12);
}

TEST_CASE("af3 gate inflates only while sigma_prev exceeds gamma_min") {
  const GaussianPriorModel g = scalar_gaussian_model(0.5);
  const Embedding c = scalar_c(g, 5.0);
  const auto sched = build_linear_schedule(10, 2.0);
  SamplerOptions opts;
  opts.mode = SamplerMode::af3;
  Rng rng(44);
  const auto r = sample_unguided(g, c, sched, rng, opts);
  for (const auto& e : r.record.entries) {
    if (e.step == 0) continue;
    const double sigma_t = sched.sigma(e.step), sigma_prev = sched.sigma(e.step - 1);
    CHECK(e.sigma == doctest::Approx(sigma_prev > 1.0 ? 1.8 * sigma_t : sigma_t));
  }
}
