#include <doctest.h>

#include <cmath>
#include <random>

#include "embedopt/errors.hpp"
#include "embedopt/models.hpp"
#include "oracles.hpp"

using namespace embedopt;

namespace {

Embedding scalar_c(const DenoiserModel& m, double value) {
  Embedding c = m.embedding_layout();
  c.components()[0].values[0] = value;
  return c;
}

Vector gaussian_vec(std::size_t n, double scale, Rng& rng) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (double& x : v) x = d(rng);
  return v;
}

struct MixtureFixture {
  Rng rng{21};
  Embedding layout = make_layout({{"single", 5}, {"pair", 4}});
  MixturePriorModel mix = random_mixture_model(RandomMixtureSpec{}, layout, rng);
};

}  // namespace

TEST_CASE("gaussian denoiser closed forms") {
  const GaussianPriorModel g = scalar_gaussian_model(0.5);
  const Embedding c = scalar_c(g, 5.0);
  CHECK(g.denoise(State(Vector{20.0}), c, 1.0).coords[0] == doctest::Approx(8.0).epsilon(1e-15));
  for (double s : {0.1, 1.0, 7.0}) CHECK(g.denoise(State(Vector{5.0}), c, s).coords[0] == 5.0);
  CHECK(g.denoise(State(Vector{20.0}), c, 0.0).coords[0] == 20.0);
}

TEST_CASE("score from denoiser") {
  const auto s = score_from_denoiser(State(Vector{8.0}), State(Vector{20.0}), 1.0);
  CHECK(s[0] == doctest::Approx(-15.0 / 1.25));
  CHECK(score_from_denoiser(State(Vector{3.0}), State(Vector{3.0}), 1.0)[0] == 0.0);
  CHECK(score_from_denoiser(State(Vector{8.0}), State(Vector{20.0}), 2.0)[0] == doctest::Approx(-3.0));
  CHECK_THROWS_AS(score_from_denoiser(State(Vector{8.0}), State(Vector{20.0}), 0.0), DivisionByZero);
}

TEST_CASE("gaussian jacobian products") {
  const GaussianPriorModel g = scalar_gaussian_model(0.5);
  const Embedding c = scalar_c(g, 5.0);
  const State x(Vector{20.0});
  CHECK(g.vjp_x(x, c, 1.0, Vector{1.0})[0] == doctest::Approx(0.2));
  CHECK(g.vjp_x(x, c, 0.0, Vector{1.0})[0] == 1.0);
  CHECK(g.vjp_c(x, c, 1.0, Vector{1.0}).flatten()[0] == doctest::Approx(0.8));
  CHECK(g.vjp_c(x, c, 1.0, Vector{0.0}).flatten()[0] == 0.0);
  CHECK(g.jvp_c(x, c, 1.0, scalar_c(g, 1.0))[0] == doctest::Approx(0.8));
  CHECK(g.jvp_c(x, c, 1.0, scalar_c(g, 0.0))[0] == 0.0);

  // Multi-dimensional: J_x = k I.
  Rng rng(3);
  const Embedding layout = make_layout({{"single", 3}});
  const GaussianPriorModel gm(AffineMeanMap::random(4, 3, 1.0, rng), 0.5, layout);
  const Vector v = gaussian_vec(4, 1.0, rng);
  const Vector jv = gm.vjp_x(State(gaussian_vec(4, 1.0, rng)), layout, 1.0, v);
  for (std::size_t i = 0; i < 4; ++i) CHECK(jv[i] == doctest::Approx(0.2 * v[i]));
}

TEST_CASE("mixture jacobians match central differences at 20 probes") {
  MixtureFixture f;
  const auto& m = f.mix;
  double worst_x = 0, worst_c = 0, worst_u = 0, worst_adj = 0;
  for (int p = 0; p < 20; ++p) {
    const Embedding c = Embedding::unflatten(f.layout, gaussian_vec(9, 1.0, f.rng));
    const double sigma = 0.3 + 2.0 * std::uniform_real_distribution<double>(0, 1)(f.rng);
    const State x = m.sample_marginal(c, sigma, f.rng);
    const Vector v = gaussian_vec(m.dim(), 1.0, f.rng);
    const Vector u = gaussian_vec(9, 1.0, f.rng);

    const auto fx = [&](const oracle::Vec& xs) { return oracle::dot(m.denoise(State(xs), c, sigma).coords, v); };
    worst_x = std::max(worst_x, oracle::rel_err(m.vjp_x(x, c, sigma, v), oracle::central_gradient(fx, x.coords)));

    const auto fc = [&](const oracle::Vec& cs) {
      return oracle::dot(m.denoise(x, Embedding::unflatten(f.layout, cs), sigma).coords, v);
    };
    worst_c = std::max(worst_c,
                       oracle::rel_err(m.vjp_c(x, c, sigma, v).flatten(), oracle::central_gradient(fc, c.flatten())));

    const auto fd = [&](const oracle::Vec& cs) { return m.denoise(x, Embedding::unflatten(f.layout, cs), sigma).coords; };
    const Vector ju = m.jvp_c(x, c, sigma, Embedding::unflatten(f.layout, u));
    worst_u = std::max(worst_u, oracle::rel_err(ju, oracle::central_directional(fd, c.flatten(), u)));

    const double lhs = oracle::dot(v, ju);
    const double rhs = oracle::dot(m.vjp_c(x, c, sigma, v).flatten(), u);
    worst_adj = std::max(worst_adj, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  CHECK(worst_x < 1e-5);
  CHECK(worst_c < 1e-5);
  CHECK(worst_u < 1e-5);
  CHECK(worst_adj < 1e-10);
}

TEST_CASE("mixture products are linear in the cotangent and tangent") {
  MixtureFixture f;
  const Embedding c = Embedding::unflatten(f.layout, gaussian_vec(9, 1.0, f.rng));
  const State x = f.mix.sample_marginal(c, 1.0, f.rng);
  for (double v : f.mix.vjp_c(x, c, 1.0, Vector(6, 0.0)).flatten()) CHECK(v == 0.0);
  for (double v : f.mix.jvp_c(x, c, 1.0, Embedding::zeros_like(f.layout))) CHECK(v == 0.0);
}

TEST_CASE("mixture responsibilities are normalized in log space") {
  MixtureFixture f;
  const Embedding c = f.layout;
  for (double scale : {1.0, 1e3, 1e6}) {
    State x(Vector(6, scale));
    const Vector r = f.mix.responsibilities(x, c, 0.5);
    double s = 0;
    for (double v : r) {
      CHECK(std::isfinite(v));
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    for (double v : f.mix.denoise(x, c, 0.5).coords) CHECK(std::isfinite(v));
  }
}

TEST_CASE("mixture denoiser equals the responsibility-weighted gaussian posterior means") {
  MixtureFixture f;
  const Embedding c = Embedding::unflatten(f.layout, gaussian_vec(9, 1.0, f.rng));
  const State x = f.mix.sample_marginal(c, 0.8, f.rng);
  const double sigma = 0.8;
  const auto& modes = f.mix.modes();
  // Direct evaluation with densities, no log-sum-exp.
  std::vector<double> w(modes.size());
  std::vector<oracle::Vec> means(modes.size());
  double total = 0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    means[k] = modes[k].mean_map.apply(c.flatten());
    const double var = modes[k].std * modes[k].std + sigma * sigma;
    double d2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (x.coords[i] - means[k][i]) * (x.coords[i] - means[k][i]);
    w[k] = modes[k].weight * std::pow(2 * M_PI * var, -0.5 * x.size()) * std::exp(-0.5 * d2 / var);
    total += w[k];
  }
  oracle::Vec expect(x.size(), 0.0);
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double s2 = modes[k].std * modes[k].std;
    const double kk = s2 / (s2 + sigma * sigma);
    for (std::size_t i = 0; i < x.size(); ++i)
      expect[i] += w[k] / total * (means[k][i] + kk * (x.coords[i] - means[k][i]));
  }
  CHECK(oracle::rel_err(f.mix.denoise(x, c, sigma).coords, expect) < 1e-12);
}

TEST_CASE("gaussian prior sampling matches its moments") {
  const GaussianPriorModel g = scalar_gaussian_model(0.5);
  const Embedding c = scalar_c(g, 5.0);
  Rng rng(99);
  oracle::Vec xs(100000);
  for (double& x : xs) x = g.sample_prior(c, rng).coords[0];
  CHECK(std::abs(oracle::mean(xs) - 5.0) < 0.01);
  CHECK(std::abs(oracle::sample_std(xs) - 0.5) < 0.01);
}

TEST_CASE("degenerate prior and degenerate mixture weights") {
  const GaussianPriorModel d = GaussianPriorModel::degenerate_for_testing(AffineMeanMap::identity(1), make_layout({{"single", 1}}));
  Rng rng(5);
  const Embedding c = scalar_c(d, 3.25);
  for (int i = 0; i < 10; ++i) CHECK(d.sample_prior(c, rng).coords[0] == 3.25);
  CHECK_THROWS_AS(GaussianPriorModel(AffineMeanMap::identity(1), 0.0, make_layout({{"single", 1}})), InvalidArgument);

  const Embedding layout = make_layout({{"single", 1}});
  AffineMeanMap a = AffineMeanMap::identity(1), b = AffineMeanMap::identity(1);
  a.offset[0] = -100.0;
  b.offset[0] = 100.0;
  const MixturePriorModel mix({{1.0, a, 0.5}, {0.0, b, 0.5}}, layout);
  for (int i = 0; i < 1000; ++i) CHECK(mix.sample_prior(layout, rng).coords[0] < 0.0);
}

TEST_CASE("shape mismatches are rejected") {
  MixtureFixture f;
  const Embedding wrong = make_layout({{"single", 5}});
  CHECK_THROWS_AS(f.mix.denoise(State(Vector(5, 0.0)), f.layout, 1.0), InvalidArgument);
  CHECK_THROWS_AS(f.mix.denoise(State(Vector(6, 0.0)), wrong, 1.0), InvalidArgument);
  CHECK_THROWS_AS(f.mix.vjp_x(State(Vector(6, 0.0)), f.layout, 1.0, Vector(5, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(f.mix.vjp_c(State(Vector(6, 0.0)), f.layout, 1.0, Vector(7, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(f.mix.jvp_c(State(Vector(6, 0.0)), f.layout, 1.0, wrong), InvalidArgument);
  const GaussianPriorModel g = scalar_gaussian_model(0.5);
  CHECK_THROWS_AS(g.denoise(State(Vector{1.0, 2.0}), g.embedding_layout(), 1.0), InvalidArgument);
}
