#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>

#include "embedopt/kernels.hpp"
#include "embedopt/schedule.hpp"
#include "embedopt/tasks.hpp"
#include "embedopt/verification.hpp"

namespace embedopt {
namespace {

constexpr std::size_t kProbes = 20;
constexpr double kModelTol = 1e-5;
constexpr double kRewardTol = 1e-6;
constexpr double kAdjointTol = 1e-10;

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Vector gaussian_vector(std::size_t n, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

Embedding random_embedding(const Embedding& layout, double scale, Rng& rng) {
  return Embedding::unflatten(layout, gaussian_vector(layout.total_dim(), scale, rng));
}

double log_uniform(double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

struct ModelCase {
  std::string name;
  std::unique_ptr<DenoiserModel> model;
};

std::vector<ModelCase> model_cases(Rng& rng) {
  std::vector<ModelCase> cases;
  const Embedding layout = make_layout({{"single", 5}, {"pair", 4}});
  cases.push_back({"gaussian", std::make_unique<GaussianPriorModel>(
                                   AffineMeanMap::random(4, layout.total_dim(), 0.7, rng), 0.8, layout)});
  RandomMixtureSpec spec;
  cases.push_back({"mixture", std::make_unique<MixturePriorModel>(random_mixture_model(spec, layout, rng))});
  return cases;
}

// Max relative error of each Jacobian against central differences, plus
// the adjoint residual, over kProbes probes.
void check_model(const ModelCase& mc, Rng& rng, std::vector<CheckResult>& out) {
  const DenoiserModel& m = *mc.model;
  const Embedding& layout = m.embedding_layout();
  double err_x = 0.0, err_c = 0.0, err_jvp = 0.0, err_adj = 0.0;
  for (std::size_t p = 0; p < kProbes; ++p) {
    const Embedding c = random_embedding(layout, 1.0, rng);
    const double sigma = log_uniform(0.3, 3.0, rng);
    const State x = m.sample_marginal(c, sigma, rng);
    const Vector v = gaussian_vector(m.dim(), 1.0, rng);
    const Embedding u = random_embedding(layout, 1.0, rng);

    const ScalarFunction fx = [&](std::span<const double> xs) {
      return simd::dot(m.denoise(State(Vector(xs.begin(), xs.end())), c, sigma).coords, v);
    };
    const Vector gx = fd_gradient(fx, x.coords, fd_step(x.coords));
    err_x = std::max(err_x, relative_error(m.vjp_x(x, c, sigma, v), gx));

    const Vector cflat = c.flatten();
    const ScalarFunction fc = [&](std::span<const double> cs) {
      return simd::dot(m.denoise(x, Embedding::unflatten(layout, cs), sigma).coords, v);
    };
    const Vector gc = fd_gradient(fc, cflat, fd_step(cflat));
    err_c = std::max(err_c, relative_error(m.vjp_c(x, c, sigma, v).flatten(), gc));

    const double h = fd_step(cflat);
    Embedding cp = c, cm = c;
    cp.add_scaled(h, u);
    cm.add_scaled(-h, u);
    const State dp = m.denoise(x, cp, sigma), dm = m.denoise(x, cm, sigma);
    Vector dir(m.dim());
    for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = (dp.coords[i] - dm.coords[i]) / (2.0 * h);
    const Vector ju = m.jvp_c(x, c, sigma, u);
    err_jvp = std::max(err_jvp, relative_error(ju, dir));

    const double lhs = simd::dot(v, ju);
    const double rhs = m.vjp_c(x, c, sigma, v).dot(u);
    err_adj = std::max(err_adj, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  out.push_back({mc.name + ".vjp_x", err_x < kModelTol, fmt("max rel err %.3g", err_x)});
  out.push_back({mc.name + ".vjp_c", err_c < kModelTol, fmt("max rel err %.3g", err_c)});
  out.push_back({mc.name + ".jvp_c", err_jvp < kModelTol, fmt("max rel err %.3g", err_jvp)});
  out.push_back({mc.name + ".adjoint", err_adj < kAdjointTol, fmt("max residual %.3g", err_adj)});
}

void check_reward(const std::string& name, const Reward& r, const std::function<State(Rng&)>& draw,
                  Rng& rng, std::vector<CheckResult>& out) {
  double err = 0.0;
  for (std::size_t p = 0; p < kProbes; ++p) {
    const State x = draw(rng);
    const ScalarFunction f = [&](std::span<const double> xs) {
      return r.value(State(Vector(xs.begin(), xs.end())));
    };
    const Vector g = fd_gradient(f, x.coords, fd_step(x.coords));
    err = std::max(err, relative_error(r.value_and_grad(x).grad, g));
  }
  out.push_back({name + ".grad", err < kRewardTol, fmt("max rel err %.3g", err)});
}

double max_abs_diff(const State& a, const State& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.coords[i] - b.coords[i]));
  return m;
}

double trajectory_diff(const SteeringResult& a, const SteeringResult& b) {
  double m = max_abs_diff(a.x0, b.x0);
  const auto& ea = a.record.entries;
  const auto& eb = b.record.entries;
  if (ea.size() != eb.size()) return INFINITY;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    if (ea[i].snapshot.has_value() != eb[i].snapshot.has_value()) return INFINITY;
    if (ea[i].snapshot) m = std::max(m, max_abs_diff(*ea[i].snapshot, *eb[i].snapshot));
  }
  return m;
}

}  // namespace

std::vector<CheckResult> run_verification_suite() {
  std::vector<CheckResult> out;
  Rng rng(20240601);

  for (const auto& mc : model_cases(rng)) check_model(mc, rng, out);

  {
    const GaussianMeasurementReward r(gaussian_vector(4, 3.0, rng), 0.7, 1.3);
    check_reward("reward.gaussian", r, [](Rng& g) { return State(gaussian_vector(4, 3.0, g)); }, rng, out);
  }
  ToyTaskSpec dspec;
  Rng task_rng(7);
  const ToyTask dtask = build_toy_task(dspec, task_rng);
  const auto near_chain = [&](const ToyTask& t) {
    return [&t](Rng& g) {
      State x = t.target;
      for (double& v : x.coords) v += std::normal_distribution<double>(0.0, 1.0)(g);
      return x;
    };
  };
  check_reward("reward.distance", *dtask.reward, near_chain(dtask), rng, out);

  ToyTaskSpec mspec;
  mspec.kind = TaskKind::map;
  Rng map_rng(7);
  const ToyTask mtask = build_toy_task(mspec, map_rng);
  check_reward("reward.map", *mtask.reward, near_chain(mtask), rng, out);

  {
    const auto& mr = static_cast<const MapMSEReward&>(*mtask.reward);
    double worst = 0.0;
    for (std::size_t p = 0; p < kProbes; ++p) {
      const State x = near_chain(mtask)(rng);
      worst = std::max(worst, std::abs(mr.value(x) - 2.0 * (mr.correlation(x) - 1.0)));
    }
    out.push_back({"map.identity", worst < 1e-10, fmt("max |R - 2(cc-1)| %.3g", worst)});
    const double cc = mr.correlation(mtask.target), rv = mr.value(mtask.target);
    out.push_back({"map.self", std::abs(cc - 1.0) < 1e-10 && std::abs(rv) < 1e-10,
                   fmt("cc %.17g R %.3g", cc, rv)});
  }

  {
    const Embedding layout = make_layout({{"single", 3}, {"pair", 5}});
    const GaussianPriorModel affine(AffineMeanMap::random(4, layout.total_dim(), 0.7, rng), 0.6, layout);
    const GaussianMeasurementReward r(gaussian_vector(4, 3.0, rng), 1.0);
    double worst = 0.0;
    for (std::size_t p = 0; p < kProbes; ++p) {
      const Embedding c = random_embedding(layout, 1.0, rng);
      const double s = log_uniform(0.3, 3.0, rng);
      const State x = affine.sample_marginal(c, s, rng);
      const auto actual = embedopt_step(affine, r, x, c, s, 0.9 * s, 0.1, EmbedNormMode::rms_per_component);
      const State pred =
          taylor_predicted_step(affine, r, x, c, s, 0.9 * s, 0.1, EmbedNormMode::rms_per_component);
      worst = std::max(worst, max_abs_diff(actual.x_prev, pred));
    }
    out.push_back({"taylor.affine", worst < 1e-10, fmt("max gap %.3g", worst)});
  }
  {
    const Embedding layout = make_layout({{"single", 5}, {"pair", 4}});
    const MixturePriorModel mix = random_mixture_model(RandomMixtureSpec{}, layout, rng);
    const GaussianMeasurementReward r(gaussian_vector(mix.dim(), 3.0, rng), 1.0);
    std::vector<TaylorProbe> probes;
    for (std::size_t p = 0; p < 50; ++p) {
      const Embedding c = random_embedding(layout, 1.0, rng);
      const double s = log_uniform(0.3, 3.0, rng);
      probes.push_back({mix.sample_marginal(c, s, rng), c, s, 0.9 * s});
    }
    const TaylorGapReport rep = taylor_gap_scaling(mix, r, probes, 1e-2);
    const bool ok = rep.median_ratio >= 3.5 && rep.median_ratio <= 4.5;
    out.push_back({"taylor.mixture", ok, fmt("median gap ratio %.4g", rep.median_ratio)});
  }

  {
    const NoiseSchedule sched = build_power_schedule(60, 0.05, 40.0);
    SteeringConfig base;
    base.sampler.mode = SamplerMode::deterministic;
    const auto run = [&](SteeringConfig cfg) {
      Rng r(cfg.seed);
      return run_steering(*dtask.model, *dtask.reward, dtask.c_init, sched, cfg, r);
    };
    SteeringConfig none = base, emb = base, dps = base;
    none.method = Method::none;
    emb.method = Method::embedopt;
    emb.alpha = 0.0;
    dps.method = Method::dps;
    dps.alpha = 0.0;
    const SteeringResult ru = run(none);
    const double d_emb = trajectory_diff(run(emb), ru);
    const double d_dps = trajectory_diff(run(dps), ru);
    out.push_back({"reduction.embedopt_alpha0", d_emb <= 1e-12, fmt("max diff %.3g", d_emb)});
    out.push_back({"reduction.dps_w0", d_dps <= 1e-12, fmt("max diff %.3g", d_dps)});

    double d_af3 = 0.0;
    for (Method m : {Method::none, Method::embedopt, Method::dps}) {
      SteeringConfig det = base;
      det.method = m;
      det.alpha = 0.05;
      SteeringConfig af3 = det;
      af3.sampler.mode = SamplerMode::af3;
      af3.sampler.af3.gamma = 0.0;
      af3.sampler.af3.eta_scale = 1.0;
      af3.af3_coord_sigma = CoordSigma::current;
      d_af3 = std::max(d_af3, trajectory_diff(run(af3), run(det)));
    }
    out.push_back({"reduction.af3_gamma0", d_af3 <= 1e-12, fmt("max diff %.3g", d_af3)});
  }

  {
    const GaussianPriorModel model = scalar_gaussian_model(0.5);
    const GaussianMeasurementReward r(Vector{20.0}, 1.0);
    const NoiseSchedule sched = build_linear_schedule(1000, 1.0);
    std::size_t steps = 0, viol = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SteeringConfig cfg;
      cfg.method = Method::embedopt;
      cfg.alpha = 0.1;
      cfg.seed = seed;
      cfg.sampler.init = InitMode::marginal;
      Embedding c = model.embedding_layout();
      c.components()[0].values[0] = 5.0;
      Rng g(seed);
      const MonotonicityReport rep = check_monotone_surrogate(run_embedopt(model, r, c, sched, cfg, g).record);
      steps += rep.total_steps;
      viol += rep.violations;
    }
    const double frac = steps ? static_cast<double>(viol) / static_cast<double>(steps) : 0.0;
    out.push_back({"monotone.surrogate", frac <= 0.01, fmt("violating fraction %.4g", frac)});
  }
  return out;
}

}  // namespace embedopt
