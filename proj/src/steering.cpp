#include "embedopt/steering.hpp"

#include <cmath>
#include <string>

#include "embedopt/errors.hpp"
#include "embedopt/kernels.hpp"

namespace embedopt {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::none: return "none";
    case Method::embedopt: return "embedopt";
    case Method::dps: return "dps";
  }
  return "?";
}
std::string_view to_string(DpsNormMode m) { return m == DpsNormMode::sigma2w ? "sigma2w" : "l2_matched"; }
std::string_view to_string(EmbedNormMode m) {
  return m == EmbedNormMode::rms_per_component ? "rms_per_component" : "none";
}

Method method_from_string(std::string_view s) {
  if (s == "none") return Method::none;
  if (s == "embedopt") return Method::embedopt;
  if (s == "dps") return Method::dps;
  throw InvalidArgument("unknown steering method: " + std::string(s));
}
DpsNormMode dps_norm_mode_from_string(std::string_view s) {
  if (s == "sigma2w") return DpsNormMode::sigma2w;
  if (s == "l2_matched") return DpsNormMode::l2_matched;
  throw InvalidArgument("unknown DPS norm mode: " + std::string(s));
}
EmbedNormMode embed_norm_mode_from_string(std::string_view s) {
  if (s == "rms_per_component") return EmbedNormMode::rms_per_component;
  if (s == "none") return EmbedNormMode::none;
  throw InvalidArgument("unknown embedding norm mode: " + std::string(s));
}

void SteeringConfig::validate() const {
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be finite and non-negative");
  if (sampler.mode == SamplerMode::af3) sampler.af3.validate();
}

bool NormalizedGradient::any_skipped() const {
  for (bool s : skipped)
    if (s) return true;
  return false;
}

NormalizedGradient rms_normalize(const Embedding& grad) {
  require(grad.all_finite(), "rms_normalize: gradient must be finite");
  NormalizedGradient out{grad, {}, {}};
  for (auto& comp : out.direction.components()) {
    const double n = static_cast<double>(comp.values.size());
    const double rms = std::sqrt(simd::squared_norm(comp.values) / n);
    out.rms.push_back(rms);
    if (rms < kSkipThreshold) {
      std::fill(comp.values.begin(), comp.values.end(), 0.0);
      out.skipped.push_back(true);
    } else {
      for (double& v : comp.values) v /= rms;
      out.skipped.push_back(false);
    }
  }
  return out;
}

namespace {

double step_eta(double sigma_t, double sigma_prev, const StepOptions& opts) {
  return step_fraction(sigma_t, sigma_prev, opts.denominator) * opts.eta_scale;
}

Vector difference(const State& a, const State& b) {
  Vector d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.coords[i] - b.coords[i];
  return d;
}

}  // namespace

EmbedOptStepResult embedopt_step(const DenoiserModel& model, const Reward& reward,
                                 const State& x_t, const Embedding& c_t, double sigma_t,
                                 double sigma_prev, double alpha, EmbedNormMode norm_mode,
                                 const StepOptions& opts) {
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be finite and non-negative");
  const double eta = step_eta(sigma_t, sigma_prev, opts);

  EmbedOptStepResult out;
  out.x_hat = model.denoise(x_t, c_t, sigma_t);
  const RewardEval ev = reward.value_and_grad(out.x_hat);
  const Embedding grad = model.vjp_c(x_t, c_t, sigma_t, ev.grad);
  out.entry.surrogate_reward = ev.value;
  out.entry.grad_norm = grad.norm();

  out.applied_update = Embedding::zeros_like(c_t);
  if (norm_mode == EmbedNormMode::rms_per_component) {
    const NormalizedGradient normalized = rms_normalize(grad);
    out.entry.skipped = normalized.any_skipped();
    if (alpha != 0.0) out.applied_update.add_scaled(alpha, normalized.direction);
  } else if (out.entry.grad_norm < kSkipThreshold) {
    out.entry.skipped = true;
  } else if (alpha != 0.0) {
    out.applied_update.add_scaled(alpha, grad);
  }

  out.c_prev = c_t;
  if (alpha != 0.0) out.c_prev.add_scaled(1.0, out.applied_update);

  const double coord_sigma = std::isnan(opts.coord_sigma) ? sigma_t : opts.coord_sigma;
  const State target = opts.reuse_denoiser_eval ? out.x_hat
                                                : model.denoise(x_t, out.c_prev, coord_sigma);
  out.x_prev = advance(x_t, difference(target, x_t), eta);
  return out;
}

DpsStepResult dps_step(const DenoiserModel& model, const Reward& reward, const State& x_t,
                       const Embedding& c, double sigma_t, double sigma_prev, double alpha,
                       DpsNormMode norm_mode, const StepOptions& opts) {
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be finite and non-negative");
  const double eta = step_eta(sigma_t, sigma_prev, opts);

  DpsStepResult out;
  out.x_hat = model.denoise(x_t, c, sigma_t);
  const RewardEval ev = reward.value_and_grad(out.x_hat);
  const Vector grad = model.vjp_x(x_t, c, sigma_t, ev.grad);
  const double grad_norm = std::sqrt(simd::squared_norm(grad));
  out.entry.surrogate_reward = ev.value;
  out.entry.grad_norm = grad_norm;

  Vector direction = difference(out.x_hat, x_t);
  if (norm_mode == DpsNormMode::l2_matched && grad_norm < kSkipThreshold) {
    out.entry.skipped = true;
  } else if (alpha != 0.0) {
    const double rate = norm_mode == DpsNormMode::sigma2w
                            ? sigma_t * sigma_t * alpha
                            : alpha * std::sqrt(simd::squared_norm(direction)) / grad_norm;
    simd::axpy(rate, grad, direction);
  }
  out.x_prev = advance(x_t, direction, eta);
  return out;
}

State taylor_predicted_step(const DenoiserModel& model, const Reward& reward, const State& x_t,
                            const Embedding& c_t, double sigma_t, double sigma_prev, double alpha,
                            EmbedNormMode norm_mode, const StepOptions& opts) {
  require(std::isnan(opts.coord_sigma) && !opts.reuse_denoiser_eval,
          "taylor prediction linearizes the sigma_t re-evaluation; coord_sigma and reuse must be unset");
  const EmbedOptStepResult actual =
      embedopt_step(model, reward, x_t, c_t, sigma_t, sigma_prev, alpha, norm_mode, opts);
  Vector direction = model.jvp_c(x_t, c_t, sigma_t, actual.applied_update);
  for (std::size_t i = 0; i < direction.size(); ++i)
    direction[i] += actual.x_hat.coords[i] - x_t.coords[i];
  return advance(x_t, direction, step_eta(sigma_t, sigma_prev, opts));
}

namespace {

StepOptions step_options_for(const SteeringConfig& config, const StepInput& in) {
  StepOptions opts;
  opts.denominator = config.sampler.denominator;
  if (config.sampler.mode == SamplerMode::af3) {
    opts.eta_scale = config.sampler.af3.eta_scale;
    if (config.af3_coord_sigma == CoordSigma::previous) opts.coord_sigma = in.sigma_prev;
  }
  opts.reuse_denoiser_eval = config.reuse_denoiser_eval;
  return opts;
}

void append_terminal(SteeringResult& result, const DenoiserModel& model, const Reward& reward,
                     const Embedding& c_init) {
  TrajectoryEntry terminal;
  terminal.step = 0;
  terminal.sigma = 0.0;
  terminal.surrogate_reward = reward.value(model.denoise(result.x0, result.c_final, 0.0));
  terminal.embed_drift = (result.c_final - c_init).norm();
  terminal.snapshot = result.x0;
  result.record.entries.push_back(std::move(terminal));
}

}  // namespace

SteeringResult run_embedopt(const DenoiserModel& model, const Reward& reward,
                            const Embedding& c_init, const NoiseSchedule& schedule,
                            const SteeringConfig& config, Rng& rng) {
  require(config.method == Method::embedopt, "run_embedopt requires method = embedopt");
  config.validate();
  require(c_init.same_layout(model.embedding_layout()), "embedding layout does not match model");
  require(reward.dim() == model.dim(), "reward and model dimensions differ");

  Embedding c = c_init;
  auto step = [&](const StepInput& in) {
    EmbedOptStepResult r = embedopt_step(model, reward, in.x_t, c, in.sigma_t, in.sigma_prev,
                                         config.alpha, config.embed_norm,
                                         step_options_for(config, in));
    r.entry.embed_drift = (c - c_init).norm();
    c = std::move(r.c_prev);
    return StepOutput{std::move(r.x_prev), std::move(r.entry)};
  };
  auto [x0, record] = integrate(model, c_init, schedule, config.sampler, rng, step);
  SteeringResult result{std::move(x0), std::move(c), std::move(record), 0};
  result.skipped_updates = result.record.skip_count();
  append_terminal(result, model, reward, c_init);
  return result;
}

SteeringResult run_dps(const DenoiserModel& model, const Reward& reward, const Embedding& c,
                       const NoiseSchedule& schedule, const SteeringConfig& config, Rng& rng) {
  require(config.method == Method::dps, "run_dps requires method = dps");
  config.validate();
  require(c.same_layout(model.embedding_layout()), "embedding layout does not match model");
  require(reward.dim() == model.dim(), "reward and model dimensions differ");

  auto step = [&](const StepInput& in) {
    StepOptions opts = step_options_for(config, in);
    opts.coord_sigma = std::numeric_limits<double>::quiet_NaN();
    DpsStepResult r = dps_step(model, reward, in.x_t, c, in.sigma_t, in.sigma_prev, config.alpha,
                               config.dps_norm, opts);
    return StepOutput{std::move(r.x_prev), std::move(r.entry)};
  };
  auto [x0, record] = integrate(model, c, schedule, config.sampler, rng, step);
  SteeringResult result{std::move(x0), c, std::move(record), 0};
  result.skipped_updates = result.record.skip_count();
  append_terminal(result, model, reward, c);
  return result;
}

SteeringResult run_steering(const DenoiserModel& model, const Reward& reward,
                            const Embedding& c_init, const NoiseSchedule& schedule,
                            const SteeringConfig& config, Rng& rng) {
  switch (config.method) {
    case Method::embedopt: return run_embedopt(model, reward, c_init, schedule, config, rng);
    case Method::dps: return run_dps(model, reward, c_init, schedule, config, rng);
    case Method::none: break;
  }
  config.validate();
  SampleResult s = sample_unguided(model, c_init, schedule, rng, config.sampler, &reward);
  return SteeringResult{std::move(s.x0), c_init, std::move(s.record), 0};
}

}  // namespace embedopt
