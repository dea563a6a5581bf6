#include "embedopt/sampler.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "embedopt/errors.hpp"
#include "embedopt/io.hpp"

namespace embedopt {

std::string_view to_string(SamplerMode m) { return m == SamplerMode::af3 ? "af3" : "deterministic"; }
std::string_view to_string(InitMode m) { return m == InitMode::marginal ? "marginal" : "standard"; }
std::string_view to_string(CoordSigma m) { return m == CoordSigma::current ? "current" : "previous"; }

SamplerMode sampler_mode_from_string(std::string_view s) {
  if (s == "deterministic") return SamplerMode::deterministic;
  if (s == "af3") return SamplerMode::af3;
  throw InvalidArgument("unknown sampler mode: " + std::string(s));
}

InitMode init_mode_from_string(std::string_view s) {
  if (s == "standard") return InitMode::standard;
  if (s == "marginal") return InitMode::marginal;
  throw InvalidArgument("unknown init mode: " + std::string(s));
}

CoordSigma coord_sigma_from_string(std::string_view s) {
  if (s == "previous") return CoordSigma::previous;
  if (s == "current") return CoordSigma::current;
  throw InvalidArgument("unknown coordinate sigma mode: " + std::string(s));
}

void Af3SamplerParams::validate() const {
  require(gamma >= 0.0 && std::isfinite(gamma), "af3 gamma must be non-negative");
  require(std::isfinite(gamma_min), "af3 gamma_min must be finite");
  require(rho_noise > 0.0 && std::isfinite(rho_noise), "af3 noise scale must be positive");
  require(eta_scale > 0.0 && std::isfinite(eta_scale), "af3 step scale must be positive");
}

std::size_t TrajectoryRecord::skip_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.skipped ? 1 : 0;
  return n;
}

void TrajectoryRecord::write_csv(std::ostream& out) const {
  out << "step,sigma,F,grad_norm,embed_drift\n";
  for (const auto& e : entries) {
    out << e.step << ',' << format_double(e.sigma) << ',';
    if (!std::isnan(e.surrogate_reward)) out << format_double(e.surrogate_reward);
    out << ',' << format_double(e.grad_norm) << ',' << format_double(e.embed_drift) << '\n';
  }
}

std::size_t snapshot_stride_for(std::size_t num_steps) {
  return num_steps >= 100 ? num_steps / 100 : 1;
}

State advance(const State& x_t, const Vector& direction, double eta) {
  State out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) out.coords[i] += eta * direction[i];
  return out;
}

State euler_step(const State& x_t, const State& x_hat, double sigma_t, double sigma_prev,
                 DenominatorMode mode) {
  require(x_t.size() == x_hat.size(), "euler_step: shape mismatch");
  const double eta = step_fraction(sigma_t, sigma_prev, mode);
  Vector direction(x_t.size());
  for (std::size_t i = 0; i < direction.size(); ++i) direction[i] = x_hat.coords[i] - x_t.coords[i];
  return advance(x_t, direction, eta);
}

std::pair<State, double> af3_noise_inflate(const State& x_t, double sigma_t,
                                           const Af3SamplerParams& params, Rng& rng) {
  params.validate();
  const double g1 = params.gamma + 1.0;
  const double scale = params.rho_noise * std::sqrt(g1 * g1 - 1.0) * sigma_t;
  std::normal_distribution<double> normal(0.0, 1.0);
  State out = x_t;
  for (double& v : out.coords) v += scale * normal(rng);
  return {std::move(out), g1 * sigma_t};
}

std::pair<State, TrajectoryRecord> integrate(const DenoiserModel& model, const Embedding& c_init,
                                             const NoiseSchedule& schedule,
                                             const SamplerOptions& options, Rng& rng,
                                             const StepFunction& step) {
  if (options.mode == SamplerMode::af3) options.af3.validate();
  const std::size_t T = schedule.num_steps();
  const double sigma_max = schedule.sigma_max();

  State x(model.dim());
  if (options.init == InitMode::marginal) {
    x = model.sample_marginal(c_init, sigma_max, rng);
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : x.coords) v = sigma_max * normal(rng);
  }

  TrajectoryRecord record;
  record.snapshot_stride = snapshot_stride_for(T);
  record.entries.reserve(T + 1);
  for (std::size_t t = T; t >= 1; --t) {
    double sigma_t = schedule.sigma(t);
    const double sigma_prev = schedule.sigma(t - 1);
    double eta_scale = 1.0;
    if (options.mode == SamplerMode::af3) {
      eta_scale = options.af3.eta_scale;
      if (sigma_prev > options.af3.gamma_min) {
        auto [noised, inflated] = af3_noise_inflate(x, sigma_t, options.af3, rng);
        x = std::move(noised);
        sigma_t = inflated;
      }
    }
    const double eta = step_fraction(sigma_t, sigma_prev, options.denominator) * eta_scale;
    StepOutput out = step(StepInput{t, x, sigma_t, sigma_prev, eta});
    out.entry.step = t;
    out.entry.sigma = sigma_t;
    if ((T - t) % record.snapshot_stride == 0) out.entry.snapshot = x;
    record.entries.push_back(std::move(out.entry));
    x = std::move(out.x_prev);
  }
  return {std::move(x), std::move(record)};
}

SampleResult sample_unguided(const DenoiserModel& model, const Embedding& c,
                             const NoiseSchedule& schedule, Rng& rng,
                             const SamplerOptions& options, const Reward* log_reward) {
  require(c.same_layout(model.embedding_layout()), "embedding layout does not match model");
  auto step = [&](const StepInput& in) {
    const State x_hat = model.denoise(in.x_t, c, in.sigma_t);
    StepOutput out;
    out.entry.surrogate_reward =
        log_reward ? log_reward->value(x_hat) : std::numeric_limits<double>::quiet_NaN();
    Vector direction(x_hat.size());
    for (std::size_t i = 0; i < direction.size(); ++i)
      direction[i] = x_hat.coords[i] - in.x_t.coords[i];
    out.x_prev = advance(in.x_t, direction, in.eta);
    return out;
  };
  auto [x0, record] = integrate(model, c, schedule, options, rng, step);
  TrajectoryEntry terminal;
  terminal.step = 0;
  terminal.sigma = 0.0;
  terminal.surrogate_reward =
      log_reward ? log_reward->value(x0) : std::numeric_limits<double>::quiet_NaN();
  terminal.snapshot = x0;
  record.entries.push_back(std::move(terminal));
  return {std::move(x0), std::move(record)};
}

}  // namespace embedopt
