#include "embedopt/schedule.hpp"

#include <cmath>
#include <string>

#include "embedopt/errors.hpp"

namespace embedopt {

std::string_view to_string(ScheduleKind kind) {
  return kind == ScheduleKind::linear ? "linear" : "power";
}

std::string_view to_string(DenominatorMode mode) {
  return mode == DenominatorMode::current ? "current" : "previous";
}

ScheduleKind schedule_kind_from_string(std::string_view s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "power") return ScheduleKind::power;
  throw InvalidArgument("unknown schedule kind: " + std::string(s));
}

DenominatorMode denominator_mode_from_string(std::string_view s) {
  if (s == "current") return DenominatorMode::current;
  if (s == "previous") return DenominatorMode::previous;
  throw InvalidArgument("unknown denominator mode: " + std::string(s));
}

NoiseSchedule build_linear_schedule(std::size_t num_steps, double sigma_max) {
  require(num_steps >= 1, "linear schedule needs at least one step");
  require(sigma_max > 0.0 && std::isfinite(sigma_max), "sigma_max must be positive and finite");
  std::vector<double> sigmas(num_steps + 1);
  const double T = static_cast<double>(num_steps);
  for (std::size_t t = 0; t <= num_steps; ++t) sigmas[t] = sigma_max * static_cast<double>(t) / T;
  sigmas.back() = sigma_max;
  return NoiseSchedule(ScheduleKind::linear, std::move(sigmas));
}

NoiseSchedule build_power_schedule(std::size_t num_steps, double sigma_min, double sigma_max,
                                   double rho_exp) {
  require(num_steps >= 2, "power schedule needs at least two steps to pin both endpoints");
  require(sigma_min > 0.0 && sigma_min < sigma_max && std::isfinite(sigma_max),
          "power schedule requires 0 < sigma_min < sigma_max");
  require(rho_exp > 0.0, "power schedule exponent must be positive");
  const double lo = std::pow(sigma_min, 1.0 / rho_exp);
  const double hi = std::pow(sigma_max, 1.0 / rho_exp);
  std::vector<double> sigmas(num_steps + 1, 0.0);
  const double span = static_cast<double>(num_steps - 1);
  for (std::size_t t = 1; t <= num_steps; ++t) {
    const double frac = static_cast<double>(t - 1) / span;
    sigmas[t] = std::pow(lo + frac * (hi - lo), rho_exp);
  }
  sigmas[1] = sigma_min;
  sigmas[num_steps] = sigma_max;
  for (std::size_t t = 1; t <= num_steps; ++t)
    require(sigmas[t] > sigmas[t - 1], "power schedule lost strict monotonicity");
  return NoiseSchedule(ScheduleKind::power, std::move(sigmas));
}

double step_fraction(double sigma_t, double sigma_prev, DenominatorMode mode) {
  require(sigma_prev >= 0.0, "sigma_prev must be non-negative");
  require(sigma_prev < sigma_t, "step_fraction requires sigma_prev < sigma_t");
  if (mode == DenominatorMode::current) return (sigma_t - sigma_prev) / sigma_t;
  if (sigma_prev == 0.0)
    throw DivisionByZero("step_fraction: previous-denominator mode with sigma_prev = 0");
  return (sigma_t - sigma_prev) / sigma_prev;
}

}  // namespace embedopt
