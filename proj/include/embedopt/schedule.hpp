#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace embedopt {

enum class ScheduleKind { linear, power };

// Which noise level divides the step: sigma_t (Euler form, default) or
// sigma_{t-1}.
enum class DenominatorMode { current, previous };

std::string_view to_string(ScheduleKind kind);
std::string_view to_string(DenominatorMode mode);
ScheduleKind schedule_kind_from_string(std::string_view s);
DenominatorMode denominator_mode_from_string(std::string_view s);

/// Discrete noise grid sigma_0 < sigma_1 < ... < sigma_T. Index t = T is the
/// start of sampling; t = 0 is the clean end (sigma_0 = 0 for both builders).
class NoiseSchedule {
 public:
  ScheduleKind kind() const { return kind_; }
  std::size_t num_steps() const { return sigmas_.size() - 1; }
  const std::vector<double>& sigma_values() const { return sigmas_; }
  double sigma(std::size_t t) const { return sigmas_.at(t); }
  double sigma_max() const { return sigmas_.back(); }

  friend NoiseSchedule build_linear_schedule(std::size_t, double);
  friend NoiseSchedule build_power_schedule(std::size_t, double, double, double);

 private:
  NoiseSchedule(ScheduleKind kind, std::vector<double> sigmas)
      : kind_(kind), sigmas_(std::move(sigmas)) {}

  ScheduleKind kind_;
  std::vector<double> sigmas_;
};

/// sigma_t = sigma_max * t / T.
NoiseSchedule build_linear_schedule(std::size_t num_steps, double sigma_max);

/// Karras-style grid: sigma_1..sigma_T interpolate linearly between
/// sigma_min^(1/rho) and sigma_max^(1/rho) and are raised to rho; sigma_0 = 0
/// is prepended. Endpoints are pinned exactly. Requires num_steps >= 2.
NoiseSchedule build_power_schedule(std::size_t num_steps, double sigma_min, double sigma_max,
                                   double rho_exp = 7.0);

/// (sigma_t - sigma_prev) / sigma_t, or / sigma_prev in previous mode.
double step_fraction(double sigma_t, double sigma_prev,
                     DenominatorMode mode = DenominatorMode::current);

}  // namespace embedopt
