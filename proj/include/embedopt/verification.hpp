#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "embedopt/embedding.hpp"
#include "embedopt/models.hpp"
#include "embedopt/rewards.hpp"
#include "embedopt/sampler.hpp"
#include "embedopt/steering.hpp"

namespace embedopt {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(p + h e_i) - f(p - h e_i)) / (2h).
Vector fd_gradient(const ScalarFunction& f, std::span<const double> point, double h);

/// The step used by every oracle comparison: 1e-5 * (1 + ||point||).
double fd_step(std::span<const double> point);

/// ||a - b|| / max(||b||, floor).
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-12);

struct Posterior {
  double mean;
  double var;
};

/// N(prior_mean, prior_var) prior, likelihood N(y | x, tau2) raised to w.
Posterior conjugate_posterior(double prior_mean, double prior_var, double y, double tau2, double w);

struct MonotonicityReport {
  std::size_t total_steps = 0;
  std::size_t violations = 0;
  double max_violation_magnitude = 0.0;
  double tol = 0.0;

  double violation_fraction() const {
    return total_steps ? static_cast<double>(violations) / static_cast<double>(total_steps) : 0.0;
  }
};

/// Counts consecutive entries with F_{t-1} < F_t - tol.
MonotonicityReport check_monotone_surrogate(const TrajectoryRecord& trajectory, double tol = 1e-9);

struct TaylorProbe {
  State x;
  Embedding c;
  double sigma_t;
  double sigma_prev;
};

struct TaylorGapReport {
  std::vector<double> gap_full;  // gap at alpha
  std::vector<double> gap_half;  // gap at alpha / 2
  std::vector<bool> exact;       // both gaps below 1e-14
  std::vector<double> ratios;    // gap(alpha) / gap(alpha/2), non-exact probes only
  double median_ratio = 0.0;     // NaN when every probe is exact
  std::size_t exact_count() const;
  double max_gap() const;
};

/// gap(a) = ||embedopt_step(a).x_prev - taylor_predicted_step(a)||, evaluated
/// at alpha and alpha / 2 for every probe.
TaylorGapReport taylor_gap_scaling(const DenoiserModel& model, const Reward& reward,
                                   const std::vector<TaylorProbe>& probes, double alpha,
                                   EmbedNormMode norm_mode = EmbedNormMode::rms_per_component);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
  /// Columns bin_left, bin_right, count.
  std::string to_csv() const;
};

struct SampleSummary {
  Vector mean;
  Vector stddev;  // n - 1 denominator
  Histogram histogram;  // of coordinate `histogram_coordinate`
};

SampleSummary summarize_samples(const std::vector<State>& samples, std::size_t bins = 60,
                                std::size_t histogram_coordinate = 0);

struct CheckResult {
  std::string name;
  bool passed;
  std::string detail;
};

/// Fast self-check of gradients, identities and reductions (the `verify`
/// subcommand).
std::vector<CheckResult> run_verification_suite();

}  // namespace embedopt
