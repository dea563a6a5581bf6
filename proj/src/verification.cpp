#include "embedopt/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "embedopt/errors.hpp"
#include "embedopt/io.hpp"
#include "embedopt/kernels.hpp"

namespace embedopt {

Vector fd_gradient(const ScalarFunction& f, std::span<const double> point, double h) {
  require(h > 0.0 && std::isfinite(h), "fd_gradient: step must be positive");
  Vector p(point.begin(), point.end());
  Vector grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double up = f(p);
    p[i] = orig - h;
    const double down = f(p);
    p[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw OracleFailure("fd_gradient: non-finite function value at coordinate " +
                          std::to_string(i));
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double fd_step(std::span<const double> point) {
  return 1e-5 * (1.0 + std::sqrt(simd::squared_norm(point)));
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  require(a.size() == b.size(), "relative_error: size mismatch");
  const double num = std::sqrt(simd::squared_distance(a, b));
  return num / std::max(std::sqrt(simd::squared_norm(b)), floor);
}

Posterior conjugate_posterior(double prior_mean, double prior_var, double y, double tau2, double w) {
  require(prior_var > 0.0 && tau2 > 0.0 && w >= 0.0, "conjugate_posterior: invalid parameters");
  const double precision = 1.0 / prior_var + w / tau2;
  const double var = 1.0 / precision;
  return {var * (prior_mean / prior_var + w * y / tau2), var};
}

MonotonicityReport check_monotone_surrogate(const TrajectoryRecord& trajectory, double tol) {
  require(tol > 0.0, "monotonicity tolerance must be positive");
  MonotonicityReport report;
  report.tol = tol;
  const auto& e = trajectory.entries;
  for (const auto& entry : e)
    if (!std::isfinite(entry.surrogate_reward))
      throw InvalidTrajectory("trajectory is missing F at step " + std::to_string(entry.step));
  for (std::size_t i = 1; i < e.size(); ++i) {
    ++report.total_steps;
    const double drop = e[i - 1].surrogate_reward - e[i].surrogate_reward;
    if (drop > tol) {
      ++report.violations;
      report.max_violation_magnitude = std::max(report.max_violation_magnitude, drop);
    }
  }
  return report;
}

std::size_t TaylorGapReport::exact_count() const {
  return static_cast<std::size_t>(std::count(exact.begin(), exact.end(), true));
}

double TaylorGapReport::max_gap() const {
  double m = 0.0;
  for (double g : gap_full) m = std::max(m, g);
  for (double g : gap_half) m = std::max(m, g);
  return m;
}

TaylorGapReport taylor_gap_scaling(const DenoiserModel& model, const Reward& reward,
                                   const std::vector<TaylorProbe>& probes, double alpha,
                                   EmbedNormMode norm_mode) {
  require(alpha >= 0.0, "taylor_gap_scaling: alpha must be non-negative");
  TaylorGapReport report;
  auto gap = [&](const TaylorProbe& p, double a) {
    const State actual =
        embedopt_step(model, reward, p.x, p.c, p.sigma_t, p.sigma_prev, a, norm_mode).x_prev;
    const State predicted =
        taylor_predicted_step(model, reward, p.x, p.c, p.sigma_t, p.sigma_prev, a, norm_mode);
    return std::sqrt(simd::squared_distance(actual.coords, predicted.coords));
  };
  for (const auto& p : probes) {
    const double full = gap(p, alpha);
    const double half = gap(p, alpha / 2.0);
    const bool exact = full < 1e-14 && half < 1e-14;
    report.gap_full.push_back(full);
    report.gap_half.push_back(half);
    report.exact.push_back(exact);
    if (!exact) report.ratios.push_back(full / half);
  }
  if (report.ratios.empty()) {
    report.median_ratio = std::numeric_limits<double>::quiet_NaN();
  } else {
    std::vector<double> sorted = report.ratios;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    report.median_ratio = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }
  return report;
}

std::string Histogram::to_csv() const {
  std::string out = "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < counts.size(); ++b)
    out += format_double(edges[b]) + ',' + format_double(edges[b + 1]) + ',' +
           std::to_string(counts[b]) + '\n';
  return out;
}

SampleSummary summarize_samples(const std::vector<State>& samples, std::size_t bins,
                                std::size_t histogram_coordinate) {
  require(samples.size() >= 2, "summarize_samples needs at least two samples");
  require(bins >= 1, "histogram needs at least one bin");
  const std::size_t D = samples.front().size();
  require(histogram_coordinate < D, "histogram coordinate out of range");
  for (const auto& s : samples) require(s.size() == D, "samples have inconsistent dimensions");

  const double n = static_cast<double>(samples.size());
  SampleSummary out;
  out.mean.assign(D, 0.0);
  out.stddev.assign(D, 0.0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < D; ++i) out.mean[i] += s.coords[i];
  for (double& m : out.mean) m /= n;
  for (const auto& s : samples)
    for (std::size_t i = 0; i < D; ++i) {
      const double d = s.coords[i] - out.mean[i];
      out.stddev[i] += d * d;
    }
  for (double& v : out.stddev) v = std::sqrt(v / (n - 1.0));

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s.coords[histogram_coordinate]);
    hi = std::max(hi, s.coords[histogram_coordinate]);
  }
  Histogram& h = out.histogram;
  h.counts.assign(bins, 0);
  h.edges.resize(bins + 1);
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 0.0;
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.edges.back() = hi;
  for (const auto& s : samples) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>((s.coords[histogram_coordinate] - lo) / width);
      b = std::min(b, bins - 1);
    }
    ++h.counts[b];
  }
  return out;
}

}  // namespace embedopt
