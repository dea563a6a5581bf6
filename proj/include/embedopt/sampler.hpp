#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "embedopt/embedding.hpp"
#include "embedopt/models.hpp"
#include "embedopt/rewards.hpp"
#include "embedopt/schedule.hpp"

namespace embedopt {

enum class SamplerMode { deterministic, af3 };

// Where x_T comes from. `standard` is N(0, sigma_T^2 I); `marginal` draws the
// model's own sigma_T marginal (prior sample plus sigma_T noise), which is
// the correct start when sigma_T does not dominate the data scale.
enum class InitMode { standard, marginal };

// Noise level for the coordinate-step denoiser call of the stochastic
// EmbedOpt sampler: sigma_{t-1} as the published algorithm writes it, or the
// (inflated) sigma_t used for the embedding gradient.
enum class CoordSigma { previous, current };

std::string_view to_string(SamplerMode m);
std::string_view to_string(InitMode m);
std::string_view to_string(CoordSigma m);
SamplerMode sampler_mode_from_string(std::string_view s);
InitMode init_mode_from_string(std::string_view s);
CoordSigma coord_sigma_from_string(std::string_view s);

/// AlphaFold-3 style stochastic sampler settings. gamma = 0 with
/// eta_scale = 1 reduces to the deterministic Euler sampler.
struct Af3SamplerParams {
  double gamma = 0.8;
  double gamma_min = 1.0;
  double rho_noise = 1.003;
  double eta_scale = 1.5;

  void validate() const;
};

struct SamplerOptions {
  SamplerMode mode = SamplerMode::deterministic;
  DenominatorMode denominator = DenominatorMode::current;
  InitMode init = InitMode::standard;
  Af3SamplerParams af3{};
};

struct TrajectoryEntry {
  std::size_t step = 0;            // t; the terminal entry has step 0
  double sigma = 0.0;              // noise level actually used (post inflation)
  double surrogate_reward = 0.0;   // F = R(x_hat(x_t, c_t, sigma_t)); NaN if not logged
  double grad_norm = 0.0;          // norm of the raw guidance gradient
  double embed_drift = 0.0;        // ||c_t - c_T||
  bool skipped = false;            // guidance update skipped (degenerate gradient)
  std::optional<State> snapshot;   // x_t, thinned
};

struct TrajectoryRecord {
  std::vector<TrajectoryEntry> entries;  // decreasing t
  std::size_t snapshot_stride = 1;

  std::size_t skip_count() const;
  /// Columns: step, sigma, F, grad_norm, embed_drift.
  void write_csv(std::ostream& out) const;
};

/// max(1, T / 100).
std::size_t snapshot_stride_for(std::size_t num_steps);

/// x_t + eta * (x_hat - x_t) with eta = step_fraction(sigma_t, sigma_prev).
State euler_step(const State& x_t, const State& x_hat, double sigma_t, double sigma_prev,
                 DenominatorMode mode = DenominatorMode::current);

/// Adds rho * sqrt((gamma + 1)^2 - 1) * sigma_t * eps and returns the state
/// with the amplified level (gamma + 1) * sigma_t.
std::pair<State, double> af3_noise_inflate(const State& x_t, double sigma_t,
                                           const Af3SamplerParams& params, Rng& rng);

struct StepInput {
  std::size_t t;
  const State& x_t;
  double sigma_t;     // after inflation, if any
  double sigma_prev;  // sigma_{t-1}
  double eta;         // step fraction times eta_scale
};

struct StepOutput {
  State x_prev;
  TrajectoryEntry entry;
};

using StepFunction = std::function<StepOutput(const StepInput&)>;

/// Runs t = T..1: draws x_T, applies the stochastic gate/inflation in af3
/// mode, calls `step`, and records snapshots. The caller appends any
/// terminal entry.
std::pair<State, TrajectoryRecord> integrate(const DenoiserModel& model, const Embedding& c_init,
                                             const NoiseSchedule& schedule,
                                             const SamplerOptions& options, Rng& rng,
                                             const StepFunction& step);

/// x_t + eta * direction, the single coordinate update every sampler shares.
State advance(const State& x_t, const Vector& direction, double eta);

struct SampleResult {
  State x0;
  TrajectoryRecord record;
};

/// Unguided probability-flow sampling. A reward, when given, is only
/// evaluated to log F; it never affects the trajectory.
SampleResult sample_unguided(const DenoiserModel& model, const Embedding& c,
                             const NoiseSchedule& schedule, Rng& rng,
                             const SamplerOptions& options = {},
                             const Reward* log_reward = nullptr);

}  // namespace embedopt
