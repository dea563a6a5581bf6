#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include "embedopt/embedding.hpp"
#include "embedopt/models.hpp"
#include "embedopt/rewards.hpp"
#include "embedopt/sampler.hpp"
#include "embedopt/schedule.hpp"

namespace embedopt {

enum class Method { none, embedopt, dps };
// sigma2w: alpha_t = sigma_t^2 * alpha (alpha acts as the likelihood weight w).
// l2_matched: guidance rescaled to ||x_hat - x_t|| and multiplied by alpha.
enum class DpsNormMode { sigma2w, l2_matched };
enum class EmbedNormMode { rms_per_component, none };

std::string_view to_string(Method m);
std::string_view to_string(DpsNormMode m);
std::string_view to_string(EmbedNormMode m);
Method method_from_string(std::string_view s);
DpsNormMode dps_norm_mode_from_string(std::string_view s);
EmbedNormMode embed_norm_mode_from_string(std::string_view s);

inline constexpr double kSkipThreshold = 1e-12;

struct SteeringConfig {
  Method method = Method::embedopt;
  double alpha = 0.1;
  DpsNormMode dps_norm = DpsNormMode::sigma2w;
  EmbedNormMode embed_norm = EmbedNormMode::rms_per_component;
  SamplerOptions sampler{};
  // EmbedOpt: reuse x_hat(x_t, c_t) for the coordinate step instead of
  // re-evaluating at the updated embedding (one denoiser call per step).
  bool reuse_denoiser_eval = false;
  CoordSigma af3_coord_sigma = CoordSigma::previous;
  std::uint64_t seed = 0;

  void validate() const;
};

struct NormalizedGradient {
  Embedding direction;
  std::vector<double> rms;      // per component, before normalization
  std::vector<bool> skipped;    // component RMS below kSkipThreshold
  bool any_skipped() const;
};

/// Divides each component by its own RMS; degenerate components become zero.
NormalizedGradient rms_normalize(const Embedding& grad);

/// Per-step settings the samplers derive from SteeringConfig and the
/// schedule. Defaults reproduce the deterministic Euler step.
struct StepOptions {
  DenominatorMode denominator = DenominatorMode::current;
  double eta_scale = 1.0;
  // Noise level for the coordinate-step denoiser call; NaN means sigma_t.
  double coord_sigma = std::numeric_limits<double>::quiet_NaN();
  bool reuse_denoiser_eval = false;
};

struct EmbedOptStepResult {
  State x_prev;
  Embedding c_prev;
  Embedding applied_update;  // c_prev - c_t
  State x_hat;               // x_hat(x_t, c_t, sigma_t)
  TrajectoryEntry entry;
};

/// One EmbedOpt step: ascend R(x_hat(x_t, c)) in c, then take the Euler step
/// with the denoiser re-evaluated at the updated embedding.
EmbedOptStepResult embedopt_step(const DenoiserModel& model, const Reward& reward,
                                 const State& x_t, const Embedding& c_t, double sigma_t,
                                 double sigma_prev, double alpha, EmbedNormMode norm_mode,
                                 const StepOptions& opts = {});

struct DpsStepResult {
  State x_prev;
  State x_hat;
  TrajectoryEntry entry;
};

/// One DPS step: Euler step plus alpha_t J_x^T grad R(x_hat) in coordinates.
DpsStepResult dps_step(const DenoiserModel& model, const Reward& reward, const State& x_t,
                       const Embedding& c, double sigma_t, double sigma_prev, double alpha,
                       DpsNormMode norm_mode, const StepOptions& opts = {});

/// First-order prediction of embedopt_step's coordinate update:
/// x_t + eta [x_hat - x_t + J_c(delta_c)], delta_c being the update the step
/// actually applied (so per-component adaptive rates are included).
State taylor_predicted_step(const DenoiserModel& model, const Reward& reward, const State& x_t,
                            const Embedding& c_t, double sigma_t, double sigma_prev, double alpha,
                            EmbedNormMode norm_mode, const StepOptions& opts = {});

struct SteeringResult {
  State x0;
  Embedding c_final;
  TrajectoryRecord record;
  std::size_t skipped_updates = 0;
};

SteeringResult run_embedopt(const DenoiserModel& model, const Reward& reward,
                            const Embedding& c_init, const NoiseSchedule& schedule,
                            const SteeringConfig& config, Rng& rng);

SteeringResult run_dps(const DenoiserModel& model, const Reward& reward, const Embedding& c,
                       const NoiseSchedule& schedule, const SteeringConfig& config, Rng& rng);

/// Dispatches on config.method (none runs the unguided sampler and logs F).
SteeringResult run_steering(const DenoiserModel& model, const Reward& reward,
                            const Embedding& c_init, const NoiseSchedule& schedule,
                            const SteeringConfig& config, Rng& rng);

}  // namespace embedopt
