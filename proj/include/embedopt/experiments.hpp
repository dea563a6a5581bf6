#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "embedopt/schedule.hpp"
#include "embedopt/steering.hpp"
#include "embedopt/tasks.hpp"
#include "embedopt/verification.hpp"

namespace embedopt {

enum class ExperimentKind { synthetic_fig1, lr_sweep, step_scaling, single_run, verify };
std::string_view to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(std::string_view s);

/// Malformed config text: bad JSON, missing required field, wrong type,
/// unknown key or enum spelling.
class ConfigParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed config whose values cannot be run.
class ConfigValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::power;
  std::size_t num_steps = 200;
  double sigma_min = 0.05;  // power only
  double sigma_max = 40.0;
  double rho = 7.0;         // power only
  NoiseSchedule build() const;
  NoiseSchedule build(std::size_t steps) const;
};

/// The one-dimensional conjugate experiment.
struct SyntheticSpec {
  double prior_mean = 5.0;
  double prior_std = 0.5;
  double measurement = 20.0;
  double tau2 = 1.0;
  std::vector<double> dps_weights{1.0, 100.0};
  double embedopt_alpha = 0.1;
  std::vector<double> extra_alphas{0.05, 0.5, 5.0};
  double mean_tolerance_dps = 0.1;
  double mean_tolerance_embedopt = 0.5;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::single_run;
  std::filesystem::path output_dir;
  std::vector<std::uint64_t> seeds;
  std::size_t histogram_bins = 60;
  std::size_t jobs = 1;  // 0: one per hardware thread
  ScheduleSpec schedule;
  SamplerOptions sampler;
  CoordSigma coord_sigma = CoordSigma::previous;
  DpsNormMode dps_norm = DpsNormMode::l2_matched;
  EmbedNormMode embed_norm = EmbedNormMode::rms_per_component;
  bool reuse_denoiser_eval = false;
  SyntheticSpec synthetic;
  ToyTaskSpec task;
  std::uint64_t task_seed = 1000;  // the task for run seed s is built from task_seed + s
  std::vector<Method> methods{Method::embedopt, Method::dps};
  std::vector<double> alphas{0.01, 0.0316, 0.1, 0.316, 1.0};
  std::vector<std::size_t> step_counts{200, 100, 50, 20};
  double alpha_times_steps = 20.0;
  double scaling_metric_margin = 1.0;  // mean metric drop allowed at the reduced step count
  std::size_t scaling_reference_steps = 200;
  std::size_t scaling_check_steps = 50;
  std::vector<SteeringConfig> steering;  // single_run
  bool write_trajectories = true;        // single_run

  /// Resolved config as JSON text (every default filled in).
  std::string to_json() const;
  void validate() const;
  SteeringConfig steering_template() const;
};

/// Parses and validates; throws ConfigParseError or ConfigValidationError.
ExperimentConfig parse_config(const std::string& json_text);
/// Parses without the semantic checks, so command-line overrides can be
/// applied before validate().
ExperimentConfig parse_config_unchecked(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunSummary {
  std::string method;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::size_t num_steps = 0;
  double final_reward = 0.0;
  double metric = 0.0;
  double violations = 0.0;  // unsatisfied constraints (distance), NaN (map)
  std::size_t denoiser_evals = 0;
  std::size_t skipped_updates = 0;
  std::size_t nan_count = 0;
};

/// Runs one toy-task trajectory; method none ignores alpha.
RunSummary run_toy(const ExperimentConfig& cfg, Method method, double alpha, std::uint64_t seed,
                   std::size_t num_steps, SteeringResult* full = nullptr);

struct PanelSummary {
  std::string name;
  std::string file;
  double mean = 0.0;
  double stddev = 0.0;
  double oracle_mean = 0.0;
  double oracle_std = 0.0;
  double tolerance = 0.0;
  bool within_tolerance = false;
  std::size_t skipped_updates = 0;
};

struct Fig1Result {
  std::vector<PanelSummary> panels;  // four histogram panels
  std::vector<PanelSummary> extras;  // additional EmbedOpt alphas
};

struct SweepResult {
  std::vector<RunSummary> rows;      // method x alpha x seed
  std::vector<RunSummary> baseline;  // unguided, one per seed
};

struct ScalingResult {
  std::vector<RunSummary> rows;  // method x T x seed
  double reference_mean = 0.0;
  double check_mean = 0.0;
  bool within_margin = false;
};

// Each writes its artifacts and manifest.json into cfg.output_dir.
Fig1Result run_synthetic_fig1(const ExperimentConfig& cfg);
SweepResult run_lr_sweep(const ExperimentConfig& cfg);
ScalingResult run_step_scaling(const ExperimentConfig& cfg);
std::vector<RunSummary> run_single(const ExperimentConfig& cfg);
std::vector<CheckResult> run_verify(const ExperimentConfig& cfg);

std::string sweep_csv(const std::vector<RunSummary>& rows);
std::string scaling_csv(const std::vector<RunSummary>& rows, double alpha_times_steps);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int usage = 2;
inline constexpr int parse = 3;
inline constexpr int validation = 4;
inline constexpr int io = 5;
}  // namespace exit_code

struct ConfigOverrides {
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::size_t> jobs;
  std::optional<ExperimentKind> expected_kind;  // subcommand's kind
};

/// Loads, validates and dispatches. Errors are reported as one JSON
/// object on `err` and mapped to exit_code values.
int run_from_config(const std::filesystem::path& path, const ConfigOverrides& overrides,
                    std::ostream& log, std::ostream& err);

std::string git_describe();

}  // namespace embedopt
