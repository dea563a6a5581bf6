#include "embedopt/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "embedopt/errors.hpp"
#include "embedopt/io.hpp"
#include "embedopt/kernels.hpp"

#ifndef EMBEDOPT_GIT_DESCRIBE
#define EMBEDOPT_GIT_DESCRIBE "unknown"
#endif

namespace embedopt {

using nlohmann::json;

std::string git_describe() { return EMBEDOPT_GIT_DESCRIBE; }

namespace {

using Clock = std::chrono::steady_clock;

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results are written by
// index, so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  explicit Manifest(const ExperimentConfig& cfg) : cfg_(cfg), start_(Clock::now()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.output_dir.string() + ": " + ec.message());
    j_["config"] = json::parse(cfg.to_json());
    j_["git_describe"] = git_describe();
    j_["simd_isa"] = std::string(simd::isa_name(simd::active_isa()));
    j_["started_at"] = utc_timestamp();
    j_["outputs"] = json::array();
  }

  json& operator[](const char* key) { return j_[key]; }

  void write_output(const std::string& name, const std::string& contents) {
    write_file_atomic(cfg_.output_dir / name, contents);
    j_["outputs"].push_back(name);
  }

  void finish() {
    j_["wall_time_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
    write_file_atomic(cfg_.output_dir / "manifest.json", j_.dump(2) + "\n");
  }

 private:
  const ExperimentConfig& cfg_;
  Clock::time_point start_;
  json j_;
};

void require_kind(const ExperimentConfig& cfg, ExperimentKind kind) {
  if (cfg.kind != kind)
    throw InvalidArgument("config kind " + std::string(to_string(cfg.kind)) + " does not match " +
                          std::string(to_string(kind)));
}

std::size_t count_nonfinite(const SteeringResult& r, double final_reward) {
  std::size_t n = std::isfinite(final_reward) ? 0 : 1;
  for (double v : r.x0.coords) n += std::isfinite(v) ? 0 : 1;
  for (const auto& e : r.record.entries) n += std::isfinite(e.surrogate_reward) ? 0 : 1;
  return n;
}

std::size_t denoiser_evals(Method m, std::size_t steps, bool reuse) {
  return steps * (m == Method::embedopt && !reuse ? 2 : 1);
}

json run_json(const RunSummary& r) {
  return {{"method", r.method},     {"alpha", r.alpha},
          {"seed", r.seed},         {"num_steps", r.num_steps},
          {"final_reward", r.final_reward}, {"metric", r.metric},
          {"skipped_updates", r.skipped_updates}, {"nan_count", r.nan_count}};
}

std::string alpha_tag(double a) {
  std::string s = format_double(a);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

std::size_t total_skipped(const std::vector<RunSummary>& rows) {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.skipped_updates;
  return n;
}

}  // namespace

RunSummary run_toy(const ExperimentConfig& cfg, Method method, double alpha, std::uint64_t seed,
                   std::size_t num_steps, SteeringResult* full) {
  Rng task_rng(cfg.task_seed + seed);
  const ToyTask task = build_toy_task(cfg.task, task_rng);
  const NoiseSchedule schedule = cfg.schedule.build(num_steps);
  SteeringConfig sc = cfg.steering_template();
  sc.method = method;
  sc.alpha = method == Method::none ? 0.0 : alpha;
  sc.seed = seed;
  Rng rng(seed);
  SteeringResult res = run_steering(*task.model, *task.reward, task.c_init, schedule, sc, rng);

  RunSummary out;
  out.method = std::string(to_string(method));
  out.alpha = sc.alpha;
  out.seed = seed;
  out.num_steps = num_steps;
  out.final_reward = task.reward->value(res.x0);
  out.metric = task.metric(res.x0);
  out.violations = cfg.task.kind == TaskKind::distance
                       ? static_cast<double>(task.constraints.size()) - out.metric
                       : std::numeric_limits<double>::quiet_NaN();
  out.denoiser_evals = denoiser_evals(method, num_steps, sc.reuse_denoiser_eval);
  out.skipped_updates = res.skipped_updates;
  out.nan_count = count_nonfinite(res, out.final_reward);
  if (full) *full = std::move(res);
  return out;
}

std::string sweep_csv(const std::vector<RunSummary>& rows) {
  std::ostringstream os;
  os << "method,alpha,seed,final_reward,metric,violations,denoiser_evals\n";
  for (const auto& r : rows)
    os << r.method << ',' << format_double(r.alpha) << ',' << r.seed << ','
       << format_double(r.final_reward) << ',' << format_double(r.metric) << ','
       << format_double(r.violations) << ',' << r.denoiser_evals << '\n';
  return os.str();
}

std::string scaling_csv(const std::vector<RunSummary>& rows, double alpha_times_steps) {
  std::ostringstream os;
  os << "method,T,alpha,alpha_times_T,const,seed,final_reward,metric,nan_count\n";
  for (const auto& r : rows)
    os << r.method << ',' << r.num_steps << ',' << format_double(r.alpha) << ','
       << format_double(r.alpha * static_cast<double>(r.num_steps)) << ','
       << format_double(alpha_times_steps) << ',' << r.seed << ',' << format_double(r.final_reward)
       << ',' << format_double(r.metric) << ',' << r.nan_count << '\n';
  return os.str();
}

Fig1Result run_synthetic_fig1(const ExperimentConfig& cfg) {
  require_kind(cfg, ExperimentKind::synthetic_fig1);
  Manifest manifest(cfg);
  const SyntheticSpec& sp = cfg.synthetic;
  const GaussianPriorModel model = scalar_gaussian_model(sp.prior_std);
  Embedding c = model.embedding_layout();
  c.components()[0].values[0] = sp.prior_mean;
  const GaussianMeasurementReward reward(Vector{sp.measurement}, sp.tau2);
  const NoiseSchedule schedule = cfg.schedule.build();
  const double prior_var = sp.prior_std * sp.prior_std;

  struct PanelSpec {
    std::string name;
    std::string file;
    Method method;
    double alpha;
    Posterior oracle;
    double tolerance;
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<PanelSpec> specs = {
      {"unguided", "panel_a_unguided.csv", Method::none, 0.0, {sp.prior_mean, prior_var}, 0.05},
      {"dps_w" + format_double(sp.dps_weights[0]), "panel_b_dps_w" + alpha_tag(sp.dps_weights[0]) + ".csv",
       Method::dps, sp.dps_weights[0],
       conjugate_posterior(sp.prior_mean, prior_var, sp.measurement, sp.tau2, sp.dps_weights[0]),
       sp.mean_tolerance_dps},
      {"dps_w" + format_double(sp.dps_weights[1]), "panel_c_dps_w" + alpha_tag(sp.dps_weights[1]) + ".csv",
       Method::dps, sp.dps_weights[1],
       conjugate_posterior(sp.prior_mean, prior_var, sp.measurement, sp.tau2, sp.dps_weights[1]),
       sp.mean_tolerance_dps},
      {"embedopt_a" + format_double(sp.embedopt_alpha),
       "panel_d_embedopt_a" + alpha_tag(sp.embedopt_alpha) + ".csv", Method::embedopt, sp.embedopt_alpha,
       {sp.measurement, nan}, sp.mean_tolerance_embedopt},
  };
  for (double a : sp.extra_alphas)
    specs.push_back({"embedopt_a" + format_double(a), "", Method::embedopt, a, {sp.measurement, nan},
                     sp.mean_tolerance_embedopt});

  Fig1Result result;
  for (std::size_t p = 0; p < specs.size(); ++p) {
    const PanelSpec& ps = specs[p];
    SteeringConfig sc = cfg.steering_template();
    sc.method = ps.method;
    sc.alpha = ps.alpha;
    std::vector<State> samples(cfg.seeds.size());
    std::vector<std::size_t> skipped(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
      SteeringConfig local = sc;
      local.seed = cfg.seeds[i];
      Rng rng(local.seed);
      SteeringResult r = run_steering(model, reward, c, schedule, local, rng);
      samples[i] = std::move(r.x0);
      skipped[i] = r.skipped_updates;
    });
    const SampleSummary summary = summarize_samples(samples, cfg.histogram_bins);
    PanelSummary ps_out;
    ps_out.name = ps.name;
    ps_out.file = ps.file;
    ps_out.mean = summary.mean[0];
    ps_out.stddev = summary.stddev[0];
    ps_out.oracle_mean = ps.oracle.mean;
    ps_out.oracle_std = std::sqrt(ps.oracle.var);
    ps_out.tolerance = ps.tolerance;
    ps_out.within_tolerance = std::abs(ps_out.mean - ps_out.oracle_mean) <= ps.tolerance;
    if (ps.method == Method::none)
      ps_out.within_tolerance =
          ps_out.within_tolerance && std::abs(ps_out.stddev - ps_out.oracle_std) <= ps.tolerance;
    for (std::size_t s : skipped) ps_out.skipped_updates += s;
    if (!ps.file.empty()) {
      manifest.write_output(ps.file, summary.histogram.to_csv());
      result.panels.push_back(ps_out);
    } else {
      result.extras.push_back(ps_out);
    }
  }

  const auto panel_json = [](const PanelSummary& p) {
    json j = {{"name", p.name},
              {"mean", p.mean},
              {"std", p.stddev},
              {"oracle_mean", p.oracle_mean},
              {"oracle_std", p.oracle_std},
              {"tolerance", p.tolerance},
              {"within_tolerance", p.within_tolerance},
              {"skipped_updates", p.skipped_updates}};
    if (!p.file.empty()) j["file"] = p.file;
    return j;
  };
  json panels = json::array(), extras = json::array();
  for (const auto& p : result.panels) panels.push_back(panel_json(p));
  for (const auto& p : result.extras) extras.push_back(panel_json(p));
  manifest["panels"] = panels;
  manifest["extra_embedopt_alphas"] = extras;
  manifest["num_samples"] = cfg.seeds.size();
  manifest.finish();
  return result;
}

SweepResult run_lr_sweep(const ExperimentConfig& cfg) {
  require_kind(cfg, ExperimentKind::lr_sweep);
  if (cfg.alphas.empty()) throw InvalidArgument("alpha list must be non-empty");
  Manifest manifest(cfg);
  const std::size_t T = cfg.schedule.num_steps;
  const std::size_t ns = cfg.seeds.size(), na = cfg.alphas.size();

  SweepResult out;
  out.rows.resize(cfg.methods.size() * na * ns);
  out.baseline.resize(ns);
  const std::size_t total = out.rows.size() + ns;
  parallel_for(total, cfg.jobs, [&](std::size_t i) {
    if (i >= out.rows.size()) {
      const std::size_t s = i - out.rows.size();
      out.baseline[s] = run_toy(cfg, Method::none, 0.0, cfg.seeds[s], T);
      return;
    }
    const std::size_t m = i / (na * ns), a = (i / ns) % na, s = i % ns;
    out.rows[i] = run_toy(cfg, cfg.methods[m], cfg.alphas[a], cfg.seeds[s], T);
  });

  manifest.write_output("sweep.csv", sweep_csv(out.rows));
  manifest.write_output("baseline.csv", sweep_csv(out.baseline));

  // Best-achieved: max metric over alpha x seed (ties keep the earliest row).
  std::ostringstream best, per_seed;
  best << "method,best_metric,best_alpha,best_seed,baseline_best_metric\n";
  per_seed << "method,seed,best_metric,best_alpha,baseline_metric\n";
  double baseline_best = -INFINITY;
  for (const auto& b : out.baseline) baseline_best = std::max(baseline_best, b.metric);
  json best_json = json::array();
  for (Method method : cfg.methods) {
    const std::string name(to_string(method));
    const RunSummary* overall = nullptr;
    for (std::size_t s = 0; s < ns; ++s) {
      const RunSummary* top = nullptr;
      for (const auto& r : out.rows)
        if (r.method == name && r.seed == cfg.seeds[s] && (!top || r.metric > top->metric)) top = &r;
      per_seed << name << ',' << cfg.seeds[s] << ',' << format_double(top->metric) << ','
               << format_double(top->alpha) << ',' << format_double(out.baseline[s].metric) << '\n';
      if (!overall || top->metric > overall->metric) overall = top;
    }
    best << name << ',' << format_double(overall->metric) << ',' << format_double(overall->alpha) << ','
         << overall->seed << ',' << format_double(baseline_best) << '\n';
    best_json.push_back({{"method", name},
                         {"best_metric", overall->metric},
                         {"best_alpha", overall->alpha},
                         {"best_seed", overall->seed}});
  }
  manifest.write_output("best.csv", best.str());
  manifest.write_output("best_per_seed.csv", per_seed.str());
  manifest["metric"] = cfg.task.kind == TaskKind::distance ? "constraints_satisfied" : "map_cc";
  manifest["best_achieved"] = best_json;
  manifest["baseline_best_metric"] = baseline_best;
  manifest["num_runs"] = out.rows.size() + out.baseline.size();
  manifest["skipped_updates"] = total_skipped(out.rows);
  manifest.finish();
  return out;
}

ScalingResult run_step_scaling(const ExperimentConfig& cfg) {
  require_kind(cfg, ExperimentKind::step_scaling);
  for (std::size_t t : cfg.step_counts)
    if (t < 2) throw InvalidArgument("step counts must be at least 2");
  Manifest manifest(cfg);
  const std::size_t ns = cfg.seeds.size(), nt = cfg.step_counts.size();
  ScalingResult out;
  out.rows.resize(cfg.methods.size() * nt * ns);
  parallel_for(out.rows.size(), cfg.jobs, [&](std::size_t i) {
    const std::size_t m = i / (nt * ns), t = (i / ns) % nt, s = i % ns;
    const std::size_t T = cfg.step_counts[t];
    const double alpha = cfg.alpha_times_steps / static_cast<double>(T);
    out.rows[i] = run_toy(cfg, cfg.methods[m], alpha, cfg.seeds[s], T);
  });
  manifest.write_output("scaling.csv", scaling_csv(out.rows, cfg.alpha_times_steps));

  const auto mean_metric = [&](std::size_t T) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : out.rows)
      if (r.method == "embedopt" && r.num_steps == T) sum += r.metric, ++n;
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  };
  out.reference_mean = mean_metric(cfg.scaling_reference_steps);
  out.check_mean = mean_metric(cfg.scaling_check_steps);
  out.within_margin = out.check_mean >= out.reference_mean - cfg.scaling_metric_margin;

  json alphas = json::object();
  for (std::size_t T : cfg.step_counts)
    alphas[std::to_string(T)] = cfg.alpha_times_steps / static_cast<double>(T);
  std::size_t nan_total = 0;
  for (const auto& r : out.rows) nan_total += r.nan_count;
  manifest["alpha_by_steps"] = alphas;
  manifest["alpha_times_steps"] = cfg.alpha_times_steps;
  manifest["embedopt_margin_check"] = {{"reference_steps", cfg.scaling_reference_steps},
                                       {"check_steps", cfg.scaling_check_steps},
                                       {"reference_mean_metric", out.reference_mean},
                                       {"check_mean_metric", out.check_mean},
                                       {"margin", cfg.scaling_metric_margin},
                                       {"within_margin", out.within_margin}};
  manifest["nan_count"] = nan_total;
  manifest["skipped_updates"] = total_skipped(out.rows);
  manifest.finish();
  return out;
}

std::vector<RunSummary> run_single(const ExperimentConfig& cfg) {
  require_kind(cfg, ExperimentKind::single_run);
  Manifest manifest(cfg);
  const std::size_t ns = cfg.seeds.size();
  std::vector<RunSummary> rows(cfg.steering.size() * ns);
  std::vector<std::string> traj(rows.size());
  parallel_for(rows.size(), cfg.jobs, [&](std::size_t i) {
    const SteeringConfig& sc = cfg.steering[i / ns];
    SteeringResult full;
    rows[i] = run_toy(cfg, sc.method, sc.alpha, cfg.seeds[i % ns], cfg.schedule.num_steps, &full);
    if (cfg.write_trajectories) {
      std::ostringstream os;
      full.record.write_csv(os);
      traj[i] = os.str();
    }
  });
  manifest.write_output("runs.csv", sweep_csv(rows));
  json runs = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    json r = run_json(rows[i]);
    if (cfg.write_trajectories) {
      const std::string name = "trajectory_" + rows[i].method + "_a" + alpha_tag(rows[i].alpha) + "_s" +
                               std::to_string(rows[i].seed) + ".csv";
      manifest.write_output(name, traj[i]);
      r["trajectory"] = name;
    }
    runs.push_back(r);
  }
  manifest["runs"] = runs;
  manifest.finish();
  return rows;
}

std::vector<CheckResult> run_verify(const ExperimentConfig& cfg) {
  require_kind(cfg, ExperimentKind::verify);
  Manifest manifest(cfg);
  const auto checks = run_verification_suite();
  json arr = json::array();
  bool all = true;
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    all = all && c.passed;
  }
  manifest.write_output("verify.json", json{{"checks", arr}, {"all_passed", all}}.dump(2) + "\n");
  manifest["all_passed"] = all;
  manifest.finish();
  return checks;
}

int run_from_config(const std::filesystem::path& path, const ConfigOverrides& overrides,
                    std::ostream& log, std::ostream& err) {
  const auto report = [&](int code, const char* kind, const std::string& msg) {
    err << json{{"error", kind}, {"exit_code", code}, {"message", msg}}.dump() << "\n";
    return code;
  };
  ExperimentConfig cfg;
  try {
    cfg = parse_config_unchecked(read_file(path));
  } catch (const IoError& e) {
    return report(exit_code::io, "io", e.what());
  } catch (const ConfigParseError& e) {
    return report(exit_code::parse, "parse", e.what());
  }
  try {
    if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
    if (overrides.seeds) cfg.seeds = *overrides.seeds;
    if (overrides.jobs) cfg.jobs = *overrides.jobs;
    if (overrides.expected_kind && *overrides.expected_kind != cfg.kind)
      throw ConfigValidationError("config kind " + std::string(to_string(cfg.kind)) +
                                  " does not match subcommand for " +
                                  std::string(to_string(*overrides.expected_kind)));
    cfg.validate();
  } catch (const ConfigValidationError& e) {
    return report(exit_code::validation, "validation", e.what());
  }

  try {
    switch (cfg.kind) {
      case ExperimentKind::synthetic_fig1: {
        const Fig1Result r = run_synthetic_fig1(cfg);
        for (const auto& p : r.panels)
          log << p.name << " mean " << format_double(p.mean) << " std " << format_double(p.stddev)
              << " oracle " << format_double(p.oracle_mean) << (p.within_tolerance ? " ok" : " outside")
              << "\n";
        break;
      }
      case ExperimentKind::lr_sweep: {
        const SweepResult r = run_lr_sweep(cfg);
        log << r.rows.size() << " sweep rows, " << r.baseline.size() << " baseline rows\n";
        break;
      }
      case ExperimentKind::step_scaling: {
        const ScalingResult r = run_step_scaling(cfg);
        log << r.rows.size() << " scaling rows, reference " << format_double(r.reference_mean)
            << " check " << format_double(r.check_mean) << "\n";
        break;
      }
      case ExperimentKind::single_run: {
        const auto rows = run_single(cfg);
        log << rows.size() << " runs\n";
        break;
      }
      case ExperimentKind::verify: {
        const auto checks = run_verify(cfg);
        bool all = true;
        for (const auto& c : checks) {
          log << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << "\n";
          all = all && c.passed;
        }
        if (!all) return exit_code::failure;
        break;
      }
    }
  } catch (const IoError& e) {
    return report(exit_code::io, "io", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report(exit_code::io, "io", e.what());
  } catch (const InvalidArgument& e) {
    return report(exit_code::validation, "validation", e.what());
  } catch (const std::exception& e) {
    return report(exit_code::failure, "runtime", e.what());
  }
  log << "artifacts in " << cfg.output_dir.string() << "\n";
  return exit_code::ok;
}

}  // namespace embedopt
