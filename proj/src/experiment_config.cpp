#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <json.hpp>

#include "embedopt/errors.hpp"
#include "embedopt/experiments.hpp"
#include "embedopt/io.hpp"

namespace embedopt {

using nlohmann::json;

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::synthetic_fig1: return "synthetic_fig1";
    case ExperimentKind::lr_sweep: return "lr_sweep";
    case ExperimentKind::step_scaling: return "step_scaling";
    case ExperimentKind::single_run: return "single_run";
    case ExperimentKind::verify: return "verify";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(std::string_view s) {
  for (ExperimentKind k : {ExperimentKind::synthetic_fig1, ExperimentKind::lr_sweep,
                           ExperimentKind::step_scaling, ExperimentKind::single_run,
                           ExperimentKind::verify})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown experiment kind: " + std::string(s));
}

NoiseSchedule ScheduleSpec::build() const { return build(num_steps); }

NoiseSchedule ScheduleSpec::build(std::size_t steps) const {
  if (kind == ScheduleKind::linear) return build_linear_schedule(steps, sigma_max);
  return build_power_schedule(steps, sigma_min, sigma_max, rho);
}

SteeringConfig ExperimentConfig::steering_template() const {
  SteeringConfig s;
  s.sampler = sampler;
  s.dps_norm = dps_norm;
  s.embed_norm = embed_norm;
  s.reuse_denoiser_eval = reuse_denoiser_eval;
  s.af3_coord_sigma = coord_sigma;
  return s;
}

namespace {

// Reads one JSON object, remembering which keys were consumed so unknown
// keys can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigParseError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T required(const std::string& key) {
    if (!j_.contains(key)) throw ConfigParseError("missing required field " + where(key));
    return get<T>(key);
  }

  template <typename T>
  void optional(const std::string& key, T& out) {
    if (j_.contains(key)) out = get<T>(key);
  }

  template <typename T, typename Conv>
  void optional_enum(const std::string& key, T& out, Conv conv) {
    if (!j_.contains(key)) return;
    const auto s = get<std::string>(key);
    try {
      out = conv(s);
    } catch (const InvalidArgument& e) {
      throw ConfigParseError(where(key) + ": " + e.what());
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), where(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigParseError("unknown field " + where(item.key()));
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <typename T>
  T get(const std::string& key) {
    seen_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigParseError("wrong type for field " + where(key));
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::uint64_t> parse_seeds(const json& j) {
  try {
    if (j.is_array()) return j.get<std::vector<std::uint64_t>>();
    if (j.is_object()) {
      Section s(j, "seeds");
      const auto start = s.required<std::uint64_t>("start");
      const auto count = s.required<std::uint64_t>("count");
      s.finish();
      std::vector<std::uint64_t> out;
      for (std::uint64_t i = 0; i < count; ++i) out.push_back(start + i);
      return out;
    }
  } catch (const json::exception&) {
  }
  throw ConfigParseError("seeds must be a list of non-negative integers or {start, count}");
}

std::vector<Method> parse_methods(const std::vector<std::string>& names, const std::string& where) {
  std::vector<Method> out;
  for (const auto& n : names) {
    try {
      out.push_back(method_from_string(n));
    } catch (const InvalidArgument& e) {
      throw ConfigParseError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> method_names(const std::vector<Method>& methods) {
  std::vector<std::string> out;
  for (Method m : methods) out.emplace_back(to_string(m));
  return out;
}

void apply_kind_defaults(ExperimentConfig& cfg) {
  if (cfg.kind == ExperimentKind::synthetic_fig1) {
    cfg.schedule = {ScheduleKind::linear, 1000, 0.0, 1.0, 7.0};
    cfg.sampler.mode = SamplerMode::deterministic;
    cfg.sampler.init = InitMode::marginal;
    cfg.dps_norm = DpsNormMode::sigma2w;
  } else {
    cfg.sampler.mode = SamplerMode::af3;
    cfg.sampler.init = InitMode::standard;
  }
  if (cfg.kind == ExperimentKind::step_scaling) cfg.methods = {Method::embedopt};
}

}  // namespace

ExperimentConfig parse_config_unchecked(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigParseError(std::string("invalid JSON: ") + e.what());
  }
  Section s(root, "");
  ExperimentConfig cfg;
  const auto kind = s.required<std::string>("kind");
  try {
    cfg.kind = experiment_kind_from_string(kind);
  } catch (const InvalidArgument& e) {
    throw ConfigParseError(e.what());
  }
  apply_kind_defaults(cfg);
  cfg.output_dir = s.required<std::string>("output_dir");
  if (!s.has("seeds")) throw ConfigParseError("missing required field seeds");
  cfg.seeds = parse_seeds(s.raw("seeds"));
  s.optional("histogram_bins", cfg.histogram_bins);
  s.optional("jobs", cfg.jobs);

  if (s.has("schedule")) {
    Section sc = s.child("schedule");
    sc.optional_enum("kind", cfg.schedule.kind, schedule_kind_from_string);
    sc.optional("num_steps", cfg.schedule.num_steps);
    sc.optional("sigma_min", cfg.schedule.sigma_min);
    sc.optional("sigma_max", cfg.schedule.sigma_max);
    sc.optional("rho", cfg.schedule.rho);
    sc.finish();
  }
  if (s.has("sampler")) {
    Section sa = s.child("sampler");
    sa.optional_enum("mode", cfg.sampler.mode, sampler_mode_from_string);
    sa.optional_enum("init", cfg.sampler.init, init_mode_from_string);
    sa.optional_enum("denominator", cfg.sampler.denominator, denominator_mode_from_string);
    sa.optional("gamma", cfg.sampler.af3.gamma);
    sa.optional("gamma_min", cfg.sampler.af3.gamma_min);
    sa.optional("noise_scale", cfg.sampler.af3.rho_noise);
    sa.optional("step_scale", cfg.sampler.af3.eta_scale);
    sa.optional_enum("coord_sigma", cfg.coord_sigma, coord_sigma_from_string);
    sa.finish();
  }
  if (s.has("guidance")) {
    Section g = s.child("guidance");
    g.optional_enum("dps_norm", cfg.dps_norm, dps_norm_mode_from_string);
    g.optional_enum("embed_norm", cfg.embed_norm, embed_norm_mode_from_string);
    g.optional("reuse_denoiser_eval", cfg.reuse_denoiser_eval);
    g.finish();
  }
  if (s.has("synthetic")) {
    Section sy = s.child("synthetic");
    auto& p = cfg.synthetic;
    sy.optional("prior_mean", p.prior_mean);
    sy.optional("prior_std", p.prior_std);
    sy.optional("measurement", p.measurement);
    sy.optional("tau2", p.tau2);
    sy.optional("dps_weights", p.dps_weights);
    sy.optional("embedopt_alpha", p.embedopt_alpha);
    sy.optional("extra_alphas", p.extra_alphas);
    sy.optional("mean_tolerance_dps", p.mean_tolerance_dps);
    sy.optional("mean_tolerance_embedopt", p.mean_tolerance_embedopt);
    sy.finish();
  }
  if (s.has("task")) {
    Section t = s.child("task");
    auto& p = cfg.task;
    t.optional_enum("kind", p.kind, task_kind_from_string);
    t.optional("seed", cfg.task_seed);
    t.optional("num_beads", p.num_beads);
    t.optional("single_channels", p.single_channels);
    t.optional("pair_channels", p.pair_channels);
    t.optional("mode_weights", p.mode_weights);
    t.optional("mode_std", p.mode_std);
    t.optional("hinge_angle_deg", p.hinge_angle_deg);
    t.optional("bond_length", p.bond_length);
    t.optional("weight_scale", p.weight_scale);
    t.optional("num_constraints", p.num_constraints);
    t.optional("delta", p.delta);
    t.optional("voxel_spacing", p.voxel_spacing);
    t.optional("atom_width", p.atom_width);
    t.optional("grid_margin", p.grid_margin);
    t.finish();
  }
  if (s.has("sweep")) {
    Section sw = s.child("sweep");
    if (sw.has("methods"))
      cfg.methods = parse_methods(sw.required<std::vector<std::string>>("methods"), sw.where("methods"));
    sw.optional("alphas", cfg.alphas);
    sw.finish();
  }
  if (s.has("scaling")) {
    Section sc = s.child("scaling");
    if (sc.has("methods"))
      cfg.methods = parse_methods(sc.required<std::vector<std::string>>("methods"), sc.where("methods"));
    sc.optional("step_counts", cfg.step_counts);
    sc.optional("alpha_times_steps", cfg.alpha_times_steps);
    sc.optional("metric_margin", cfg.scaling_metric_margin);
    sc.optional("reference_steps", cfg.scaling_reference_steps);
    sc.optional("check_steps", cfg.scaling_check_steps);
    sc.finish();
  }
  if (s.has("runs")) {
    const json& runs = s.raw("runs");
    if (!runs.is_array()) throw ConfigParseError("runs must be a list");
    for (std::size_t i = 0; i < runs.size(); ++i) {
      Section r(runs[i], "runs[" + std::to_string(i) + "]");
      SteeringConfig sc = cfg.steering_template();
      sc.method = parse_methods({r.required<std::string>("method")}, r.where("method")).front();
      if (sc.method != Method::none) sc.alpha = r.required<double>("alpha");
      else r.optional("alpha", sc.alpha);
      r.finish();
      cfg.steering.push_back(sc);
    }
  }
  s.optional("write_trajectories", cfg.write_trajectories);
  s.finish();
  return cfg;
}

ExperimentConfig parse_config(const std::string& json_text) {
  ExperimentConfig cfg = parse_config_unchecked(json_text);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path));
}

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigValidationError(msg); };
  const auto positive_finite = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (seeds.empty()) fail("at least one seed is required");
  if (output_dir.empty()) fail("output_dir must be non-empty");
  if (std::filesystem::exists(output_dir) && !std::filesystem::is_directory(output_dir))
    fail("output_dir exists and is not a directory");
  if (histogram_bins == 0) fail("histogram_bins must be positive");
  if (schedule.num_steps < 1) fail("schedule.num_steps must be at least 1");
  if (!positive_finite(schedule.sigma_max)) fail("schedule.sigma_max must be positive");
  if (schedule.kind == ScheduleKind::power) {
    if (schedule.num_steps < 2) fail("power schedule needs num_steps >= 2");
    if (!positive_finite(schedule.sigma_min) || schedule.sigma_min >= schedule.sigma_max)
      fail("power schedule needs 0 < sigma_min < sigma_max");
    if (!positive_finite(schedule.rho)) fail("schedule.rho must be positive");
  }
  try {
    if (sampler.mode == SamplerMode::af3) sampler.af3.validate();
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }

  switch (kind) {
    case ExperimentKind::synthetic_fig1: {
      const auto& p = synthetic;
      if (!positive_finite(p.prior_std) || !positive_finite(p.tau2))
        fail("synthetic prior_std and tau2 must be positive");
      if (p.dps_weights.size() != 2) fail("synthetic.dps_weights needs exactly two weights");
      for (double w : p.dps_weights)
        if (!(w >= 0.0) || !std::isfinite(w)) fail("dps weights must be finite and non-negative");
      if (!(p.embedopt_alpha >= 0.0)) fail("synthetic.embedopt_alpha must be non-negative");
      for (double a : p.extra_alphas)
        if (!(a >= 0.0) || !std::isfinite(a)) fail("extra alphas must be finite and non-negative");
      break;
    }
    case ExperimentKind::lr_sweep:
      if (alphas.empty()) fail("alpha list must be non-empty");
      [[fallthrough]];
    case ExperimentKind::step_scaling:
      if (methods.empty()) fail("method list must be non-empty");
      for (Method m : methods)
        if (m == Method::none) fail("methods must be drawn from {embedopt, dps}");
      for (double a : alphas)
        if (!(a >= 0.0) || !std::isfinite(a)) fail("alphas must be finite and non-negative");
      if (kind == ExperimentKind::step_scaling) {
        if (step_counts.empty()) fail("step_counts must be non-empty");
        for (std::size_t t : step_counts)
          if (t < 2) fail("step counts must be at least 2");
        if (!positive_finite(alpha_times_steps)) fail("alpha_times_steps must be positive");
        if (!(scaling_metric_margin >= 0.0)) fail("metric_margin must be non-negative");
        const auto listed = [&](std::size_t t) {
          return std::find(step_counts.begin(), step_counts.end(), t) != step_counts.end();
        };
        if (!listed(scaling_reference_steps) || !listed(scaling_check_steps))
          fail("reference_steps and check_steps must appear in step_counts");
      }
      break;
    case ExperimentKind::single_run:
      if (steering.empty()) fail("single_run needs at least one entry in runs");
      for (const auto& s : steering)
        if (!(s.alpha >= 0.0) || !std::isfinite(s.alpha)) fail("run alpha must be finite and non-negative");
      break;
    case ExperimentKind::verify:
      break;
  }
  if (kind != ExperimentKind::synthetic_fig1 && kind != ExperimentKind::verify) {
    if (task.num_beads < 4) fail("task.num_beads must be at least 4");
    if (task.mode_weights.size() != 2) fail("task.mode_weights needs two entries");
    for (double w : task.mode_weights)
      if (!positive_finite(w)) fail("task mode weights must be positive");
    if (!positive_finite(task.mode_std)) fail("task.mode_std must be positive");
    if (task.num_constraints == 0 ||
        task.num_constraints > task.num_beads * (task.num_beads - 1) / 2)
      fail("task.num_constraints out of range");
    if (!positive_finite(task.delta)) fail("task.delta must be positive");
    if (!positive_finite(task.voxel_spacing) || !positive_finite(task.atom_width))
      fail("task voxel_spacing and atom_width must be positive");
  }
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["kind"] = std::string(to_string(kind));
  j["output_dir"] = output_dir.string();
  j["seeds"] = seeds;
  j["histogram_bins"] = histogram_bins;
  j["jobs"] = jobs;
  j["schedule"] = {{"kind", std::string(to_string(schedule.kind))},
                   {"num_steps", schedule.num_steps},
                   {"sigma_min", schedule.sigma_min},
                   {"sigma_max", schedule.sigma_max},
                   {"rho", schedule.rho}};
  j["sampler"] = {{"mode", std::string(to_string(sampler.mode))},
                  {"init", std::string(to_string(sampler.init))},
                  {"denominator", std::string(to_string(sampler.denominator))},
                  {"gamma", sampler.af3.gamma},
                  {"gamma_min", sampler.af3.gamma_min},
                  {"noise_scale", sampler.af3.rho_noise},
                  {"step_scale", sampler.af3.eta_scale},
                  {"coord_sigma", std::string(to_string(coord_sigma))}};
  j["guidance"] = {{"dps_norm", std::string(to_string(dps_norm))},
                   {"embed_norm", std::string(to_string(embed_norm))},
                   {"reuse_denoiser_eval", reuse_denoiser_eval}};
  if (kind == ExperimentKind::synthetic_fig1) {
    const auto& p = synthetic;
    j["synthetic"] = {{"prior_mean", p.prior_mean},
                      {"prior_std", p.prior_std},
                      {"measurement", p.measurement},
                      {"tau2", p.tau2},
                      {"dps_weights", p.dps_weights},
                      {"embedopt_alpha", p.embedopt_alpha},
                      {"extra_alphas", p.extra_alphas},
                      {"mean_tolerance_dps", p.mean_tolerance_dps},
                      {"mean_tolerance_embedopt", p.mean_tolerance_embedopt}};
  } else if (kind != ExperimentKind::verify) {
    const auto& p = task;
    j["task"] = {{"kind", std::string(to_string(p.kind))},
                 {"seed", task_seed},
                 {"num_beads", p.num_beads},
                 {"single_channels", p.single_channels},
                 {"pair_channels", p.pair_channels},
                 {"mode_weights", p.mode_weights},
                 {"mode_std", p.mode_std},
                 {"hinge_angle_deg", p.hinge_angle_deg},
                 {"bond_length", p.bond_length},
                 {"weight_scale", p.weight_scale},
                 {"num_constraints", p.num_constraints},
                 {"delta", p.delta},
                 {"voxel_spacing", p.voxel_spacing},
                 {"atom_width", p.atom_width},
                 {"grid_margin", p.grid_margin}};
  }
  if (kind == ExperimentKind::lr_sweep)
    j["sweep"] = {{"methods", method_names(methods)}, {"alphas", alphas}};
  if (kind == ExperimentKind::step_scaling)
    j["scaling"] = {{"methods", method_names(methods)},
                    {"step_counts", step_counts},
                    {"alpha_times_steps", alpha_times_steps},
                    {"metric_margin", scaling_metric_margin},
                    {"reference_steps", scaling_reference_steps},
                    {"check_steps", scaling_check_steps}};
  if (kind == ExperimentKind::single_run) {
    json runs = json::array();
    for (const auto& s : steering)
      runs.push_back({{"method", std::string(to_string(s.method))}, {"alpha", s.alpha}});
    j["runs"] = runs;
    j["write_trajectories"] = write_trajectories;
  }
  return j.dump(2);
}

}  // namespace embedopt
