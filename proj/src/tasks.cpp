#include "embedopt/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "embedopt/errors.hpp"

namespace embedopt {

std::string_view to_string(TaskKind k) { return k == TaskKind::distance ? "distance" : "map"; }

TaskKind task_kind_from_string(std::string_view s) {
  if (s == "distance") return TaskKind::distance;
  if (s == "map") return TaskKind::map;
  throw InvalidArgument("unknown task kind: " + std::string(s));
}

double ToyTask::metric(const State& x) const {
  if (spec.kind == TaskKind::distance)
    return static_cast<double>(
        static_cast<const DistanceConstraintReward&>(*reward).satisfied_count(x));
  return static_cast<const MapMSEReward&>(*reward).correlation(x);
}

std::string_view ToyTask::metric_name() const {
  return spec.kind == TaskKind::distance ? "constraints_satisfied" : "map_cc";
}

std::vector<State> toy_chain_templates(const ToyTaskSpec& spec) {
  const std::size_t n = spec.num_beads;
  require(n >= 4, "toy chain needs at least four beads");
  // Zig-zag in the xy plane with a slight z pucker so no three beads are collinear.
  const double rise = spec.bond_length * 0.85;
  const double zig = 0.5 * std::sqrt(spec.bond_length * spec.bond_length - rise * rise);
  State straight(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    straight.coords[3 * i] = rise * static_cast<double>(i);
    straight.coords[3 * i + 1] = (i % 2 ? zig : -zig);
    straight.coords[3 * i + 2] = 0.3 * std::sin(static_cast<double>(i));
  }
  // Bend the second half about the z axis through the hinge bead.
  const std::size_t hinge = n / 2 - 1;
  const double theta = spec.hinge_angle_deg * std::numbers::pi / 180.0;
  State bent = straight;
  const double hx = straight.coords[3 * hinge], hy = straight.coords[3 * hinge + 1];
  for (std::size_t i = hinge + 1; i < n; ++i) {
    const double dx = straight.coords[3 * i] - hx, dy = straight.coords[3 * i + 1] - hy;
    bent.coords[3 * i] = hx + std::cos(theta) * dx - std::sin(theta) * dy;
    bent.coords[3 * i + 1] = hy + std::sin(theta) * dx + std::cos(theta) * dy;
  }
  double centroid[3] = {0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < 3; ++a) centroid[a] += straight.coords[3 * i + a] / static_cast<double>(n);
  for (State* s : {&straight, &bent})
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < 3; ++a) s->coords[3 * i + a] -= centroid[a];
  return {straight, bent};
}

ToyTask build_toy_task(const ToyTaskSpec& spec, Rng& rng) {
  require(spec.mode_weights.size() == 2, "toy task uses exactly two modes");
  require(spec.mode_std > 0.0, "toy task mode std must be positive");
  require(spec.single_channels >= 1 && spec.pair_channels >= 1, "embedding channels must be positive");
  const std::size_t n = spec.num_beads;
  const std::size_t D = 3 * n;
  const std::vector<State> templates = toy_chain_templates(spec);

  ToyTask task;
  task.spec = spec;
  task.c_init = make_layout({{"single", n * spec.single_channels},
                             {"pair", n * n * spec.pair_channels}});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& comp : task.c_init.components())
    for (double& v : comp.values) v = normal(rng);
  const Vector flat_c = task.c_init.flatten();
  const double scale = spec.weight_scale / std::sqrt(static_cast<double>(flat_c.size()));

  // b_k = template_k - W_k c_init, so m_k(c_init) is exactly the template.
  std::vector<MixtureMode> modes;
  for (std::size_t k = 0; k < 2; ++k) {
    AffineMeanMap map = AffineMeanMap::random(D, flat_c.size(), scale, rng);
    const Vector wc = map.apply(flat_c);
    for (std::size_t i = 0; i < D; ++i) map.offset[i] = templates[k].coords[i] - wc[i];
    modes.push_back({spec.mode_weights[k], std::move(map), spec.mode_std});
  }
  auto model = std::make_shared<const MixturePriorModel>(std::move(modes), task.c_init);
  task.model = model;
  task.prior_reference = templates[0];

  // Target: a draw from the minority mode.
  task.target = templates[1];
  for (double& v : task.target.coords) v += spec.mode_std * normal(rng);

  if (spec.kind == TaskKind::distance) {
    task.constraints =
        select_top_k_constraints(task.prior_reference, task.target, spec.num_constraints, spec.delta);
    task.reward = std::make_shared<const DistanceConstraintReward>(task.constraints, n);
  } else {
    MapGrid grid;
    grid.spacing = spec.voxel_spacing;
    for (std::size_t a = 0; a < 3; ++a) {
      double lo = 1e300, hi = -1e300;
      for (const State* s : {&templates[0], &templates[1]})
        for (std::size_t i = 0; i < n; ++i) {
          lo = std::min(lo, s->coords[3 * i + a]);
          hi = std::max(hi, s->coords[3 * i + a]);
        }
      lo -= spec.grid_margin;
      hi += spec.grid_margin;
      grid.origin[a] = std::floor(lo / spec.voxel_spacing) * spec.voxel_spacing;
      grid.shape[a] = static_cast<std::size_t>(std::ceil((hi - grid.origin[a]) / spec.voxel_spacing)) + 1;
    }
    task.target_map = render_map(task.target, grid, spec.atom_width);
    task.reward = std::make_shared<const MapMSEReward>(*task.target_map, spec.atom_width, n);
  }
  return task;
}

}  // namespace embedopt
