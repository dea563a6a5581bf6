#pragma once

#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "embedopt/models.hpp"
#include "embedopt/rewards.hpp"

namespace embedopt {

enum class TaskKind { distance, map };
std::string_view to_string(TaskKind k);
TaskKind task_kind_from_string(std::string_view s);

/// Desk-scale stand-in for the structure benchmarks: a bead chain whose
/// prior is a two-mode mixture. The dominant mode is an extended zig-zag,
/// the minority mode the same chain bent at a hinge; the target is drawn
/// from the minority mode.
struct ToyTaskSpec {
  TaskKind kind = TaskKind::distance;
  std::size_t num_beads = 8;
  std::size_t single_channels = 4;  // "single" has num_beads * single_channels entries
  std::size_t pair_channels = 1;    // "pair" has num_beads^2 * pair_channels entries
  std::vector<double> mode_weights{0.9, 0.1};
  double mode_std = 0.5;            // angstrom
  double hinge_angle_deg = 90.0;
  double bond_length = 3.8;         // angstrom
  double weight_scale = 0.5;        // W_k entries ~ weight_scale * N(0,1) / sqrt(d)
  std::size_t num_constraints = 5;
  double delta = 2.0;
  double voxel_spacing = 1.0;
  double atom_width = 1.5;
  double grid_margin = 4.0;
};

struct ToyTask {
  ToyTaskSpec spec;
  std::shared_ptr<const MixturePriorModel> model;
  std::shared_ptr<const Reward> reward;
  Embedding c_init;
  State target;
  State prior_reference;  // dominant-mode mean at c_init
  std::vector<DistanceConstraint> constraints;  // distance tasks
  std::optional<VoxelMap> target_map;            // map tasks

  /// Constraints satisfied (distance) or map correlation (map).
  double metric(const State& x) const;
  std::string_view metric_name() const;
};

/// Chain templates (N, 3), centred on the dominant template's centroid.
std::vector<State> toy_chain_templates(const ToyTaskSpec& spec);

ToyTask build_toy_task(const ToyTaskSpec& spec, Rng& rng);

}  // namespace embedopt
