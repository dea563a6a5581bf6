#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "embedopt/embedding.hpp"

namespace embedopt {

struct RewardEval {
  double value = 0.0;
  Vector grad;
};

/// Differentiable reward R(x_0), proportional to a log-likelihood.
class Reward {
 public:
  virtual ~Reward() = default;
  virtual std::string_view kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual RewardEval value_and_grad(const State& x) const = 0;
  virtual double value(const State& x) const { return value_and_grad(x).value; }
};

/// R(x) = -w / (2 tau2) ||x - y||^2.
class GaussianMeasurementReward final : public Reward {
 public:
  GaussianMeasurementReward(Vector measurement, double tau2, double weight = 1.0);

  std::string_view kind() const override { return "gaussian"; }
  std::size_t dim() const override { return measurement_.size(); }
  const Vector& measurement() const { return measurement_; }
  double tau2() const { return tau2_; }
  double weight() const { return weight_; }

  RewardEval value_and_grad(const State& x) const override;

 private:
  Vector measurement_;
  double tau2_;
  double weight_;
};

struct DistanceConstraint {
  std::size_t i = 0;
  std::size_t j = 0;
  double target = 0.0;  // angstrom
  double delta = 2.0;   // tolerance, angstrom
  bool operator==(const DistanceConstraint&) const = default;
};

/// Euclidean distance between beads i and j of a flattened (N, 3) state.
double bead_distance(std::span<const double> coords, std::size_t i, std::size_t j);

/// R(x) = -sum_i min(|d_i(x) - target_i|, delta_i)^2. The gradient is zero on
/// the clipped plateau (|dev| >= delta) and for coincident beads.
class DistanceConstraintReward final : public Reward {
 public:
  DistanceConstraintReward(std::vector<DistanceConstraint> constraints, std::size_t num_beads);

  std::string_view kind() const override { return "distance"; }
  std::size_t dim() const override { return 3 * num_beads_; }
  std::size_t num_beads() const { return num_beads_; }
  const std::vector<DistanceConstraint>& constraints() const { return constraints_; }

  RewardEval value_and_grad(const State& x) const override;
  /// Constraints with |d - target| <= delta.
  std::size_t satisfied_count(const State& x) const;
  /// sum_i max(|d_i - target_i| - delta_i, 0).
  double total_violation(const State& x) const;

 private:
  std::vector<DistanceConstraint> constraints_;
  std::size_t num_beads_;
};

/// The K pairs i < j with the largest |d(prior) - d(target)|, targets taken
/// from x_target. Ties resolve in lexicographic (i, j) order.
std::vector<DistanceConstraint> select_top_k_constraints(const State& x_prior,
                                                         const State& x_target, std::size_t k,
                                                         double delta = 2.0);

/// Regular voxel grid; voxel (ix, iy, iz) is centred at origin + index * spacing.
struct MapGrid {
  std::array<std::size_t, 3> shape{0, 0, 0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  double spacing = 1.0;

  std::size_t voxel_count() const { return shape[0] * shape[1] * shape[2]; }
  double center(std::size_t axis, std::size_t index) const {
    return origin[axis] + static_cast<double>(index) * spacing;
  }
  bool operator==(const MapGrid&) const = default;
};

/// Row-major voxel values, index (ix * ny + iy) * nz + iz.
struct VoxelMap {
  MapGrid grid;
  Vector values;
};

/// Unnormalized sum of isotropic Gaussians, one per bead.
VoxelMap render_raw_map(const State& x, const MapGrid& grid, double atom_width);
/// Zero mean, unit (population) variance. Throws DegenerateMap on a constant map.
VoxelMap normalize_map(VoxelMap map);
VoxelMap render_map(const State& x, const MapGrid& grid, double atom_width);

/// Pearson correlation over voxels.
double map_correlation(const VoxelMap& a, const VoxelMap& b);

/// R(x) = -(1/N) sum_v (V(x)_v - V_obs_v)^2 over normalized maps, which
/// equals 2 (cc - 1).
class MapMSEReward final : public Reward {
 public:
  /// `target` is normalized on construction.
  MapMSEReward(VoxelMap target, double atom_width, std::size_t num_beads);

  std::string_view kind() const override { return "map"; }
  std::size_t dim() const override { return 3 * num_beads_; }
  const VoxelMap& target() const { return target_; }
  double atom_width() const { return atom_width_; }

  RewardEval value_and_grad(const State& x) const override;
  double value(const State& x) const override;
  double correlation(const State& x) const;

 private:
  VoxelMap target_;
  double atom_width_;
  std::size_t num_beads_;
};

}  // namespace embedopt
