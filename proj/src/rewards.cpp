#include "embedopt/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "embedopt/errors.hpp"
#include "embedopt/kernels.hpp"

namespace embedopt {

// ---------------------------------------------------------------------------
// Gaussian measurement

GaussianMeasurementReward::GaussianMeasurementReward(Vector measurement, double tau2, double weight)
    : measurement_(std::move(measurement)), tau2_(tau2), weight_(weight) {
  require(!measurement_.empty(), "measurement must be non-empty");
  require(tau2_ > 0.0 && std::isfinite(tau2_), "tau2 must be positive");
  require(weight_ >= 0.0 && std::isfinite(weight_), "reward weight must be non-negative");
}

RewardEval GaussianMeasurementReward::value_and_grad(const State& x) const {
  require(x.size() == dim(), "gaussian reward: state dimension mismatch");
  const double scale = weight_ / tau2_;
  RewardEval out;
  out.grad.resize(dim());
  for (std::size_t i = 0; i < dim(); ++i) out.grad[i] = scale * (measurement_[i] - x.coords[i]);
  out.value = -0.5 * scale * simd::squared_distance(x.coords, measurement_);
  return out;
}

// ---------------------------------------------------------------------------
// Distance constraints

double bead_distance(std::span<const double> coords, std::size_t i, std::size_t j) {
  const double dx = coords[3 * i] - coords[3 * j];
  const double dy = coords[3 * i + 1] - coords[3 * j + 1];
  const double dz = coords[3 * i + 2] - coords[3 * j + 2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

DistanceConstraintReward::DistanceConstraintReward(std::vector<DistanceConstraint> constraints,
                                                   std::size_t num_beads)
    : constraints_(std::move(constraints)), num_beads_(num_beads) {
  require(num_beads_ >= 2, "distance reward needs at least two beads");
  for (const auto& c : constraints_) {
    require(c.i < num_beads_ && c.j < num_beads_ && c.i != c.j,
            "distance constraint indexes an invalid bead pair");
    require(c.delta > 0.0 && std::isfinite(c.delta), "distance tolerance must be positive");
    require(c.target >= 0.0 && std::isfinite(c.target), "distance target must be non-negative");
  }
}

RewardEval DistanceConstraintReward::value_and_grad(const State& x) const {
  require(x.size() == dim(), "distance reward: state dimension mismatch");
  RewardEval out;
  out.grad.assign(dim(), 0.0);
  for (const auto& c : constraints_) {
    const double d = bead_distance(x.coords, c.i, c.j);
    const double dev = d - c.target;
    const double clipped = std::min(std::abs(dev), c.delta);
    out.value -= clipped * clipped;
    if (std::abs(dev) >= c.delta || d == 0.0) continue;
    const double dr_dd = -2.0 * dev;
    for (std::size_t a = 0; a < 3; ++a) {
      const double unit = (x.coords[3 * c.i + a] - x.coords[3 * c.j + a]) / d;
      out.grad[3 * c.i + a] += dr_dd * unit;
      out.grad[3 * c.j + a] -= dr_dd * unit;
    }
  }
  return out;
}

std::size_t DistanceConstraintReward::satisfied_count(const State& x) const {
  require(x.size() == dim(), "distance reward: state dimension mismatch");
  std::size_t n = 0;
  for (const auto& c : constraints_)
    if (std::abs(bead_distance(x.coords, c.i, c.j) - c.target) <= c.delta) ++n;
  return n;
}

double DistanceConstraintReward::total_violation(const State& x) const {
  require(x.size() == dim(), "distance reward: state dimension mismatch");
  double total = 0.0;
  for (const auto& c : constraints_)
    total += std::max(std::abs(bead_distance(x.coords, c.i, c.j) - c.target) - c.delta, 0.0);
  return total;
}

std::vector<DistanceConstraint> select_top_k_constraints(const State& x_prior,
                                                         const State& x_target, std::size_t k,
                                                         double delta) {
  require(x_prior.size() == x_target.size(), "constraint selection: state dimensions differ");
  require(x_prior.size() % 3 == 0, "constraint selection: states must be (N, 3) bead arrays");
  require(delta > 0.0, "constraint tolerance must be positive");
  const std::size_t n = x_prior.size() / 3;
  const std::size_t pairs = n * (n - 1) / 2;
  require(k >= 1 && k <= pairs, "constraint selection: K exceeds the number of bead pairs");

  struct Candidate {
    std::size_t i, j;
    double discrepancy, target;
  };
  std::vector<Candidate> all;
  all.reserve(pairs);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double target = bead_distance(x_target.coords, i, j);
      all.push_back({i, j, std::abs(bead_distance(x_prior.coords, i, j) - target), target});
    }
  // Candidates are generated in lexicographic order, so a stable sort keeps
  // that order among equal discrepancies.
  std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    return a.discrepancy > b.discrepancy;
  });
  std::vector<DistanceConstraint> out;
  out.reserve(k);
  for (std::size_t r = 0; r < k; ++r) out.push_back({all[r].i, all[r].j, all[r].target, delta});
  return out;
}

// ---------------------------------------------------------------------------
// Maps

namespace {

struct AxisFactors {
  std::array<Vector, 3> weight;  // exp(-(r - x)^2 / (2 w^2)) per axis
};

AxisFactors axis_factors(const MapGrid& grid, std::span<const double> bead, double atom_width) {
  const double inv = 1.0 / (2.0 * atom_width * atom_width);
  AxisFactors f;
  for (std::size_t a = 0; a < 3; ++a) {
    f.weight[a].resize(grid.shape[a]);
    for (std::size_t i = 0; i < grid.shape[a]; ++i) {
      const double d = grid.center(a, i) - bead[a];
      f.weight[a][i] = std::exp(-d * d * inv);
    }
  }
  return f;
}

void check_grid(const MapGrid& grid) {
  require(grid.shape[0] > 0 && grid.shape[1] > 0 && grid.shape[2] > 0, "map grid must be non-empty");
  require(grid.spacing > 0.0 && std::isfinite(grid.spacing), "voxel spacing must be positive");
}

struct Moments {
  double mean;
  double stddev;
};

Moments map_moments(const Vector& v) {
  const double n = static_cast<double>(v.size());
  const double mean = simd::sum(v) / n;
  double ss = 0.0;
  for (double e : v) ss += (e - mean) * (e - mean);
  return {mean, std::sqrt(ss / n)};
}

}  // namespace

VoxelMap render_raw_map(const State& x, const MapGrid& grid, double atom_width) {
  check_grid(grid);
  require(atom_width > 0.0 && std::isfinite(atom_width), "atom width must be positive");
  require(x.size() % 3 == 0, "render_map: state must be an (N, 3) bead array");
  VoxelMap map{grid, Vector(grid.voxel_count(), 0.0)};
  const auto [nx, ny, nz] = grid.shape;
  for (std::size_t b = 0; b < x.size() / 3; ++b) {
    const AxisFactors f = axis_factors(grid, x.view().subspan(3 * b, 3), atom_width);
    for (std::size_t ix = 0; ix < nx; ++ix)
      for (std::size_t iy = 0; iy < ny; ++iy) {
        const double w = f.weight[0][ix] * f.weight[1][iy];
        simd::axpy(w, f.weight[2], std::span<double>(map.values.data() + (ix * ny + iy) * nz, nz));
      }
  }
  return map;
}

VoxelMap normalize_map(VoxelMap map) {
  require(!map.values.empty(), "cannot normalize an empty map");
  const Moments m = map_moments(map.values);
  if (!(m.stddev > 0.0) || !std::isfinite(m.stddev))
    throw DegenerateMap("map has zero variance and cannot be normalized");
  for (double& v : map.values) v = (v - m.mean) / m.stddev;
  return map;
}

VoxelMap render_map(const State& x, const MapGrid& grid, double atom_width) {
  return normalize_map(render_raw_map(x, grid, atom_width));
}

double map_correlation(const VoxelMap& a, const VoxelMap& b) {
  require(a.grid.shape == b.grid.shape, "map_correlation: map shapes differ");
  require(a.values.size() == b.values.size() && !a.values.empty(), "map_correlation: size mismatch");
  const Moments ma = map_moments(a.values);
  const Moments mb = map_moments(b.values);
  if (!(ma.stddev > 0.0) || !(mb.stddev > 0.0))
    throw DegenerateMap("map_correlation: zero-variance map");
  double cov = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    cov += (a.values[i] - ma.mean) * (b.values[i] - mb.mean);
  cov /= static_cast<double>(a.values.size());
  return std::clamp(cov / (ma.stddev * mb.stddev), -1.0, 1.0);
}

MapMSEReward::MapMSEReward(VoxelMap target, double atom_width, std::size_t num_beads)
    : target_(normalize_map(std::move(target))), atom_width_(atom_width), num_beads_(num_beads) {
  check_grid(target_.grid);
  require(target_.values.size() == target_.grid.voxel_count(), "target map has wrong size");
  require(atom_width_ > 0.0 && std::isfinite(atom_width_), "atom width must be positive");
  require(num_beads_ >= 1, "map reward needs at least one bead");
}

double MapMSEReward::value(const State& x) const {
  require(x.size() == dim(), "map reward: state dimension mismatch");
  const VoxelMap rendered = render_map(x, target_.grid, atom_width_);
  return -simd::squared_distance(rendered.values, target_.values) /
         static_cast<double>(rendered.values.size());
}

double MapMSEReward::correlation(const State& x) const {
  require(x.size() == dim(), "map reward: state dimension mismatch");
  return map_correlation(render_raw_map(x, target_.grid, atom_width_), target_);
}

RewardEval MapMSEReward::value_and_grad(const State& x) const {
  require(x.size() == dim(), "map reward: state dimension mismatch");
  const MapGrid& grid = target_.grid;
  const VoxelMap raw = render_raw_map(x, grid, atom_width_);
  const Moments m = map_moments(raw.values);
  if (!(m.stddev > 0.0) || !std::isfinite(m.stddev))
    throw DegenerateMap("rendered map has zero variance");
  const std::size_t N = raw.values.size();
  const double n = static_cast<double>(N);

  Vector normalized(N);
  for (std::size_t v = 0; v < N; ++v) normalized[v] = (raw.values[v] - m.mean) / m.stddev;

  RewardEval out;
  out.value = -simd::squared_distance(normalized, target_.values) / n;

  // dR/dV, then back through the z-score: dR/dG = (g - mean(g) - V mean(g V)) / s.
  Vector g(N);
  for (std::size_t v = 0; v < N; ++v) g[v] = -2.0 / n * (normalized[v] - target_.values[v]);
  const double g_mean = simd::sum(g) / n;
  const double gv_mean = simd::dot(g, normalized) / n;
  Vector gamma(N);
  for (std::size_t v = 0; v < N; ++v)
    gamma[v] = (g[v] - g_mean - normalized[v] * gv_mean) / m.stddev;

  // dG_v/dx_b = G_bv (r_v - x_b) / w^2 with separable G_bv.
  const auto [nx, ny, nz] = grid.shape;
  const double inv_w2 = 1.0 / (atom_width_ * atom_width_);
  out.grad.assign(dim(), 0.0);
  Vector ez_offset(nz);
  for (std::size_t b = 0; b < num_beads_; ++b) {
    const auto bead = x.view().subspan(3 * b, 3);
    const AxisFactors f = axis_factors(grid, bead, atom_width_);
    for (std::size_t iz = 0; iz < nz; ++iz)
      ez_offset[iz] = f.weight[2][iz] * (grid.center(2, iz) - bead[2]);
    double gx = 0.0, gy = 0.0, gz = 0.0;
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const double rx = grid.center(0, ix) - bead[0];
      for (std::size_t iy = 0; iy < ny; ++iy) {
        const double wxy = f.weight[0][ix] * f.weight[1][iy];
        if (wxy == 0.0) continue;
        const std::span<const double> row(gamma.data() + (ix * ny + iy) * nz, nz);
        const double a = simd::dot(row, f.weight[2]) * wxy;
        gx += a * rx;
        gy += a * (grid.center(1, iy) - bead[1]);
        gz += simd::dot(row, ez_offset) * wxy;
      }
    }
    out.grad[3 * b] = gx * inv_w2;
    out.grad[3 * b + 1] = gy * inv_w2;
    out.grad[3 * b + 2] = gz * inv_w2;
  }
  return out;
}

}  // namespace embedopt
