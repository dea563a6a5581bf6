#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace embedopt {

using Vector = std::vector<double>;
using Rng = std::mt19937_64;

/// Coordinates in sample space: 3 * N_beads for bead chains, 1 for the
/// scalar synthetic task.
struct State {
  Vector coords;

  State() = default;
  explicit State(Vector v) : coords(std::move(v)) {}
  explicit State(std::size_t dim) : coords(dim, 0.0) {}

  std::size_t size() const { return coords.size(); }
  std::span<const double> view() const { return coords; }
  bool operator==(const State&) const = default;
};

struct EmbeddingComponent {
  std::string name;
  Vector values;
  bool operator==(const EmbeddingComponent&) const = default;
};

/// Named conditioning tensors (the toy analog of single and pair
/// embeddings). Gradients with respect to an embedding use the same type.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<EmbeddingComponent> components);

  /// Same names and dimensions, all values zero.
  static Embedding zeros_like(const Embedding& layout);
  /// Rebuilds components of `layout` from a flat vector (component order).
  static Embedding unflatten(const Embedding& layout, std::span<const double> flat);

  std::size_t num_components() const { return components_.size(); }
  std::size_t total_dim() const;
  const std::vector<EmbeddingComponent>& components() const { return components_; }
  std::vector<EmbeddingComponent>& components() { return components_; }
  const EmbeddingComponent& component(std::string_view name) const;

  Vector flatten() const;
  bool same_layout(const Embedding& other) const;

  // this += alpha * other
  void add_scaled(double alpha, const Embedding& other);
  double dot(const Embedding& other) const;
  double norm() const;
  bool all_finite() const;

  bool operator==(const Embedding&) const = default;

 private:
  std::vector<EmbeddingComponent> components_;
};

Embedding operator-(const Embedding& a, const Embedding& b);

}  // namespace embedopt
