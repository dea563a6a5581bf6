#include "embedopt/embedding.hpp"

#include <cmath>

#include "embedopt/errors.hpp"
#include "embedopt/kernels.hpp"

namespace embedopt {

Embedding::Embedding(std::vector<EmbeddingComponent> components)
    : components_(std::move(components)) {
  for (std::size_t i = 0; i < components_.size(); ++i) {
    require(!components_[i].name.empty(), "embedding component needs a name");
    require(!components_[i].values.empty(), "embedding component '" + components_[i].name +
                                                "' must have positive dimension");
    for (std::size_t j = 0; j < i; ++j)
      require(components_[j].name != components_[i].name,
              "duplicate embedding component '" + components_[i].name + "'");
  }
}

Embedding Embedding::zeros_like(const Embedding& layout) {
  Embedding out = layout;
  for (auto& c : out.components_) std::fill(c.values.begin(), c.values.end(), 0.0);
  return out;
}

Embedding Embedding::unflatten(const Embedding& layout, std::span<const double> flat) {
  require(flat.size() == layout.total_dim(), "unflatten: flat size does not match layout");
  Embedding out = layout;
  std::size_t offset = 0;
  for (auto& c : out.components_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), c.values.size(),
                c.values.begin());
    offset += c.values.size();
  }
  return out;
}

std::size_t Embedding::total_dim() const {
  std::size_t n = 0;
  for (const auto& c : components_) n += c.values.size();
  return n;
}

const EmbeddingComponent& Embedding::component(std::string_view name) const {
  for (const auto& c : components_)
    if (c.name == name) return c;
  throw InvalidArgument("no embedding component named '" + std::string(name) + "'");
}

Vector Embedding::flatten() const {
  Vector flat;
  flat.reserve(total_dim());
  for (const auto& c : components_) flat.insert(flat.end(), c.values.begin(), c.values.end());
  return flat;
}

bool Embedding::same_layout(const Embedding& other) const {
  if (components_.size() != other.components_.size()) return false;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (components_[i].name != other.components_[i].name) return false;
    if (components_[i].values.size() != other.components_[i].values.size()) return false;
  }
  return true;
}

void Embedding::add_scaled(double alpha, const Embedding& other) {
  require(same_layout(other), "embedding layout mismatch");
  for (std::size_t i = 0; i < components_.size(); ++i)
    simd::axpy(alpha, other.components_[i].values, components_[i].values);
}

double Embedding::dot(const Embedding& other) const {
  require(same_layout(other), "embedding layout mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i)
    acc += simd::dot(components_[i].values, other.components_[i].values);
  return acc;
}

double Embedding::norm() const { return std::sqrt(dot(*this)); }

bool Embedding::all_finite() const {
  for (const auto& c : components_)
    for (double v : c.values)
      if (!std::isfinite(v)) return false;
  return true;
}

Embedding operator-(const Embedding& a, const Embedding& b) {
  Embedding out = a;
  out.add_scaled(-1.0, b);
  return out;
}

}  // namespace embedopt
