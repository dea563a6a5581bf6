#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <string_view>
#include <vector>

#include "embedopt/embedding.hpp"
#include "embedopt/kernels.hpp"

namespace embedopt {

/// m(c) = W * flatten(c) + b.
struct AffineMeanMap {
  simd::Matrix weights;  // D x d
  Vector offset;         // D

  std::size_t output_dim() const { return weights.rows; }
  std::size_t input_dim() const { return weights.cols; }
  Vector apply(std::span<const double> flat_c) const;

  static AffineMeanMap identity(std::size_t dim);
  /// W_ij ~ scale * N(0, 1), b = 0.
  static AffineMeanMap random(std::size_t out_dim, std::size_t in_dim, double scale, Rng& rng);
};

/// Closed-form conditional denoiser x_hat(x, c, sigma) = E[x_0 | x_sigma = x]
/// under a conditional prior p(x_0 | c), with exact Jacobian products.
/// Implementations are immutable and safe to share across threads.
class DenoiserModel {
 public:
  virtual ~DenoiserModel() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t dim() const = 0;
  /// Component names and sizes accepted by every operation.
  virtual const Embedding& embedding_layout() const = 0;

  virtual State denoise(const State& x, const Embedding& c, double sigma) const = 0;
  /// J_x^T v with J_x = d denoise / d x.
  virtual Vector vjp_x(const State& x, const Embedding& c, double sigma,
                       std::span<const double> v) const = 0;
  /// J_c^T v with J_c = d denoise / d c.
  virtual Embedding vjp_c(const State& x, const Embedding& c, double sigma,
                          std::span<const double> v) const = 0;
  /// J_c u.
  virtual Vector jvp_c(const State& x, const Embedding& c, double sigma,
                       const Embedding& u) const = 0;
  /// Exact ancestral draw from p(x_0 | c).
  virtual State sample_prior(const Embedding& c, Rng& rng) const = 0;
  /// Draw from the noised marginal p_sigma(x | c) = p(x_0 | c) * N(0, sigma^2 I).
  State sample_marginal(const Embedding& c, double sigma, Rng& rng) const;

 protected:
  void check_shapes(const State& x, const Embedding& c, double sigma) const;
};

/// (x_hat - x) / sigma^2: Tweedie's estimate of the noised score.
Vector score_from_denoiser(const State& x_hat, const State& x, double sigma);

/// Isotropic Gaussian prior N(m(c), s0^2 I). Denoising shrinks toward m(c)
/// by k = s0^2 / (s0^2 + sigma^2).
class GaussianPriorModel final : public DenoiserModel {
 public:
  GaussianPriorModel(AffineMeanMap mean_map, double prior_std, Embedding layout);

  /// Permits s0 = 0 so degenerate-limit behaviour can be tested.
  static GaussianPriorModel degenerate_for_testing(AffineMeanMap mean_map, Embedding layout);

  std::string_view kind() const override { return "gaussian"; }
  std::size_t dim() const override { return mean_map_.output_dim(); }
  const Embedding& embedding_layout() const override { return layout_; }
  const AffineMeanMap& mean_map() const { return mean_map_; }
  double prior_std() const { return prior_std_; }
  double shrinkage(double sigma) const;

  State denoise(const State& x, const Embedding& c, double sigma) const override;
  Vector vjp_x(const State& x, const Embedding& c, double sigma,
               std::span<const double> v) const override;
  Embedding vjp_c(const State& x, const Embedding& c, double sigma,
                  std::span<const double> v) const override;
  Vector jvp_c(const State& x, const Embedding& c, double sigma,
               const Embedding& u) const override;
  State sample_prior(const Embedding& c, Rng& rng) const override;

 private:
  struct Unchecked {};
  GaussianPriorModel(AffineMeanMap mean_map, double prior_std, Embedding layout, Unchecked);

  AffineMeanMap mean_map_;
  double prior_std_;
  Embedding layout_;
};

struct MixtureMode {
  double weight;
  AffineMeanMap mean_map;
  double std;
};

/// sum_k pi_k N(m_k(c), s_k^2 I). Responsibilities are evaluated in log
/// space, so large ||x|| cannot overflow.
class MixturePriorModel final : public DenoiserModel {
 public:
  MixturePriorModel(std::vector<MixtureMode> modes, Embedding layout);

  std::string_view kind() const override { return "mixture"; }
  std::size_t dim() const override { return modes_.front().mean_map.output_dim(); }
  const Embedding& embedding_layout() const override { return layout_; }
  const std::vector<MixtureMode>& modes() const { return modes_; }

  /// Posterior mode probabilities r_k(x, c, sigma).
  Vector responsibilities(const State& x, const Embedding& c, double sigma) const;

  State denoise(const State& x, const Embedding& c, double sigma) const override;
  Vector vjp_x(const State& x, const Embedding& c, double sigma,
               std::span<const double> v) const override;
  Embedding vjp_c(const State& x, const Embedding& c, double sigma,
                  std::span<const double> v) const override;
  Vector jvp_c(const State& x, const Embedding& c, double sigma,
               const Embedding& u) const override;
  State sample_prior(const Embedding& c, Rng& rng) const override;

 private:
  struct Terms;
  Terms evaluate(const State& x, const Embedding& c, double sigma) const;

  std::vector<MixtureMode> modes_;
  Embedding layout_;
};

/// Layout with one component per (name, dim) pair, values zero.
Embedding make_layout(const std::vector<std::pair<std::string, std::size_t>>& components);

/// 1-D prior N(c, s0^2) with identity mean map and a single component
/// "single" of dimension 1.
GaussianPriorModel scalar_gaussian_model(double prior_std = 0.5);

struct RandomMixtureSpec {
  std::size_t dim = 6;
  std::vector<double> weights{0.5, 0.5};
  std::vector<double> stds{0.6, 0.9};
  double weight_scale = 1.0;  // W_k entries ~ weight_scale * N(0, 1) / sqrt(d)
  double offset_scale = 2.0;  // b_k entries ~ offset_scale * N(0, 1)
};

/// Mixture with seeded random affine mean maps, for property tests.
MixturePriorModel random_mixture_model(const RandomMixtureSpec& spec, const Embedding& layout,
                                       Rng& rng);

}  // namespace embedopt
