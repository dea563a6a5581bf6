#include "embedopt/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "embedopt/errors.hpp"

namespace embedopt {

namespace {

void require_finite_sigma(double sigma) {
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be finite and non-negative");
}

Vector standard_normal(std::size_t n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(n);
  for (double& v : out) v = normal(rng);
  return out;
}

}  // namespace

Vector AffineMeanMap::apply(std::span<const double> flat_c) const {
  Vector out(output_dim());
  simd::gemv(weights, flat_c, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += offset[i];
  return out;
}

AffineMeanMap AffineMeanMap::identity(std::size_t dim) {
  AffineMeanMap m{simd::Matrix(dim, dim), Vector(dim, 0.0)};
  for (std::size_t i = 0; i < dim; ++i) m.weights(i, i) = 1.0;
  return m;
}

AffineMeanMap AffineMeanMap::random(std::size_t out_dim, std::size_t in_dim, double scale,
                                    Rng& rng) {
  AffineMeanMap m{simd::Matrix(out_dim, in_dim), Vector(out_dim, 0.0)};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& w : m.weights.data) w = scale * normal(rng);
  return m;
}

void DenoiserModel::check_shapes(const State& x, const Embedding& c, double sigma) const {
  require(x.size() == dim(), "state dimension does not match model");
  require(c.same_layout(embedding_layout()), "embedding layout does not match model");
  require_finite_sigma(sigma);
}

State DenoiserModel::sample_marginal(const Embedding& c, double sigma, Rng& rng) const {
  State x = sample_prior(c, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : x.coords) v += sigma * normal(rng);
  return x;
}

Vector score_from_denoiser(const State& x_hat, const State& x, double sigma) {
  require(x_hat.size() == x.size(), "score_from_denoiser: shape mismatch");
  if (sigma == 0.0) throw DivisionByZero("score_from_denoiser: sigma = 0");
  require(sigma > 0.0, "score_from_denoiser: sigma must be positive");
  const double inv = 1.0 / (sigma * sigma);
  Vector out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x_hat.coords[i] - x.coords[i]) * inv;
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian

GaussianPriorModel::GaussianPriorModel(AffineMeanMap mean_map, double prior_std, Embedding layout)
    : GaussianPriorModel(std::move(mean_map), prior_std, std::move(layout), Unchecked{}) {
  require(prior_std > 0.0 && std::isfinite(prior_std), "prior std must be positive");
}

GaussianPriorModel::GaussianPriorModel(AffineMeanMap mean_map, double prior_std, Embedding layout,
                                       Unchecked)
    : mean_map_(std::move(mean_map)), prior_std_(prior_std), layout_(Embedding::zeros_like(layout)) {
  require(mean_map_.offset.size() == mean_map_.output_dim(), "mean map offset has wrong size");
  require(mean_map_.input_dim() == layout_.total_dim(),
          "mean map input dimension does not match embedding layout");
  require(mean_map_.output_dim() > 0, "model dimension must be positive");
}

GaussianPriorModel GaussianPriorModel::degenerate_for_testing(AffineMeanMap mean_map,
                                                              Embedding layout) {
  return GaussianPriorModel(std::move(mean_map), 0.0, std::move(layout), Unchecked{});
}

double GaussianPriorModel::shrinkage(double sigma) const {
  if (sigma == 0.0) return 1.0;
  const double s2 = prior_std_ * prior_std_;
  return s2 / (s2 + sigma * sigma);
}

State GaussianPriorModel::denoise(const State& x, const Embedding& c, double sigma) const {
  check_shapes(x, c, sigma);
  if (sigma == 0.0) return x;
  const double k = shrinkage(sigma);
  Vector m = mean_map_.apply(c.flatten());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] += k * (x.coords[i] - m[i]);
  return State(std::move(m));
}

Vector GaussianPriorModel::vjp_x(const State& x, const Embedding& c, double sigma,
                                 std::span<const double> v) const {
  check_shapes(x, c, sigma);
  require(v.size() == dim(), "vjp_x: cotangent has wrong dimension");
  const double k = shrinkage(sigma);
  Vector out(v.begin(), v.end());
  for (double& e : out) e *= k;
  return out;
}

Embedding GaussianPriorModel::vjp_c(const State& x, const Embedding& c, double sigma,
                                    std::span<const double> v) const {
  check_shapes(x, c, sigma);
  require(v.size() == dim(), "vjp_c: cotangent has wrong dimension");
  const double k = shrinkage(sigma);
  Vector flat(layout_.total_dim(), 0.0);
  simd::gemv_transpose_accumulate(mean_map_.weights, v, flat, 1.0 - k);
  return Embedding::unflatten(layout_, flat);
}

Vector GaussianPriorModel::jvp_c(const State& x, const Embedding& c, double sigma,
                                 const Embedding& u) const {
  check_shapes(x, c, sigma);
  require(u.same_layout(layout_), "jvp_c: tangent layout does not match model");
  const double k = shrinkage(sigma);
  Vector out(dim());
  simd::gemv(mean_map_.weights, u.flatten(), out);
  for (double& e : out) e *= (1.0 - k);
  return out;
}

State GaussianPriorModel::sample_prior(const Embedding& c, Rng& rng) const {
  require(c.same_layout(layout_), "embedding layout does not match model");
  Vector m = mean_map_.apply(c.flatten());
  if (prior_std_ == 0.0) return State(std::move(m));
  const Vector eps = standard_normal(m.size(), rng);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] += prior_std_ * eps[i];
  return State(std::move(m));
}

// ---------------------------------------------------------------------------
// Mixture

struct MixturePriorModel::Terms {
  Vector resp;                // r_k
  std::vector<Vector> means;  // m_k(c)
  std::vector<Vector> posts;  // m_k + kappa_k (x - m_k)
  Vector var;                 // s_k^2 + sigma^2
  Vector kappa;               // s_k^2 / var_k
  Vector x_hat;
};

MixturePriorModel::MixturePriorModel(std::vector<MixtureMode> modes, Embedding layout)
    : modes_(std::move(modes)), layout_(Embedding::zeros_like(layout)) {
  require(!modes_.empty(), "mixture needs at least one mode");
  double total = 0.0;
  const std::size_t D = modes_.front().mean_map.output_dim();
  require(D > 0, "model dimension must be positive");
  for (const auto& m : modes_) {
    require(m.weight >= 0.0 && std::isfinite(m.weight), "mixture weights must be non-negative");
    require(m.std > 0.0 && std::isfinite(m.std), "mixture mode std must be positive");
    require(m.mean_map.output_dim() == D, "mixture modes disagree on dimension");
    require(m.mean_map.offset.size() == D, "mean map offset has wrong size");
    require(m.mean_map.input_dim() == layout_.total_dim(),
            "mean map input dimension does not match embedding layout");
    total += m.weight;
  }
  require(std::abs(total - 1.0) < 1e-9, "mixture weights must sum to 1");
}

MixturePriorModel::Terms MixturePriorModel::evaluate(const State& x, const Embedding& c,
                                                     double sigma) const {
  check_shapes(x, c, sigma);
  const std::size_t K = modes_.size();
  const std::size_t D = dim();
  const Vector flat = c.flatten();
  Terms t;
  t.resp.assign(K, 0.0);
  t.means.resize(K);
  t.posts.resize(K);
  t.var.resize(K);
  t.kappa.resize(K);
  Vector log_r(K, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < K; ++k) {
    const MixtureMode& mode = modes_[k];
    t.means[k] = mode.mean_map.apply(flat);
    const double s2 = mode.std * mode.std;
    t.var[k] = s2 + sigma * sigma;
    t.kappa[k] = s2 / t.var[k];
    if (mode.weight > 0.0) {
      const double d2 = simd::squared_distance(x.coords, t.means[k]);
      log_r[k] = std::log(mode.weight) - 0.5 * static_cast<double>(D) * std::log(t.var[k]) -
                 0.5 * d2 / t.var[k];
    }
    t.posts[k] = t.means[k];
    for (std::size_t i = 0; i < D; ++i) t.posts[k][i] += t.kappa[k] * (x.coords[i] - t.means[k][i]);
  }
  const double top = *std::max_element(log_r.begin(), log_r.end());
  double norm = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    t.resp[k] = std::exp(log_r[k] - top);
    norm += t.resp[k];
  }
  for (double& r : t.resp) r /= norm;
  t.x_hat.assign(D, 0.0);
  for (std::size_t k = 0; k < K; ++k)
    if (t.resp[k] > 0.0) simd::axpy(t.resp[k], t.posts[k], t.x_hat);
  return t;
}

Vector MixturePriorModel::responsibilities(const State& x, const Embedding& c, double sigma) const {
  return evaluate(x, c, sigma).resp;
}

State MixturePriorModel::denoise(const State& x, const Embedding& c, double sigma) const {
  return State(evaluate(x, c, sigma).x_hat);
}

// J_x^T v = sum_k r_k kappa_k v + sum_k r_k (mu_k.v - x_hat.v) a_k,
// a_k = -(x - m_k) / var_k.
Vector MixturePriorModel::vjp_x(const State& x, const Embedding& c, double sigma,
                                std::span<const double> v) const {
  require(v.size() == dim(), "vjp_x: cotangent has wrong dimension");
  const Terms t = evaluate(x, c, sigma);
  const std::size_t D = dim();
  const double xhat_v = simd::dot(t.x_hat, v);
  Vector out(D, 0.0);
  double diag = 0.0;
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    if (t.resp[k] == 0.0) continue;
    diag += t.resp[k] * t.kappa[k];
    const double coef = -t.resp[k] * (simd::dot(t.posts[k], v) - xhat_v) / t.var[k];
    for (std::size_t i = 0; i < D; ++i) out[i] += coef * (x.coords[i] - t.means[k][i]);
  }
  for (std::size_t i = 0; i < D; ++i) out[i] += diag * v[i];
  return out;
}

// J_c^T v = sum_k W_k^T [ r_k (1 - kappa_k) v + r_k (mu_k.v - x_hat.v) (x - m_k) / var_k ].
Embedding MixturePriorModel::vjp_c(const State& x, const Embedding& c, double sigma,
                                   std::span<const double> v) const {
  require(v.size() == dim(), "vjp_c: cotangent has wrong dimension");
  const Terms t = evaluate(x, c, sigma);
  const std::size_t D = dim();
  const double xhat_v = simd::dot(t.x_hat, v);
  Vector flat(layout_.total_dim(), 0.0);
  Vector pulled(D);
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    if (t.resp[k] == 0.0) continue;
    const double a = t.resp[k] * (1.0 - t.kappa[k]);
    const double b = t.resp[k] * (simd::dot(t.posts[k], v) - xhat_v) / t.var[k];
    for (std::size_t i = 0; i < D; ++i) pulled[i] = a * v[i] + b * (x.coords[i] - t.means[k][i]);
    simd::gemv_transpose_accumulate(modes_[k].mean_map.weights, pulled, flat);
  }
  return Embedding::unflatten(layout_, flat);
}

// J_c u = sum_k r_k [ (1 - kappa_k) w_k + (q_k - q_bar) mu_k ],
// w_k = W_k u, q_k = (x - m_k).w_k / var_k.
Vector MixturePriorModel::jvp_c(const State& x, const Embedding& c, double sigma,
                                const Embedding& u) const {
  require(u.same_layout(layout_), "jvp_c: tangent layout does not match model");
  const Terms t = evaluate(x, c, sigma);
  const std::size_t D = dim();
  const std::size_t K = modes_.size();
  const Vector flat_u = u.flatten();
  std::vector<Vector> w(K, Vector(D));
  Vector q(K, 0.0);
  double q_bar = 0.0;
  Vector diff(D);
  for (std::size_t k = 0; k < K; ++k) {
    if (t.resp[k] == 0.0) continue;
    simd::gemv(modes_[k].mean_map.weights, flat_u, w[k]);
    for (std::size_t i = 0; i < D; ++i) diff[i] = x.coords[i] - t.means[k][i];
    q[k] = simd::dot(diff, w[k]) / t.var[k];
    q_bar += t.resp[k] * q[k];
  }
  Vector out(D, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    if (t.resp[k] == 0.0) continue;
    simd::axpy(t.resp[k] * (1.0 - t.kappa[k]), w[k], out);
    simd::axpy(t.resp[k] * (q[k] - q_bar), t.posts[k], out);
  }
  return out;
}

State MixturePriorModel::sample_prior(const Embedding& c, Rng& rng) const {
  require(c.same_layout(layout_), "embedding layout does not match model");
  Vector weights;
  for (const auto& m : modes_) weights.push_back(m.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const MixtureMode& mode = modes_[pick(rng)];
  Vector x = mode.mean_map.apply(c.flatten());
  const Vector eps = standard_normal(x.size(), rng);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += mode.std * eps[i];
  return State(std::move(x));
}

}  // namespace embedopt

namespace embedopt {

Embedding make_layout(const std::vector<std::pair<std::string, std::size_t>>& components) {
  std::vector<EmbeddingComponent> out;
  for (const auto& [name, d] : components) out.push_back({name, Vector(d, 0.0)});
  return Embedding(std::move(out));
}

GaussianPriorModel scalar_gaussian_model(double prior_std) {
  return GaussianPriorModel(AffineMeanMap::identity(1), prior_std, make_layout({{"single", 1}}));
}

MixturePriorModel random_mixture_model(const RandomMixtureSpec& spec, const Embedding& layout,
                                       Rng& rng) {
  require(spec.weights.size() == spec.stds.size() && !spec.weights.empty(),
          "random mixture: weights and stds must have equal, positive length");
  const std::size_t d = layout.total_dim();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<MixtureMode> modes;
  for (std::size_t k = 0; k < spec.weights.size(); ++k) {
    AffineMeanMap map = AffineMeanMap::random(spec.dim, d,
                                              spec.weight_scale / std::sqrt(static_cast<double>(d)), rng);
    for (double& b : map.offset) b = spec.offset_scale * normal(rng);
    modes.push_back({spec.weights[k], std::move(map), spec.stds[k]});
  }
  return MixturePriorModel(std::move(modes), layout);
}

}  // namespace embedopt
