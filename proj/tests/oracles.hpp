#pragma once

// Independent reference computations for the test suite. Nothing here calls
// into the library's numerical kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double rel_err(const Vec& a, const Vec& b) {
  Vec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm(d) / std::max(norm(b), 1e-12);
}

inline Vec central_gradient(const std::function<double(const Vec&)>& f, const Vec& p) {
  const double h = 1e-5 * (1.0 + norm(p));
  Vec g(p.size());
  Vec q = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    q[i] = p[i] + h;
    const double fp = f(q);
    q[i] = p[i] - h;
    const double fm = f(q);
    q[i] = p[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline Vec central_directional(const std::function<Vec(const Vec&)>& f, const Vec& p, const Vec& u) {
  const double h = 1e-5 * (1.0 + norm(p));
  Vec a = p, b = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    a[i] += h * u[i];
    b[i] -= h * u[i];
  }
  const Vec fa = f(a), fb = f(b);
  Vec out(fa.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (fa[i] - fb[i]) / (2.0 * h);
  return out;
}

struct Posterior {
  double mean;
  double var;
};

// Precision-weighted combination of a Gaussian prior and a tempered Gaussian likelihood.
inline Posterior conjugate(double m, double s2, double y, double tau2, double w) {
  const double precision = 1.0 / s2 + w / tau2;
  return {(m / s2 + w * y / tau2) / precision, 1.0 / precision};
}

struct Grid {
  std::size_t nx, ny, nz;
  double ox, oy, oz, spacing;
};

// Full three-dimensional Gaussian sum at every voxel, no separability.
inline Vec render_brute(const Vec& coords, const Grid& g, double width) {
  Vec out(g.nx * g.ny * g.nz, 0.0);
  for (std::size_t ix = 0; ix < g.nx; ++ix)
    for (std::size_t iy = 0; iy < g.ny; ++iy)
      for (std::size_t iz = 0; iz < g.nz; ++iz) {
        const double cx = g.ox + ix * g.spacing, cy = g.oy + iy * g.spacing, cz = g.oz + iz * g.spacing;
        double v = 0.0;
        for (std::size_t b = 0; b < coords.size() / 3; ++b) {
          const double dx = cx - coords[3 * b], dy = cy - coords[3 * b + 1], dz = cz - coords[3 * b + 2];
          v += std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * width * width));
        }
        out[(ix * g.ny + iy) * g.nz + iz] = v;
      }
  return out;
}

inline double pearson(const Vec& a, const Vec& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double mean(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_std(const Vec& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Counts consecutive pairs where the second value drops below the first by more than tol.
inline std::size_t count_drops(const Vec& f, double tol) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < f.size(); ++i) n += f[i] < f[i - 1] - tol ? 1 : 0;
  return n;
}

}  // namespace oracle
