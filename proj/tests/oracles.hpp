// Independent reference computations used only by the tests. Nothing here
// calls into the library's numerical routines.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Loss { squared, absolute, eps, hinge };

inline double loss(Loss kind, double eps, double u, double y) {
  switch (kind) {
    case Loss::squared: return (u - y) * (u - y);
    case Loss::absolute: return std::fabs(u - y);
    case Loss::eps: {
      const double a = std::fabs(u - y);
      return a > eps ? a - eps : 0.0;
    }
    case Loss::hinge: {
      const double s = y > 0.0 ? 1.0 : -1.0;
      const double m = 1.0 - s * u;
      return m > 0.0 ? m : 0.0;
    }
  }
  return 0.0;
}

/// Gaussian Gram matrix of 1-column or multi-column row sets, by explicit loops.
inline Mat gram(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b, double h) {
  Mat g(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < a[i].size(); ++k) d2 += (a[i][k] - b[j][k]) * (a[i][k] - b[j][k]);
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(-d2 / (2.0 * h * h));
    }
  }
  return g;
}

/// F(theta) = (1/n) sum c((G theta)_i, y_i) + lambda theta' G theta, summed
/// term by term.
inline double objective(const Mat& g, const Vec& y, Loss kind, double eps, double lambda, const Vec& theta) {
  const auto n = g.rows();
  double risk = 0.0, pen = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double u = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) u += g(i, j) * theta(j);
    risk += loss(kind, eps, u, y(i));
    pen += theta(i) * u;
  }
  return risk / static_cast<double>(n) + lambda * pen;
}

/// Exact minimum of F for piecewise-linear losses by enumerating every
/// assignment of the fitted values to a loss piece. On a face where the
/// coordinates in K sit at kinks and the rest lie in open pieces with slopes
/// s, stationarity of F under G (K-rows of G theta) = kinks reads
/// theta_F = -s_F / (2 lambda n) and G_KK theta_K = kinks - G_KF theta_F.
/// The minimizer is one of these candidates; min F over them is the optimum.
inline double enumerate_minimum(const Mat& g, const Vec& y, Loss kind, double eps, double lambda) {
  const auto n = static_cast<int>(g.rows());
  // piece states: slope value, or kink position
  struct State {
    bool kink;
    double value;  // slope if !kink, kink offset rule otherwise
  };
  auto states_for = [&](int i) {
    std::vector<State> s;
    const double yi = y(i);
    switch (kind) {
      case Loss::absolute:
        s = {{false, 1.0}, {false, -1.0}, {true, yi}};
        break;
      case Loss::eps:
        s = {{false, 1.0}, {false, -1.0}, {false, 0.0}, {true, yi + eps}, {true, yi - eps}};
        break;
      case Loss::hinge: {
        const double sg = yi > 0.0 ? 1.0 : -1.0;
        s = {{false, 0.0}, {false, -sg}, {true, sg}};
        break;
      }
      case Loss::squared:
        break;
    }
    return s;
  };
  std::vector<std::vector<State>> all(n);
  for (int i = 0; i < n; ++i) all[i] = states_for(i);
  std::vector<int> pick(n, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    Vec theta(n);
    std::vector<int> kinks, freev;
    for (int i = 0; i < n; ++i) {
      const State& st = all[i][pick[i]];
      if (st.kink) {
        kinks.push_back(i);
      } else {
        freev.push_back(i);
        theta(i) = -st.value / (2.0 * lambda * n);
      }
    }
    if (!kinks.empty()) {
      const auto k = static_cast<Eigen::Index>(kinks.size());
      Mat gkk(k, k);
      Vec rhs(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        rhs(a) = all[kinks[a]][pick[kinks[a]]].value;
        for (int f : freev) rhs(a) -= g(kinks[a], f) * theta(f);
        for (Eigen::Index b = 0; b < k; ++b) gkk(a, b) = g(kinks[a], kinks[b]);
      }
      const Vec tk = gkk.fullPivLu().solve(rhs);
      for (Eigen::Index a = 0; a < k; ++a) theta(kinks[a]) = tk(a);
    }
    if (theta.allFinite()) best = std::min(best, objective(g, y, kind, eps, lambda, theta));
    int i = 0;
    for (; i < n; ++i) {
      if (++pick[i] < static_cast<int>(all[i].size())) break;
      pick[i] = 0;
    }
    if (i == n) break;
  }
  return best;
}

/// Squared loss: minimizer from the normal equations of the quadratic
/// F(theta) = |G theta - y|^2 / n + lambda theta' G theta, i.e.
/// (G G + lambda n G) theta = G y.
inline Vec squared_minimizer(const Mat& g, const Vec& y, double lambda) {
  const double n = static_cast<double>(g.rows());
  const Mat a = g * g + lambda * n * g;
  return a.colPivHouseholderQr().solve(g * y);
}

/// 1-D grid search over theta in [lo, hi] with the given step; returns the
/// grid argmin (first on ties).
inline std::pair<double, double> grid_1d(const std::function<double(double)>& f, double lo, double hi, double step) {
  const long count = std::lround((hi - lo) / step);
  double best_t = lo, best_f = f(lo);
  for (long k = 1; k <= count; ++k) {
    const double t = lo + static_cast<double>(k) * step;
    const double v = f(t);
    if (v < best_f) {
      best_f = v;
      best_t = t;
    }
  }
  return {best_t, best_f};
}

/// 3-D grid over [lo, hi]^3 at `step`, then pattern search with the step
/// halved down to `fine`.
inline double grid_refine_3d(const std::function<double(const Vec&)>& f, double lo, double hi, double step,
                             double fine) {
  const long count = std::lround((hi - lo) / step);
  Vec t(3), best(3);
  double fbest = std::numeric_limits<double>::infinity();
  for (long a = 0; a <= count; ++a) {
    t(0) = lo + static_cast<double>(a) * step;
    for (long b = 0; b <= count; ++b) {
      t(1) = lo + static_cast<double>(b) * step;
      for (long c = 0; c <= count; ++c) {
        t(2) = lo + static_cast<double>(c) * step;
        const double v = f(t);
        if (v < fbest) {
          fbest = v;
          best = t;
        }
      }
    }
  }
  // Pattern search: the 26 lattice neighbors plus random unit directions,
  // which keep making progress along kinked valleys where every lattice
  // direction is uphill.
  std::mt19937_64 gen(12345);
  std::normal_distribution<double> nd;
  std::vector<Vec> dirs;
  auto vec3 = [](double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
  };
  for (int da = -1; da <= 1; ++da)
    for (int db = -1; db <= 1; ++db)
      for (int dc = -1; dc <= 1; ++dc)
        if (da || db || dc) dirs.push_back(vec3(da, db, dc));
  for (int k = 0; k < 400; ++k) {
    const double a = nd(gen), b = nd(gen), c = nd(gen);
    const Vec r = vec3(a, b, c);
    dirs.push_back(r / r.norm());
  }
  for (double s = step; s >= fine; s *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (const Vec& dir : dirs) {
        const Vec cand = best + s * dir;
        const double v = f(cand);
        if (v < fbest) {
          fbest = v;
          best = cand;
          moved = true;
        }
      }
    }
  }
  return fbest;
}

/// k-NN by a full stable sort of all distances, then a linear vote scan.
inline long knn_brute(const std::vector<std::vector<double>>& xs, const std::vector<long>& labels,
                      const std::vector<double>& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += (xs[i][j] - q[j]) * (xs[i][j] - q[j]);
    d.emplace_back(s, i);
  }
  std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const long max_label = *std::max_element(labels.begin(), labels.end());
  std::vector<std::size_t> count(static_cast<std::size_t>(max_label) + 1, 0);
  for (std::size_t i = 0; i < k; ++i) ++count[static_cast<std::size_t>(labels[d[i].second])];
  long best = 0;
  for (long l = 1; l <= max_label; ++l)
    if (count[static_cast<std::size_t>(l)] > count[static_cast<std::size_t>(best)]) best = l;
  return best;
}

// Classification simulation law, coded from scratch.
inline double eta(double u, double v) {
  const double s = u * u + v;
  const double g = std::exp(-std::pow(s, 3.0)) + std::pow(u, 2.0) + std::pow(v, 2.0);
  return 1.0 / (1.0 + std::exp(-(g - 1.18) / 0.05));
}
inline bool bayes(double u, double v) {
  const double s = u * u + v;
  return std::exp(-std::pow(s, 3.0)) + u * u + v * v >= 1.18;
}

/// Midpoint rule over [0,1]^2 of f(u, v).
inline double square_quadrature(const std::function<double(double, double)>& f, int nodes) {
  double acc = 0.0;
  const double h = 1.0 / nodes;
  for (int i = 0; i < nodes; ++i)
    for (int j = 0; j < nodes; ++j) acc += f((i + 0.5) * h, (j + 0.5) * h);
  return acc * h * h;
}

/// E[f(X)] for X ~ N(0, variance) by composite Simpson on +-12 sd.
inline double normal_expectation(const std::function<double(double)>& f, double variance, int panels = 1000000) {
  const double sd = std::sqrt(variance);
  const double lo = -12.0 * sd, hi = 12.0 * sd;
  const double h = (hi - lo) / panels;
  auto dens = [&](double x) { return std::exp(-x * x / (2.0 * variance)) / std::sqrt(2.0 * std::numbers::pi * variance); };
  double acc = f(lo) * dens(lo) + f(hi) * dens(hi);
  for (int k = 1; k < panels; ++k) {
    const double x = lo + k * h;
    acc += (k % 2 ? 4.0 : 2.0) * f(x) * dens(x);
  }
  return acc * h / 3.0;
}

// Bound formulas, re-derived term by term.
inline double rkhs_remainder(double rho, double nu, double L, double kappa, double C, double lam, double nv, double nt,
                             double grid, double theta) {
  const double l = std::log(nv) + std::log(grid);
  const double m = nu > L ? nu : L;
  const double t1 = 18.0 * rho * l / theta / nv;
  const double t2 = 289.0 * m * m * kappa * C * l * l / (theta * theta * theta) / lam / (nv * nv);
  const double t3 = 289.0 * L * m * kappa * std::pow(l, 1.5) / theta / lam / nv / std::sqrt(nt);
  return std::max(t1, std::max(t2, t3)) / (1.0 - theta);
}

inline double classif_remainder(double beta, double r, double m, double nv) {
  return 29.0 * std::exp(std::log(r) / (beta + 2.0)) * std::log(std::exp(1.0) * m) *
         std::exp(-std::log(nv) * (beta + 1.0) / (beta + 2.0));
}

}  // namespace oracle
