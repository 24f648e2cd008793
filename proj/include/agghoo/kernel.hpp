// Gaussian-kernel regularized empirical risk minimization.
//
// For a convex training loss c and lambda > 0 the estimator is the kernel
// expansion t(x) = sum_j theta_j K(x_j, x) whose coefficients minimize
//
//     F(theta) = (1/n) sum_i c((G theta)_i, y_i) + lambda * theta' G theta,
//
// G being the Gram matrix of the training inputs.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "agghoo/core.hpp"

namespace agghoo {

struct KernelSpec {
  double bandwidth = 1.0;  // h in K(x,x') = exp(-|x-x'|^2 / (2 h^2))

  static KernelSpec gaussian(double h) {
    require(std::isfinite(h) && h > 0.0, "KernelSpec: bandwidth must be > 0");
    return KernelSpec{h};
  }
  /// sup_x K(x,x)
  static constexpr double kappa() { return 1.0; }

  double operator()(std::span<const double> a, std::span<const double> b) const {
    double d2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double t = a[k] - b[k];
      d2 += t * t;
    }
    return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Entry (i,j) = K(a_i, b_j).
inline Eigen::MatrixXd gram(const KernelSpec& spec, const RowMatrix& a, const RowMatrix& b) {
  require(a.rows() > 0 && b.rows() > 0, "gram: empty input");
  require(a.cols() == b.cols(), "gram: dimension mismatch");
  Eigen::MatrixXd g(a.rows(), b.rows());
  const double scale = -1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      g(i, j) = std::exp(scale * (a.row(i) - b.row(j)).squaredNorm());
    }
  }
  return g;
}

inline Eigen::MatrixXd gram(const KernelSpec& spec, const RowMatrix& a) {
  require(a.rows() > 0, "gram: empty input");
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd g(n, n);
  const double scale = -1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = std::exp(scale * (a.row(i) - a.row(j)).squaredNorm());
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

/// A fitted kernel expansion. lambda is the regularization used at fit time
/// (0 for averaged models built from several fits with different lambdas).
struct KernelModel {
  RowMatrix support;
  Vector theta;
  KernelSpec spec;
  double lambda = 0.0;

  double predict(std::span<const double> x) const {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < support.rows(); ++j) acc += theta(j) * spec(row_span(support, j), x);
    return acc;
  }
  Vector predict_rows(const RowMatrix& xs) const { return gram(spec, xs, support) * theta; }
};

inline double rkhs_norm_sq(const KernelModel& model) {
  if (model.theta.size() == 0) return 0.0;
  const double v = model.theta.dot(gram(model.spec, model.support) * model.theta);
  return std::abs(v) <= 1e-12 ? std::max(v, 0.0) : v;
}

/// |a - b|_H^2 with both expansions placed on the union of their supports.
inline double rkhs_distance_sq(const KernelModel& a, const KernelModel& b) {
  require(a.spec == b.spec, "rkhs_distance_sq: kernel mismatch");
  require(a.support.cols() == b.support.cols(), "rkhs_distance_sq: dimension mismatch");
  RowMatrix s(a.support.rows() + b.support.rows(), a.support.cols());
  s << a.support, b.support;
  Vector c(a.theta.size() + b.theta.size());
  c << a.theta, -b.theta;
  return std::max(c.dot(gram(a.spec, s) * c), 0.0);
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

enum class SolverMethod {
  /// Exact box-constrained dual coordinate descent with active-set polishing
  /// (squared loss: direct linear solve).
  dual_coordinate,
  /// Moreau/Huber smoothing continuation with backtracking gradient descent.
  smoothing_gradient,
};

struct SolverConfig {
  SolverMethod method = SolverMethod::dual_coordinate;
  /// Converged when the subgradient residual is <= tolerance * (1 + |F|).
  double tolerance = 1e-6;
  /// Coordinate descent stops once a full sweep moves no coefficient by more
  /// than this (in units of the fitted values).
  double step_tolerance = 1e-11;
  int max_sweeps = 20000;
  int polish_every = 4;
  /// Fitted values within kink_tolerance * (1 + |y|) of a loss kink use the
  /// full subdifferential at that kink when measuring the residual.
  double kink_tolerance = 1e-7;
  // smoothing_gradient only
  std::vector<double> smoothing_schedule{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  int max_stage_iterations = 5000;
  double stage_relative_decrease = 1e-9;
};

struct SolveDiagnostics {
  double final_objective = 0.0;
  double subgradient_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// F(theta) for a Gram matrix and training targets.
inline double kernel_objective(const Eigen::MatrixXd& g, const Vector& y, const LossSpec& c, double lambda,
                               const Vector& theta) {
  const Vector u = g * theta;
  double risk = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) risk += point_loss(c, u(i), y(i));
  return risk / static_cast<double>(u.size()) + lambda * theta.dot(u);
}

namespace detail {

/// Subdifferential interval of u -> c(u, y) at u, widened at kinks.
inline std::pair<double, double> loss_subdifferential(const LossSpec& c, double u, double y, double kink_tol) {
  const double tol = kink_tol * (1.0 + std::abs(y));
  switch (c.kind) {
    case LossKind::absolute:
    case LossKind::eps_insensitive: {
      const double eps = c.kind == LossKind::absolute ? 0.0 : c.epsilon;
      const double r = u - y;
      const double lo = r > eps + tol ? 1.0 : (r >= -eps + tol ? 0.0 : -1.0);
      const double hi = r < -eps - tol ? -1.0 : (r <= eps - tol ? 0.0 : 1.0);
      return {lo, hi};
    }
    case LossKind::hinge: {
      const double s = hinge_sign(y);
      const double m = s * u;
      const double dlo = m > 1.0 + tol ? 0.0 : -1.0;  // derivative wrt margin
      const double dhi = m < 1.0 - tol ? -1.0 : 0.0;
      return s > 0 ? std::pair{dlo, dhi} : std::pair{-dhi, -dlo};
    }
    case LossKind::squared: {
      const double d = 2.0 * (u - y);
      return {d, d};
    }
    case LossKind::zero_one: break;
  }
  throw ContractViolation("loss_subdifferential: non-convex loss");
}

/// Euclidean norm of a small element of dF(theta) = G (s/n + 2 lambda theta),
/// s_i in dc(u_i). s_i is taken as the point of its interval closest to
/// -2 lambda n theta_i, which zeroes the residual at an exact optimum.
inline double subgradient_residual(const Eigen::MatrixXd& g, const Vector& y, const LossSpec& c, double lambda,
                                   const Vector& theta, double kink_tol) {
  const auto n = static_cast<double>(y.size());
  const Vector u = g * theta;
  Vector w(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const auto [lo, hi] = loss_subdifferential(c, u(i), y(i), kink_tol);
    const double s = std::clamp(-2.0 * lambda * n * theta(i), lo, hi);
    w(i) = s / n + 2.0 * lambda * theta(i);
  }
  return (g * w).norm();
}

/// min 0.5 t'Gt - b't + eps |t|_1  subject to lo <= t <= hi  (lo <= 0 <= hi).
/// Cyclic coordinate descent; every few sweeps the free coordinates are
/// solved jointly and the step is accepted if it lowers the objective.
/// Returns the number of sweeps.
inline int solve_box_l1_qp(const Eigen::MatrixXd& g, const Vector& b, double eps, const Vector& lo, const Vector& hi,
                           Vector& theta, const SolverConfig& cfg) {
  const Eigen::Index n = b.size();
  Vector u = g * theta;
  auto dual_value = [&](const Vector& t, const Vector& gt) {
    return 0.5 * t.dot(gt) - b.dot(t) + eps * t.lpNorm<1>();
  };

  int sweep = 0;
  for (; sweep < cfg.max_sweeps; ++sweep) {
    double max_move = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double gii = g(i, i);
      const double z = gii * theta(i) - (u(i) - b(i));
      double t = z > eps ? (z - eps) / gii : (z < -eps ? (z + eps) / gii : 0.0);
      t = std::clamp(t, lo(i), hi(i));
      const double delta = t - theta(i);
      if (delta != 0.0) {
        u.noalias() += delta * g.col(i);
        theta(i) = t;
        max_move = std::max(max_move, std::abs(delta) * gii);
      }
    }
    if (max_move <= cfg.step_tolerance) {
      ++sweep;
      break;
    }

    if (cfg.polish_every > 0 && (sweep + 1) % cfg.polish_every == 0) {
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < n; ++i) {
        const bool interior = theta(i) > lo(i) && theta(i) < hi(i);
        if (interior && (eps == 0.0 || theta(i) != 0.0)) free.push_back(i);
      }
      if (free.empty()) continue;
      const auto m = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd gff(m, m);
      Vector rhs(m), tf(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        tf(a) = theta(free[a]);
        for (Eigen::Index c = 0; c < m; ++c) gff(a, c) = g(free[a], free[c]);
      }
      const Vector gft = gff * tf;
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index i = free[a];
        const double sgn = theta(i) > 0.0 ? 1.0 : -1.0;
        rhs(a) = b(i) - eps * (eps == 0.0 ? 0.0 : sgn) - (u(i) - gft(a));
      }
      const Vector target = gff.ldlt().solve(rhs);
      if (!target.allFinite()) continue;
      const Vector d = target - tf;
      double alpha = 1.0;
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index i = free[a];
        if (d(a) > 0.0) alpha = std::min(alpha, (hi(i) - tf(a)) / d(a));
        if (d(a) < 0.0) alpha = std::min(alpha, (lo(i) - tf(a)) / d(a));
        if (eps > 0.0 && tf(a) * d(a) < 0.0) alpha = std::min(alpha, -tf(a) / d(a));
      }
      if (!(alpha > 0.0)) continue;
      Vector candidate = theta;
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index i = free[a];
        double t = std::clamp(tf(a) + alpha * d(a), lo(i), hi(i));
        if (eps > 0.0 && t * tf(a) < 0.0) t = 0.0;
        candidate(i) = t;
      }
      const Vector cu = g * candidate;
      if (dual_value(candidate, cu) < dual_value(theta, u)) {
        theta = candidate;
        u = cu;
      }
    }
  }
  return sweep;
}

inline Vector smoothed_loss_derivative(const LossSpec& c, const Vector& u, const Vector& y, double mu) {
  Vector d(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    switch (c.kind) {
      case LossKind::squared: d(i) = 2.0 * (u(i) - y(i)); break;
      case LossKind::absolute:
      case LossKind::eps_insensitive: {
        const double eps = c.kind == LossKind::absolute ? 0.0 : c.epsilon;
        const double r = u(i) - y(i);
        const double a = std::abs(r) - eps;
        const double slope = a <= 0.0 ? 0.0 : (a <= mu ? a / mu : 1.0);
        d(i) = r >= 0.0 ? slope : -slope;
        break;
      }
      case LossKind::hinge: {
        const double s = hinge_sign(y(i));
        const double a = 1.0 - s * u(i);
        const double slope = a <= 0.0 ? 0.0 : (a <= mu ? a / mu : 1.0);
        d(i) = -s * slope;
        break;
      }
      case LossKind::zero_one: throw ContractViolation("smoothing: non-convex loss");
    }
  }
  return d;
}

inline double smoothed_loss_value(const LossSpec& c, double u, double y, double mu) {
  auto envelope = [mu](double a) { return a <= 0.0 ? 0.0 : (a <= mu ? a * a / (2.0 * mu) : a - 0.5 * mu); };
  switch (c.kind) {
    case LossKind::squared: return (u - y) * (u - y);
    case LossKind::absolute: return envelope(std::abs(u - y));
    case LossKind::eps_insensitive: return envelope(std::abs(u - y) - c.epsilon);
    case LossKind::hinge: return envelope(1.0 - hinge_sign(y) * u);
    case LossKind::zero_one: break;
  }
  throw ContractViolation("smoothing: non-convex loss");
}

inline int solve_smoothing_gradient(const Eigen::MatrixXd& g, const Vector& y, const LossSpec& c, double lambda,
                                    Vector& theta, const SolverConfig& cfg) {
  const auto n = static_cast<double>(y.size());
  int iterations = 0;
  for (double mu : cfg.smoothing_schedule) {
    auto value = [&](const Vector& t, Vector& u) {
      u = g * t;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < u.size(); ++i) acc += smoothed_loss_value(c, u(i), y(i), mu);
      return acc / n + lambda * t.dot(u);
    };
    Vector u;
    double f = value(theta, u);
    double step = 1.0;
    for (int it = 0; it < cfg.max_stage_iterations; ++it, ++iterations) {
      const Vector grad = g * (smoothed_loss_derivative(c, u, y, mu) / n + 2.0 * lambda * theta);
      const double gg = grad.squaredNorm();
      if (gg == 0.0) break;
      step *= 2.0;
      Vector trial, tu;
      double ft = 0.0;
      for (int bt = 0; bt < 200; ++bt) {
        trial = theta - step * grad;
        ft = value(trial, tu);
        if (ft <= f - 0.5 * step * gg) break;
        step *= 0.5;
      }
      if (!(ft < f)) break;
      const double rel = (f - ft) / std::max(1.0, std::abs(f));
      theta = std::move(trial);
      u = std::move(tu);
      f = ft;
      if (rel < cfg.stage_relative_decrease) break;
    }
  }
  return iterations;
}

inline std::pair<Vector, SolveDiagnostics> solve_kernel_problem(const Eigen::MatrixXd& g, const Vector& y,
                                                                const LossSpec& c, double lambda,
                                                                const SolverConfig& cfg,
                                                                const Vector* warm_start) {
  const Eigen::Index n = y.size();
  const double cost = 1.0 / (2.0 * lambda * static_cast<double>(n));
  Vector theta = Vector::Zero(n);
  SolveDiagnostics diag;

  if (c.kind == LossKind::squared) {
    // (G + lambda n I) theta = y makes the gradient vanish.
    Eigen::MatrixXd a = g;
    a.diagonal().array() += lambda * static_cast<double>(n) + 1e-10;
    theta = a.ldlt().solve(y);
    diag.iterations = 1;
  } else if (cfg.method == SolverMethod::smoothing_gradient) {
    if (warm_start) theta = *warm_start;
    diag.iterations = solve_smoothing_gradient(g, y, c, lambda, theta, cfg);
  } else {
    Vector b(n), lo(n), hi(n);
    double eps = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (c.kind == LossKind::hinge) {
        const double s = hinge_sign(y(i));
        b(i) = s;
        lo(i) = s > 0 ? 0.0 : -cost;
        hi(i) = s > 0 ? cost : 0.0;
      } else {
        b(i) = y(i);
        lo(i) = -cost;
        hi(i) = cost;
      }
    }
    if (c.kind == LossKind::eps_insensitive) eps = c.epsilon;
    if (warm_start) theta = warm_start->cwiseMax(lo).cwiseMin(hi);
    diag.iterations = solve_box_l1_qp(g, b, eps, lo, hi, theta, cfg);
  }

  diag.final_objective = kernel_objective(g, y, c, lambda, theta);
  diag.subgradient_residual = subgradient_residual(g, y, c, lambda, theta, cfg.kink_tolerance);
  diag.converged = diag.subgradient_residual <= cfg.tolerance * (1.0 + std::abs(diag.final_objective));
  return {std::move(theta), diag};
}

inline void check_fit_args(double lambda, const LossSpec& c) {
  require(std::isfinite(lambda) && lambda > 0.0, "fit_kernel: lambda must be > 0");
  require(c.convex, "fit_kernel: training loss must be convex");
}

}  // namespace detail

/// Fits the regularized kernel estimator on the whole of `train`. A
/// non-converged solve is still returned; check diagnostics.converged.
inline std::pair<KernelModel, SolveDiagnostics> fit_kernel(double lambda, const Dataset& train, const LossSpec& c,
                                                           const KernelSpec& spec, const SolverConfig& cfg = {}) {
  detail::check_fit_args(lambda, c);
  const Eigen::MatrixXd g = gram(spec, train.x());
  auto [theta, diag] = detail::solve_kernel_problem(g, train.y(), c, lambda, cfg, nullptr);
  return {KernelModel{train.x(), std::move(theta), spec, lambda}, diag};
}

/// Fits every lambda on the same data, sharing one Gram matrix and
/// warm-starting from the next larger lambda. Output order follows `lambdas`.
inline std::vector<std::pair<KernelModel, SolveDiagnostics>> fit_kernel_path(std::span<const double> lambdas,
                                                                             const Dataset& train,
                                                                             const LossSpec& c,
                                                                             const KernelSpec& spec,
                                                                             const SolverConfig& cfg = {}) {
  require(!lambdas.empty(), "fit_kernel_path: empty lambda grid");
  for (double l : lambdas) detail::check_fit_args(l, c);
  const Eigen::MatrixXd g = gram(spec, train.x());
  std::vector<std::size_t> order(lambdas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return lambdas[a] > lambdas[b]; });

  std::vector<std::optional<std::pair<KernelModel, SolveDiagnostics>>> out(lambdas.size());
  std::optional<Vector> previous;
  for (std::size_t k : order) {
    auto [theta, diag] =
        detail::solve_kernel_problem(g, train.y(), c, lambdas[k], cfg, previous ? &*previous : nullptr);
    previous = theta;
    out[k].emplace(KernelModel{train.x(), std::move(theta), spec, lambdas[k]}, diag);
  }
  std::vector<std::pair<KernelModel, SolveDiagnostics>> result;
  result.reserve(out.size());
  for (auto& o : out) result.push_back(std::move(*o));
  return result;
}

/// Weighted average of kernel expansions as a single expansion on the
/// concatenated supports (equal weights 1/V by default).
inline KernelModel average_models(std::span<const KernelModel> models,
                                  std::optional<std::span<const double>> weights = std::nullopt) {
  require(!models.empty(), "average_models: empty model list");
  require(!weights || weights->size() == models.size(), "average_models: weight count mismatch");
  const KernelSpec spec = models.front().spec;
  const Eigen::Index d = models.front().support.cols();
  Eigen::Index total = 0;
  bool same_lambda = true;
  for (const auto& m : models) {
    require(m.spec == spec, "average_models: mismatched kernel specs");
    require(m.support.cols() == d, "average_models: mismatched dimensions");
    total += m.support.rows();
    same_lambda = same_lambda && m.lambda == models.front().lambda;
  }
  KernelModel out{RowMatrix(total, d), Vector(total), spec, same_lambda ? models.front().lambda : 0.0};
  Eigen::Index at = 0;
  const double equal = 1.0 / static_cast<double>(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& m = models[k];
    const double w = weights ? (*weights)[k] : equal;
    out.support.middleRows(at, m.support.rows()) = m.support;
    out.theta.segment(at, m.theta.size()) = w * m.theta;
    at += m.support.rows();
  }
  return out;
}

}  // namespace agghoo
