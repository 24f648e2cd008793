// Fixed points delta(w, r) and explicit right-hand sides of the oracle
// inequalities for Agghoo (kernel regression, eps-regression) and Majhoo
// (binary classification under a margin condition).
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "agghoo/core.hpp"

namespace agghoo::bounds {

/// Nondecreasing rate function on [0, inf):
///   power:     c x^beta              (0 <= beta < 2)
///   linear:    b x + c
///   power_max: max(a x, sqrt(b x^3 + c x^2))
struct RateFunction {
  enum class Form { power, linear, power_max };
  Form form = Form::power;
  double a = 0.0, b = 0.0, c = 0.0, beta = 0.0;

  static RateFunction power(double c, double beta) {
    require(c >= 0.0 && beta >= 0.0 && beta < 2.0, "RateFunction::power: need c >= 0 and 0 <= beta < 2");
    return {Form::power, 0.0, 0.0, c, beta};
  }
  static RateFunction linear(double b, double c) {
    require(b >= 0.0 && c >= 0.0, "RateFunction::linear: parameters must be >= 0");
    return {Form::linear, 0.0, b, c, 0.0};
  }
  static RateFunction power_max(double a, double b, double c) {
    require(a >= 0.0 && b >= 0.0 && c >= 0.0, "RateFunction::power_max: parameters must be >= 0");
    return {Form::power_max, a, b, c, 0.0};
  }

  double operator()(double x) const {
    switch (form) {
      case Form::power: return c == 0.0 ? 0.0 : c * std::pow(x, beta);
      case Form::linear: return b * x + c;
      case Form::power_max: return std::max(a * x, std::sqrt(b * x * x * x + c * x * x));
    }
    return 0.0;
  }
};

/// delta(w, r) = inf{ d >= 0 : w(x) <= r x^2 for all x >= d } by bisection on
/// the single crossing, valid whenever x -> w(x)/x is nonincreasing. The
/// bracket doubles from 1 until w(hi) <= r hi^2; returns +inf if it never does.
inline double delta_bisect(const std::function<double(double)>& w, double r, int iterations = 200) {
  require(r > 0.0 && std::isfinite(r), "delta_fixed_point: r must be > 0");
  auto holds = [&](double x) { return w(x) <= r * x * x; };
  double lo = 0.0, hi = 1.0;
  while (!holds(hi)) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) return std::numeric_limits<double>::infinity();
  }
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (holds(mid) ? hi : lo) = mid;
  }
  return hi;
}

/// Positive root of r d^2 = b d + c.
inline double linear_fixed_point(double b, double c, double r) {
  return b / (2.0 * r) + 0.5 * std::sqrt(b * b / (r * r) + 4.0 * c / r);
}

/// Closed forms: (c/r)^(1/(2-beta)) for the power form, the quadratic root
/// for the linear form, and max(a/r, linear root of (b, c) at r^2) for
/// power_max, since max(ax, sqrt(bx^3+cx^2)) <= r x^2 splits into ax <= r x^2
/// and bx + c <= r^2 x^2.
inline double delta_fixed_point(const RateFunction& w, double r) {
  require(r > 0.0 && std::isfinite(r), "delta_fixed_point: r must be > 0");
  switch (w.form) {
    case RateFunction::Form::power:
      return w.c == 0.0 ? 0.0 : std::pow(w.c / r, 1.0 / (2.0 - w.beta));
    case RateFunction::Form::linear:
      return linear_fixed_point(w.b, w.c, r);
    case RateFunction::Form::power_max:
      return std::max(w.a / r, linear_fixed_point(w.b, w.c, r * r));
  }
  return delta_bisect(std::cref(w), r);
}

// ---------------------------------------------------------------------------
// Oracle-inequality right-hand sides
// ---------------------------------------------------------------------------

struct BoundTerms {
  double branch1 = 0.0, branch2 = 0.0, branch3 = 0.0;
  double remainder = 0.0;  // term added to the oracle part
  double rhs = 0.0;
  bool in_regime = true;   // hypotheses on n_v and |grid| hold
};

struct RkhsBoundParams {
  double rho = 0.0;   // SC constant rho >= 0
  double nu = 0.0;    // SC constant nu >= 0
  double L = 1.0;     // Lipschitz constant of c and g
  double kappa = 1.0; // sup K(x,x)
  double C = 1.0;     // Comp_C(g,c)
  double lambda_min = 1.0;
  double n_v = 100.0;
  double n_t = 100.0;
  double grid_size = 3.0;  // |Lambda|
  double theta = 0.5;
};

/// n_v >= 100 and 3 <= |grid| <= e^sqrt(n_v).
inline bool rkhs_regime(double n_v, double grid_size) {
  return n_v >= 100.0 && grid_size >= 3.0 && grid_size <= std::exp(std::sqrt(n_v));
}

namespace detail {

inline void check_rkhs(const RkhsBoundParams& p) {
  require(p.theta > 0.0 && p.theta <= 1.0, "bound: theta must lie in (0,1]");
  require(p.rho >= 0.0 && p.nu >= 0.0, "bound: rho and nu must be >= 0");
  require(p.L > 0.0 && p.kappa > 0.0 && p.C > 0.0, "bound: L, kappa and C must be > 0");
  require(p.lambda_min > 0.0, "bound: lambda_min must be > 0");
  require(p.n_v >= 1.0 && p.n_t >= 1.0 && p.grid_size >= 1.0, "bound: n_v, n_t, |grid| must be >= 1");
}

inline BoundTerms rkhs_branches(const RkhsBoundParams& p) {
  const double lg = std::log(p.n_v * p.grid_size);
  const double nl = std::max(p.nu, p.L);
  const double b1 = 289.0 * nl * nl * p.kappa * p.C;
  const double b2 = 289.0 * p.L * nl * p.kappa;
  BoundTerms t;
  t.branch1 = 18.0 * p.rho * lg / (p.theta * p.n_v);
  t.branch2 = b1 * lg * lg / (p.theta * p.theta * p.theta * p.lambda_min * p.n_v * p.n_v);
  t.branch3 = b2 * std::pow(lg, 1.5) / (p.theta * p.lambda_min * p.n_v * std::sqrt(p.n_t));
  t.in_regime = rkhs_regime(p.n_v, p.grid_size);
  return t;
}

}  // namespace detail

/// Two-sided form, valid for theta in (0,1]:
///   (1-theta) E[excess of Agghoo] <= (1+theta) oracle + max(branches).
/// Here rhs bounds (1-theta) E[...] and remainder = max(branches).
inline BoundTerms rkhs_bound_raw(const RkhsBoundParams& p, double oracle) {
  detail::check_rkhs(p);
  require(oracle >= 0.0, "bound: oracle must be >= 0");
  BoundTerms t = detail::rkhs_branches(p);
  t.remainder = std::max({t.branch1, t.branch2, t.branch3});
  t.rhs = (1.0 + p.theta) * oracle + t.remainder;
  return t;
}

/// Bound on E[excess risk of Agghoo] itself, dividing through by (1-theta);
/// needs theta < 1.
inline BoundTerms rkhs_bound_rhs(const RkhsBoundParams& p, double oracle) {
  detail::check_rkhs(p);
  require(p.theta < 1.0, "rkhs_bound_rhs: theta must be < 1 (use rkhs_bound_raw for theta = 1)");
  require(oracle >= 0.0, "bound: oracle must be >= 0");
  BoundTerms t = detail::rkhs_branches(p);
  t.remainder = std::max({t.branch1, t.branch2, t.branch3}) / (1.0 - p.theta);
  t.rhs = (1.0 + p.theta) * oracle / (1.0 - p.theta) + t.remainder;
  return t;
}

struct EpsRegBoundParams {
  double lambda_min = 1.0;
  double n_v = 100.0;
  double n_t = 100.0;
  double grid_size = 3.0;
  double theta = 0.5;
};

/// eps-regression bound: kappa = C = L = 1, nu = 8 and rho = 4 sigma,
/// sigma being the robust (interquartile) noise parameter. Returns the bound
/// on E[excess risk] (theta < 1).
inline BoundTerms eps_reg_bound_rhs(double sigma, const EpsRegBoundParams& p, double oracle = 0.0) {
  require(sigma >= 0.0, "eps_reg_bound_rhs: sigma must be >= 0");
  require(p.theta > 0.0 && p.theta < 1.0, "eps_reg_bound_rhs: theta must lie in (0,1)");
  require(p.lambda_min > 0.0 && p.n_v >= 1.0 && p.n_t >= 1.0 && p.grid_size >= 1.0, "eps_reg_bound_rhs: bad sizes");
  require(oracle >= 0.0, "bound: oracle must be >= 0");
  constexpr double b1 = 289.0 * 64.0;  // 289 (nu v L)^2 kappa C with nu = 8
  constexpr double b2 = 289.0 * 8.0;   // 289 L (nu v L) kappa
  const double lg = std::log(p.n_v * p.grid_size);
  BoundTerms t;
  t.branch1 = 72.0 * sigma * lg / (p.theta * p.n_v);
  t.branch2 = b1 * lg * lg / (std::pow(p.theta, 3) * p.lambda_min * p.n_v * p.n_v);
  t.branch3 = b2 * lg * std::sqrt(lg) / (p.theta * p.lambda_min * p.n_v * std::sqrt(p.n_t));
  t.in_regime = rkhs_regime(p.n_v, p.grid_size);
  t.remainder = std::max({t.branch1, t.branch2, t.branch3}) / (1.0 - p.theta);
  t.rhs = (1.0 + p.theta) * oracle / (1.0 - p.theta) + t.remainder;
  return t;
}

/// Robust noise parameter for a location family: the interquartile range of
/// the conditional law. For N(0, var) noise it is 2 * 0.6744897501960817 * sd.
inline double gaussian_robust_sigma(double variance) {
  require(variance >= 0.0, "gaussian_robust_sigma: variance must be >= 0");
  constexpr double q75 = 0.67448975019608174320;
  return 2.0 * q75 * std::sqrt(variance);
}

struct ClassifBoundParams {
  double beta = 0.0;   // margin exponent
  double r = 1.0;      // margin constant, >= 1
  double family_size = 1.0;
  double n_v = 1.0;
  double oracle = 0.0;
};

/// 3 * oracle + 29 r^(1/(beta+2)) log(e |M|) / n_v^((beta+1)/(beta+2)).
inline BoundTerms classif_bound_rhs(const ClassifBoundParams& p) {
  require(p.r >= 1.0, "classif_bound_rhs: r must be >= 1");
  require(p.beta >= 0.0, "classif_bound_rhs: beta must be >= 0");
  require(p.family_size >= 1.0 && p.n_v >= 1.0, "classif_bound_rhs: |M| and n_v must be >= 1");
  require(p.oracle >= 0.0, "classif_bound_rhs: oracle must be >= 0");
  BoundTerms t;
  t.branch1 = 29.0 * std::pow(p.r, 1.0 / (p.beta + 2.0)) * (1.0 + std::log(p.family_size)) /
              std::pow(p.n_v, (p.beta + 1.0) / (p.beta + 2.0));
  t.remainder = t.branch1;
  t.rhs = 3.0 * p.oracle + t.remainder;
  return t;
}

}  // namespace agghoo::bounds
