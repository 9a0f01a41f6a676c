#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "diracgap/error.hpp"
#include "diracgap/linalg.hpp"

namespace diracgap {

using ScalarFn = std::function<double(double)>;

enum class PotentialKind { pure_coulomb, coulomb_with_remainder, tabulated };

/// Electrostatic potential V(x) = gamma0 / x^alpha0 + R0(x) near zero and
/// gamma_inf / x^alpha_inf + Rinf(x) near infinity.
struct PotentialSpec {
  PotentialKind kind = PotentialKind::pure_coulomb;
  double gamma0 = 0.0;
  double alpha0 = 1.0;
  double gamma_inf = 0.0;
  double alpha_inf = 1.0;
  ScalarFn remainder_zero;
  ScalarFn remainder_zero_deriv;
  ScalarFn remainder_inf;
  ScalarFn remainder_inf_deriv;
  /// Full evaluators, used for tabulated input.
  ScalarFn table_value;
  ScalarFn table_deriv;

  double value(double x) const {
    if (kind == PotentialKind::tabulated) return table_value(x);
    if (x <= 1.0) {
      double v = gamma0 * std::pow(x, -alpha0);
      if (remainder_zero) v += remainder_zero(x);
      return v;
    }
    double v = gamma_inf * std::pow(x, -alpha_inf);
    if (remainder_inf) v += remainder_inf(x);
    return v;
  }

  bool has_derivative() const {
    switch (kind) {
      case PotentialKind::pure_coulomb: return true;
      case PotentialKind::tabulated: return static_cast<bool>(table_deriv);
      case PotentialKind::coulomb_with_remainder:
        return (!remainder_zero || remainder_zero_deriv) && (!remainder_inf || remainder_inf_deriv);
    }
    return false;
  }

  double derivative(double x) const {
    if (kind == PotentialKind::tabulated) return table_deriv(x);
    if (x <= 1.0) {
      double d = -alpha0 * gamma0 * std::pow(x, -alpha0 - 1.0);
      if (remainder_zero_deriv) d += remainder_zero_deriv(x);
      return d;
    }
    double d = -alpha_inf * gamma_inf * std::pow(x, -alpha_inf - 1.0);
    if (remainder_inf_deriv) d += remainder_inf_deriv(x);
    return d;
  }
};

inline PotentialSpec coulomb_potential(double gamma, double alpha = 1.0) {
  require(alpha > 0, ErrorKind::invalid_argument, "potential exponent must be positive");
  PotentialSpec p;
  p.kind = PotentialKind::pure_coulomb;
  p.gamma0 = p.gamma_inf = gamma;
  p.alpha0 = p.alpha_inf = alpha;
  return p;
}

/// Coulomb tail plus a screened correction c * exp(-x / s), split at x = 1.
inline PotentialSpec screened_coulomb_potential(double gamma, double c, double s) {
  require(s > 0, ErrorKind::invalid_argument, "screening length must be positive");
  PotentialSpec p = coulomb_potential(gamma, 1.0);
  p.kind = PotentialKind::coulomb_with_remainder;
  auto r = [c, s](double x) { return c * std::exp(-x / s); };
  auto dr = [c, s](double x) { return -c / s * std::exp(-x / s); };
  p.remainder_zero = r;
  p.remainder_zero_deriv = dr;
  p.remainder_inf = r;
  p.remainder_inf_deriv = dr;
  return p;
}

namespace detail {

struct SplineHolder {
  gsl_spline* spline = nullptr;
  std::vector<double> t, y;
  ~SplineHolder() {
    if (spline) gsl_spline_free(spline);
  }
};

inline void fit_power(double x1, double v1, double x2, double v2, double& gamma, double& alpha) {
  if (v1 == 0.0 || v2 == 0.0 || (v1 > 0) != (v2 > 0)) {
    gamma = 0.0;
    alpha = 1.0;
    return;
  }
  alpha = -std::log(std::abs(v2 / v1)) / std::log(x2 / x1);
  if (!(alpha > 0)) alpha = 1.0;
  gamma = v1 * std::pow(x1, alpha);
}

}  // namespace detail

/// Tabulated potential: cubic spline in log x inside the table, power laws fitted
/// to the two outermost samples outside it.
inline PotentialSpec tabulated_potential(std::vector<double> xs, std::vector<double> vs) {
  require(xs.size() == vs.size() && xs.size() >= 4, ErrorKind::invalid_argument,
          "tabulated potential needs at least 4 (x, V) rows");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(xs[i] > 0, ErrorKind::invalid_argument, "tabulated x must be positive");
    if (i) require(xs[i] > xs[i - 1], ErrorKind::invalid_argument, "tabulated x must be strictly increasing");
  }
  auto h = std::make_shared<detail::SplineHolder>();
  h->t.resize(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) h->t[i] = std::log(xs[i]);
  h->y = vs;
  gsl_set_error_handler_off();
  h->spline = gsl_spline_alloc(gsl_interp_cspline, xs.size());
  gsl_spline_init(h->spline, h->t.data(), h->y.data(), xs.size());

  PotentialSpec p;
  p.kind = PotentialKind::tabulated;
  const std::size_t n = xs.size();
  detail::fit_power(xs[0], vs[0], xs[1], vs[1], p.gamma0, p.alpha0);
  detail::fit_power(xs[n - 2], vs[n - 2], xs[n - 1], vs[n - 1], p.gamma_inf, p.alpha_inf);
  const double xlo = xs.front(), xhi = xs.back();
  const double g0 = p.gamma0, a0 = p.alpha0, gi = p.gamma_inf, ai = p.alpha_inf;
  const double vlo = vs.front(), vhi = vs.back();
  p.table_value = [h, xlo, xhi, g0, a0, gi, ai, vlo, vhi](double x) {
    if (x < xlo) return g0 != 0.0 ? g0 * std::pow(x, -a0) : vlo;
    if (x > xhi) return gi != 0.0 ? gi * std::pow(x, -ai) : vhi;
    return gsl_spline_eval(h->spline, std::log(x), nullptr);
  };
  p.table_deriv = [h, xlo, xhi, g0, a0, gi, ai](double x) {
    if (x < xlo) return -a0 * g0 * std::pow(x, -a0 - 1.0);
    if (x > xhi) return -ai * gi * std::pow(x, -ai - 1.0);
    return gsl_spline_eval_deriv(h->spline, std::log(x), nullptr) / x;
  };
  return p;
}

/// Reads a two-column CSV (x, V) with optional header and '#' comments.
inline PotentialSpec read_tabulated_potential(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::config, "cannot open potential table '" + path + "'");
  std::vector<double> xs, vs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double x, v;
    if (!(ss >> x >> v)) {
      if (xs.empty()) continue;  // header
      throw Error(ErrorKind::config, path + ":" + std::to_string(lineno) + ": expected two numbers");
    }
    xs.push_back(x);
    vs.push_back(v);
  }
  return tabulated_potential(std::move(xs), std::move(vs));
}

struct DiracRadialParams {
  int k = -1;
  double mu_a = 0.0;
  PotentialSpec potential;
};

/// Coefficient matrix P(x) on (0, inf) with its endpoint structure.
struct CoefficientFamily {
  std::function<SymMat2(double)> eval;
  double mu_minus = -1.0;
  double mu_plus = 1.0;
  double beta = 1.0;
  SymMat2 p_star;
  double q0 = 1.0;
  double q_inf = 2.0;
  std::string label;
  std::optional<DiracRadialParams> params;

  SymMat2 operator()(double x) const { return eval(x); }
  SymMat2 p_inf() const { return {mu_minus, 0.0, mu_plus}; }
  SymMat2 r_inf(double x) const { return eval(x) - p_inf(); }
  SymMat2 r_zero(double x) const { return eval(x) * std::pow(x, beta) - p_star; }
  bool in_gap(double lambda) const { return lambda > mu_minus && lambda < mu_plus; }
};

inline CoefficientFamily build_dirac_family(const DiracRadialParams& params) {
  require(params.k != 0, ErrorKind::invalid_argument, "angular quantum number k must be nonzero");
  const PotentialSpec& pot = params.potential;
  require(params.mu_a == 0.0 || pot.has_derivative(), ErrorKind::invalid_argument,
          "missing potential derivative (required when mu_a != 0)");
  CoefficientFamily f;
  const double k = params.k;
  const double mu = params.mu_a;
  f.eval = [pot, k, mu](double x) {
    const double v = pot.value(x);
    const double off = -k / x - (mu != 0.0 ? mu * pot.derivative(x) : 0.0);
    return SymMat2{-1.0 + v, off, 1.0 + v};
  };
  f.mu_minus = -1.0;
  f.mu_plus = 1.0;
  if (mu == 0.0) {
    f.beta = 1.0;
    f.p_star = {pot.gamma0, -k, pot.gamma0};
    f.q0 = 1.0;
  } else {
    f.beta = pot.alpha0 + 1.0;
    const double c = mu * pot.alpha0 * pot.gamma0;
    f.p_star = {0.0, c, 0.0};
    f.q0 = pot.alpha0 + 1.0;
  }
  const double ainf = pot.gamma_inf != 0.0 ? std::min(1.0, pot.alpha_inf) : 1.0;
  f.q_inf = std::max(2.0, 2.0 / ainf);
  char buf[128];
  std::snprintf(buf, sizeof buf, "dirac(k=%d, mu_a=%g, gamma0=%g, alpha0=%g)", params.k, mu, pot.gamma0,
                pot.alpha0);
  f.label = buf;
  f.params = params;
  return f;
}

/// Family obtained by z -> (v, u) and lambda -> -lambda; exchanges the roles of the gap edges.
inline CoefficientFamily mirror_family(const CoefficientFamily& f) {
  CoefficientFamily m = f;
  auto e = f.eval;
  m.eval = [e](double x) {
    const SymMat2 p = e(x);
    return SymMat2{-p.p22, -p.p12, -p.p11};
  };
  m.mu_minus = -f.mu_plus;
  m.mu_plus = -f.mu_minus;
  m.p_star = {-f.p_star.p22, -f.p_star.p12, -f.p_star.p11};
  m.label = "mirror of " + f.label;
  m.params.reset();
  return m;
}

struct ZeroClassification {
  double beta = 1.0;
  SymMat2 p_star;
  double det_p_star = 0.0;
  double delta_star = 0.0;
  bool admissible = false;
  std::string statement;
};

inline ZeroClassification classify_zero_endpoint(const CoefficientFamily& f) {
  ZeroClassification c;
  c.beta = f.beta;
  c.p_star = f.p_star;
  c.det_p_star = f.p_star.det();
  c.delta_star = -c.det_p_star;
  const double bound = f.beta == 1.0 ? -0.25 : 0.0;
  c.admissible = c.det_p_star < bound;
  char buf[256];
  if (c.admissible)
    std::snprintf(buf, sizeof buf,
                  "det P* = %.10g < %g: limit point at 0, unique self-adjoint realization", c.det_p_star,
                  bound);
  else
    std::snprintf(buf, sizeof buf, "det P* = %.10g >= %g: endpoint condition at 0 violated", c.det_p_star,
                  bound);
  c.statement = buf;
  return c;
}

struct SampleGrid {
  double x_min = 1e-8;
  double x_max = 1e8;
  int points_per_decade = 32;

  std::vector<double> points(double lo, double hi) const {
    std::vector<double> xs;
    const double l0 = std::log10(lo), l1 = std::log10(hi);
    const int n = std::max(1, static_cast<int>(std::ceil((l1 - l0) * points_per_decade - 1e-9)));
    for (int i = 0; i <= n; ++i) xs.push_back(std::pow(10.0, l0 + (l1 - l0) * i / n));
    return xs;
  }
};

struct HypothesisCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  std::string detail;
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;
  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.passed; });
  }
};

namespace detail {

/// Least-squares slope of ys against xs.
inline double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0 ? 0.0 : (n * sxy - sx * sy) / den;
}

/// Log-log slope of g on [lo, hi] sampled on the grid.
inline double loglog_slope(const std::function<double(double)>& g, const SampleGrid& grid, double lo,
                           double hi) {
  std::vector<double> lx, ly;
  for (double x : grid.points(lo, hi)) {
    const double v = g(x);
    if (v > 0 && std::isfinite(v)) {
      lx.push_back(std::log(x));
      ly.push_back(std::log(v));
    }
  }
  if (lx.size() < 2) return -std::numeric_limits<double>::infinity();
  return ls_slope(lx, ly);
}

inline double trapezoid(const std::vector<double>& xs, const std::function<double(double)>& g) {
  double s = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) s += 0.5 * (xs[i] - xs[i - 1]) * (g(xs[i]) + g(xs[i - 1]));
  return s;
}

inline std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

}  // namespace detail

inline HypothesisReport validate_hypotheses(const CoefficientFamily& f, const SampleGrid& grid = {}) {
  require(grid.points_per_decade >= 16, ErrorKind::invalid_argument,
          "sample grid too coarse (fewer than 16 points per decade)");
  require(grid.x_min > 0 && grid.x_min < 1.0 && grid.x_max > 1.0, ErrorKind::invalid_argument,
          "sample grid must straddle x = 1");
  HypothesisReport rep;
  const double lo = grid.x_min, hi = grid.x_max;
  auto r0 = [&f](double x) { return f.r_zero(x).norm(); };
  auto ri = [&f](double x) { return f.r_inf(x).norm(); };

  bool symmetric = true;
  for (double x : grid.points(lo, hi)) {
    const SymMat2 p = f(x);
    symmetric = symmetric && std::isfinite(p.p11) && std::isfinite(p.p12) && std::isfinite(p.p22);
  }
  rep.checks.push_back({"finite-coefficients", symmetric, 0.0, "P(x) finite on the grid"});

  const double pstar_scale = std::max(1.0, f.p_star.norm());
  const double s0 = detail::loglog_slope(r0, grid, lo, lo * 100);
  const double r0_end = r0(lo);
  rep.checks.push_back({"limit-at-zero", r0_end < 1e-3 * pstar_scale && s0 > 0, r0_end,
                        detail::fmt("|x^beta P - P*| = %.3e at x_min, log-slope %.3f", r0_end, s0)});

  const double si = detail::loglog_slope(ri, grid, hi / 100, hi);
  const double ri_end = ri(hi);
  rep.checks.push_back({"limit-at-infinity", ri_end < 1e-3 && si < 0, ri_end,
                        detail::fmt("|P - P_inf| = %.3e at x_max, log-slope %.3f", ri_end, si)});

  {
    const double q = f.q_inf;
    auto g = [&](double x) { return std::pow(ri(x), q); };
    const double body = detail::trapezoid(grid.points(1.0, hi), g);
    const double expo = q * si;
    const bool tail_ok = expo < -1.0;
    const double tail = tail_ok ? g(hi) * hi / (-expo - 1.0) : std::numeric_limits<double>::infinity();
    const double total = body + tail;
    rep.checks.push_back({"remainder-integrable-at-infinity", std::isfinite(total), total,
                          detail::fmt("int |R_inf|^q = %.6g with q_inf = %g", total, q)});
  }
  {
    const double q = f.q0;
    auto g = [&](double x) { return std::pow(x, -f.beta) * std::pow(r0(x), q); };
    const double body = detail::trapezoid(grid.points(lo, 1.0), g);
    const double expo = q * s0 - f.beta;
    const bool head_ok = expo > -1.0 || r0_end == 0.0;
    const double head = r0_end == 0.0 ? 0.0
                        : head_ok     ? g(lo) * lo / (expo + 1.0)
                                      : std::numeric_limits<double>::infinity();
    const double total = body + head;
    rep.checks.push_back({"remainder-integrable-at-zero", std::isfinite(total), total,
                          detail::fmt("int x^-beta |R_0|^q = %.6g with q_0 = %g", total, q)});
  }

  const ZeroClassification zc = classify_zero_endpoint(f);
  rep.checks.push_back({"determinant-condition", zc.admissible, zc.det_p_star, zc.statement});

  if (f.params) {
    const auto& prm = *f.params;
    const auto& pot = prm.potential;
    const double k = prm.k;
    if (pot.gamma_inf != 0.0 || pot.kind == PotentialKind::tabulated) {
      auto rem = [&pot](double x) {
        return std::abs(std::pow(x, pot.alpha_inf) * pot.value(x) - pot.gamma_inf);
      };
      const double m = rem(hi);
      rep.checks.push_back({"potential-at-infinity", m < 1e-3 * std::max(1.0, std::abs(pot.gamma_inf)), m,
                            detail::fmt("|x^a V - gamma_inf| = %.3e at x_max", m)});
    }
    if (prm.mu_a == 0.0) {
      const bool alpha_ok = std::abs(pot.alpha0 - 1.0) < 1e-12;
      rep.checks.push_back({"potential-exponent-at-zero", alpha_ok, pot.alpha0, "alpha_0 = 1 required"});
      auto rem = [&pot](double x) { return std::abs(x * pot.value(x) - pot.gamma0); };
      const double m = rem(lo);
      rep.checks.push_back({"potential-remainder-at-zero", m < 1e-3 * std::max(1.0, std::abs(pot.gamma0)), m,
                            detail::fmt("|x V - gamma_0| = %.3e at x_min", m)});
      const double margin = k * k - 0.25 - pot.gamma0 * pot.gamma0;
      rep.checks.push_back({"coupling-bound", margin > 0, margin,
                            detail::fmt("k^2 - 1/4 - gamma_0^2 = %.6g", margin)});
    } else {
      rep.checks.push_back({"coupling-nonzero", pot.gamma0 != 0.0, pot.gamma0, "gamma_0 != 0 required"});
    }
  }
  return rep;
}

/// Nonlinear coupling S(x, z) with its structural bounds.
struct NonlinearCoupling {
  std::function<SymMat2(double, const Vec2&)> eval;
  ScalarFn envelope;
  std::function<SymMat2(const Vec2&)> moduli;
  ScalarFn gamma;
  ScalarFn F;
  double lipschitz = 0.0;
  double soler_constant = 4.0 * pi;
  bool trivial = false;

  SymMat2 operator()(double x, const Vec2& z) const { return eval(x, z); }
};

inline NonlinearCoupling zero_coupling() {
  NonlinearCoupling c;
  c.eval = [](double, const Vec2&) { return SymMat2{}; };
  c.envelope = [](double) { return 0.0; };
  c.moduli = [](const Vec2&) { return SymMat2{}; };
  c.gamma = [](double) { return 0.0; };
  c.F = [](double) { return 0.0; };
  c.trivial = true;
  return c;
}

/// S(r, z) = gamma(r) F((u^2 - v^2) / (c r^2)) diag(1, -1).
inline NonlinearCoupling build_soler_coupling(ScalarFn gamma, ScalarFn F, double lipschitz_bound,
                                              double soler_constant = 4.0 * pi) {
  require(lipschitz_bound > 0, ErrorKind::invalid_argument, "Lipschitz bound must be positive");
  require(soler_constant > 0, ErrorKind::invalid_argument, "Soler constant must be positive");
  NonlinearCoupling c;
  c.gamma = gamma;
  c.F = F;
  c.lipschitz = lipschitz_bound;
  c.soler_constant = soler_constant;
  c.eval = [gamma, F, soler_constant](double r, const Vec2& z) {
    const double s = gamma(r) * F((z.u * z.u - z.v * z.v) / (soler_constant * r * r));
    return SymMat2{s, 0.0, -s};
  };
  c.envelope = [gamma, lipschitz_bound, soler_constant](double r) {
    return lipschitz_bound * std::abs(gamma(r)) / (soler_constant * r * r);
  };
  c.moduli = [](const Vec2& z) {
    const double m = std::abs(z.u * z.u - z.v * z.v);
    return SymMat2{m, 0.0, m};
  };

  SampleGrid grid;
  const double near = detail::loglog_slope(c.envelope, grid, 1e-8, 1e-5);
  require(near > -1e-3, ErrorKind::rejected,
          detail::fmt("coupling envelope unbounded near 0 (log-slope %.3f); gamma must be O(r^2)", near));
  const double far = detail::loglog_slope(c.envelope, grid, 1e5, 1e8);
  const double far_val = c.envelope(1e8);
  require(far < -1e-3 || far_val == 0.0, ErrorKind::rejected,
          detail::fmt("coupling envelope does not decay at infinity (log-slope %.3f)", far));
  auto r2g = [&gamma](double r) { return std::abs(r * r * gamma(r)); };
  const double r2g_slope = detail::loglog_slope(r2g, grid, 1e5, 1e8);
  require(r2g_slope < -1e-3 || r2g(1e8) == 0.0, ErrorKind::rejected,
          detail::fmt("r^2 gamma(r) does not vanish at infinity (log-slope %.3f)", r2g_slope));
  return c;
}

}  // namespace diracgap
