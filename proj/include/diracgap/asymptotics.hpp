#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "diracgap/error.hpp"
#include "diracgap/linalg.hpp"
#include "diracgap/model.hpp"

namespace diracgap {

struct InfinityData {
  double lambda = 0.0;
  double delta = 0.0;       // (mu+ - lambda)(lambda - mu-)
  double sqrt_delta = 0.0;
  Mat2 B;                   // J^{-1}(lambda - P_inf)
  Vec2 decay_direction;     // unit, eigenvalue -sqrt(delta)
  Vec2 growth_direction;    // unit, eigenvalue +sqrt(delta)
  double theta_inf = 0.0;   // in (pi/2, pi)
};

inline InfinityData infinity_data(double mu_minus, double mu_plus, double lambda) {
  require(mu_minus < mu_plus, ErrorKind::invalid_argument, "gap edges must satisfy mu- < mu+");
  require(lambda > mu_minus && lambda < mu_plus, ErrorKind::invalid_argument,
          "lambda outside the open gap");
  InfinityData d;
  d.lambda = lambda;
  d.delta = (mu_plus - lambda) * (lambda - mu_minus);
  d.sqrt_delta = std::sqrt(d.delta);
  d.B = jinv_times(SymMat2{lambda - mu_minus, 0.0, lambda - mu_plus});
  Vec2 b1{lambda - mu_plus, d.sqrt_delta};
  Vec2 b2{mu_plus - lambda, d.sqrt_delta};
  d.decay_direction = b1 * (1.0 / b1.norm());
  d.growth_direction = b2 * (1.0 / b2.norm());
  d.theta_inf = pi - std::atan(std::sqrt((lambda - mu_minus) / (mu_plus - lambda)));
  return d;
}

inline InfinityData infinity_data(const CoefficientFamily& f, double lambda) {
  return infinity_data(f.mu_minus, f.mu_plus, lambda);
}

enum class Quadrant { first, second };

struct ZeroData {
  double delta_star = 0.0;
  double beta = 1.0;
  Mat2 C;                  // J^{-1} P*, divided by (beta - 1) when beta > 1
  double sigma = 0.0;      // positive eigenvalue of C
  Vec2 decay_direction;    // unit eigenvector for -sigma
  Vec2 growth_direction;   // unit eigenvector for +sigma
  double theta0 = 0.0;     // in (0, pi]
  Quadrant quadrant = Quadrant::first;
  bool degenerate = false; // theta0 within 1e-9 of pi/2 or of 0 (mod pi)
};

namespace detail {

inline Vec2 eigenvector(const Mat2& c, double sigma) {
  const Vec2 a{c.a12, sigma - c.a11};
  const Vec2 b{sigma - c.a22, c.a21};
  Vec2 v = a.norm() >= b.norm() ? a : b;
  const double n = v.norm();
  require(n > 0, ErrorKind::invalid_argument, "degenerate endpoint matrix");
  v = v * (1.0 / n);
  if (angle_of(v) <= 0.0 && !(v.v == 0.0 && v.u < 0.0)) v = v * -1.0;
  return v;
}

}  // namespace detail

inline ZeroData zero_data(const CoefficientFamily& f) {
  ZeroData z;
  z.beta = f.beta;
  z.delta_star = -f.p_star.det();
  require(z.delta_star > 0, ErrorKind::rejected, "det P* must be negative for endpoint data at zero");
  Mat2 c = jinv_times(f.p_star);
  if (f.beta > 1.0) c = c * (1.0 / (f.beta - 1.0));
  z.C = c;
  z.sigma = std::sqrt(-c.det());
  z.decay_direction = detail::eigenvector(c, -z.sigma);
  z.growth_direction = detail::eigenvector(c, z.sigma);
  z.theta0 = angle_mod_pi(angle_of(z.decay_direction));
  const double tol = 1e-9;
  z.degenerate = std::abs(z.theta0 - pi / 2) < tol || z.theta0 < tol || z.theta0 > pi - tol;
  z.quadrant = (z.theta0 < pi / 2 || z.degenerate) ? Quadrant::first : Quadrant::second;
  return z;
}

struct TruncationWindow {
  double x0 = 1e-4;
  double x_inf = 1e4;
  double delta = 2e-4;
  double epsilon = 1e-3;

  double x_mid() const { return std::sqrt(x0 * x_inf); }
};

namespace detail {

inline double theta_rate(const SymMat2& p, double lambda, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return (lambda - p.p11) * c * c - 2.0 * p.p12 * c * s + (lambda - p.p22) * s * s;
}

inline std::vector<double> log_points(double lo, double hi, int n) {
  std::vector<double> xs(n);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) xs[i] = std::exp(a + (b - a) * i / (n - 1));
  return xs;
}

}  // namespace detail

/// Chooses [x0, X_inf] from coefficient closeness on a log grid over [1e-8, 1e8],
/// then adjusts the ends until the angle cones around theta0 and theta_inf are invariant.
inline TruncationWindow select_truncation(const CoefficientFamily& f, double lambda_lo, double lambda_hi,
                                          double delta, double epsilon, int points_per_decade = 64) {
  require(delta > 0 && epsilon > 0, ErrorKind::invalid_argument, "delta and epsilon must be positive");
  require(f.in_gap(lambda_lo) && f.in_gap(lambda_hi) && lambda_lo <= lambda_hi, ErrorKind::invalid_argument,
          "lambda range must lie inside the open gap");
  const int n = 16 * points_per_decade;
  std::vector<double> grid(n + 1);
  for (int j = 0; j <= n; ++j) grid[j] = std::pow(10.0, -8.0 + static_cast<double>(j) / points_per_decade);

  int top = n;
  while (top >= 0 && f.r_inf(grid[top]).norm() < delta) --top;
  require(top < n, ErrorKind::rejected, "no window: |P - P_inf| >= delta at x = 1e8");
  int lo_idx = 0;
  while (lo_idx <= n && f.r_zero(grid[lo_idx]).norm() < delta) ++lo_idx;
  require(lo_idx > 0, ErrorKind::rejected, "no window: |x^beta P - P*| >= delta at x = 1e-8");
  int i_inf = top + 1;
  int i_zero = lo_idx - 1;

  const ZeroData zd = zero_data(f);
  std::vector<double> lambdas;
  for (int i = 0; i < 5; ++i) lambdas.push_back(lambda_lo + (lambda_hi - lambda_lo) * i / 4.0);

  for (int guard = 0; guard <= n; ++guard) {
    double worst = 0.0;
    for (double lam : lambdas) {
      const double th = infinity_data(f, lam).theta_inf;
      for (double x : detail::log_points(grid[i_inf], 1e8, 32)) {
        const SymMat2 p = f(x);
        if (!(detail::theta_rate(p, lam, th - epsilon) < 0 && detail::theta_rate(p, lam, th + epsilon) > 0))
          worst = std::max(worst, x);
      }
    }
    if (worst == 0.0) break;
    while (i_inf <= n && grid[i_inf] <= worst) ++i_inf;
    require(i_inf <= n, ErrorKind::rejected, "no window: cone condition at infinity fails below 1e8");
  }
  for (int guard = 0; guard <= n; ++guard) {
    double worst = 2.0;
    for (double lam : lambdas) {
      for (double x : detail::log_points(1e-8, grid[i_zero], 32)) {
        const SymMat2 p = f(x);
        const double th = zd.theta0;
        if (!(detail::theta_rate(p, lam, th - epsilon) > 0 && detail::theta_rate(p, lam, th + epsilon) < 0))
          worst = std::min(worst, x);
      }
    }
    if (worst == 2.0) break;
    while (i_zero >= 0 && grid[i_zero] >= worst) --i_zero;
    require(i_zero >= 0, ErrorKind::rejected, "no window: cone condition at zero fails above 1e-8");
  }
  require(i_zero < i_inf, ErrorKind::rejected, "no window: cutoffs overlap");
  return {grid[i_zero], grid[i_inf], delta, epsilon};
}

}  // namespace diracgap
