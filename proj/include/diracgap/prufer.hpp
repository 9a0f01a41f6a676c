#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "diracgap/asymptotics.hpp"
#include "diracgap/error.hpp"
#include "diracgap/linalg.hpp"
#include "diracgap/model.hpp"
#include "diracgap/ode.hpp"

namespace diracgap {

struct PruferDerivative {
  double dtheta = 0.0;
  double dlogrho = 0.0;
};

inline PruferDerivative prufer_rhs(const SymMat2& p, double lambda, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {(lambda - p.p11) * c * c - 2.0 * p.p12 * c * s + (lambda - p.p22) * s * s,
          p.p12 * (c * c - s * s) + (p.p22 - p.p11) * s * c};
}

enum class Direction { forward, backward };

struct PruferState {
  double x = 0.0;
  double theta = 0.0;
  double logrho = 0.0;
};

/// Independent variable used on one integration segment.
struct Coordinate {
  enum class Kind { linear, log, power };
  Kind kind = Kind::linear;
  double beta = 1.0;

  static Coordinate near_zero(double beta) {
    return beta > 1.0 ? Coordinate{Kind::power, beta} : Coordinate{Kind::log, 1.0};
  }
  double to_x(double t) const {
    switch (kind) {
      case Kind::linear: return t;
      case Kind::log: return std::exp(t);
      case Kind::power: return std::pow(-t, 1.0 / (1.0 - beta));
    }
    return t;
  }
  double from_x(double x) const {
    switch (kind) {
      case Kind::linear: return x;
      case Kind::log: return std::log(x);
      case Kind::power: return -std::pow(x, 1.0 - beta);
    }
    return x;
  }
  double dx_dt(double x) const {
    switch (kind) {
      case Kind::linear: return 1.0;
      case Kind::log: return x;
      case Kind::power: return std::pow(x, beta) / (beta - 1.0);
    }
    return 1.0;
  }
};

struct IntegrationSettings {
  double rtol = 1e-10;
  double atol = 1e-12;
  long max_steps = 2'000'000;
  double x_split = 1.0;
  double logrho_limit = std::numeric_limits<double>::infinity();
};

template <std::size_t N>
struct Segment {
  Coordinate coord;
  double x_begin = 0.0;
  double x_end = 0.0;
  ode::DenseSolution<N> sol;

  bool contains(double x) const { return x >= std::min(x_begin, x_end) && x <= std::max(x_begin, x_end); }
};

namespace detail {

/// Splits [from, to] at x_split into a near-zero segment and a linear one.
inline std::vector<std::pair<double, double>> split_interval(double from, double to, double split) {
  std::vector<std::pair<double, double>> parts;
  const double lo = std::min(from, to), hi = std::max(from, to);
  if (split > lo && split < hi) {
    parts.push_back({from, split});
    parts.push_back({split, to});
  } else {
    parts.push_back({from, to});
  }
  return parts;
}

inline Coordinate coordinate_for(double a, double b, double split, double beta) {
  return std::max(a, b) <= split ? Coordinate::near_zero(beta) : Coordinate{};
}

}  // namespace detail

struct PruferTrajectory {
  double lambda = 0.0;
  Direction direction = Direction::forward;
  TruncationWindow window;
  double x_begin = 0.0;
  double x_end = 0.0;
  std::vector<Segment<2>> segments;
  ode::Stats stats;
  double rtol = 0.0;
  double atol = 0.0;

  PruferState at(double x) const {
    for (const auto& s : segments) {
      if (s.contains(x)) {
        const auto y = s.sol.at(s.coord.from_x(x));
        return {x, y[0], y[1]};
      }
    }
    throw Error(ErrorKind::invalid_argument, "query point outside trajectory");
  }
  PruferState start() const {
    const auto& y = segments.front().sol.steps.front().start();
    return {x_begin, y[0], y[1]};
  }
  PruferState end() const {
    const auto y = segments.back().sol.final_state();
    return {x_end, y[0], y[1]};
  }
  /// States at the accepted step nodes, ordered along the integration direction.
  std::vector<PruferState> states() const {
    std::vector<PruferState> out;
    out.push_back(start());
    for (const auto& s : segments)
      for (const auto& st : s.sol.steps) {
        const auto y = st.end();
        out.push_back({s.coord.to_x(st.t1()), y[0], y[1]});
      }
    out.back().x = x_end;
    return out;
  }
};

/// Effective matrix callback: (x, theta, logrho) -> P_eff.
template <class MatrixFn>
PruferTrajectory integrate_polar(MatrixFn&& pmat, double beta, double lambda, double x_from, double x_to,
                                 double theta_init, double logrho_init, const IntegrationSettings& set) {
  require(std::isfinite(theta_init) && std::isfinite(logrho_init), ErrorKind::invalid_argument,
          "initial angle must be finite");
  require(x_from > 0 && x_to > 0 && x_from != x_to, ErrorKind::invalid_argument, "invalid integration interval");
  PruferTrajectory tr;
  tr.lambda = lambda;
  tr.direction = x_to > x_from ? Direction::forward : Direction::backward;
  tr.x_begin = x_from;
  tr.x_end = x_to;
  tr.rtol = set.rtol;
  tr.atol = set.atol;
  ode::Options opt;
  opt.rtol = set.rtol;
  opt.atol = set.atol;
  opt.max_steps = set.max_steps;
  ode::State<2> y{theta_init, logrho_init};
  for (auto [a, b] : detail::split_interval(x_from, x_to, set.x_split)) {
    Segment<2> seg;
    seg.coord = detail::coordinate_for(a, b, set.x_split, beta);
    seg.x_begin = a;
    seg.x_end = b;
    const Coordinate cd = seg.coord;
    auto rhs = [&pmat, cd, lambda](double t, const ode::State<2>& s, ode::State<2>& d) {
      const double x = cd.to_x(t);
      const auto r = prufer_rhs(pmat(x, s[0], s[1]), lambda, s[0]);
      const double j = cd.dx_dt(x);
      d[0] = r.dtheta * j;
      d[1] = r.dlogrho * j;
    };
    const double limit = set.logrho_limit;
    auto hook = [limit, cd](const ode::DenseStep<2>& st, ode::State<2>& s) {
      if (s[1] > limit)
        throw Error(ErrorKind::overflow,
                    "amplitude overflow at x = " + std::to_string(cd.to_x(st.t1())) +
                        " (scales too large for the window)");
      return ode::StepAction::proceed;
    };
    try {
      seg.sol = ode::integrate<2>(rhs, cd.from_x(a), cd.from_x(b), y, opt, &tr.stats, hook);
    } catch (const IntegrationError& e) {
      throw IntegrationError(std::string(e.what()) + " near x = " + std::to_string(cd.to_x(e.last_x())),
                             cd.to_x(e.last_x()));
    }
    y = seg.sol.final_state();
    tr.segments.push_back(std::move(seg));
  }
  return tr;
}

inline PruferTrajectory integrate_prufer(const CoefficientFamily& f, double lambda, double x_from, double x_to,
                                         double theta_init, const IntegrationSettings& set = {}) {
  auto pm = [&f](double x, double, double) { return f(x); };
  return integrate_polar(pm, f.beta, lambda, x_from, x_to, theta_init, 0.0, set);
}

inline PruferTrajectory integrate_prufer(const CoefficientFamily& f, double lambda, const TruncationWindow& w,
                                         double theta_init, Direction dir, const IntegrationSettings& set = {}) {
  PruferTrajectory tr = dir == Direction::forward ? integrate_prufer(f, lambda, w.x0, w.x_inf, theta_init, set)
                                                  : integrate_prufer(f, lambda, w.x_inf, w.x0, theta_init, set);
  tr.window = w;
  return tr;
}

/// Cartesian trajectory with renormalization log and unwrapped angle.
struct CartesianTrajectory {
  double lambda = 0.0;
  Direction direction = Direction::forward;
  double x_begin = 0.0;
  double x_end = 0.0;
  std::vector<Segment<2>> segments;
  /// Per segment and step: cumulative log scale and unwrapped angle at step start.
  std::vector<std::vector<double>> log_scale;
  std::vector<std::vector<double>> theta_start;
  long renormalizations = 0;
  ode::Stats stats;

  struct Sample {
    double x;
    Vec2 z;          // scaled state
    double logscale; // true z = z * exp(logscale)
    double theta;    // unwrapped
  };

  Sample at(double x) const {
    for (std::size_t si = 0; si < segments.size(); ++si) {
      const auto& s = segments[si];
      if (!s.contains(x)) continue;
      const double t = s.coord.from_x(x);
      const std::size_t i = s.sol.index_of(t);
      const auto& st = s.sol.steps[i];
      double prev = angle_of({st.start()[0], st.start()[1]});
      double th = theta_start[si][i];
      const int sub = 8;
      for (int q = 1; q <= sub; ++q) {
        const double tq = st.t0 + (t - st.t0) * q / sub;
        const auto y = st.eval(tq);
        const double a = angle_of({y[0], y[1]});
        double d = a - prev;
        d -= 2 * pi * std::round(d / (2 * pi));
        th += d;
        prev = a;
      }
      const auto y = st.eval(t);
      return {x, {y[0], y[1]}, log_scale[si][i], th};
    }
    throw Error(ErrorKind::invalid_argument, "query point outside trajectory");
  }
  double theta_at(double x) const { return at(x).theta; }
  double logrho_at(double x) const {
    const auto s = at(x);
    return std::log(s.z.norm()) + s.logscale;
  }
};

inline CartesianTrajectory integrate_cartesian(const CoefficientFamily& f, double lambda, double x_from,
                                               double x_to, Vec2 z_init, const IntegrationSettings& set = {}) {
  require(z_init.norm() > 0, ErrorKind::invalid_argument, "initial vector must be nonzero");
  CartesianTrajectory tr;
  tr.lambda = lambda;
  tr.direction = x_to > x_from ? Direction::forward : Direction::backward;
  tr.x_begin = x_from;
  tr.x_end = x_to;
  ode::Options opt;
  opt.rtol = set.rtol;
  opt.atol = 0.0;
  opt.norm = ode::ErrorNorm::euclidean;
  opt.max_steps = set.max_steps;
  ode::State<2> y{z_init.u, z_init.v};
  double logscale = 0.0;
  double theta = angle_of(z_init);
  for (auto [a, b] : detail::split_interval(x_from, x_to, set.x_split)) {
    Segment<2> seg;
    seg.coord = detail::coordinate_for(a, b, set.x_split, f.beta);
    seg.x_begin = a;
    seg.x_end = b;
    const Coordinate cd = seg.coord;
    std::vector<double> ls, ts;
    auto rhs = [&f, cd, lambda](double t, const ode::State<2>& s, ode::State<2>& d) {
      const double x = cd.to_x(t);
      const Vec2 dz = jinv_times(SymMat2{lambda, 0.0, lambda} - f(x)) * Vec2{s[0], s[1]};
      const double j = cd.dx_dt(x);
      d[0] = dz.u * j;
      d[1] = dz.v * j;
    };
    auto hook = [&](const ode::DenseStep<2>& st, ode::State<2>& s) {
      ls.push_back(logscale);
      ts.push_back(theta);
      double prev = angle_of({st.start()[0], st.start()[1]});
      for (int q = 1; q <= 8; ++q) {
        const auto yq = st.eval(st.t0 + st.h * q / 8.0);
        const double an = angle_of({yq[0], yq[1]});
        double d = an - prev;
        d -= 2 * pi * std::round(d / (2 * pi));
        theta += d;
        prev = an;
      }
      const double n = std::hypot(s[0], s[1]);
      if (n < 1e-150 || n > 1e150) {
        s[0] /= n;
        s[1] /= n;
        logscale += std::log(n);
        ++tr.renormalizations;
        return ode::StepAction::state_modified;
      }
      return ode::StepAction::proceed;
    };
    seg.sol = ode::integrate<2>(rhs, cd.from_x(a), cd.from_x(b), y, opt, &tr.stats, hook);
    y = seg.sol.final_state();
    const double n = std::hypot(y[0], y[1]);
    if (n < 1e-150 || n > 1e150) {
      y[0] /= n;
      y[1] /= n;
      logscale += std::log(n);
      ++tr.renormalizations;
    }
    tr.segments.push_back(std::move(seg));
    tr.log_scale.push_back(std::move(ls));
    tr.theta_start.push_back(std::move(ts));
  }
  return tr;
}

inline CartesianTrajectory integrate_cartesian(const CoefficientFamily& f, double lambda, const TruncationWindow& w,
                                               Vec2 z_init, Direction dir, const IntegrationSettings& set = {}) {
  return dir == Direction::forward ? integrate_cartesian(f, lambda, w.x0, w.x_inf, z_init, set)
                                   : integrate_cartesian(f, lambda, w.x_inf, w.x0, z_init, set);
}

/// Maximum relative defect of z = exp(logrho)(cos, sin) in z' = J^{-1}(lambda - P)z,
/// using a five-point difference quotient on the dense output.
inline double ode_residual(const PruferTrajectory& tr, const CoefficientFamily& f, double lambda,
                           int sample_count) {
  if (sample_count <= 0) return 0.0;
  const double lo = std::min(tr.x_begin, tr.x_end), hi = std::max(tr.x_begin, tr.x_end);
  double worst = 0.0;
  for (int i = 0; i < sample_count; ++i) {
    const double x = lo * std::pow(hi / lo, (i + 0.5) / sample_count);
    const SymMat2 p = f(x);
    const SymMat2 m = SymMat2{lambda, 0.0, lambda} - p;
    const double scale = std::max(m.norm(), 1.0 / x);
    double h = 1e-2 * std::min(x, 1.0 / scale);
    h = std::min({h, (x - lo) / 2.5, (hi - x) / 2.5});
    const PruferState c = tr.at(x);
    auto zrel = [&](double xx) {
      const PruferState s = tr.at(xx);
      const double r = std::exp(s.logrho - c.logrho);
      return Vec2{r * std::cos(s.theta), r * std::sin(s.theta)};
    };
    const Vec2 d = (zrel(x - 2 * h) - zrel(x - h) * 8.0 + zrel(x + h) * 8.0 - zrel(x + 2 * h)) * (1.0 / (12 * h));
    const Vec2 z{std::cos(c.theta), std::sin(c.theta)};
    const Vec2 rhs = jinv_times(m) * z;
    worst = std::max(worst, (d - rhs).norm() / scale);
  }
  return worst;
}

inline void write_trajectory_csv(std::ostream& os, const PruferTrajectory& tr) {
  os << "x,theta,logrho\n";
  char buf[128];
  for (const auto& s : tr.states()) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s.x, s.theta, s.logrho);
    os << buf;
  }
}

}  // namespace diracgap
