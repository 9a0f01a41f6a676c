#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "diracgap/asymptotics.hpp"
#include "diracgap/error.hpp"
#include "diracgap/model.hpp"
#include "diracgap/prufer.hpp"
#include "diracgap/spectrum.hpp"

namespace diracgap {

struct NonlinearSettings {
  IntegrationSettings integration{1e-12, 1e-14};
  double logrho_limit = 300.0;
  int max_newton = 25;
  double fd_step = 1e-7;
  double tol_factor = 1e-9;
  /// Backward leg starts at theta_inf + turns * pi so both legs meet on the same sheet.
  int turns = 0;
};

struct ShootResult {
  Vec2 mismatch;
  Vec2 z_forward;
  Vec2 z_backward;
  std::shared_ptr<const PruferTrajectory> forward;
  std::shared_ptr<const PruferTrajectory> backward;
};

namespace detail {

inline IntegrationSettings nonlinear_integration(const NonlinearSettings& s) {
  IntegrationSettings set = s.integration;
  set.logrho_limit = s.logrho_limit;
  return set;
}

inline Vec2 polar_to_vec(double theta, double logrho) {
  const double r = std::exp(logrho);
  return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace detail

/// Shooting in polar variables: forward from a w1* at x0, backward from b b1 at X_inf (log b given).
inline ShootResult shoot_polar(const CoefficientFamily& f, const NonlinearCoupling& c, double lambda, double log_a,
                               double log_b, const TruncationWindow& w, const NonlinearSettings& s = {}) {
  require(f.in_gap(lambda), ErrorKind::convergence, "lambda left the gap: no decaying boundary data");
  const double theta0 = zero_data(f).theta0;
  const double theta_inf = infinity_data(f, lambda).theta_inf + s.turns * pi;
  const double xm = w.x_mid();
  const IntegrationSettings set = detail::nonlinear_integration(s);
  auto pm = [&f, &c](double x, double th, double lr) {
    if (c.trivial) return f(x);
    return f(x) - c(x, detail::polar_to_vec(th, lr));
  };
  ShootResult r;
  if (std::isfinite(log_a)) {
    auto tr = std::make_shared<PruferTrajectory>(integrate_polar(pm, f.beta, lambda, w.x0, xm, theta0, log_a, set));
    tr->window = w;
    const PruferState e = tr->end();
    r.z_forward = detail::polar_to_vec(e.theta, e.logrho);
    r.forward = tr;
  }
  if (std::isfinite(log_b)) {
    auto tr =
        std::make_shared<PruferTrajectory>(integrate_polar(pm, f.beta, lambda, w.x_inf, xm, theta_inf, log_b, set));
    tr->window = w;
    const PruferState e = tr->end();
    r.z_backward = detail::polar_to_vec(e.theta, e.logrho);
    r.backward = tr;
  }
  r.mismatch = r.z_forward - r.z_backward;
  return r;
}

/// Mismatch z_fwd(x_mid) - z_bwd(x_mid) for amplitudes a, b >= 0.
inline Vec2 shoot_nonlinear(const CoefficientFamily& f, const NonlinearCoupling& c, double lambda, double a,
                            double b, const TruncationWindow& w, const NonlinearSettings& s = {}) {
  require(a >= 0 && b >= 0, ErrorKind::invalid_argument, "shooting amplitudes must be nonnegative");
  const double inf = -std::numeric_limits<double>::infinity();
  return shoot_polar(f, c, lambda, a > 0 ? std::log(a) : inf, b > 0 ? std::log(b) : inf, w, s).mismatch;
}

struct BranchPoint {
  double lambda = 0.0;
  double amplitude = 0.0;
  double log_b = 0.0;
  std::vector<EigenSample> samples;
  double l2norm = 0.0;
  double j = 0.0;
  int i = 0;
  double bvp_residual = 0.0;
  int newton_iterations = 0;
  double angle_shift = 0.0;  // theta_fwd(x_mid) - theta_bwd(x_mid)
  std::shared_ptr<const PruferTrajectory> forward;
  std::shared_ptr<const PruferTrajectory> backward;

  /// Solution state at x, continuous in angle across the matching point.
  PruferState at(double x) const {
    if (x <= forward->x_end) return forward->at(x);
    PruferState s = backward->at(x);
    s.theta += angle_shift;
    return s;
  }
};

struct LinearizedIndex {
  double j = 0.0;
  int i = 0;
};

inline LinearizedIndex linearized_index(const CoefficientFamily& f, const NonlinearCoupling&, const BranchPoint& p) {
  const ZeroData zd = zero_data(f);
  const PruferState a = p.forward->start();
  const PruferState b = p.backward->start();
  for (double lr : {a.logrho, b.logrho, p.forward->end().logrho})
    require(std::isfinite(lr), ErrorKind::convergence, "solution vanishes: angle undefined");
  LinearizedIndex li;
  li.j = (b.theta + p.angle_shift - a.theta) / pi;
  li.i = nodal_index_of(li.j, zd.quadrant);
  return li;
}

namespace detail {

inline double branch_l2(const CoefficientFamily& f, const BranchPoint& p, const TruncationWindow& w) {
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& s : p.forward->states()) peak = std::max(peak, s.logrho);
  for (const auto& s : p.backward->states()) peak = std::max(peak, s.logrho);
  auto hf = [&](double x) { return p.forward->at(x).logrho - peak; };
  auto hb = [&](double x) { return p.backward->at(x).logrho - peak; };
  const double xm = w.x_mid();
  double mass = log_scale_integral(hf, w.x0, xm) + log_scale_integral(hb, xm, w.x_inf);
  mass += std::exp(2.0 * hb(w.x_inf)) / (2.0 * infinity_data(f, p.lambda).sqrt_delta);
  const ZeroData zd = zero_data(f);
  if (f.beta == 1.0) mass += std::exp(2.0 * hf(w.x0)) * w.x0 / (2.0 * zd.sigma + 1.0);
  return std::exp(peak) * std::sqrt(mass);
}

}  // namespace detail

/// Newton corrector on (lambda, log b) at fixed amplitude a.
inline BranchPoint solve_point(const CoefficientFamily& f, const NonlinearCoupling& c, double lambda_guess,
                               double log_b_guess, double a, const TruncationWindow& w,
                               const NonlinearSettings& s = {}, int n_samples = 0) {
  require(a > 0, ErrorKind::invalid_argument, "amplitude target must be positive");
  const double log_a = std::log(a);
  const double tol = s.tol_factor * std::max(1.0, a);
  double lam = lambda_guess, lb = log_b_guess;
  auto polar_residual = [](const ShootResult& r) {
    const PruferState ef = r.forward->end(), eb = r.backward->end();
    return Vec2{ef.theta - eb.theta, ef.logrho - eb.logrho};
  };
  ShootResult cur = shoot_polar(f, c, lam, log_a, lb, w, s);
  double res = cur.mismatch.norm();
  Vec2 pr = polar_residual(cur);
  int it = 0;
  double last_step = std::numeric_limits<double>::infinity();
  while (!(res < tol && (std::abs(last_step) < 1e-11 || res < 1e-3 * tol))) {
    if (++it > s.max_newton)
      throw Error(ErrorKind::convergence, "corrector did not converge in " + std::to_string(s.max_newton) +
                                              " iterations (residual " + std::to_string(res) + ")");
    const double hl = s.fd_step * std::max(1.0, std::abs(lam));
    const double hb = s.fd_step * std::max(1.0, std::abs(lb));
    const Vec2 rl = polar_residual(shoot_polar(f, c, lam + hl, log_a, lb, w, s)) -
                    polar_residual(shoot_polar(f, c, lam - hl, log_a, lb, w, s));
    const Vec2 rb = polar_residual(shoot_polar(f, c, lam, log_a, lb + hb, w, s)) -
                    polar_residual(shoot_polar(f, c, lam, log_a, lb - hb, w, s));
    const Mat2 J{rl.u / (2 * hl), rb.u / (2 * hb), rl.v / (2 * hl), rb.v / (2 * hb)};
    const double det = J.det();
    const double fro = std::sqrt(J.a11 * J.a11 + J.a12 * J.a12 + J.a21 * J.a21 + J.a22 * J.a22);
    const double cond = det == 0.0 ? std::numeric_limits<double>::infinity() : fro * fro / std::abs(det);
    if (!(cond < 1e14))
      throw Error(ErrorKind::convergence, "singular Jacobian in corrector (condition estimate " +
                                              std::to_string(cond) + ")");
    const double dl = -(J.a22 * pr.u - J.a12 * pr.v) / det;
    const double db = -(-J.a21 * pr.u + J.a11 * pr.v) / det;
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h < 12; ++h, t *= 0.5) {
      const double nl = lam + t * dl;
      if (!f.in_gap(nl)) continue;
      try {
        ShootResult trial = shoot_polar(f, c, nl, log_a, lb + t * db, w, s);
        const Vec2 tp = polar_residual(trial);
        if (tp.norm() < pr.norm() || h == 11) {
          lam = nl;
          lb += t * db;
          res = trial.mismatch.norm();
          pr = tp;
          cur = std::move(trial);
          last_step = t * dl;
          accepted = true;
          break;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::overflow && e.kind() != ErrorKind::integration) throw;
      }
    }
    if (!accepted) throw Error(ErrorKind::convergence, "corrector line search failed");
  }
  BranchPoint p;
  p.lambda = lam;
  p.amplitude = a;
  p.log_b = lb;
  p.bvp_residual = res / std::max(1.0, a);
  p.newton_iterations = it;
  p.forward = cur.forward;
  p.backward = cur.backward;
  p.angle_shift = cur.forward->end().theta - cur.backward->end().theta;
  const LinearizedIndex li = linearized_index(f, c, p);
  p.j = li.j;
  p.i = li.i;
  p.l2norm = detail::branch_l2(f, p, w);
  for (int q = 0; q < n_samples; ++q) {
    const double x = n_samples == 1 ? w.x0 : w.x0 * std::pow(w.x_inf / w.x0, static_cast<double>(q) / (n_samples - 1));
    const PruferState st = p.at(x);
    const Vec2 z = detail::polar_to_vec(st.theta, st.logrho);
    p.samples.push_back({x, z.u, z.v});
  }
  return p;
}

enum class Termination { max_steps, gap_edge_reached, step_failure, amplitude_limit };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::max_steps: return "max-steps";
    case Termination::gap_edge_reached: return "gap-edge-reached";
    case Termination::step_failure: return "step-failure";
    case Termination::amplitude_limit: return "amplitude-limit";
  }
  return "?";
}

struct ContinuationSettings {
  NonlinearSettings nonlinear;
  double a_max = std::numeric_limits<double>::infinity();
  double edge_margin = 1e-6;
  int max_halvings = 4;
  double seed_tolerance = 1e-6;
  int n_samples = 0;
};

struct Branch {
  EigenvalueRecord seed;
  int seed_index = 0;
  std::vector<BranchPoint> points;
  Termination termination = Termination::max_steps;
  std::string termination_detail;
  int index_violations = 0;
  int drift = 0;  // sign of lambda(a) - lambda_seed along the branch
  double lambda_extrapolated = std::numeric_limits<double>::quiet_NaN();

  bool index_constant() const { return index_violations == 0; }
};

/// Least-squares fit of lambda(a) = l0 + c1 a^2 + c2 a^4 on the given points; returns l0.
inline double extrapolate_to_zero(const std::vector<BranchPoint>& pts, std::size_t count = 5) {
  const std::size_t n = std::min(count, pts.size());
  require(n >= 1, ErrorKind::invalid_argument, "no branch points to extrapolate");
  const int m = n >= 3 ? 3 : static_cast<int>(n);
  std::array<std::array<double, 4>, 3> A{};
  for (std::size_t r = 0; r < n; ++r) {
    const double a2 = pts[r].amplitude * pts[r].amplitude;
    const double phi[3] = {1.0, a2, a2 * a2};
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) A[i][j] += phi[i] * phi[j];
      A[i][3] += phi[i] * pts[r].lambda;
    }
  }
  for (int i = 0; i < m; ++i) {
    int piv = i;
    for (int r = i + 1; r < m; ++r)
      if (std::abs(A[r][i]) > std::abs(A[piv][i])) piv = r;
    std::swap(A[i], A[piv]);
    for (int r = 0; r < m; ++r) {
      if (r == i) continue;
      const double q = A[r][i] / A[i][i];
      for (int cc = i; cc < 4; ++cc) A[r][cc] -= q * A[i][cc];
    }
  }
  return A[0][3] / A[0][0];
}

inline Branch continue_branch(const CoefficientFamily& f, const NonlinearCoupling& c, const EigenvalueRecord& seed,
                              double ds, int max_steps, const ContinuationSettings& cs = {}) {
  require(ds > 0 && max_steps > 0, ErrorKind::invalid_argument, "continuation step and count must be positive");
  const TruncationWindow& w = seed.window;
  IntegrationSettings lin = cs.nonlinear.integration;
  const MatchData m = match_angles(f, seed.lambda, w, lin, seed.k);
  require(std::abs(m.mismatch) < cs.seed_tolerance, ErrorKind::convergence,
          "seed residual too large: " + std::to_string(m.mismatch));
  const double ratio = m.forward.end().logrho - m.backward.end().logrho;

  Branch br;
  br.seed = seed;
  br.seed_index = seed.nodal_index;
  NonlinearSettings ns = cs.nonlinear;
  ns.turns = seed.k;

  double step = ds;
  double a_prev = 0.0;
  while (static_cast<int>(br.points.size()) < max_steps) {
    const double a = a_prev + step;
    if (a > cs.a_max) {
      br.termination = Termination::amplitude_limit;
      br.termination_detail = "amplitude exceeds a_max";
      break;
    }
    double lam_guess = seed.lambda, r_guess = ratio;
    const std::size_t n = br.points.size();
    if (n == 1) {
      lam_guess = br.points[0].lambda;
      r_guess = br.points[0].log_b - std::log(br.points[0].amplitude);
    } else if (n >= 2) {
      const BranchPoint& p1 = br.points[n - 2];
      const BranchPoint& p2 = br.points[n - 1];
      const double t = (a - p2.amplitude) / (p2.amplitude - p1.amplitude);
      lam_guess = p2.lambda + t * (p2.lambda - p1.lambda);
      const double r1 = p1.log_b - std::log(p1.amplitude), r2 = p2.log_b - std::log(p2.amplitude);
      r_guess = r2 + t * (r2 - r1);
      if (!f.in_gap(lam_guess)) lam_guess = p2.lambda;
    }
    try {
      BranchPoint p = solve_point(f, c, lam_guess, r_guess + std::log(a), a, w, ns, cs.n_samples);
      if (p.i != br.seed_index) ++br.index_violations;
      br.points.push_back(std::move(p));
      a_prev = a;
      step = std::min(ds, 2.0 * step);
      const double lam = br.points.back().lambda;
      if (lam - f.mu_minus < cs.edge_margin || f.mu_plus - lam < cs.edge_margin) {
        br.termination = Termination::gap_edge_reached;
        br.termination_detail = "lambda within margin of a gap edge";
        break;
      }
    } catch (const Error& e) {
      if (br.points.empty() && step <= ds / std::pow(2.0, cs.max_halvings))
        throw Error(ErrorKind::convergence, std::string("immediate corrector failure: ") + e.what());
      if (step <= ds / std::pow(2.0, cs.max_halvings)) {
        br.termination = Termination::step_failure;
        br.termination_detail = e.what();
        break;
      }
      step *= 0.5;
    }
  }
  if (static_cast<int>(br.points.size()) >= max_steps) br.termination = Termination::max_steps;
  if (!br.points.empty()) {
    const double dl = br.points.back().lambda - seed.lambda;
    br.drift = dl > 0 ? 1 : (dl < 0 ? -1 : 0);
    br.lambda_extrapolated = extrapolate_to_zero(br.points);
  }
  return br;
}

}  // namespace diracgap
