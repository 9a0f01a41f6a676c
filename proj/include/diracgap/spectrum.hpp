#pragma once

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <future>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "diracgap/asymptotics.hpp"
#include "diracgap/error.hpp"
#include "diracgap/model.hpp"
#include "diracgap/prufer.hpp"

namespace diracgap {

struct SpectrumSettings {
  IntegrationSettings integration;
  double tol = 1e-9;           // on |D(lambda) - k pi|
  int max_iterations = 200;
  double refine_width = 1e-9;  // bracket width below which tolerances are tightened
  double refined_rtol = 1e-12;
  double refined_atol = 1e-14;
  unsigned threads = 0;        // 0 selects hardware concurrency
};

/// Runs fn(i) for i in [0, n) on a small thread pool, preserving order.
template <class Fn>
auto parallel_map(std::size_t n, Fn&& fn, unsigned threads = 0) {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> out(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::future<void>> jobs;
  for (unsigned w = 0; w < threads; ++w)
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < n; i += threads) out[i] = fn(i);
    }));
  for (auto& j : jobs) j.get();
  return out;
}

inline double nu(const CoefficientFamily& f, double lambda, const TruncationWindow& w,
                 const IntegrationSettings& set = {}) {
  const ZeroData zd = zero_data(f);
  return integrate_prufer(f, lambda, w, zd.theta0, Direction::forward, set).end().theta;
}

inline double nu_star(const CoefficientFamily& f, double lambda, const TruncationWindow& w,
                      const IntegrationSettings& set = {}) {
  return nu(f, lambda, w, set) + std::atan(std::sqrt((lambda - f.mu_minus) / (f.mu_plus - lambda)));
}

/// Forward and backward legs meeting at the geometric midpoint of the window.
struct MatchData {
  double lambda = 0.0;
  double x_mid = 0.0;
  double theta0 = 0.0;
  double theta_inf = 0.0;
  double theta_fwd = 0.0;
  double theta_bwd = 0.0;
  double mismatch = 0.0;  // theta_fwd - theta_bwd
  PruferTrajectory forward;
  PruferTrajectory backward;
};

inline MatchData match_angles(const CoefficientFamily& f, double lambda, const TruncationWindow& w,
                              const IntegrationSettings& set = {}, double backward_turns = 0.0) {
  MatchData m;
  m.lambda = lambda;
  m.x_mid = w.x_mid();
  m.theta0 = zero_data(f).theta0;
  m.theta_inf = infinity_data(f, lambda).theta_inf;
  m.forward = integrate_prufer(f, lambda, w.x0, m.x_mid, m.theta0, set);
  m.backward = integrate_prufer(f, lambda, w.x_inf, m.x_mid, m.theta_inf + backward_turns * pi, set);
  m.forward.window = m.backward.window = w;
  m.theta_fwd = m.forward.end().theta;
  m.theta_bwd = m.backward.end().theta;
  m.mismatch = m.theta_fwd - m.theta_bwd;
  return m;
}

struct DecayFit {
  double exponent_at_inf = 0.0;
  double expected_inf = 0.0;
  double rel_err_inf = 0.0;
  double exponent_at_zero = 0.0;
  double expected_zero = 0.0;
  double rel_err_zero = 0.0;
};

struct EigenvalueRecord {
  int k = 0;
  double lambda = 0.0;
  double rot = 0.0;
  int nodal_index = 0;
  double residual = 0.0;
  TruncationWindow window;
  DecayFit decay;
  Quadrant quadrant = Quadrant::first;
  bool degenerate_angle = false;
  bool boundary_flag = false;  // rot within 1e-9 of a floor breakpoint
  int iterations = 0;
};

inline int nodal_index_of(double rot, Quadrant q, bool* boundary = nullptr) {
  const double shifted = q == Quadrant::first ? rot : rot + 0.5;
  if (boundary) *boundary = std::abs(shifted - std::round(shifted)) < 1e-9;
  return static_cast<int>(std::floor(shifted));
}

inline DecayFit fit_decay(const CoefficientFamily& f, double lambda, const TruncationWindow& w,
                          const PruferTrajectory& forward, const PruferTrajectory& backward) {
  DecayFit d;
  const int n = 64;
  {
    std::vector<double> xs, ys;
    const double a = std::max(w.x_inf / 10.0, w.x_mid());
    for (int i = 0; i < n; ++i) {
      const double x = a + (w.x_inf - a) * i / (n - 1);
      xs.push_back(x);
      ys.push_back(backward.at(x).logrho);
    }
    d.exponent_at_inf = detail::ls_slope(xs, ys);
    d.expected_inf = -infinity_data(f, lambda).sqrt_delta;
    d.rel_err_inf = std::abs(d.exponent_at_inf - d.expected_inf) / std::abs(d.expected_inf);
  }
  {
    const ZeroData zd = zero_data(f);
    const Coordinate cd = Coordinate::near_zero(f.beta);
    std::vector<double> ts, ys;
    const double b = std::min(w.x0 * 10.0, w.x_mid());
    for (int i = 0; i < n; ++i) {
      const double x = w.x0 * std::pow(b / w.x0, static_cast<double>(i) / (n - 1));
      ts.push_back(cd.from_x(x));
      ys.push_back(forward.at(x).logrho);
    }
    d.exponent_at_zero = detail::ls_slope(ts, ys);
    d.expected_zero = zd.sigma;
    d.rel_err_zero = std::abs(d.exponent_at_zero - d.expected_zero) / d.expected_zero;
  }
  return d;
}

inline EigenvalueRecord make_record(const CoefficientFamily& f, int k, const MatchData& m,
                                    const TruncationWindow& w) {
  const ZeroData zd = zero_data(f);
  EigenvalueRecord r;
  r.k = k;
  r.lambda = m.lambda;
  r.residual = std::abs(m.mismatch - k * pi);
  r.rot = (m.mismatch + m.theta_inf - m.theta0) / pi;
  r.quadrant = zd.quadrant;
  r.degenerate_angle = zd.degenerate;
  r.nodal_index = nodal_index_of(r.rot, zd.quadrant, &r.boundary_flag);
  r.window = w;
  r.decay = fit_decay(f, m.lambda, w, m.forward, m.backward);
  return r;
}

/// Root of D(lambda) = k pi inside [lo, hi] by Illinois regula falsi safeguarded with bisection.
inline EigenvalueRecord find_eigenvalue(const CoefficientFamily& f, int k, double lo, double hi,
                                        const TruncationWindow& w, const SpectrumSettings& s = {}) {
  require(lo < hi && f.in_gap(lo) && f.in_gap(hi), ErrorKind::invalid_argument,
          "eigenvalue bracket must lie inside the gap");
  IntegrationSettings set = s.integration;
  auto g = [&](double lam) { return match_angles(f, lam, w, set).mismatch - k * pi; };
  double glo = g(lo), ghi = g(hi);
  if (!(glo < 0 && ghi > 0))
    throw Error(ErrorKind::convergence, "bracket-invalid: no sign change of the matching function on [" +
                                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
  const double lo_bound = lo, hi_bound = hi;
  bool refined = false;
  int side = 0;
  double width_prev = hi - lo;
  for (int it = 1; it <= s.max_iterations; ++it) {
    if (!refined && hi - lo < s.refine_width) {
      refined = true;
      set.rtol = std::min(set.rtol, s.refined_rtol);
      set.atol = std::min(set.atol, s.refined_atol);
      glo = g(lo);
      ghi = g(hi);
      const double mid = 0.5 * (lo + hi);
      double half = hi - lo;
      for (int grow = 0; grow < 60 && !(glo < 0 && ghi > 0); ++grow) {
        half *= 2.0;
        if (!(glo < 0)) {
          lo = std::max(mid - half, 0.5 * (lo + lo_bound));
          glo = g(lo);
        }
        if (!(ghi > 0)) {
          hi = std::min(mid + half, 0.5 * (hi + hi_bound));
          ghi = g(hi);
        }
      }
      if (!(glo < 0 && ghi > 0))
        throw Error(ErrorKind::convergence, "bracket lost after tightening the integration tolerance");
      width_prev = hi - lo;
    }
    double c = (lo * ghi - hi * glo) / (ghi - glo);
    if (it % 3 == 0 && (hi - lo) > 0.5 * width_prev) c = 0.5 * (lo + hi);
    if (it % 3 == 0) width_prev = hi - lo;
    if (!(c > lo && c < hi)) c = 0.5 * (lo + hi);
    MatchData m = match_angles(f, c, w, set);
    const double gc = m.mismatch - k * pi;
    if (std::abs(gc) < s.tol || (hi - lo) < 4 * std::numeric_limits<double>::epsilon() * std::abs(c)) {
      EigenvalueRecord r = make_record(f, k, m, w);
      r.iterations = it;
      return r;
    }
    if (gc < 0) {
      lo = c;
      glo = gc;
      if (side == -1) ghi *= 0.5;
      side = -1;
    } else {
      hi = c;
      ghi = gc;
      if (side == 1) glo *= 0.5;
      side = 1;
    }
  }
  throw Error(ErrorKind::convergence, "eigenvalue search exceeded the maximum number of iterations");
}

struct Bracket {
  int k = 0;
  double lo = 0.0;
  double hi = 0.0;
};

struct ScanReport {
  std::vector<double> grid;
  std::vector<double> nu_star;
  std::vector<Bracket> brackets;
  int violations = 0;
  double max_drop = 0.0;
};

inline ScanReport scan_spectrum(const CoefficientFamily& f, const std::vector<double>& grid,
                                const TruncationWindow& w, const SpectrumSettings& s = {}) {
  ScanReport rep;
  rep.grid = grid;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(f.in_gap(grid[i]), ErrorKind::invalid_argument, "lambda grid must lie inside the open gap");
    if (i) require(grid[i] > grid[i - 1], ErrorKind::invalid_argument, "lambda grid must be increasing");
  }
  rep.nu_star = parallel_map(
      grid.size(), [&](std::size_t i) { return nu_star(f, grid[i], w, s.integration); }, s.threads);
  const double allowed = 10.0 * s.tol;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double a = rep.nu_star[i - 1], b = rep.nu_star[i];
    if (b < a) {
      rep.max_drop = std::max(rep.max_drop, a - b);
      if (a - b > allowed) ++rep.violations;
      continue;
    }
    const long m0 = static_cast<long>(std::floor(a / pi)) + 1;
    for (long m = m0; m * pi <= b; ++m) rep.brackets.push_back({static_cast<int>(m - 1), grid[i - 1], grid[i]});
  }
  return rep;
}

inline std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> g;
  if (n <= 0) return g;
  if (n == 1) return {lo};
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
  return g;
}

struct SpectrumResult {
  ScanReport scan;
  std::vector<EigenvalueRecord> records;
};

inline SpectrumResult compute_spectrum(const CoefficientFamily& f, const std::vector<double>& grid,
                                       const TruncationWindow& w, const SpectrumSettings& s = {}) {
  SpectrumResult r;
  r.scan = scan_spectrum(f, grid, w, s);
  if (r.scan.violations > 0)
    throw Error(ErrorKind::convergence,
                "monotonicity violation in the shifted angle (window too small?), max drop " +
                    std::to_string(r.scan.max_drop));
  const auto& br = r.scan.brackets;
  r.records = parallel_map(
      br.size(), [&](std::size_t i) { return find_eigenvalue(f, br[i].k, br[i].lo, br[i].hi, w, s); }, s.threads);
  return r;
}

enum class Endpoint { mu_minus, mu_plus };
enum class Verdict { accumulating, finite, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::accumulating: return "accumulating";
    case Verdict::finite: return "finite";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct AccumulationVerdict {
  Endpoint endpoint = Endpoint::mu_plus;
  Verdict verdict = Verdict::inconclusive;
  std::vector<double> X;
  std::vector<double> theta;
  bool monotonicity_check = false;
  std::string detail;
};

/// Angle growth of the solution at the gap edge; the lower edge is handled on the mirror family.
inline AccumulationVerdict detect_accumulation(const CoefficientFamily& family, Endpoint endpoint,
                                               std::vector<double> schedule, double x0, double epsilon,
                                               const IntegrationSettings& set = {}) {
  require(schedule.size() >= 2, ErrorKind::invalid_argument, "schedule needs at least two points");
  std::sort(schedule.begin(), schedule.end());
  require(schedule.front() > x0, ErrorKind::invalid_argument, "schedule must start beyond x0");
  const CoefficientFamily f = endpoint == Endpoint::mu_plus ? family : mirror_family(family);
  const double lambda = f.mu_plus;
  const ZeroData zd = zero_data(f);
  const PruferTrajectory tr = integrate_prufer(f, lambda, x0, schedule.back(), zd.theta0, set);
  AccumulationVerdict v;
  v.endpoint = endpoint;
  v.X = schedule;
  for (double X : schedule) v.theta.push_back(tr.at(X).theta);

  v.monotonicity_check = true;
  for (double x : detail::log_points(schedule.front(), schedule.back(), 256))
    v.monotonicity_check = v.monotonicity_check && f(x).p11 < f.mu_minus;

  bool grows = true;
  for (std::size_t i = 1; i < v.theta.size(); ++i) grows = grows && v.theta[i] - v.theta[i - 1] >= 2 * pi;
  const double last = std::abs(v.theta.back() - v.theta[v.theta.size() - 2]);
  char buf[200];
  if (grows && v.monotonicity_check) {
    v.verdict = Verdict::accumulating;
    std::snprintf(buf, sizeof buf, "angle grows by >= 2pi per schedule step; p11 < mu- on [%g, %g]",
                  schedule.front(), schedule.back());
  } else if (last < epsilon) {
    v.verdict = Verdict::finite;
    std::snprintf(buf, sizeof buf, "angle variation %.3e over the last schedule step is below %.3e", last,
                  epsilon);
  } else {
    v.verdict = Verdict::inconclusive;
    std::snprintf(buf, sizeof buf, "growth pattern inconclusive (last variation %.3e, p11 < mu- %s)", last,
                  v.monotonicity_check ? "holds" : "fails");
  }
  v.detail = buf;
  return v;
}

struct EigenSample {
  double x;
  double u;
  double v;
};

/// Normalized eigenfunction spliced from the matched forward and backward legs.
struct EigenfunctionResult {
  EigenvalueRecord record;
  double x_mid = 0.0;
  double angle_mismatch = 0.0;
  double log_norm = 0.0;        // subtract from the raw log-amplitude to normalize
  double shift = 0.0;           // logrho_fwd(x_mid) - logrho_bwd(x_mid)
  double angle_shift = 0.0;     // theta_fwd(x_mid) - theta_bwd(x_mid)
  double tail_mass = 0.0;
  double head_mass = 0.0;
  PruferTrajectory forward;
  PruferTrajectory backward;
  std::vector<EigenSample> samples;

  PruferState at(double x) const {
    if (x <= x_mid) {
      PruferState s = forward.at(x);
      s.logrho -= log_norm;
      return s;
    }
    PruferState s = backward.at(x);
    s.theta += angle_shift;
    s.logrho += shift - log_norm;
    return s;
  }
  Vec2 z(double x) const {
    const PruferState s = at(x);
    const double r = std::exp(s.logrho);
    return {r * std::cos(s.theta), r * std::sin(s.theta)};
  }
};

namespace detail {

/// Integral of exp(2 h(x)) over [a, b], split into subintervals on a log scale.
template <class H>
double log_scale_integral(H&& h, double a, double b, int per_decade = 8) {
  using boost::math::quadrature::gauss_kronrod;
  const int n = std::max(1, static_cast<int>(std::ceil(std::log10(b / a) * per_decade)));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double l = a * std::pow(b / a, static_cast<double>(i) / n);
    const double r = a * std::pow(b / a, static_cast<double>(i + 1) / n);
    total += gauss_kronrod<double, 31>::integrate([&](double x) { return std::exp(2.0 * h(x)); }, l, r, 0, 0);
  }
  return total;
}

}  // namespace detail

inline EigenfunctionResult eigenfunction(const CoefficientFamily& f, const EigenvalueRecord& record, int n_samples,
                                         const IntegrationSettings& set = {}, double angle_tol = 1e-6) {
  const TruncationWindow& w = record.window;
  MatchData m = match_angles(f, record.lambda, w, set);
  const double defect = m.mismatch - record.k * pi;
  if (std::abs(defect) > angle_tol)
    throw Error(ErrorKind::convergence, "angle mismatch " + std::to_string(defect) +
                                            " at the matching point exceeds the tolerance");
  EigenfunctionResult e;
  e.record = record;
  e.x_mid = m.x_mid;
  e.angle_mismatch = defect;
  e.angle_shift = m.mismatch;
  e.shift = m.forward.end().logrho - m.backward.end().logrho;
  e.forward = std::move(m.forward);
  e.backward = std::move(m.backward);

  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& s : e.forward.states()) peak = std::max(peak, s.logrho);
  for (const auto& s : e.backward.states()) peak = std::max(peak, s.logrho + e.shift);
  auto hf = [&](double x) { return e.forward.at(x).logrho - peak; };
  auto hb = [&](double x) { return e.backward.at(x).logrho + e.shift - peak; };
  double mass = detail::log_scale_integral(hf, w.x0, e.x_mid) + detail::log_scale_integral(hb, e.x_mid, w.x_inf);
  const double q = infinity_data(f, record.lambda).sqrt_delta;
  e.tail_mass = std::exp(2.0 * hb(w.x_inf)) / (2.0 * q);
  const ZeroData zd = zero_data(f);
  const double h0 = hf(w.x0);
  if (f.beta == 1.0) {
    e.head_mass = std::exp(2.0 * h0) * w.x0 / (2.0 * zd.sigma + 1.0);
  } else {
    const Coordinate cd = Coordinate::near_zero(f.beta);
    const double t0 = cd.from_x(w.x0);
    using boost::math::quadrature::gauss_kronrod;
    e.head_mass = gauss_kronrod<double, 61>::integrate(
        [&](double x) { return x <= 0 ? 0.0 : std::exp(2.0 * (h0 + zd.sigma * (cd.from_x(x) - t0))); }, 0.0, w.x0,
        0, 0);
  }
  mass += e.tail_mass + e.head_mass;
  e.log_norm = peak + 0.5 * std::log(mass);

  for (int i = 0; i < n_samples; ++i) {
    const double x = n_samples == 1 ? w.x0 : w.x0 * std::pow(w.x_inf / w.x0, static_cast<double>(i) / (n_samples - 1));
    const Vec2 z = e.z(x);
    e.samples.push_back({x, z.u, z.v});
  }
  return e;
}

}  // namespace diracgap
