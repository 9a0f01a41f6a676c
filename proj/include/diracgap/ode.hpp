#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "diracgap/error.hpp"

namespace diracgap::ode {

template <std::size_t N>
using State = std::array<double, N>;

enum class ErrorNorm { componentwise, euclidean };

struct Options {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_init = 0.0;  // 0 selects automatically
  double h_max = 0.0;   // 0 means unbounded
  long max_steps = 2'000'000;
  ErrorNorm norm = ErrorNorm::componentwise;
};

struct Stats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

/// One accepted Dormand-Prince step with its continuous extension.
template <std::size_t N>
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  std::array<State<N>, 5> r{};

  double t1() const { return t0 + h; }

  State<N> eval(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    State<N> y;
    for (std::size_t i = 0; i < N; ++i)
      y[i] = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
    return y;
  }
  const State<N>& start() const { return r[0]; }
  State<N> end() const {
    State<N> y;
    for (std::size_t i = 0; i < N; ++i) y[i] = r[0][i] + r[1][i];
    return y;
  }
};

/// Piecewise dense solution; t may run forward or backward.
template <std::size_t N>
class DenseSolution {
 public:
  std::vector<DenseStep<N>> steps;

  bool empty() const { return steps.empty(); }
  double t_begin() const { return steps.front().t0; }
  double t_end() const { return steps.back().t1(); }
  bool forward() const { return steps.empty() || steps.front().h > 0; }

  const DenseStep<N>& locate(double t) const {
    const bool fwd = forward();
    auto it = std::lower_bound(steps.begin(), steps.end(), t, [fwd](const DenseStep<N>& s, double v) {
      return fwd ? s.t1() < v : s.t1() > v;
    });
    if (it == steps.end()) --it;
    return *it;
  }
  std::size_t index_of(double t) const { return static_cast<std::size_t>(&locate(t) - steps.data()); }
  State<N> at(double t) const { return locate(t).eval(t); }
  State<N> final_state() const { return steps.back().end(); }
};

namespace detail {

struct Tableau {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                          d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                          d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
};

template <std::size_t N>
double error_norm(const State<N>& err, const State<N>& y0, const State<N>& y1, const Options& o) {
  if (o.norm == ErrorNorm::euclidean) {
    double e2 = 0, a = 0, b = 0;
    for (std::size_t i = 0; i < N; ++i) {
      e2 += err[i] * err[i];
      a += y0[i] * y0[i];
      b += y1[i] * y1[i];
    }
    const double sc = o.atol + o.rtol * std::sqrt(std::max(a, b));
    return std::sqrt(e2) / sc;
  }
  double acc = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sc = o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sc;
    acc += q * q;
  }
  return std::sqrt(acc / N);
}

}  // namespace detail

/// Hook result after an accepted step: the hook may rescale the state in place.
enum class StepAction { proceed, state_modified, stop };

struct NoHook {
  template <std::size_t N>
  StepAction operator()(const DenseStep<N>&, State<N>&) const {
    return StepAction::proceed;
  }
};

/// Adaptive Dormand-Prince 5(4) with FSAL and 4th order dense output.
template <std::size_t N, class Rhs, class Hook = NoHook>
DenseSolution<N> integrate(Rhs&& f, double t0, double t1, State<N> y, const Options& opt,
                           Stats* stats = nullptr, Hook&& hook = Hook{}) {
  using T = detail::Tableau;
  DenseSolution<N> sol;
  Stats local;
  Stats& st = stats ? *stats : local;
  if (t0 == t1) return sol;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);

  State<N> k1, k2, k3, k4, k5, k6, k7, yt, y1;
  auto axpy = [](State<N>& out, const State<N>& base, double h,
                 std::initializer_list<std::pair<double, const State<N>*>> terms) {
    for (std::size_t i = 0; i < N; ++i) {
      double s = 0;
      for (const auto& [c, k] : terms) s += c * (*k)[i];
      out[i] = base[i] + h * s;
    }
  };

  f(t0, y, k1);
  ++st.evaluations;

  double h = opt.h_init;
  if (h <= 0) {
    double d0 = 0, d1 = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = opt.atol + opt.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / N);
    d1 = std::sqrt(d1 / N);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    axpy(yt, y, dir * h0, {{1.0, &k1}});
    f(t0 + dir * h0, yt, k2);
    ++st.evaluations;
    double d2 = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = opt.atol + opt.rtol * std::abs(y[i]);
      const double q = (k2[i] - k1[i]) / sc;
      d2 += q * q;
    }
    d2 = std::sqrt(d2 / N) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min({100 * h0, h1, span});
  }
  if (opt.h_max > 0) h = std::min(h, opt.h_max);

  double t = t0;
  bool last_rejected = false;
  while (dir * (t1 - t) > 0) {
    if (st.accepted + st.rejected >= opt.max_steps)
      throw IntegrationError("integrator exceeded the maximum number of steps", t);
    const double eps_t = 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0);
    if (h < eps_t) throw IntegrationError("step size underflow", t);
    bool final_step = false;
    if (h >= std::abs(t1 - t)) {
      h = std::abs(t1 - t);
      final_step = true;
    }
    const double hs = dir * h;
    axpy(yt, y, hs, {{T::a21, &k1}});
    f(t + T::c2 * hs, yt, k2);
    axpy(yt, y, hs, {{T::a31, &k1}, {T::a32, &k2}});
    f(t + T::c3 * hs, yt, k3);
    axpy(yt, y, hs, {{T::a41, &k1}, {T::a42, &k2}, {T::a43, &k3}});
    f(t + T::c4 * hs, yt, k4);
    axpy(yt, y, hs, {{T::a51, &k1}, {T::a52, &k2}, {T::a53, &k3}, {T::a54, &k4}});
    f(t + T::c5 * hs, yt, k5);
    axpy(yt, y, hs, {{T::a61, &k1}, {T::a62, &k2}, {T::a63, &k3}, {T::a64, &k4}, {T::a65, &k5}});
    const double tn = final_step ? t1 : t + hs;
    f(tn, yt, k6);
    axpy(y1, y, hs, {{T::a71, &k1}, {T::a73, &k3}, {T::a74, &k4}, {T::a75, &k5}, {T::a76, &k6}});
    f(tn, y1, k7);
    st.evaluations += 6;

    State<N> err;
    bool finite = true;
    for (std::size_t i = 0; i < N; ++i) {
      err[i] = hs * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] + T::e6 * k6[i] +
                     T::e7 * k7[i]);
      finite = finite && std::isfinite(y1[i]) && std::isfinite(err[i]);
    }
    const double en = finite ? detail::error_norm<N>(err, y, y1, opt) : 1e10;

    if (en <= 1.0) {
      DenseStep<N> step;
      step.t0 = t;
      step.h = tn - t;
      for (std::size_t i = 0; i < N; ++i) {
        const double dy = y1[i] - y[i];
        const double bspl = hs * k1[i] - dy;
        step.r[0][i] = y[i];
        step.r[1][i] = dy;
        step.r[2][i] = bspl;
        step.r[3][i] = dy - hs * k7[i] - bspl;
        step.r[4][i] = hs * (T::d1 * k1[i] + T::d3 * k3[i] + T::d4 * k4[i] + T::d5 * k5[i] +
                             T::d6 * k6[i] + T::d7 * k7[i]);
      }
      sol.steps.push_back(step);
      ++st.accepted;
      t = tn;
      y = y1;
      k1 = k7;
      const StepAction act = hook(sol.steps.back(), y);
      if (act == StepAction::stop) break;
      if (act == StepAction::state_modified) {
        f(t, y, k1);
        ++st.evaluations;
      }
      double fac = 0.9 * std::pow(std::max(en, 1e-10), -0.2);
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
      h *= fac;
      last_rejected = false;
    } else {
      ++st.rejected;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      last_rejected = true;
    }
    if (opt.h_max > 0) h = std::min(h, opt.h_max);
  }
  return sol;
}

}  // namespace diracgap::ode
