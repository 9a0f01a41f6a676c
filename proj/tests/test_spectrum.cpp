#include <catch_amalgamated.hpp>

#include <cmath>

#include "diracgap/spectrum.hpp"
#include "support.hpp"

using namespace diracgap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using testing::coulomb;
using testing::sommerfeld;

namespace {

const TruncationWindow& window_plus() {
  static const TruncationWindow w = select_truncation(coulomb(1, -0.5), -0.9, 0.999, 2e-4, 1e-3);
  return w;
}

const SpectrumResult& spectrum_plus() {
  static const SpectrumResult r = compute_spectrum(coulomb(1, -0.5), linear_grid(-0.9, 0.999, 50), window_plus());
  return r;
}

}  // namespace

TEST_CASE("shifted angle adds the asymptotic arctan term", "[spectrum]") {
  const CoefficientFamily f = coulomb(1, -0.5);
  const TruncationWindow& w = window_plus();
  CHECK_THAT(nu_star(f, 0.0, w) - nu(f, 0.0, w), WithinAbs(pi / 4, 1e-12));
  const double lam = std::sqrt(3.0) / 2;
  CHECK_THAT(nu_star(f, lam, w) - nu(f, lam, w), WithinAbs(1.3089969, 1e-7));
}

TEST_CASE("angle limit is non-decreasing in lambda", "[spectrum]") {
  const CoefficientFamily f = coulomb(-1, -0.5);
  const TruncationWindow w = select_truncation(f, -0.9, 0.999, 2e-4, 1e-3);
  CHECK(nu(f, 0.6, w) <= nu(f, 0.7, w));
  const ScanReport rep = scan_spectrum(f, linear_grid(-0.9, 0.999, 50), w);
  CHECK(rep.violations == 0);
  for (std::size_t i = 1; i < rep.nu_star.size(); ++i) CHECK(rep.nu_star[i] > rep.nu_star[i - 1] - 1e-8);
}

TEST_CASE("shifted angle grows without bound toward the upper edge", "[spectrum]") {
  const CoefficientFamily f = coulomb(1, -0.5);
  const TruncationWindow w = select_truncation(f, 0.99, 0.99999, 2e-4, 1e-3);
  CHECK(nu_star(f, 0.99999, w) - nu_star(f, 0.99, w) > 3 * pi);
}

TEST_CASE("Coulomb eigenvalues match the closed form", "[spectrum]") {
  const auto& r = spectrum_plus();
  REQUIRE(r.records.size() >= 3);
  for (int n = 0; n < 3; ++n) {
    CHECK(r.records[n].k == n);
    CHECK_THAT(r.records[n].lambda, WithinRel(sommerfeld(1, -0.5, n), 1e-8));
  }
  CHECK_THAT(r.records[2].lambda, WithinRel(0.9851200, 1e-5));
}

TEST_CASE("k = -1 carries the excited closed-form levels", "[spectrum]") {
  const CoefficientFamily f = coulomb(-1, -0.5);
  const TruncationWindow w = select_truncation(f, -0.9, 0.999, 2e-4, 1e-3);
  const SpectrumResult r = compute_spectrum(f, linear_grid(-0.9, 0.999, 50), w);
  REQUIRE(r.records.size() >= 3);
  for (int n = 0; n < 3; ++n) CHECK_THAT(r.records[n].lambda, WithinRel(sommerfeld(-1, -0.5, n + 1), 1e-8));
  for (const auto& rec : r.records) CHECK(rec.quadrant == Quadrant::first);
}

TEST_CASE("rotation and nodal structure", "[spectrum]") {
  const auto& r = spectrum_plus();
  CHECK_THAT(r.records[0].rot, WithinAbs(0.0, 1e-4));
  for (const auto& rec : r.records) {
    CHECK(rec.residual < 1e-9);
    CHECK(rec.nodal_index == rec.k);
    CHECK_FALSE(rec.boundary_flag);
  }
  for (std::size_t i = 1; i < r.records.size(); ++i) {
    CHECK(r.records[i].rot > r.records[i - 1].rot);
    CHECK(r.records[i].nodal_index - r.records[i - 1].nodal_index == 1);
  }
}

TEST_CASE("nodal index floor rules", "[spectrum]") {
  CHECK(nodal_index_of(0.5, Quadrant::first) == 0);
  CHECK(nodal_index_of(1.49, Quadrant::first) == 1);
  CHECK(nodal_index_of(0.0, Quadrant::second) == 0);
  CHECK(nodal_index_of(0.51, Quadrant::second) == 1);
  bool flag = false;
  nodal_index_of(2.0 + 1e-12, Quadrant::first, &flag);
  CHECK(flag);
  nodal_index_of(0.3, Quadrant::first, &flag);
  CHECK_FALSE(flag);
}

TEST_CASE("empty and eigenvalue-free scans", "[spectrum]") {
  const TruncationWindow& w = window_plus();
  CHECK(scan_spectrum(coulomb(1, -0.5), {}, w).brackets.empty());
  const CoefficientFamily free = coulomb(-1, 0.0);
  const TruncationWindow wf = select_truncation(free, -0.9, 0.999, 2e-4, 1e-3);
  CHECK(scan_spectrum(free, linear_grid(-0.9, 0.999, 50), wf).brackets.empty());
  CHECK_THROWS_AS(scan_spectrum(free, {0.2, 0.1}, wf), Error);
}

TEST_CASE("bad brackets are refused", "[spectrum]") {
  CHECK_THROWS_AS(find_eigenvalue(coulomb(1, -0.5), 0, 0.1, 0.2, window_plus()), Error);
  CHECK_THROWS_AS(find_eigenvalue(coulomb(1, -0.5), 0, 0.9, 0.8, window_plus()), Error);
}

TEST_CASE("accumulation at the upper edge", "[spectrum]") {
  const std::vector<double> schedule{1e2, 1e3, 1e4, 1e5};
  const auto c = detect_accumulation(coulomb(1, -0.5), Endpoint::mu_plus, schedule, 1e-3, 1e-3);
  CHECK(c.verdict == Verdict::accumulating);
  CHECK(c.theta.size() == schedule.size());
  const auto z = detect_accumulation(coulomb(-1, 0.0), Endpoint::mu_plus, schedule, 1e-3, 1e-3);
  CHECK(z.verdict == Verdict::finite);
  const auto m = detect_accumulation(coulomb(1, -0.5), Endpoint::mu_minus, schedule, 1e-3, 1e-3);
  CHECK(m.verdict != Verdict::accumulating);
  CHECK(std::string(to_string(Verdict::accumulating)) == "accumulating");
}

TEST_CASE("ground state eigenfunction", "[spectrum]") {
  const CoefficientFamily f = coulomb(1, -0.5);
  const EigenvalueRecord& rec = spectrum_plus().records[0];
  CHECK_THAT(rec.decay.exponent_at_inf, WithinRel(-0.5, 0.02));
  CHECK_THAT(rec.decay.exponent_at_zero, WithinRel(std::sqrt(0.75), 0.02));

  const int n = 8001;
  const EigenfunctionResult e = eigenfunction(f, rec, n);
  REQUIRE(e.samples.size() == static_cast<std::size_t>(n));
  // Simpson rule in log x on the samples.
  const double h = std::log(e.samples.back().x / e.samples.front().x) / (n - 1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& s = e.samples[i];
    const double g = (s.u * s.u + s.v * s.v) * s.x;
    acc += g * (i == 0 || i == n - 1 ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  CHECK_THAT(acc * h / 3.0, WithinAbs(1.0, 1e-6));
  CHECK(ode_residual(e.forward, f, rec.lambda, 32) < 1e-6);
}

TEST_CASE("eigenfunction rejects a non-eigenvalue", "[spectrum]") {
  EigenvalueRecord rec = spectrum_plus().records[0];
  rec.lambda += 1e-3;
  CHECK_THROWS_AS(eigenfunction(coulomb(1, -0.5), rec, 10), Error);
}
