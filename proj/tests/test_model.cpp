#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "diracgap/model.hpp"
#include "support.hpp"

using namespace diracgap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using testing::coulomb;

TEST_CASE("Coulomb matrix at x = 1", "[model]") {
  const SymMat2 p = coulomb(-1, -0.5)(1.0);
  CHECK_THAT(p.p11, WithinAbs(-1.5, 1e-15));
  CHECK_THAT(p.p12, WithinAbs(1.0, 1e-15));
  CHECK_THAT(p.p22, WithinAbs(0.5, 1e-15));
}

TEST_CASE("matrix tends to diag(-1, 1) at infinity", "[model]") {
  for (double mu : {0.0, 1.0}) {
    const SymMat2 p = coulomb(-1, -0.5, mu)(1e12);
    CHECK_THAT(p.p11, WithinAbs(-1.0, 1e-11));
    CHECK_THAT(p.p12, WithinAbs(0.0, 1e-11));
    CHECK_THAT(p.p22, WithinAbs(1.0, 1e-11));
  }
}

TEST_CASE("anomalous moment changes the singularity order", "[model]") {
  const CoefficientFamily f = coulomb(-1, -2.0, 1.0);
  CHECK(f.beta == 2.0);
  CHECK_THAT(f.p_star.p11, WithinAbs(0.0, 1e-15));
  CHECK_THAT(f.p_star.p12, WithinAbs(-2.0, 1e-15));
  CHECK_THAT(f.p_star.p22, WithinAbs(0.0, 1e-15));
}

TEST_CASE("zero endpoint classification", "[model]") {
  const auto a = classify_zero_endpoint(coulomb(-1, -0.5));
  CHECK(a.beta == 1.0);
  CHECK_THAT(a.det_p_star, WithinAbs(-0.75, 1e-15));
  CHECK_THAT(a.delta_star, WithinAbs(0.75, 1e-15));
  CHECK(a.admissible);

  const auto b = classify_zero_endpoint(coulomb(-1, -1.0));
  CHECK_THAT(b.det_p_star, WithinAbs(0.0, 1e-15));
  CHECK_FALSE(b.admissible);

  const auto c = classify_zero_endpoint(coulomb(-1, -2.0, 1.0));
  CHECK(c.beta == 2.0);
  CHECK_THAT(c.det_p_star, WithinAbs(-4.0, 1e-15));
  CHECK(c.admissible);
}

TEST_CASE("classification depends on k only through k^2 without moment", "[model]") {
  for (double g : {-0.3, -0.5, -0.8, -1.2})
    for (int k : {1, 2, 3}) {
      const auto p = classify_zero_endpoint(coulomb(k, g));
      const auto m = classify_zero_endpoint(coulomb(-k, g));
      CHECK(p.det_p_star == m.det_p_star);
      CHECK(p.admissible == m.admissible);
    }
}

TEST_CASE("hypotheses hold for admissible Coulomb families", "[model]") {
  CHECK(validate_hypotheses(coulomb(-1, -0.5)).all_passed());
  CHECK(validate_hypotheses(coulomb(1, -0.5)).all_passed());
  CHECK(validate_hypotheses(coulomb(-1, 0.0)).all_passed());
  CHECK(validate_hypotheses(coulomb(-1, -2.0, 1.0)).all_passed());
}

TEST_CASE("coupling bound fails for strong potentials", "[model]") {
  const auto rep = validate_hypotheses(coulomb(-1, -0.99));
  CHECK_FALSE(rep.all_passed());
  bool found = false;
  for (const auto& c : rep.checks)
    if (!c.passed) found = true;
  CHECK(found);
}

TEST_CASE("coarse hypothesis grids are refused", "[model]") {
  SampleGrid g;
  g.points_per_decade = 8;
  CHECK_THROWS_AS(validate_hypotheses(coulomb(-1, -0.5), g), Error);
}

TEST_CASE("matrices are exactly symmetric and the zero remainder is diagonal", "[model]") {
  const CoefficientFamily f = coulomb(-1, -0.5);
  for (double x : SampleGrid{}.points(1e-8, 1e8)) {
    const SymMat2 r = f.r_zero(x);
    CHECK(std::abs(r.p12) <= 4 * std::numeric_limits<double>::epsilon());
    CHECK(std::isfinite(f(x).p12));
  }
}

TEST_CASE("mirror family negates and swaps the diagonal", "[model]") {
  const CoefficientFamily f = coulomb(-1, -0.5);
  const CoefficientFamily m = mirror_family(f);
  CHECK(m.mu_minus == -f.mu_plus);
  CHECK(m.mu_plus == -f.mu_minus);
  for (double x : {1e-3, 0.7, 40.0}) {
    const SymMat2 p = f(x), q = m(x);
    CHECK(q.p11 == -p.p22);
    CHECK(q.p12 == -p.p12);
    CHECK(q.p22 == -p.p11);
  }
}

TEST_CASE("tabulated Coulomb data reproduces the closed form", "[model]") {
  std::vector<double> xs, vs;
  for (int i = 0; i <= 16 * 12; ++i) {
    const double x = std::pow(10.0, -6.0 + i / 16.0);
    xs.push_back(x);
    vs.push_back(-0.5 / x);
  }
  const PotentialSpec t = tabulated_potential(xs, vs);
  for (double x : {1e-9, 3e-5, 0.37, 12.0, 5e7})
    CHECK_THAT(t.value(x), WithinRel(-0.5 / x, 1e-6));
}

TEST_CASE("tabulated input must be strictly increasing", "[model]") {
  CHECK_THROWS_AS(tabulated_potential({1.0, 1.0, 2.0, 3.0}, {1.0, 2.0, 3.0, 4.0}), Error);
}

TEST_CASE("Soler coupling with r^2/(1+r^5)", "[model]") {
  auto gamma = [](double r) { return r * r / (1.0 + std::pow(r, 5)); };
  auto F = [](double s) { return s; };
  const NonlinearCoupling c = build_soler_coupling(gamma, F, 1.0);
  for (double r : {1e-6, 0.1, 1.0, 10.0, 1e4})
    CHECK_THAT(c.envelope(r), WithinRel(1.0 / (4.0 * pi * (1.0 + std::pow(r, 5))), 1e-12));
  for (double r : {0.01, 1.0, 3.0}) {
    const SymMat2 z = c(r, {0.0, 0.0});
    CHECK(z.p11 == 0.0);
    CHECK(z.p22 == 0.0);
    const SymMat2 s = c(r, {0.3, -0.1});
    CHECK(s.p11 == -s.p22);
    CHECK(s.p12 == 0.0);
    const double expected = gamma(r) * (0.09 - 0.01) / (4.0 * pi * r * r);
    CHECK_THAT(s.p11, WithinRel(expected, 1e-14));
  }
}

TEST_CASE("Soler coupling with unbounded envelope is rejected", "[model]") {
  auto gamma = [](double r) { return 1.0 / (1.0 + r * r); };
  auto F = [](double s) { return s; };
  try {
    build_soler_coupling(gamma, F, 1.0);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::rejected);
  }
}

TEST_CASE("zero coupling is trivial", "[model]") {
  const NonlinearCoupling c = zero_coupling();
  CHECK(c.trivial);
  const SymMat2 s = c(1.0, {1.0, 2.0});
  CHECK(s.p11 == 0.0);
  CHECK(s.p22 == 0.0);
}
