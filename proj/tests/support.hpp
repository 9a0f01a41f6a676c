#pragma once

#include <cmath>

#include "diracgap/model.hpp"

namespace testing {

inline diracgap::CoefficientFamily coulomb(int k, double gamma, double mu_a = 0.0) {
  return diracgap::build_dirac_family({k, mu_a, diracgap::coulomb_potential(gamma, 1.0)});
}

/// P(x) = diag(-1, 1) for every x.
inline diracgap::CoefficientFamily constant_family() {
  diracgap::CoefficientFamily f;
  f.eval = [](double) { return diracgap::SymMat2{-1.0, 0.0, 1.0}; };
  f.beta = 1.0;
  f.p_star = {0.0, -1.0, 0.0};
  f.label = "constant";
  return f;
}

/// Closed-form Dirac-Coulomb bound state energy in units of the rest mass.
inline double sommerfeld(int k, double gamma, int n_r) {
  const double s = n_r + std::sqrt(k * k - gamma * gamma);
  return 1.0 / std::sqrt(1.0 + (gamma / s) * (gamma / s));
}

}  // namespace testing
