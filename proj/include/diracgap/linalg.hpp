#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace diracgap {

inline constexpr double pi = std::numbers::pi;

struct Vec2 {
  double u = 0.0;
  double v = 0.0;

  double norm() const { return std::hypot(u, v); }
  Vec2 operator+(const Vec2& o) const { return {u + o.u, v + o.v}; }
  Vec2 operator-(const Vec2& o) const { return {u - o.u, v - o.v}; }
  Vec2 operator*(double s) const { return {u * s, v * s}; }
};

/// Symmetric 2x2 matrix [[p11, p12], [p12, p22]].
struct SymMat2 {
  double p11 = 0.0;
  double p12 = 0.0;
  double p22 = 0.0;

  double det() const { return p11 * p22 - p12 * p12; }
  SymMat2 operator+(const SymMat2& o) const { return {p11 + o.p11, p12 + o.p12, p22 + o.p22}; }
  SymMat2 operator-(const SymMat2& o) const { return {p11 - o.p11, p12 - o.p12, p22 - o.p22}; }
  SymMat2 operator*(double s) const { return {p11 * s, p12 * s, p22 * s}; }
  Vec2 operator*(const Vec2& z) const { return {p11 * z.u + p12 * z.v, p12 * z.u + p22 * z.v}; }

  /// Spectral norm (largest absolute eigenvalue).
  double norm() const {
    const double m = 0.5 * (p11 + p22);
    const double r = std::hypot(0.5 * (p11 - p22), p12);
    return std::abs(m) + r;
  }
};

/// General 2x2 matrix, row major.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  Vec2 operator*(const Vec2& z) const { return {a11 * z.u + a12 * z.v, a21 * z.u + a22 * z.v}; }
  Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }
  double det() const { return a11 * a22 - a12 * a21; }
  double trace() const { return a11 + a22; }
};

/// J^{-1} S for J = [[0,1],[-1,0]].
inline Mat2 jinv_times(const SymMat2& s) { return {-s.p12, -s.p22, s.p11, s.p12}; }

inline double angle_of(const Vec2& z) { return std::atan2(z.v, z.u); }

/// Angle reduced into (0, pi].
inline double angle_mod_pi(double theta) {
  double r = std::fmod(theta, pi);
  if (r <= 0.0) r += pi;
  return r;
}

inline std::array<double, 2> vec_to_array(const Vec2& z) { return {z.u, z.v}; }

}  // namespace diracgap
