#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace topowave {

// c in nm·THz; divides by a0 [nm] to convert dimensionless frequency (a0/lambda) to THz.
inline constexpr double kSpeedOfLightNmThz = 299792.458;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt3 = 1.7320508075688772935;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// invalid physical geometry (overlapping holes, degenerate layouts)
class GeometryError : public Error {
 public:
  using Error::Error;
};

// eigensolver failures, calibration without a root, diverged runs
class NumericError : public Error {
 public:
  using Error::Error;
};

// bad config files, schema violations
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

inline Vec2 unit_at_angle(double rad) { return {std::cos(rad), std::sin(rad)}; }

// frequency window in dimensionless units (a0/lambda)
struct FreqWindow {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double nu) const { return nu >= lo && nu <= hi; }
};

inline double nu_to_thz(double nu, double a0_nm) { return nu * kSpeedOfLightNmThz / a0_nm; }
inline double thz_to_nu(double f_thz, double a0_nm) { return f_thz * a0_nm / kSpeedOfLightNmThz; }

}  // namespace topowave
