#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace neediso {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kFourPi = 4.0 * std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// A point on the unit sphere, stored as a normalized Cartesian triple.
///
/// Every constructor renormalizes, so |v| = 1 to rounding. The (theta, phi)
/// view uses colatitude in [0, pi] and longitude in [0, 2 pi).
class UnitDirection {
 public:
  /// North pole (0, 0, 1).
  constexpr UnitDirection() = default;

  static UnitDirection from_cartesian(double x, double y, double z);
  static UnitDirection from_spherical(double colatitude, double longitude);
  /// Longitude/latitude in degrees, the convention of published event lists.
  static UnitDirection from_lonlat_deg(double lon_deg, double lat_deg);

  double x() const { return v_[0]; }
  double y() const { return v_[1]; }
  double z() const { return v_[2]; }
  const std::array<double, 3>& cartesian() const { return v_; }

  double colatitude() const;
  double longitude() const;
  double latitude_deg() const { return 90.0 - rad_to_deg(colatitude()); }
  double longitude_deg() const { return rad_to_deg(longitude()); }

  double dot(const UnitDirection& other) const {
    return v_[0] * other.v_[0] + v_[1] * other.v_[1] + v_[2] * other.v_[2];
  }
  UnitDirection operator-() const { return from_raw(-v_[0], -v_[1], -v_[2]); }

  bool operator==(const UnitDirection&) const = default;

 private:
  static UnitDirection from_raw(double x, double y, double z) {
    UnitDirection u;
    u.v_ = {x, y, z};
    return u;
  }
  std::array<double, 3> v_{0.0, 0.0, 1.0};
};

using Catalog = std::vector<UnitDirection>;

/// Proper rotation of R^3 as a row-major 3x3 matrix.
struct Rotation3 {
  std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  UnitDirection apply(const UnitDirection& u) const;
  Rotation3 transpose() const;
  Rotation3 operator*(const Rotation3& rhs) const;

  static Rotation3 about_axis(const UnitDirection& axis, double angle);
  /// Haar-distributed random rotation.
  template <class Rng>
  static Rotation3 random(Rng& rng);
};

enum class FrameOfReference { Galactic, Equatorial };

/// Geodesic (great-circle) distance in [0, pi].
double geodesic_distance(const UnitDirection& u, const UnitDirection& v);

/// Uniform draw on the sphere: z ~ U[-1,1], phi ~ U[0, 2 pi).
template <class Rng>
UnitDirection sample_uniform(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double z = 2.0 * unit(rng) - 1.0;
  const double phi = 2.0 * kPi * unit(rng);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return UnitDirection::from_cartesian(s * std::cos(phi), s * std::sin(phi), z);
}

/// Orthonormal tangent pair (e_theta, e_phi) at u. Within 1e-12 of a pole
/// the pair (e_x, e_y) is used instead.
std::array<std::array<double, 3>, 2> tangent_basis(const UnitDirection& u);

/// Moves u along the great circle leaving it at the given azimuth (measured
/// from e_theta toward e_phi) by `angle` radians.
UnitDirection deflect(const UnitDirection& u, double angle, double azimuth);

/// Moves u by `angle` along the great circle toward the tangent vector t
/// (t need not be normalized but must have a nonzero tangential part).
UnitDirection deflect_toward(const UnitDirection& u, double angle,
                             const std::array<double, 3>& t);

/// Fixed J2000 Galactic <-> Equatorial rotation.
const Rotation3& equatorial_to_galactic();
UnitDirection convert(const UnitDirection& u, FrameOfReference from, FrameOfReference to);

template <class Rng>
Rotation3 Rotation3::random(Rng& rng) {
  // Uniform unit quaternion (Shoemake).
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double qx = a * std::sin(2 * kPi * u2), qy = a * std::cos(2 * kPi * u2);
  const double qz = b * std::sin(2 * kPi * u3), qw = b * std::cos(2 * kPi * u3);
  Rotation3 r;
  r.m = {{{1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw)},
          {2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw)},
          {2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy)}}};
  return r;
}

}  // namespace neediso
