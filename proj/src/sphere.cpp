#include "neediso/sphere.hpp"

#include <algorithm>
#include <stdexcept>

namespace neediso {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 normalized(const Vec3& a) {
  const double n = std::sqrt(dot3(a, a));
  return {a[0] / n, a[1] / n, a[2] / n};
}

// North Galactic pole and the Galactic longitude of the North Celestial Pole
// (J2000, degrees).
constexpr double kNgpRaDeg = 192.85948;
constexpr double kNgpDecDeg = 27.12825;
constexpr double kNcpGalacticLonDeg = 122.93192;

Rotation3 build_equatorial_to_galactic() {
  const Vec3 ngp_eq = UnitDirection::from_lonlat_deg(kNgpRaDeg, kNgpDecDeg).cartesian();
  const Vec3 ncp_eq{0.0, 0.0, 1.0};
  const Vec3 ngp_gal{0.0, 0.0, 1.0};
  const Vec3 ncp_gal = UnitDirection::from_lonlat_deg(kNcpGalacticLonDeg, kNgpDecDeg).cartesian();

  // Orthonormal triads built from the same pair of poles in both frames.
  auto triad = [](const Vec3& p, const Vec3& q) {
    const Vec3 e1 = p;
    const Vec3 e3 = normalized(cross(p, q));
    const Vec3 e2 = cross(e3, e1);
    return std::array<Vec3, 3>{e1, e2, e3};
  };
  const auto eq = triad(ngp_eq, ncp_eq);
  const auto gal = triad(ngp_gal, ncp_gal);

  Rotation3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += gal[k][i] * eq[k][j];
      r.m[i][j] = s;
    }
  return r;
}

}  // namespace

UnitDirection UnitDirection::from_cartesian(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("UnitDirection: zero or non-finite vector");
  return from_raw(x / n, y / n, z / n);
}

UnitDirection UnitDirection::from_spherical(double colatitude, double longitude) {
  const double s = std::sin(colatitude);
  return from_cartesian(s * std::cos(longitude), s * std::sin(longitude), std::cos(colatitude));
}

UnitDirection UnitDirection::from_lonlat_deg(double lon_deg, double lat_deg) {
  return from_spherical(deg_to_rad(90.0 - lat_deg), deg_to_rad(lon_deg));
}

double UnitDirection::colatitude() const {
  return std::atan2(std::hypot(v_[0], v_[1]), v_[2]);
}

double UnitDirection::longitude() const {
  double phi = std::atan2(v_[1], v_[0]);
  if (phi < 0.0) phi += 2.0 * kPi;
  if (phi >= 2.0 * kPi) phi = 0.0;
  return phi;
}

UnitDirection Rotation3::apply(const UnitDirection& u) const {
  const auto& v = u.cartesian();
  return UnitDirection::from_cartesian(m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
                                       m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
                                       m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]);
}

Rotation3 Rotation3::transpose() const {
  Rotation3 t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t.m[i][j] = m[j][i];
  return t;
}

Rotation3 Rotation3::operator*(const Rotation3& rhs) const {
  Rotation3 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += m[i][k] * rhs.m[k][j];
      out.m[i][j] = s;
    }
  return out;
}

Rotation3 Rotation3::about_axis(const UnitDirection& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  const double x = axis.x(), y = axis.y(), z = axis.z();
  Rotation3 r;
  r.m = {{{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
          {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
          {t * x * z - s * y, t * y * z + s * x, t * z * z + c}}};
  return r;
}

double geodesic_distance(const UnitDirection& u, const UnitDirection& v) {
  // atan2 form keeps full precision near 0 and pi; equals acos(clamp(u.v)).
  const auto c = cross(u.cartesian(), v.cartesian());
  return std::atan2(std::sqrt(dot3(c, c)), u.dot(v));
}

std::array<std::array<double, 3>, 2> tangent_basis(const UnitDirection& u) {
  if (std::abs(u.z()) > 1.0 - 1e-12) return {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}};
  const double rho = std::hypot(u.x(), u.y());
  const double cp = u.x() / rho, sp = u.y() / rho;
  return {{{u.z() * cp, u.z() * sp, -rho}, {-sp, cp, 0.0}}};
}

UnitDirection deflect(const UnitDirection& u, double angle, double azimuth) {
  if (angle < 0.0 || angle > kPi) throw std::invalid_argument("deflect: angle outside [0, pi]");
  if (angle == 0.0) return u;
  const auto e = tangent_basis(u);
  const double ca = std::cos(azimuth), sa = std::sin(azimuth);
  const Vec3 t{ca * e[0][0] + sa * e[1][0], ca * e[0][1] + sa * e[1][1], ca * e[0][2] + sa * e[1][2]};
  return deflect_toward(u, angle, t);
}

UnitDirection deflect_toward(const UnitDirection& u, double angle, const Vec3& t) {
  if (angle == 0.0) return u;
  const Vec3& v = u.cartesian();
  const double along = dot3(t, v);
  const Vec3 tan = normalized({t[0] - along * v[0], t[1] - along * v[1], t[2] - along * v[2]});
  const double c = std::cos(angle), s = std::sin(angle);
  return UnitDirection::from_cartesian(c * v[0] + s * tan[0], c * v[1] + s * tan[1], c * v[2] + s * tan[2]);
}

const Rotation3& equatorial_to_galactic() {
  static const Rotation3 r = build_equatorial_to_galactic();
  return r;
}

UnitDirection convert(const UnitDirection& u, FrameOfReference from, FrameOfReference to) {
  if (from == to) return u;
  if (from == FrameOfReference::Equatorial) return equatorial_to_galactic().apply(u);
  return equatorial_to_galactic().transpose().apply(u);
}

}  // namespace neediso
