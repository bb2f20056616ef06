#pragma once

#include <cstddef>
#include <functional>
#include <mutex>
#include <span>
#include <vector>

#include "neediso/sphere.hpp"

namespace neediso {

/// L_l(t) = (2l+1)/(4 pi) P_l(t).
double legendre_kernel(int ell, double cos_angle);

/// Classical Legendre values P_0(t)..P_L(t) by the three-term recurrence.
std::vector<double> legendre_polynomials(int max_ell, double t);

/// Gauss-Legendre rule on [-1, 1] with `count` nodes, nodes ascending.
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussLegendreRule gauss_legendre(std::size_t count);

/// Integral over [lo, hi] of f with an n-node Gauss-Legendre rule.
double integrate_gl(const std::function<double(double)>& f, double lo, double hi, std::size_t count);

/// Real spherical-harmonic coefficients a_lm, 0 <= l <= L, stored at l^2 + l + m.
class HarmonicCoefficients {
 public:
  HarmonicCoefficients() = default;
  explicit HarmonicCoefficients(int band_limit)
      : band_limit_(band_limit), a_(static_cast<std::size_t>(band_limit + 1) * (band_limit + 1), 0.0) {}

  static constexpr std::size_t index(int ell, int m) {
    return static_cast<std::size_t>(ell * ell + ell + m);
  }

  int band_limit() const { return band_limit_; }
  std::size_t size() const { return a_.size(); }

  double& operator()(int ell, int m) { return a_[index(ell, m)]; }
  double operator()(int ell, int m) const { return a_[index(ell, m)]; }

  std::span<double> values() { return a_; }
  std::span<const double> values() const { return a_; }

  /// Copy truncated or zero-padded to a new band limit.
  HarmonicCoefficients resized(int band_limit) const;

  double squared_norm() const;

 private:
  int band_limit_ = -1;
  std::vector<double> a_;
};

/// Orthonormal associated Legendre values Pbar_lm(t), 0 <= m <= l <= L, stored
/// at l(l+1)/2 + m. Values below ~1e-280 are flushed to zero.
void normalized_legendre(int max_ell, double t, std::span<double> out);

constexpr std::size_t triangular_index(int ell, int m) {
  return static_cast<std::size_t>(ell) * (ell + 1) / 2 + static_cast<std::size_t>(m);
}
constexpr std::size_t triangular_size(int max_ell) {
  return static_cast<std::size_t>(max_ell + 1) * (max_ell + 2) / 2;
}

/// All real harmonics Y_lm(u), l <= L, in HarmonicCoefficients layout.
void real_harmonics(int max_ell, const UnitDirection& u, std::span<double> out);
double real_harmonic(int ell, int m, const UnitDirection& u);

/// Gauss-Legendre colatitudes x uniform longitudes, exact to `degree`.
class QuadratureGrid {
 public:
  explicit QuadratureGrid(int degree);

  int degree() const { return degree_; }
  std::size_t ring_count() const { return ring_cos_.size(); }
  std::size_t longitude_count() const { return n_phi_; }
  std::size_t size() const { return ring_cos_.size() * n_phi_; }

  double ring_cos(std::size_t ring) const { return ring_cos_[ring]; }
  double ring_colatitude(std::size_t ring) const { return ring_theta_[ring]; }
  double longitude(std::size_t i) const;
  /// Weight of every node on `ring` (GL weight times 2 pi / N_phi).
  double ring_weight(std::size_t ring) const { return ring_weight_[ring]; }

  /// Node k = ring * N_phi + longitude index.
  const UnitDirection& node(std::size_t k) const { return nodes_[k]; }
  double weight(std::size_t k) const { return ring_weight_[k / n_phi_]; }
  std::span<const UnitDirection> nodes() const { return nodes_; }

  double integrate(std::span<const double> samples) const;

  /// Nearest node by geodesic distance; scans the two bracketing rings.
  std::size_t nearest_node(const UnitDirection& u) const;
  /// Upper bound on the distance from any point to its nearest node.
  double covering_radius() const;

 private:
  int degree_;
  std::size_t n_phi_;
  std::vector<double> ring_cos_, ring_theta_, ring_weight_;
  std::vector<UnitDirection> nodes_;
};

QuadratureGrid build_grid(int degree);

/// Analysis/synthesis on a fixed grid up to band limit L. The per-ring
/// Legendre table is built lazily on first use and shared by later calls,
/// unless it would exceed ~64 MB, in which case rows are recomputed per call.
class SphericalTransform {
 public:
  SphericalTransform(const QuadratureGrid& grid, int band_limit);

  const QuadratureGrid& grid() const { return *grid_; }
  int band_limit() const { return band_limit_; }

  /// a_lm = sum_k w_k Y_lm(xi_k) f_k for l <= min(L, band_limit).
  HarmonicCoefficients forward(std::span<const double> samples, int max_ell) const;
  /// f_k = sum a_lm Y_lm(xi_k), using coefficients up to min(a.L, band_limit).
  std::vector<double> inverse(const HarmonicCoefficients& a) const;

 private:
  const double* legendre_row(std::size_t ring, std::vector<double>& scratch) const;

  const QuadratureGrid* grid_;
  int band_limit_;
  bool cache_table_;
  mutable std::once_flag table_once_;
  mutable std::vector<double> table_;
  std::vector<double> cos_table_, sin_table_;  // [m][i], m <= band_limit
};

/// Forward transform with explicit error when L exceeds the grid degree.
HarmonicCoefficients sht_forward(std::span<const double> samples, const QuadratureGrid& grid, int band_limit);
/// Pointwise synthesis at arbitrary directions.
std::vector<double> sht_inverse(const HarmonicCoefficients& a, std::span<const UnitDirection> points);
double evaluate(const HarmonicCoefficients& a, const UnitDirection& u);

/// a'_lm = h(l) a_lm, band limit reduced to the last l with h(l) != 0.
HarmonicCoefficients filter(const HarmonicCoefficients& a, const std::function<double(int)>& h);

/// S_lm = sum_i weight_i Y_lm(X_i); weights default to 1.
HarmonicCoefficients point_multipoles(std::span<const UnitDirection> points, int band_limit,
                                      std::span<const double> weights = {});

}  // namespace neediso
