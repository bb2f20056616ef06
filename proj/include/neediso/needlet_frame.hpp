#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "neediso/coverage.hpp"
#include "neediso/harmonics.hpp"
#include "neediso/sphere.hpp"

namespace neediso {

/// Smooth partition-of-unity window. a == 1 on [0, 1/B], a == 0 on [1, inf),
/// with a polynomial transition built from the regularized incomplete beta
/// function of parameters (p+1, p+1), p = spline_order.
class WindowFunction {
 public:
  WindowFunction(double bandwidth, int spline_order);

  double bandwidth() const { return bandwidth_; }
  int spline_order() const { return order_; }

  double a(double t) const;
  double b(double x) const { return a(x / bandwidth_) - a(x); }

 private:
  double bandwidth_;
  int order_;
  std::vector<double> binomial_;  // C(2p+1, k)
};

WindowFunction make_window(double bandwidth = 2.0, int spline_order = 15);

/// Inclusive multipole range carried by one scale.
struct ScaleBand {
  int lo, hi;
};

class NeedletFrame {
 public:
  NeedletFrame(WindowFunction window, int max_scale);

  const WindowFunction& window() const { return window_; }
  int max_scale() const { return max_scale_; }

  /// Integer l with B^(j-1) < l < B^(j+1).
  ScaleBand band(int j) const { return bands_.at(j); }
  /// sqrt(b(B^-j l)); zero outside the band.
  double filter(int j, int ell) const;
  /// sum_{j' <= j} b(B^-j' l).
  double lowpass(int j, int ell) const;

  /// Degree-ceil(B^(j+2)) cubature carrying the scale-j needlet centers.
  const QuadratureGrid& cubature(int j) const;
  std::size_t size(int j) const { return cubature(j).size(); }
  const UnitDirection& center(int j, std::size_t k) const { return cubature(j).node(k); }
  double weight(int j, std::size_t k) const { return cubature(j).weight(k); }

  /// Zonal profile D_j(t) = sum_l sqrt(b) L_l(t), so psi_jk(x) = sqrt(w_jk) D_j(x . xi_jk).
  double profile(int j, double t) const;
  /// Legendre-kernel coefficients of D_j^2: D_j(t)^2 = sum_l c_l L_l(t), l <= 2 hi.
  const std::vector<double>& squared_profile_coefficients(int j) const;

  /// Transform over the scale-j cubature up to band limit 2 hi (lazy).
  const SphericalTransform& transform(int j) const;

  /// Nearest-node binning grid of degree 4 B^(J_max + 1) (lazy).
  const QuadratureGrid& analysis_grid() const;

  nlohmann::json descriptor() const;
  std::uint64_t hash() const;

 private:
  struct Scale;
  Scale& scale(int j) const;

  WindowFunction window_;
  int max_scale_;
  std::vector<ScaleBand> bands_;
  std::vector<std::vector<double>> filters_;  // [j][l], l <= hi
  std::vector<std::vector<double>> lowpass_;  // [j][l], l <= hi
  mutable std::vector<std::unique_ptr<Scale>> scales_;
  mutable std::once_flag analysis_once_;
  mutable std::unique_ptr<QuadratureGrid> analysis_grid_;
};

std::shared_ptr<const NeedletFrame> build_frame(const WindowFunction& window, int max_scale);

double needlet_eval(const NeedletFrame& frame, int j, std::size_t k, const UnitDirection& x);

/// Per-scale empirical statistics for one catalog.
struct ScaleStatistics {
  std::vector<double> beta;       // (1/n) sum_i psi(X_i)
  std::vector<double> sigma2;     // (1/n) sum_i psi^2 - beta^2, clamped at 0
  std::vector<double> occupancy;  // sum_i psi^2 / psi^2(center)
};

struct NeedletCoefficientSet {
  std::size_t n = 0;
  std::string reference;
  bool degenerate_variance = false;  // n == 1
  std::vector<ScaleStatistics> scales;  // index j = 0..max_scale
};

enum class CoefficientPath { Direct, Transform, Binned };

/// Empirical coefficients for scales 0..max_scale. `Direct` sums needlets over
/// events, `Transform` filters exact event multipoles, `Binned` first snaps
/// events to the nearest node of the frame's analysis grid.
NeedletCoefficientSet empirical_coefficients(const NeedletFrame& frame, std::span<const UnitDirection> catalog,
                                             int max_scale, CoefficientPath path = CoefficientPath::Transform,
                                             std::string reference = "uniform");

/// Same statistics from precomputed event multipoles S_lm (band limit at least
/// 2 hi of the finest requested scale).
NeedletCoefficientSet coefficients_from_multipoles(const NeedletFrame& frame, const HarmonicCoefficients& event_multipoles,
                                                   std::size_t n, int max_scale);

/// Event multipoles after nearest-node binning on the analysis grid.
HarmonicCoefficients binned_multipoles(const NeedletFrame& frame, std::span<const UnitDirection> catalog, int band_limit);

/// Per-needlet bound on |beta_direct - beta_binned| at scale j.
double binning_bound(const NeedletFrame& frame, int j);

/// beta_jk(g) = <g, psi_jk> for every center of scale j.
std::vector<double> reference_coefficients(const NeedletFrame& frame, const CoverageModel& g, int j);

/// zeta_jk = (S1^2 - S2) / (n(n-1)) with S1 = sum(psi - beta_g), S2 = sum(psi - beta_g)^2.
std::vector<std::vector<double>> zeta_coefficients(const NeedletFrame& frame, std::span<const UnitDirection> catalog,
                                                   const CoverageModel& g, int max_scale,
                                                   CoefficientPath path = CoefficientPath::Transform);

}  // namespace neediso
