#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "neediso/coverage.hpp"
#include "neediso/harmonics.hpp"
#include "neediso/needlet_frame.hpp"

namespace neediso {

/// Discrepancy norms. L2Star is the unbiased estimate of the squared L2
/// distance and is only meaningful for linear estimates.
enum class Norm { L1, L2, L2Star, LInf };

std::string to_string(Norm p);
Norm norm_from_string(const std::string& tag);  // "1", "2", "2star", "inf"

/// Hard-threshold rule: keep beta_jk iff |beta| > lambda sqrt(log n) s_jk
/// and occupancy > rho log n. s_jk is the standard error sigma_jk / sqrt(n) of
/// beta_jk; with `standard_error` off it is the per-event sd sigma_jk itself.
struct ThresholdRule {
  double lambda = 1.0;
  double rho = 1.0;
  bool standard_error = true;
};

/// Band-limited density, stored with its constant term a_00 = 1/sqrt(4 pi).
struct DensityEstimate {
  HarmonicCoefficients coefficients;
  std::string provenance;
  std::vector<std::size_t> survivors;  // per scale, thresholded estimates only
  bool degenerate = false;

  double value(const UnitDirection& u) const { return evaluate(coefficients, u); }
  double integral() const { return coefficients(0, 0) * std::sqrt(kFourPi); }
  int band_limit() const { return coefficients.band_limit(); }
};

DensityEstimate constant_density();

/// f_J = 1/(4 pi) + sum_{j <= J} sum_k beta_jk psi_jk, assembled from the
/// coefficients by adjoint synthesis on each scale's cubature.
DensityEstimate linear_estimate(const NeedletCoefficientSet& coeffs, const NeedletFrame& frame, int J);

/// Same estimate as a low-pass filter sum_{j <= J} b(B^-j l) on event multipoles.
DensityEstimate linear_estimate(const HarmonicCoefficients& event_multipoles, std::size_t n, const NeedletFrame& frame,
                                int J);

/// floor(log2(n / (rho ln n)) / 2); may be < 1 for small n.
int plugin_max_scale(std::size_t n, double rho);

/// Thresholded estimate over scales 1..J (J defaults to plugin_max_scale).
/// When J < 1 the constant density is returned, flagged degenerate.
DensityEstimate plugin_estimate(const NeedletCoefficientSet& coeffs, const NeedletFrame& frame, const ThresholdRule& rule,
                                std::size_t n, std::optional<int> max_scale = std::nullopt);

/// Evaluation mesh used for p = 1 and p = inf: degree max(4 L, 16).
const SphericalTransform& evaluation_mesh(int band_limit);

/// L^p distance between an estimate and g. p = 2 uses Parseval with the
/// out-of-band energy of g added back; p = 1 and inf use the evaluation mesh.
double lp_distance(const DensityEstimate& est, const CoverageModel& g, Norm p);

/// Quadrature form (sum_k w_k |f - g|^p)^(1/p), or the max over nodes.
double lp_distance_on_grid(const DensityEstimate& est, const CoverageModel& g, Norm p, const QuadratureGrid& grid);

/// Plain sum of zeta_jk over scales 0..J+1 (zeta indexed by scale).
double unbiased_l2(const std::vector<std::vector<double>>& zeta, int J);

/// The same sum computed in the harmonic domain from event multipoles:
/// sum_l W(l) [ (sum_m S^2 - n(2l+1)/(4 pi)) / (n(n-1)) - (2/n) sum_m g S + sum_m g^2 ],
/// W = low-pass weight through scale J+1.
double unbiased_l2(const HarmonicCoefficients& event_multipoles, std::size_t n, const HarmonicCoefficients& g_lm,
                   const NeedletFrame& frame, int J);

}  // namespace neediso
