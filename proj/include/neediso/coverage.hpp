#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "neediso/harmonics.hpp"
#include "neediso/rng.hpp"
#include "neediso/sphere.hpp"

namespace neediso {

struct UniformCoverage {};

/// Geometric exposure of a ground array at a fixed site latitude that sees
/// every direction within `max_zenith_deg` of its zenith, averaged over a day.
struct ExposureCoverage {
  double site_latitude_deg = -35.2;
  double max_zenith_deg = 60.0;
};

/// Density tabulated on a regular latitude/longitude mesh (cell centers),
/// rows ordered south to north. Lookup is by nearest cell.
struct GriddedCoverage {
  FrameOfReference frame = FrameOfReference::Galactic;
  std::size_t n_lat = 0, n_lon = 0;
  std::vector<double> values;  // n_lat * n_lon, row-major
};

/// Relative exposure as a function of declination (radians), unnormalized.
double relative_exposure(const ExposureCoverage& cov, double declination);

/// Probability density g on the sphere, directions given in the Galactic frame.
/// Caches its normalization, envelope maximum and harmonic coefficients.
class CoverageModel {
 public:
  using Spec = std::variant<UniformCoverage, ExposureCoverage, GriddedCoverage>;

  CoverageModel() : CoverageModel(UniformCoverage{}) {}
  explicit CoverageModel(Spec spec);

  static CoverageModel uniform() { return CoverageModel(UniformCoverage{}); }
  static CoverageModel auger() { return CoverageModel(ExposureCoverage{}); }

  const Spec& spec() const { return spec_; }
  bool is_uniform() const { return std::holds_alternative<UniformCoverage>(spec_); }
  /// Stable identifier used to key calibration tables.
  std::string id() const;

  /// Normalized density at a Galactic-frame direction.
  double density(const UnitDirection& galactic) const;
  /// Upper bound on density used as the rejection envelope.
  double max_density() const { return max_density_; }
  /// Integral of g^2.
  double squared_norm() const { return squared_norm_; }

  /// Harmonic coefficients g_lm for l <= band_limit (Galactic frame).
  HarmonicCoefficients multipoles(int band_limit) const;

  /// Density sampled at every node of `grid`; cached per grid degree.
  const std::vector<double>& samples_on(const QuadratureGrid& grid) const;

  /// One draw from g by rejection from the uniform proposal.
  UnitDirection sample(Rng& rng) const;
  /// Acceptance test for thinning a proposal drawn from some other law.
  bool accept(const UnitDirection& galactic, Rng& rng) const;

 private:
  double raw_density(const UnitDirection& galactic) const;
  /// Zonal profile G(t), t = sin(declination), for the exposure model.
  double zonal_profile(double t) const;
  std::vector<double> zonal_breakpoints() const;
  double zonal_integral(const std::function<double(double)>& f) const;

  Spec spec_;
  double norm_ = 1.0;
  double max_density_ = 1.0 / kFourPi;
  double squared_norm_ = 1.0 / kFourPi;
  UnitDirection celestial_pole_;  // equatorial north pole in Galactic frame

  mutable std::mutex cache_mutex_;
  mutable std::map<int, HarmonicCoefficients> multipole_cache_;
  mutable std::map<int, std::shared_ptr<const std::vector<double>>> sample_cache_;
};

/// Null catalog of n events drawn from g.
Catalog sample_null(const CoverageModel& cov, std::size_t n, Rng& rng);

}  // namespace neediso
