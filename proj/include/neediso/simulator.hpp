#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "json.hpp"

#include "neediso/coverage.hpp"
#include "neediso/rng.hpp"
#include "neediso/sphere.hpp"

namespace neediso {

/// Truncated power law n(E) ~ E^-index on [e_min, e_max] (eV).
struct EnergySpectrum {
  double index = 4.2;
  double e_min = 6e19;
  double e_max = 1e21;

  void validate() const;
  double cdf(double e) const;
  double inverse_cdf(double u) const;
};

double sample_energy(const EnergySpectrum& spec, Rng& rng);

struct Source {
  UnitDirection direction;  // Galactic frame
  double distance_mpc;
};
using SourceSet = std::vector<Source>;

/// Uniform in the ball of radius r_max: isotropic directions, D = r_max U^(1/3).
SourceSet sample_sources(std::size_t count, double r_max_mpc, Rng& rng);

/// Index drawn with probability proportional to D^-2.
std::size_t select_source(const SourceSet& sources, Rng& rng);

struct MagneticFieldModel {
  double regular_uG = 2.0;
  double turbulent_uG = 4.0;
  double extragalactic_nG = 1.0;
  double galactic_coherence_pc = 50.0;
  double extragalactic_coherence_pc = 50.0;
  double disk_path_kpc = 3.0;  // path length at |b| = 90 deg
  double max_path_kpc = 10.0;
  int charge = 1;

  void validate() const;
};

/// Galactic path length min(disk_path / |sin b|, max_path) in kpc.
double galactic_path_kpc(const UnitDirection& galactic, const MagneticFieldModel& field);

/// Deflection scales in radians.
double regular_deflection(double energy_ev, double path_kpc, const MagneticFieldModel& field);
double turbulent_deflection(double energy_ev, double path_kpc, const MagneticFieldModel& field);
double extragalactic_deflection(double energy_ev, double distance_mpc, const MagneticFieldModel& field);

/// Lensing by the coherent field along the Galactic y axis. The arrival
/// direction moves toward u x B by regular_deflection * |u x B|; no change
/// when the path is parallel to the field.
UnitDirection deflect_regular(const UnitDirection& u, double energy_ev, const MagneticFieldModel& field);
/// Isotropic 2-D Gaussian scatter in the tangent plane, per-axis sd as given.
UnitDirection deflect_turbulent(const UnitDirection& u, double energy_ev, const MagneticFieldModel& field, Rng& rng);
UnitDirection deflect_extragalactic(const UnitDirection& u, double energy_ev, double distance_mpc,
                                    const MagneticFieldModel& field, Rng& rng);

/// Tangent-plane Gaussian scatter of per-axis sd sigma.
UnitDirection gaussian_scatter(const UnitDirection& u, double sigma, Rng& rng);

/// Draw from the axisymmetric bump h(x) ~ exp(-gamma^2 / (2 theta^2)),
/// gamma the geodesic angle to `center`.
UnitDirection sample_bump(const UnitDirection& center, double theta, Rng& rng);
/// Normalized bump density at x.
double bump_density(const UnitDirection& center, double theta, const UnitDirection& x);

/// Mixture (1 - weight) uniform + weight bump around `center`.
struct HaSpec {
  double weight = 0.08;
  double theta_deg = 5.0;
  UnitDirection center = UnitDirection::from_spherical(kPi / 2, 0.0);
};

/// Equal-weight mixture of bumps around sources drawn once, times coverage.
struct HbSpec {
  std::size_t sources = 100;
  double theta_deg = 10.0;
};

/// Physical toy model: sources in a ball, power-law energies, deflections.
struct HcSpec {
  std::size_t sources = 100;
  double r_max_mpc = 70.0;
  EnergySpectrum spectrum;
  MagneticFieldModel field;
};

using AlternativeSpec = std::variant<HaSpec, HbSpec, HcSpec>;

nlohmann::json alternative_to_json(const AlternativeSpec& spec);
AlternativeSpec alternative_from_json(const nlohmann::json& j);

struct SimulatedCatalog {
  Catalog directions;
  std::vector<double> energies;  // eV, only for the physical model
};

/// Samples catalogs of an alternative. Sources (Hb, Hc) are drawn once at
/// construction from the Sources stream of `seed` and held fixed.
class AlternativeSampler {
 public:
  AlternativeSampler(AlternativeSpec spec, std::shared_ptr<const CoverageModel> coverage, std::uint64_t seed);

  const AlternativeSpec& spec() const { return spec_; }
  const CoverageModel& coverage() const { return *coverage_; }
  const std::vector<UnitDirection>& centers() const { return centers_; }
  const SourceSet& sources() const { return sources_; }

  SimulatedCatalog sample(std::size_t n, Rng& rng) const;

 private:
  UnitDirection propose_ha(Rng& rng) const;
  UnitDirection propose_hb(Rng& rng) const;
  UnitDirection propose_hc(Rng& rng, double& energy) const;

  AlternativeSpec spec_;
  std::shared_ptr<const CoverageModel> coverage_;
  std::vector<UnitDirection> centers_;
  SourceSet sources_;
};

}  // namespace neediso
