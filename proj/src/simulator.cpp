#include "neediso/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "neediso/harmonics.hpp"

namespace neediso {

namespace {

constexpr double kReferenceEnergy = 1e20;  // eV
constexpr std::size_t kMaxRejections = 10'000'000;

double rigidity_factor(double energy_ev, int charge) {
  if (!(energy_ev > 0.0)) throw std::invalid_argument("deflection: energy must be positive");
  return kReferenceEnergy / (energy_ev / charge);
}

}  // namespace

void EnergySpectrum::validate() const {
  if (!(index > 1.0)) throw std::invalid_argument("spectrum: index must exceed 1");
  if (!(e_min > 0.0 && e_min < e_max)) throw std::invalid_argument("spectrum: need 0 < e_min < e_max");
}

double EnergySpectrum::cdf(double e) const {
  if (e <= e_min) return 0.0;
  if (e >= e_max) return 1.0;
  const double k = 1.0 - index;
  return (std::pow(e_min, k) - std::pow(e, k)) / (std::pow(e_min, k) - std::pow(e_max, k));
}

double EnergySpectrum::inverse_cdf(double u) const {
  if (u <= 0.0) return e_min;
  if (u >= 1.0) return e_max;
  const double k = 1.0 - index;
  const double lo = std::pow(e_min, k), hi = std::pow(e_max, k);
  return std::clamp(std::pow(lo - u * (lo - hi), 1.0 / k), e_min, e_max);
}

double sample_energy(const EnergySpectrum& spec, Rng& rng) {
  return spec.inverse_cdf(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
}

SourceSet sample_sources(std::size_t count, double r_max_mpc, Rng& rng) {
  if (count == 0) throw std::invalid_argument("sample_sources: need at least one source");
  if (!(r_max_mpc > 0.0)) throw std::invalid_argument("sample_sources: r_max must be positive");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SourceSet out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const UnitDirection dir = sample_uniform(rng);
    const double u = 1.0 - unit(rng);  // (0, 1]
    out.push_back({dir, r_max_mpc * std::cbrt(u)});
  }
  return out;
}

std::size_t select_source(const SourceSet& sources, Rng& rng) {
  std::vector<double> w;
  w.reserve(sources.size());
  double total = 0.0;
  for (const auto& s : sources) {
    w.push_back(s.distance_mpc > 0.0 ? 1.0 / (s.distance_mpc * s.distance_mpc) : 0.0);
    total += w.back();
  }
  if (!(total > 0.0)) throw std::invalid_argument("select_source: all source weights are zero");
  return std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng);
}

void MagneticFieldModel::validate() const {
  if (regular_uG < 0 || turbulent_uG < 0 || extragalactic_nG < 0 || galactic_coherence_pc < 0 ||
      extragalactic_coherence_pc < 0)
    throw std::invalid_argument("field model: strengths and coherence lengths must be non-negative");
  if (!(disk_path_kpc > 0.0 && max_path_kpc > 0.0)) throw std::invalid_argument("field model: path lengths must be positive");
  if (charge < 1) throw std::invalid_argument("field model: charge must be >= 1");
}

double galactic_path_kpc(const UnitDirection& galactic, const MagneticFieldModel& field) {
  const double sin_b = std::abs(galactic.z());
  if (sin_b * field.max_path_kpc <= field.disk_path_kpc) return field.max_path_kpc;
  return field.disk_path_kpc / sin_b;
}

double regular_deflection(double energy_ev, double path_kpc, const MagneticFieldModel& field) {
  return deg_to_rad(3.25) * rigidity_factor(energy_ev, field.charge) * (field.regular_uG / 2.0) * (path_kpc / 3.0);
}

double turbulent_deflection(double energy_ev, double path_kpc, const MagneticFieldModel& field) {
  return deg_to_rad(0.56) * rigidity_factor(energy_ev, field.charge) * (field.turbulent_uG / 4.0) *
         std::sqrt(path_kpc / 3.0) * std::sqrt(field.galactic_coherence_pc / 50.0);
}

double extragalactic_deflection(double energy_ev, double distance_mpc, const MagneticFieldModel& field) {
  return deg_to_rad(2.4) * rigidity_factor(energy_ev, field.charge) * (field.extragalactic_nG / 1.0) *
         std::sqrt(distance_mpc / 100.0) * std::sqrt(field.extragalactic_coherence_pc / 50.0);
}

UnitDirection deflect_regular(const UnitDirection& u, double energy_ev, const MagneticFieldModel& field) {
  // u x y_hat with y_hat the Galactic y axis.
  const std::array<double, 3> t{-u.z(), 0.0, u.x()};
  const double sin_angle = std::hypot(t[0], t[2]);
  const double angle = regular_deflection(energy_ev, galactic_path_kpc(u, field), field) * sin_angle;
  if (sin_angle < 1e-15 || angle == 0.0) return u;
  return deflect_toward(u, std::min(angle, kPi), t);
}

UnitDirection gaussian_scatter(const UnitDirection& u, double sigma, Rng& rng) {
  if (sigma == 0.0) return u;
  std::normal_distribution<double> normal(0.0, sigma);
  const double a = normal(rng), b = normal(rng);
  const double angle = std::hypot(a, b);
  if (angle == 0.0) return u;
  // Wrap scatter angles beyond pi back onto the sphere.
  const double folded = std::fmod(angle, 2.0 * kPi);
  const double azimuth = std::atan2(b, a);
  if (folded <= kPi) return deflect(u, folded, azimuth);
  return deflect(u, 2.0 * kPi - folded, azimuth + kPi);
}

UnitDirection deflect_turbulent(const UnitDirection& u, double energy_ev, const MagneticFieldModel& field, Rng& rng) {
  return gaussian_scatter(u, turbulent_deflection(energy_ev, galactic_path_kpc(u, field), field), rng);
}

UnitDirection deflect_extragalactic(const UnitDirection& u, double energy_ev, double distance_mpc,
                                    const MagneticFieldModel& field, Rng& rng) {
  if (!(distance_mpc > 0.0)) throw std::invalid_argument("deflect_extragalactic: distance must be positive");
  return gaussian_scatter(u, extragalactic_deflection(energy_ev, distance_mpc, field), rng);
}

UnitDirection sample_bump(const UnitDirection& center, double theta, Rng& rng) {
  if (!(theta > 0.0)) throw std::invalid_argument("bump: width must be positive");
  std::normal_distribution<double> normal(0.0, theta);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    // Planar Gaussian radius has density ~ exp(-g^2/2t^2) g; the target on
    // the sphere carries sin g instead, so accept with sin(g)/g.
    const double a = normal(rng), b = normal(rng);
    const double gamma = std::hypot(a, b);
    if (gamma > kPi) continue;
    if (gamma > 0.0 && unit(rng) * gamma > std::sin(gamma)) continue;
    return gamma == 0.0 ? center : deflect(center, gamma, std::atan2(b, a));
  }
}

double bump_density(const UnitDirection& center, double theta, const UnitDirection& x) {
  if (!(theta > 0.0)) throw std::invalid_argument("bump: width must be positive");
  // Normalization depends only on the width; remember the last one.
  thread_local double cached_theta = 0.0, mass = 0.0;
  if (theta != cached_theta) {
    const double upper = std::min(kPi, 12.0 * theta);
    mass = 2.0 * kPi *
           integrate_gl([&](double g) { return std::exp(-g * g / (2 * theta * theta)) * std::sin(g); }, 0.0, upper, 400);
    cached_theta = theta;
  }
  const double g = geodesic_distance(center, x);
  return std::exp(-g * g / (2 * theta * theta)) / mass;
}

nlohmann::json alternative_to_json(const AlternativeSpec& spec) {
  if (const auto* a = std::get_if<HaSpec>(&spec))
    return {{"model", "Ha"},
            {"weight", a->weight},
            {"theta_deg", a->theta_deg},
            {"center_lon_deg", a->center.longitude_deg()},
            {"center_lat_deg", a->center.latitude_deg()}};
  if (const auto* b = std::get_if<HbSpec>(&spec))
    return {{"model", "Hb"}, {"sources", b->sources}, {"theta_deg", b->theta_deg}};
  const auto& c = std::get<HcSpec>(spec);
  return {{"model", "Hc"},
          {"sources", c.sources},
          {"r_max_mpc", c.r_max_mpc},
          {"spectral_index", c.spectrum.index},
          {"e_min_ev", c.spectrum.e_min},
          {"e_max_ev", c.spectrum.e_max},
          {"regular_uG", c.field.regular_uG},
          {"turbulent_uG", c.field.turbulent_uG},
          {"extragalactic_nG", c.field.extragalactic_nG},
          {"galactic_coherence_pc", c.field.galactic_coherence_pc},
          {"extragalactic_coherence_pc", c.field.extragalactic_coherence_pc},
          {"disk_path_kpc", c.field.disk_path_kpc},
          {"max_path_kpc", c.field.max_path_kpc},
          {"charge", c.field.charge}};
}

AlternativeSpec alternative_from_json(const nlohmann::json& j) {
  const auto model = j.at("model").get<std::string>();
  if (model == "Ha") {
    HaSpec a;
    a.weight = j.value("weight", a.weight);
    a.theta_deg = j.value("theta_deg", a.theta_deg);
    a.center = UnitDirection::from_lonlat_deg(j.value("center_lon_deg", 0.0), j.value("center_lat_deg", 0.0));
    if (!(a.weight >= 0.0 && a.weight <= 1.0)) throw std::invalid_argument("Ha: weight must lie in [0, 1]");
    if (!(a.theta_deg > 0.0)) throw std::invalid_argument("Ha: theta_deg must be positive");
    return a;
  }
  if (model == "Hb") {
    HbSpec b;
    b.sources = j.value("sources", b.sources);
    b.theta_deg = j.value("theta_deg", b.theta_deg);
    if (b.sources == 0) throw std::invalid_argument("Hb: need at least one source");
    if (!(b.theta_deg > 0.0)) throw std::invalid_argument("Hb: theta_deg must be positive");
    return b;
  }
  if (model == "Hc") {
    HcSpec c;
    c.sources = j.value("sources", c.sources);
    c.r_max_mpc = j.value("r_max_mpc", c.r_max_mpc);
    c.spectrum.index = j.value("spectral_index", c.spectrum.index);
    c.spectrum.e_min = j.value("e_min_ev", c.spectrum.e_min);
    c.spectrum.e_max = j.value("e_max_ev", c.spectrum.e_max);
    auto& f = c.field;
    f.regular_uG = j.value("regular_uG", f.regular_uG);
    f.turbulent_uG = j.value("turbulent_uG", f.turbulent_uG);
    f.extragalactic_nG = j.value("extragalactic_nG", f.extragalactic_nG);
    f.galactic_coherence_pc = j.value("galactic_coherence_pc", f.galactic_coherence_pc);
    f.extragalactic_coherence_pc = j.value("extragalactic_coherence_pc", f.extragalactic_coherence_pc);
    f.disk_path_kpc = j.value("disk_path_kpc", f.disk_path_kpc);
    f.max_path_kpc = j.value("max_path_kpc", f.max_path_kpc);
    f.charge = j.value("charge", f.charge);
    c.spectrum.validate();
    f.validate();
    if (c.sources == 0) throw std::invalid_argument("Hc: need at least one source");
    if (!(c.r_max_mpc > 0.0)) throw std::invalid_argument("Hc: r_max_mpc must be positive");
    return c;
  }
  throw std::invalid_argument("unknown alternative model '" + model + "' (expected Ha, Hb or Hc)");
}

AlternativeSampler::AlternativeSampler(AlternativeSpec spec, std::shared_ptr<const CoverageModel> coverage,
                                       std::uint64_t seed)
    : spec_(std::move(spec)), coverage_(std::move(coverage)) {
  if (!coverage_) throw std::invalid_argument("AlternativeSampler: null coverage");
  auto rng = make_rng(seed, Stream::Sources, 0);
  if (const auto* b = std::get_if<HbSpec>(&spec_)) {
    if (b->sources == 0) throw std::invalid_argument("Hb: need at least one source");
    for (std::size_t i = 0; i < b->sources; ++i) centers_.push_back(sample_uniform(rng));
  } else if (const auto* c = std::get_if<HcSpec>(&spec_)) {
    c->spectrum.validate();
    c->field.validate();
    sources_ = sample_sources(c->sources, c->r_max_mpc, rng);
  } else {
    const auto& a = std::get<HaSpec>(spec_);
    if (!(a.theta_deg > 0.0)) throw std::invalid_argument("Ha: theta_deg must be positive");
    if (!(a.weight >= 0.0 && a.weight <= 1.0)) throw std::invalid_argument("Ha: weight must lie in [0, 1]");
  }
}

UnitDirection AlternativeSampler::propose_ha(Rng& rng) const {
  const auto& a = std::get<HaSpec>(spec_);
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < a.weight)
    return sample_bump(a.center, deg_to_rad(a.theta_deg), rng);
  return sample_uniform(rng);
}

UnitDirection AlternativeSampler::propose_hb(Rng& rng) const {
  const auto& b = std::get<HbSpec>(spec_);
  const auto k = std::uniform_int_distribution<std::size_t>(0, centers_.size() - 1)(rng);
  return sample_bump(centers_[k], deg_to_rad(b.theta_deg), rng);
}

UnitDirection AlternativeSampler::propose_hc(Rng& rng, double& energy) const {
  const auto& c = std::get<HcSpec>(spec_);
  energy = sample_energy(c.spectrum, rng);
  const auto& src = sources_[select_source(sources_, rng)];
  UnitDirection u = deflect_extragalactic(src.direction, energy, src.distance_mpc, c.field, rng);
  // The Galactic path length is fixed by the latitude before Galactic deflection.
  const double path = galactic_path_kpc(u, c.field);
  u = deflect_regular(u, energy, c.field);
  return gaussian_scatter(u, turbulent_deflection(energy, path, c.field), rng);
}

SimulatedCatalog AlternativeSampler::sample(std::size_t n, Rng& rng) const {
  SimulatedCatalog out;
  out.directions.reserve(n);
  const bool physical = std::holds_alternative<HcSpec>(spec_);
  if (physical) out.energies.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == kMaxRejections)
        throw std::runtime_error("alternative sampler: coverage rejects every proposal; acceptance is zero");
      double energy = 0.0;
      UnitDirection u;
      if (std::holds_alternative<HaSpec>(spec_)) u = propose_ha(rng);
      else if (std::holds_alternative<HbSpec>(spec_)) u = propose_hb(rng);
      else u = propose_hc(rng, energy);
      if (!coverage_->accept(u, rng)) continue;
      out.directions.push_back(u);
      if (physical) out.energies.push_back(energy);
      break;
    }
  }
  return out;
}

}  // namespace neediso
