#include "neediso/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "neediso/hashing.hpp"

namespace neediso {

namespace {

constexpr std::size_t kNodesPerPiece = 2000;

}  // namespace

double relative_exposure(const ExposureCoverage& cov, double declination) {
  const double a0 = deg_to_rad(cov.site_latitude_deg);
  const double tz = deg_to_rad(cov.max_zenith_deg);
  const double ca = std::cos(a0), sa = std::sin(a0);
  const double cd = std::cos(declination), sd = std::sin(declination);
  double zeta;
  if (std::abs(ca * cd) < 1e-300) {
    // Polar site or celestial pole: visibility is all-or-nothing.
    zeta = (std::cos(tz) - sa * sd) >= 0.0 ? 1.0 : -1.0;
  } else {
    zeta = (std::cos(tz) - sa * sd) / (ca * cd);
  }
  const double alpha_m = std::acos(std::clamp(zeta, -1.0, 1.0));
  return std::max(0.0, ca * cd * std::sin(alpha_m) + alpha_m * sa * sd);
}

CoverageModel::CoverageModel(Spec spec) : spec_(std::move(spec)) {
  celestial_pole_ = convert(UnitDirection(), FrameOfReference::Equatorial, FrameOfReference::Galactic);

  if (const auto* e = std::get_if<ExposureCoverage>(&spec_)) {
    if (!(e->max_zenith_deg > 0.0 && e->max_zenith_deg <= 180.0) || std::abs(e->site_latitude_deg) > 90.0)
      throw std::invalid_argument("ExposureCoverage: site latitude or zenith cut out of range");
    const double mass = 2.0 * kPi * zonal_integral([&](double t) { return relative_exposure(*e, std::asin(t)); });
    if (!(mass > 0.0)) throw std::invalid_argument("ExposureCoverage: exposure vanishes everywhere");
    norm_ = 1.0 / mass;
    double peak = 0.0;
    constexpr int kScan = 200000;
    for (int i = 0; i <= kScan; ++i) {
      const double dec = -0.5 * kPi + kPi * i / kScan;
      peak = std::max(peak, relative_exposure(*e, dec));
    }
    max_density_ = peak * norm_ * (1.0 + 1e-6);
    squared_norm_ = 2.0 * kPi * zonal_integral([&](double t) {
      const double g = zonal_profile(t);
      return g * g;
    });
  } else if (auto* gcov = std::get_if<GriddedCoverage>(&spec_)) {
    if (gcov->n_lat == 0 || gcov->n_lon == 0 || gcov->values.size() != gcov->n_lat * gcov->n_lon)
      throw std::invalid_argument("GriddedCoverage: table shape mismatch");
    double mass = 0.0, sq = 0.0, peak = 0.0;
    const double dlon = 2.0 * kPi / static_cast<double>(gcov->n_lon);
    for (std::size_t i = 0; i < gcov->n_lat; ++i) {
      const double lat_lo = -0.5 * kPi + kPi * static_cast<double>(i) / static_cast<double>(gcov->n_lat);
      const double lat_hi = -0.5 * kPi + kPi * static_cast<double>(i + 1) / static_cast<double>(gcov->n_lat);
      const double area = dlon * (std::sin(lat_hi) - std::sin(lat_lo));
      for (std::size_t j = 0; j < gcov->n_lon; ++j) {
        const double v = gcov->values[i * gcov->n_lon + j];
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("GriddedCoverage: negative or non-finite value");
        mass += v * area;
        sq += v * v * area;
        peak = std::max(peak, v);
      }
    }
    if (!(mass > 0.0)) throw std::invalid_argument("GriddedCoverage: density vanishes everywhere");
    norm_ = 1.0 / mass;
    max_density_ = peak * norm_ * (1.0 + 1e-12);
    squared_norm_ = sq * norm_ * norm_;
  }
}

std::string CoverageModel::id() const {
  if (is_uniform()) return "uniform";
  if (const auto* e = std::get_if<ExposureCoverage>(&spec_)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "exposure(lat=%.6g,zenith=%.6g)", e->site_latitude_deg, e->max_zenith_deg);
    return buf;
  }
  const auto& g = std::get<GriddedCoverage>(spec_);
  std::uint64_t h = fnv1a64(g.values.data(), g.values.size() * sizeof(double));
  h = fnv1a64(&g.n_lat, sizeof g.n_lat, h);
  h = fnv1a64(&g.n_lon, sizeof g.n_lon, h);
  char buf[64];
  std::snprintf(buf, sizeof buf, "gridded(%016llx,%s)", static_cast<unsigned long long>(h),
                g.frame == FrameOfReference::Galactic ? "galactic" : "equatorial");
  return buf;
}

double CoverageModel::zonal_profile(double t) const {
  const auto& e = std::get<ExposureCoverage>(spec_);
  return norm_ * relative_exposure(e, std::asin(std::clamp(t, -1.0, 1.0)));
}

std::vector<double> CoverageModel::zonal_breakpoints() const {
  std::vector<double> cuts{-1.0, 1.0};
  if (const auto* e = std::get_if<ExposureCoverage>(&spec_)) {
    const double a0 = deg_to_rad(e->site_latitude_deg), tz = deg_to_rad(e->max_zenith_deg);
    // Declinations where the hour-angle cut switches between never, partly
    // and always visible.
    for (double dec : {a0 + tz, a0 - tz, -a0 + (kPi - tz), -a0 - (kPi - tz)})
      if (dec > -0.5 * kPi && dec < 0.5 * kPi) cuts.push_back(std::sin(dec));
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

double CoverageModel::zonal_integral(const std::function<double(double)>& f) const {
  const auto cuts = zonal_breakpoints();
  const auto rule = gauss_legendre(kNodesPerPiece);
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double half = 0.5 * (cuts[p + 1] - cuts[p]), mid = 0.5 * (cuts[p + 1] + cuts[p]);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) total += half * rule.weights[i] * f(mid + half * rule.nodes[i]);
  }
  return total;
}

double CoverageModel::raw_density(const UnitDirection& galactic) const {
  if (is_uniform()) return 1.0;
  if (const auto* e = std::get_if<ExposureCoverage>(&spec_))
    return relative_exposure(*e, std::asin(std::clamp(galactic.dot(celestial_pole_), -1.0, 1.0)));
  const auto& g = std::get<GriddedCoverage>(spec_);
  const UnitDirection u = convert(galactic, FrameOfReference::Galactic, g.frame);
  const double lat = 0.5 * kPi - u.colatitude();
  auto i = static_cast<std::size_t>(std::floor((lat + 0.5 * kPi) / kPi * static_cast<double>(g.n_lat)));
  auto j = static_cast<std::size_t>(std::floor(u.longitude() / (2.0 * kPi) * static_cast<double>(g.n_lon)));
  i = std::min(i, g.n_lat - 1);
  j = std::min(j, g.n_lon - 1);
  return g.values[i * g.n_lon + j];
}

double CoverageModel::density(const UnitDirection& galactic) const {
  if (is_uniform()) return 1.0 / kFourPi;
  return norm_ * raw_density(galactic);
}

HarmonicCoefficients CoverageModel::multipoles(int band_limit) const {
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = multipole_cache_.lower_bound(band_limit); it != multipole_cache_.end())
      return it->second.resized(band_limit);
  }
  HarmonicCoefficients g(band_limit);
  if (is_uniform()) {
    g(0, 0) = 1.0 / std::sqrt(kFourPi);
  } else if (std::holds_alternative<ExposureCoverage>(spec_)) {
    // Zonal about the celestial pole: g_lm = c_l Y_lm(pole), c_l = 2 pi int G P_l.
    std::vector<double> c(band_limit + 1, 0.0);
    const auto cuts = zonal_breakpoints();
    const auto rule = gauss_legendre(kNodesPerPiece);
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
      const double half = 0.5 * (cuts[p + 1] - cuts[p]), mid = 0.5 * (cuts[p + 1] + cuts[p]);
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double t = mid + half * rule.nodes[i];
        const double w = 2.0 * kPi * half * rule.weights[i] * zonal_profile(t);
        const auto pl = legendre_polynomials(band_limit, t);
        for (int l = 0; l <= band_limit; ++l) c[l] += w * pl[l];
      }
    }
    std::vector<double> y(g.size());
    real_harmonics(band_limit, celestial_pole_, y);
    for (int l = 0; l <= band_limit; ++l)
      for (int m = -l; m <= l; ++m) g(l, m) = c[l] * y[HarmonicCoefficients::index(l, m)];
  } else {
    const QuadratureGrid grid(std::max(4 * band_limit, 256));
    const auto& s = samples_on(grid);
    g = SphericalTransform(grid, band_limit).forward(s, band_limit);
  }
  std::lock_guard lock(cache_mutex_);
  multipole_cache_.emplace(band_limit, g);
  return g;
}

const std::vector<double>& CoverageModel::samples_on(const QuadratureGrid& grid) const {
  std::lock_guard lock(cache_mutex_);
  auto& slot = sample_cache_[grid.degree()];
  if (!slot) {
    auto v = std::make_shared<std::vector<double>>(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) (*v)[k] = density(grid.node(k));
    slot = std::move(v);
  }
  return *slot;
}

UnitDirection CoverageModel::sample(Rng& rng) const {
  if (is_uniform()) return sample_uniform(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    const UnitDirection u = sample_uniform(rng);
    if (unit(rng) * max_density_ < density(u)) return u;
  }
}

bool CoverageModel::accept(const UnitDirection& galactic, Rng& rng) const {
  if (is_uniform()) return true;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) * max_density_ < density(galactic);
}

Catalog sample_null(const CoverageModel& cov, std::size_t n, Rng& rng) {
  if (!(cov.max_density() > 0.0)) throw std::invalid_argument("sample_null: coverage envelope is zero");
  Catalog out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(cov.sample(rng));
  return out;
}

}  // namespace neediso
