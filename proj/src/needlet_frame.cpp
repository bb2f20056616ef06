#include "neediso/needlet_frame.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "neediso/hashing.hpp"

namespace neediso {

WindowFunction::WindowFunction(double bandwidth, int spline_order) : bandwidth_(bandwidth), order_(spline_order) {
  if (!(bandwidth > 1.0)) throw std::invalid_argument("WindowFunction: bandwidth must exceed 1");
  if (spline_order < 3) throw std::invalid_argument("WindowFunction: spline order must be at least 3");
  const int n = 2 * spline_order + 1;
  binomial_.assign(n + 1, 1.0);
  for (int k = 1; k <= n; ++k) binomial_[k] = binomial_[k - 1] * (n - k + 1) / k;
}

double WindowFunction::a(double t) const {
  const double start = 1.0 / bandwidth_;
  if (t <= start) return 1.0;
  if (t >= 1.0) return 0.0;
  const double s = (t - start) / (1.0 - start);
  // 1 - I_s(p+1, p+1) = P(Binomial(2p+1, s) <= p).
  const int n = 2 * order_ + 1;
  double total = 0.0;
  for (int k = 0; k <= order_; ++k) total += binomial_[k] * std::pow(s, k) * std::pow(1.0 - s, n - k);
  return std::clamp(total, 0.0, 1.0);
}

WindowFunction make_window(double bandwidth, int spline_order) { return WindowFunction(bandwidth, spline_order); }

struct NeedletFrame::Scale {
  std::once_flag grid_once, transform_once, square_once;
  std::unique_ptr<QuadratureGrid> grid;
  std::unique_ptr<SphericalTransform> transform;
  std::vector<double> square_coefficients;
};

namespace {

int ceil_power(double base, int exponent) {
  // Guard against pow() returning 8.000000000000002 for exact powers.
  return static_cast<int>(std::ceil(std::pow(base, exponent) - 1e-9));
}

}  // namespace

NeedletFrame::NeedletFrame(WindowFunction window, int max_scale) : window_(std::move(window)), max_scale_(max_scale) {
  if (max_scale < 0) throw std::invalid_argument("NeedletFrame: negative max scale");
  const double B = window_.bandwidth();
  for (int j = 0; j <= max_scale; ++j) {
    const ScaleBand band{static_cast<int>(std::floor(std::pow(B, j - 1) + 1e-9)) + 1, ceil_power(B, j + 1) - 1};
    bands_.push_back(band);
    std::vector<double> f(band.hi + 1, 0.0);
    for (int l = band.lo; l <= band.hi; ++l) f[l] = std::sqrt(std::max(0.0, window_.b(std::pow(B, -j) * l)));
    filters_.push_back(std::move(f));
    std::vector<double> low(band.hi + 1, 0.0);
    for (int l = 1; l <= band.hi; ++l) {
      for (int jj = 0; jj <= j; ++jj) low[l] += window_.b(std::pow(B, -jj) * l);
    }
    lowpass_.push_back(std::move(low));
    scales_.push_back(std::make_unique<Scale>());
  }
}

double NeedletFrame::filter(int j, int ell) const {
  const auto& f = filters_.at(j);
  return (ell >= 0 && ell < static_cast<int>(f.size())) ? f[ell] : 0.0;
}

double NeedletFrame::lowpass(int j, int ell) const {
  const auto& w = lowpass_.at(j);
  return (ell >= 0 && ell < static_cast<int>(w.size())) ? w[ell] : 0.0;
}

NeedletFrame::Scale& NeedletFrame::scale(int j) const {
  if (j < 0 || j > max_scale_) throw std::out_of_range("NeedletFrame: scale out of range");
  return *scales_[j];
}

const QuadratureGrid& NeedletFrame::cubature(int j) const {
  auto& s = scale(j);
  std::call_once(s.grid_once, [&] { s.grid = std::make_unique<QuadratureGrid>(ceil_power(window_.bandwidth(), j + 2)); });
  return *s.grid;
}

const SphericalTransform& NeedletFrame::transform(int j) const {
  auto& s = scale(j);
  const auto& grid = cubature(j);
  std::call_once(s.transform_once, [&] { s.transform = std::make_unique<SphericalTransform>(grid, 2 * bands_[j].hi); });
  return *s.transform;
}

double NeedletFrame::profile(int j, double t) const {
  const auto band = bands_.at(j);
  const auto p = legendre_polynomials(band.hi, std::clamp(t, -1.0, 1.0));
  double s = 0.0;
  for (int l = band.lo; l <= band.hi; ++l) s += filters_[j][l] * (2.0 * l + 1.0) / kFourPi * p[l];
  return s;
}

const std::vector<double>& NeedletFrame::squared_profile_coefficients(int j) const {
  auto& s = scale(j);
  std::call_once(s.square_once, [&] {
    const int hi = bands_[j].hi;
    const int top = 2 * hi;
    // D_j^2 P_l has degree <= 4 hi, integrated exactly by 2 hi + 1 nodes.
    const auto rule = gauss_legendre(static_cast<std::size_t>(top) + 1);
    std::vector<double> c(top + 1, 0.0);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double t = rule.nodes[i];
      const double d = profile(j, t);
      const auto p = legendre_polynomials(top, t);
      const double w = 2.0 * kPi * rule.weights[i] * d * d;
      for (int l = 0; l <= top; ++l) c[l] += w * p[l];
    }
    s.square_coefficients = std::move(c);
  });
  return s.square_coefficients;
}

const QuadratureGrid& NeedletFrame::analysis_grid() const {
  std::call_once(analysis_once_, [&] {
    analysis_grid_ = std::make_unique<QuadratureGrid>(4 * ceil_power(window_.bandwidth(), max_scale_ + 1));
  });
  return *analysis_grid_;
}

nlohmann::json NeedletFrame::descriptor() const {
  nlohmann::json degrees = nlohmann::json::array();
  for (int j = 0; j <= max_scale_; ++j) degrees.push_back(ceil_power(window_.bandwidth(), j + 2));
  return {{"version", 1},
          {"bandwidth", window_.bandwidth()},
          {"spline_order", window_.spline_order()},
          {"max_scale", max_scale_},
          {"cubature_degrees", degrees}};
}

std::uint64_t NeedletFrame::hash() const { return fnv1a64(descriptor().dump()); }

std::shared_ptr<const NeedletFrame> build_frame(const WindowFunction& window, int max_scale) {
  return std::make_shared<const NeedletFrame>(window, max_scale);
}

double needlet_eval(const NeedletFrame& frame, int j, std::size_t k, const UnitDirection& x) {
  return std::sqrt(frame.weight(j, k)) * frame.profile(j, x.dot(frame.center(j, k)));
}

namespace {

void check_scale(const NeedletFrame& frame, int max_scale) {
  if (max_scale < 0 || max_scale > frame.max_scale())
    throw std::out_of_range("needlet coefficients: scale beyond frame");
}

// Raw per-center sums  sum_i psi_jk(X_i)  and  sum_i psi_jk(X_i)^2.
struct RawSums {
  std::vector<double> psi, psi2;
};

RawSums direct_sums(const NeedletFrame& frame, std::span<const UnitDirection> catalog, int j) {
  const std::size_t K = frame.size(j);
  RawSums r{std::vector<double>(K, 0.0), std::vector<double>(K, 0.0)};
  for (std::size_t k = 0; k < K; ++k) {
    const double sw = std::sqrt(frame.weight(j, k));
    for (const auto& x : catalog) {
      const double v = sw * frame.profile(j, x.dot(frame.center(j, k)));
      r.psi[k] += v;
      r.psi2[k] += v * v;
    }
  }
  return r;
}

RawSums transform_sums(const NeedletFrame& frame, const HarmonicCoefficients& s, int j) {
  const auto band = frame.band(j);
  if (s.band_limit() < 2 * band.hi) throw std::invalid_argument("needlet coefficients: event multipoles truncated");
  const auto& tr = frame.transform(j);
  const auto linear = tr.inverse(filter(s.resized(band.hi), [&](int l) { return frame.filter(j, l); }));
  const auto& c2 = frame.squared_profile_coefficients(j);
  const auto square = tr.inverse(filter(s.resized(2 * band.hi), [&](int l) { return c2[l]; }));
  const auto& grid = frame.cubature(j);
  RawSums r{std::vector<double>(grid.size()), std::vector<double>(grid.size())};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double w = grid.weight(k);
    r.psi[k] = std::sqrt(w) * linear[k];
    r.psi2[k] = w * square[k];
  }
  return r;
}

ScaleStatistics finish(const NeedletFrame& frame, int j, const RawSums& r, std::size_t n) {
  const double peak = frame.profile(j, 1.0);
  ScaleStatistics st;
  const std::size_t K = r.psi.size();
  st.beta.resize(K);
  st.sigma2.resize(K);
  st.occupancy.resize(K);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < K; ++k) {
    const double beta = r.psi[k] * inv_n;
    st.beta[k] = beta;
    st.sigma2[k] = n > 1 ? std::max(0.0, r.psi2[k] * inv_n - beta * beta) : 0.0;
    st.occupancy[k] = r.psi2[k] / (frame.weight(j, k) * peak * peak);
  }
  return st;
}

}  // namespace

HarmonicCoefficients binned_multipoles(const NeedletFrame& frame, std::span<const UnitDirection> catalog, int band_limit) {
  const auto& grid = frame.analysis_grid();
  std::map<std::size_t, double> counts;
  for (const auto& x : catalog) counts[grid.nearest_node(x)] += 1.0;
  std::vector<UnitDirection> nodes;
  std::vector<double> weights;
  for (const auto& [k, c] : counts) {
    nodes.push_back(grid.node(k));
    weights.push_back(c);
  }
  return point_multipoles(nodes, band_limit, weights);
}

NeedletCoefficientSet coefficients_from_multipoles(const NeedletFrame& frame, const HarmonicCoefficients& s,
                                                   std::size_t n, int max_scale) {
  check_scale(frame, max_scale);
  if (n == 0) throw std::invalid_argument("needlet coefficients: empty catalog");
  NeedletCoefficientSet out;
  out.n = n;
  out.degenerate_variance = n == 1;
  for (int j = 0; j <= max_scale; ++j) out.scales.push_back(finish(frame, j, transform_sums(frame, s, j), n));
  return out;
}

NeedletCoefficientSet empirical_coefficients(const NeedletFrame& frame, std::span<const UnitDirection> catalog,
                                             int max_scale, CoefficientPath path, std::string reference) {
  check_scale(frame, max_scale);
  if (catalog.empty()) throw std::invalid_argument("empirical_coefficients: empty catalog");
  NeedletCoefficientSet out;
  if (path == CoefficientPath::Direct) {
    out.n = catalog.size();
    out.degenerate_variance = out.n == 1;
    for (int j = 0; j <= max_scale; ++j) out.scales.push_back(finish(frame, j, direct_sums(frame, catalog, j), out.n));
  } else {
    const int L = 2 * frame.band(max_scale).hi;
    const auto s = path == CoefficientPath::Binned ? binned_multipoles(frame, catalog, L) : point_multipoles(catalog, L);
    out = coefficients_from_multipoles(frame, s, catalog.size(), max_scale);
  }
  out.reference = std::move(reference);
  return out;
}

double binning_bound(const NeedletFrame& frame, int j) {
  // Bernstein: |grad psi| <= hi * max|psi| = hi * sqrt(w) D_j(1) for a degree-hi polynomial.
  const auto& grid = frame.cubature(j);
  double wmax = 0.0;
  for (std::size_t r = 0; r < grid.ring_count(); ++r) wmax = std::max(wmax, grid.ring_weight(r));
  return std::sqrt(wmax) * frame.band(j).hi * frame.profile(j, 1.0) * frame.analysis_grid().covering_radius();
}

std::vector<double> reference_coefficients(const NeedletFrame& frame, const CoverageModel& g, int j) {
  const auto band = frame.band(j);
  const auto glm = g.multipoles(band.hi);
  const auto values = frame.transform(j).inverse(filter(glm, [&](int l) { return frame.filter(j, l); }));
  const auto& grid = frame.cubature(j);
  std::vector<double> beta(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) beta[k] = std::sqrt(grid.weight(k)) * values[k];
  return beta;
}

std::vector<std::vector<double>> zeta_coefficients(const NeedletFrame& frame, std::span<const UnitDirection> catalog,
                                                   const CoverageModel& g, int max_scale, CoefficientPath path) {
  check_scale(frame, max_scale);
  const std::size_t n = catalog.size();
  if (n < 2) throw std::invalid_argument("zeta_coefficients: need at least two events");
  HarmonicCoefficients s;
  if (path != CoefficientPath::Direct) {
    const int L = 2 * frame.band(max_scale).hi;
    s = path == CoefficientPath::Binned ? binned_multipoles(frame, catalog, L) : point_multipoles(catalog, L);
  }
  const double nn = static_cast<double>(n);
  std::vector<std::vector<double>> zeta;
  for (int j = 0; j <= max_scale; ++j) {
    const auto raw = path == CoefficientPath::Direct ? direct_sums(frame, catalog, j) : transform_sums(frame, s, j);
    const auto beta_g = reference_coefficients(frame, g, j);
    std::vector<double> z(raw.psi.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double b = beta_g[k];
      const double s1 = raw.psi[k] - nn * b;
      const double s2 = raw.psi2[k] - 2.0 * b * raw.psi[k] + nn * b * b;
      z[k] = (s1 * s1 - s2) / (nn * (nn - 1.0));
    }
    zeta.push_back(std::move(z));
  }
  return zeta;
}

}  // namespace neediso
