#include "neediso/harmonics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace neediso {

namespace {
constexpr double kUnderflow = 1e-280;
}

double legendre_kernel(int ell, double t) {
  if (ell < 0) throw std::invalid_argument("legendre_kernel: negative degree");
  t = std::clamp(t, -1.0, 1.0);
  double p_prev = 1.0, p = t;
  if (ell == 0) p = 1.0;
  for (int l = 2; l <= ell; ++l) {
    const double next = ((2.0 * l - 1.0) * t * p - (l - 1.0) * p_prev) / l;
    p_prev = p;
    p = next;
  }
  return (2.0 * ell + 1.0) / kFourPi * p;
}

std::vector<double> legendre_polynomials(int max_ell, double t) {
  std::vector<double> p(static_cast<std::size_t>(std::max(max_ell, 0)) + 1);
  p[0] = 1.0;
  if (max_ell >= 1) p[1] = t;
  for (int l = 2; l <= max_ell; ++l) p[l] = ((2.0 * l - 1.0) * t * p[l - 1] - (l - 1.0) * p[l - 2]) / l;
  return p;
}

GaussLegendreRule gauss_legendre(std::size_t count) {
  GaussLegendreRule rule;
  rule.nodes.resize(count);
  rule.weights.resize(count);
  const std::size_t half = (count + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(kPi * (static_cast<double>(i) + 0.75) / (static_cast<double>(count) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (std::size_t l = 2; l <= count; ++l) {
        const double p2 = ((2.0 * l - 1.0) * x * p1 - (l - 1.0) * p0) / static_cast<double>(l);
        p0 = p1;
        p1 = p2;
      }
      if (count == 1) { p1 = x; p0 = 1.0; }
      dp = static_cast<double>(count) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute derivative at the converged node for the weight.
    double p0 = 1.0, p1 = x;
    for (std::size_t l = 2; l <= count; ++l) {
      const double p2 = ((2.0 * l - 1.0) * x * p1 - (l - 1.0) * p0) / static_cast<double>(l);
      p0 = p1;
      p1 = p2;
    }
    if (count == 1) { p1 = x; p0 = 1.0; }
    dp = static_cast<double>(count) * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[count - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[count - 1 - i] = w;
  }
  if (count % 2 == 1) rule.nodes[count / 2] = 0.0;
  return rule;
}

double integrate_gl(const std::function<double(double)>& f, double lo, double hi, std::size_t count) {
  const auto rule = gauss_legendre(count);
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) s += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return s * half;
}

HarmonicCoefficients HarmonicCoefficients::resized(int band_limit) const {
  HarmonicCoefficients out(band_limit);
  const int common = std::min(band_limit, band_limit_);
  if (common >= 0) std::copy_n(a_.begin(), index(common, common) + 1, out.a_.begin());
  return out;
}

double HarmonicCoefficients::squared_norm() const {
  double s = 0.0;
  for (double v : a_) s += v * v;
  return s;
}

void normalized_legendre(int max_ell, double t, std::span<double> out) {
  if (out.size() < triangular_size(max_ell)) throw std::invalid_argument("normalized_legendre: output too small");
  t = std::clamp(t, -1.0, 1.0);
  const double s = std::sqrt(std::max(0.0, (1.0 - t) * (1.0 + t)));
  double pmm = 1.0 / std::sqrt(kFourPi);
  for (int m = 0; m <= max_ell; ++m) {
    if (m > 0) {
      pmm *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
      if (std::abs(pmm) < kUnderflow) pmm = 0.0;
    }
    out[triangular_index(m, m)] = pmm;
    if (m == max_ell) break;
    double p_lm2 = pmm;
    double p_lm1 = std::sqrt(2.0 * m + 3.0) * t * pmm;
    out[triangular_index(m + 1, m)] = p_lm1;
    double a_prev = std::sqrt(2.0 * m + 3.0);
    for (int l = m + 2; l <= max_ell; ++l) {
      const double l2 = static_cast<double>(l) * l, m2 = static_cast<double>(m) * m;
      const double a = std::sqrt((4.0 * l2 - 1.0) / (l2 - m2));
      const double p = a * (t * p_lm1 - p_lm2 / a_prev);
      out[triangular_index(l, m)] = p;
      p_lm2 = p_lm1;
      p_lm1 = p;
      a_prev = a;
    }
  }
}

void real_harmonics(int max_ell, const UnitDirection& u, std::span<double> out) {
  const std::size_t need = static_cast<std::size_t>(max_ell + 1) * (max_ell + 1);
  if (out.size() < need) throw std::invalid_argument("real_harmonics: output too small");
  std::vector<double> p(triangular_size(max_ell));
  normalized_legendre(max_ell, u.z(), p);
  const double phi = std::atan2(u.y(), u.x());
  std::vector<double> c(max_ell + 1), s(max_ell + 1);
  for (int m = 0; m <= max_ell; ++m) {
    c[m] = std::cos(m * phi);
    s[m] = std::sin(m * phi);
  }
  for (int l = 0; l <= max_ell; ++l) {
    out[HarmonicCoefficients::index(l, 0)] = p[triangular_index(l, 0)];
    for (int m = 1; m <= l; ++m) {
      const double v = std::numbers::sqrt2 * p[triangular_index(l, m)];
      out[HarmonicCoefficients::index(l, m)] = v * c[m];
      out[HarmonicCoefficients::index(l, -m)] = v * s[m];
    }
  }
}

double real_harmonic(int ell, int m, const UnitDirection& u) {
  std::vector<double> y(static_cast<std::size_t>(ell + 1) * (ell + 1));
  real_harmonics(ell, u, y);
  return y[HarmonicCoefficients::index(ell, m)];
}

QuadratureGrid::QuadratureGrid(int degree) : degree_(degree) {
  if (degree < 0) throw std::invalid_argument("QuadratureGrid: negative degree");
  const std::size_t rings = static_cast<std::size_t>(degree / 2) + 1;
  n_phi_ = static_cast<std::size_t>(degree) + 1;
  const auto gl = gauss_legendre(rings);
  // Rings ordered north to south.
  ring_cos_.resize(rings);
  ring_theta_.resize(rings);
  ring_weight_.resize(rings);
  for (std::size_t r = 0; r < rings; ++r) {
    ring_cos_[r] = gl.nodes[rings - 1 - r];
    ring_theta_[r] = std::acos(ring_cos_[r]);
    ring_weight_[r] = gl.weights[rings - 1 - r] * 2.0 * kPi / static_cast<double>(n_phi_);
  }
  nodes_.reserve(size());
  for (std::size_t r = 0; r < rings; ++r)
    for (std::size_t i = 0; i < n_phi_; ++i) nodes_.push_back(UnitDirection::from_spherical(ring_theta_[r], longitude(i)));
}

double QuadratureGrid::longitude(std::size_t i) const {
  return 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n_phi_);
}

double QuadratureGrid::integrate(std::span<const double> samples) const {
  if (samples.size() != size()) throw std::invalid_argument("QuadratureGrid::integrate: sample count mismatch");
  double total = 0.0;
  for (std::size_t r = 0; r < ring_count(); ++r) {
    double ring = 0.0;
    for (std::size_t i = 0; i < n_phi_; ++i) ring += samples[r * n_phi_ + i];
    total += ring_weight_[r] * ring;
  }
  return total;
}

std::size_t QuadratureGrid::nearest_node(const UnitDirection& u) const {
  const double theta = u.colatitude();
  const auto it = std::lower_bound(ring_theta_.begin(), ring_theta_.end(), theta);
  const std::size_t upper = static_cast<std::size_t>(it - ring_theta_.begin());
  const double dphi = 2.0 * kPi / static_cast<double>(n_phi_);
  const double phi = u.longitude();
  std::size_t best = 0;
  double best_dot = -2.0;
  const std::size_t lo = upper == 0 ? 0 : upper - 1;
  const std::size_t hi = std::min(upper, ring_count() - 1);
  for (std::size_t r = lo; r <= hi; ++r) {
    const auto i = static_cast<std::size_t>(std::llround(phi / dphi)) % n_phi_;
    const std::size_t k = r * n_phi_ + i;
    const double d = nodes_[k].dot(u);
    if (d > best_dot) {
      best_dot = d;
      best = k;
    }
  }
  return best;
}

double QuadratureGrid::covering_radius() const {
  double gap = std::max(ring_theta_.front(), kPi - ring_theta_.back());
  for (std::size_t r = 1; r < ring_count(); ++r) gap = std::max(gap, 0.5 * (ring_theta_[r] - ring_theta_[r - 1]));
  return gap + kPi / static_cast<double>(n_phi_);
}

QuadratureGrid build_grid(int degree) { return QuadratureGrid(degree); }

SphericalTransform::SphericalTransform(const QuadratureGrid& grid, int band_limit)
    : grid_(&grid), band_limit_(band_limit),
      cache_table_(triangular_size(band_limit) * grid.ring_count() <= (std::size_t{8} << 20)) {
  if (band_limit < 0) throw std::invalid_argument("SphericalTransform: negative band limit");
  const std::size_t n_phi = grid.longitude_count();
  cos_table_.resize(static_cast<std::size_t>(band_limit + 1) * n_phi);
  sin_table_.resize(cos_table_.size());
  for (int m = 0; m <= band_limit; ++m)
    for (std::size_t i = 0; i < n_phi; ++i) {
      // Reduce the angle modulo N_phi exactly before taking trig functions.
      const std::size_t k = (static_cast<std::size_t>(m) * i) % n_phi;
      const double a = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n_phi);
      cos_table_[m * n_phi + i] = std::cos(a);
      sin_table_[m * n_phi + i] = std::sin(a);
    }
}

const double* SphericalTransform::legendre_row(std::size_t ring, std::vector<double>& scratch) const {
  if (!cache_table_) {
    scratch.resize(triangular_size(band_limit_));
    normalized_legendre(band_limit_, grid_->ring_cos(ring), scratch);
    return scratch.data();
  }
  std::call_once(table_once_, [this] {
    const std::size_t stride = triangular_size(band_limit_);
    table_.assign(stride * grid_->ring_count(), 0.0);
    for (std::size_t r = 0; r < grid_->ring_count(); ++r)
      normalized_legendre(band_limit_, grid_->ring_cos(r), std::span(table_).subspan(r * stride, stride));
  });
  return table_.data() + ring * triangular_size(band_limit_);
}

HarmonicCoefficients SphericalTransform::forward(std::span<const double> samples, int max_ell) const {
  const auto& g = *grid_;
  if (samples.size() != g.size()) throw std::invalid_argument("SphericalTransform::forward: sample count mismatch");
  const int L = std::min(max_ell, band_limit_);
  HarmonicCoefficients a(L);
  const std::size_t n_phi = g.longitude_count();
  std::vector<double> fc(L + 1), fs(L + 1), scratch;
  for (std::size_t r = 0; r < g.ring_count(); ++r) {
    const double* ring = samples.data() + r * n_phi;
    for (int m = 0; m <= L; ++m) {
      const double* c = cos_table_.data() + m * n_phi;
      const double* s = sin_table_.data() + m * n_phi;
      double sc = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < n_phi; ++i) {
        sc += ring[i] * c[i];
        ss += ring[i] * s[i];
      }
      fc[m] = sc;
      fs[m] = ss;
    }
    const double* p = legendre_row(r, scratch);
    const double w = g.ring_weight(r);
    for (int l = 0; l <= L; ++l) {
      a(l, 0) += w * p[triangular_index(l, 0)] * fc[0];
      for (int m = 1; m <= l; ++m) {
        const double v = w * std::numbers::sqrt2 * p[triangular_index(l, m)];
        a(l, m) += v * fc[m];
        a(l, -m) += v * fs[m];
      }
    }
  }
  return a;
}

std::vector<double> SphericalTransform::inverse(const HarmonicCoefficients& a) const {
  const auto& g = *grid_;
  const int L = std::min(a.band_limit(), band_limit_);
  const std::size_t n_phi = g.longitude_count();
  std::vector<double> out(g.size(), 0.0);
  if (L < 0) return out;
  std::vector<double> fc(L + 1), fs(L + 1), scratch;
  for (std::size_t r = 0; r < g.ring_count(); ++r) {
    const double* p = legendre_row(r, scratch);
    for (int m = 0; m <= L; ++m) {
      double sc = 0.0, ss = 0.0;
      for (int l = m; l <= L; ++l) {
        const double pl = p[triangular_index(l, m)];
        sc += pl * a(l, m);
        if (m > 0) ss += pl * a(l, -m);
      }
      fc[m] = m == 0 ? sc : std::numbers::sqrt2 * sc;
      fs[m] = std::numbers::sqrt2 * ss;
    }
    double* ring = out.data() + r * n_phi;
    for (int m = 0; m <= L; ++m) {
      const double* c = cos_table_.data() + m * n_phi;
      const double* s = sin_table_.data() + m * n_phi;
      const double cm = fc[m], sm = fs[m];
      for (std::size_t i = 0; i < n_phi; ++i) ring[i] += cm * c[i] + sm * s[i];
    }
  }
  return out;
}

HarmonicCoefficients sht_forward(std::span<const double> samples, const QuadratureGrid& grid, int band_limit) {
  if (band_limit > grid.degree())
    throw std::invalid_argument("sht_forward: band limit " + std::to_string(band_limit) +
                                " exceeds grid degree " + std::to_string(grid.degree()));
  return SphericalTransform(grid, band_limit).forward(samples, band_limit);
}

std::vector<double> sht_inverse(const HarmonicCoefficients& a, std::span<const UnitDirection> points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& u : points) out.push_back(evaluate(a, u));
  return out;
}

double evaluate(const HarmonicCoefficients& a, const UnitDirection& u) {
  const int L = a.band_limit();
  if (L < 0) return 0.0;
  std::vector<double> y(a.size());
  real_harmonics(L, u, y);
  double s = 0.0;
  const auto v = a.values();
  for (std::size_t i = 0; i < y.size(); ++i) s += v[i] * y[i];
  return s;
}

HarmonicCoefficients filter(const HarmonicCoefficients& a, const std::function<double(int)>& h) {
  int last = -1;
  std::vector<double> factor(static_cast<std::size_t>(std::max(a.band_limit(), 0)) + 1);
  for (int l = 0; l <= a.band_limit(); ++l) {
    factor[l] = h(l);
    if (factor[l] != 0.0) last = l;
  }
  HarmonicCoefficients out(std::max(last, 0));
  if (last < 0) return out;
  for (int l = 0; l <= last; ++l)
    for (int m = -l; m <= l; ++m) out(l, m) = factor[l] * a(l, m);
  return out;
}

HarmonicCoefficients point_multipoles(std::span<const UnitDirection> points, int band_limit,
                                      std::span<const double> weights) {
  if (!weights.empty() && weights.size() != points.size())
    throw std::invalid_argument("point_multipoles: weight count mismatch");
  HarmonicCoefficients s(band_limit);
  std::vector<double> y(s.size());
  auto acc = s.values();
  for (std::size_t i = 0; i < points.size(); ++i) {
    real_harmonics(band_limit, points[i], y);
    const double w = weights.empty() ? 1.0 : weights[i];
    for (std::size_t k = 0; k < y.size(); ++k) acc[k] += w * y[k];
  }
  return s;
}

}  // namespace neediso
