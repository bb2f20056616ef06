#include "neediso/density.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace neediso {

std::string to_string(Norm p) {
  switch (p) {
    case Norm::L1: return "1";
    case Norm::L2: return "2";
    case Norm::L2Star: return "2star";
    case Norm::LInf: return "inf";
  }
  return "?";
}

Norm norm_from_string(const std::string& tag) {
  if (tag == "1") return Norm::L1;
  if (tag == "2") return Norm::L2;
  if (tag == "2star" || tag == "2*") return Norm::L2Star;
  if (tag == "inf") return Norm::LInf;
  throw std::invalid_argument("unknown norm '" + tag + "' (expected 1, 2, 2star or inf)");
}

DensityEstimate constant_density() {
  DensityEstimate est;
  est.coefficients = HarmonicCoefficients(0);
  est.coefficients(0, 0) = 1.0 / std::sqrt(kFourPi);
  est.provenance = "constant";
  return est;
}

namespace {

void add_scale(HarmonicCoefficients& out, const NeedletFrame& frame, int j, std::span<const double> kept) {
  // sum_k c_k psi_jk has coefficients sqrt(b_l) sum_k sqrt(w_k) c_k Y_lm(xi_k):
  // a forward transform of c_k / sqrt(w_k).
  const auto& grid = frame.cubature(j);
  std::vector<double> samples(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) samples[k] = kept[k] / std::sqrt(grid.weight(k));
  const int hi = frame.band(j).hi;
  const auto a = frame.transform(j).forward(samples, hi);
  for (int l = frame.band(j).lo; l <= hi; ++l) {
    const double f = frame.filter(j, l);
    for (int m = -l; m <= l; ++m) out(l, m) += f * a(l, m);
  }
}

}  // namespace

DensityEstimate linear_estimate(const NeedletCoefficientSet& coeffs, const NeedletFrame& frame, int J) {
  if (J < 0) return constant_density();
  if (J >= static_cast<int>(coeffs.scales.size())) throw std::out_of_range("linear_estimate: scale beyond coefficients");
  DensityEstimate est;
  est.coefficients = HarmonicCoefficients(frame.band(J).hi);
  est.coefficients(0, 0) = 1.0 / std::sqrt(kFourPi);
  for (int j = 0; j <= J; ++j) add_scale(est.coefficients, frame, j, coeffs.scales[j].beta);
  est.provenance = "linear(J=" + std::to_string(J) + ")";
  return est;
}

DensityEstimate linear_estimate(const HarmonicCoefficients& s, std::size_t n, const NeedletFrame& frame, int J) {
  if (J < 0) return constant_density();
  const int L = frame.band(J).hi;
  if (s.band_limit() < L) throw std::invalid_argument("linear_estimate: event multipoles truncated");
  DensityEstimate est;
  est.coefficients = HarmonicCoefficients(L);
  est.coefficients(0, 0) = 1.0 / std::sqrt(kFourPi);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int l = 1; l <= L; ++l) {
    const double w = frame.lowpass(J, l) * inv_n;
    for (int m = -l; m <= l; ++m) est.coefficients(l, m) = w * s(l, m);
  }
  est.provenance = "linear(J=" + std::to_string(J) + ")";
  return est;
}

int plugin_max_scale(std::size_t n, double rho) {
  if (n < 2) return 0;
  const double nn = static_cast<double>(n);
  return static_cast<int>(std::floor(0.5 * std::log2(nn / (rho * std::log(nn)))));
}

DensityEstimate plugin_estimate(const NeedletCoefficientSet& coeffs, const NeedletFrame& frame, const ThresholdRule& rule,
                                std::size_t n, std::optional<int> max_scale) {
  if (n < 2) throw std::invalid_argument("plugin_estimate: need at least two events");
  if (!(rule.lambda >= 0.0) || !(rule.rho >= 0.0)) throw std::invalid_argument("plugin_estimate: negative threshold");
  const int J = max_scale.value_or(plugin_max_scale(n, rule.rho));
  if (J < 1) {
    auto est = constant_density();
    est.degenerate = true;
    est.provenance = "plugin(J<1)";
    return est;
  }
  if (J >= static_cast<int>(coeffs.scales.size())) throw std::out_of_range("plugin_estimate: scale beyond coefficients");
  const double log_n = std::log(static_cast<double>(n));
  const double beta_cut =
      rule.lambda * std::sqrt(log_n) / (rule.standard_error ? std::sqrt(static_cast<double>(n)) : 1.0);
  const double occupancy_cut = rule.rho * log_n;

  DensityEstimate est;
  est.coefficients = HarmonicCoefficients(frame.band(J).hi);
  est.coefficients(0, 0) = 1.0 / std::sqrt(kFourPi);
  est.survivors.assign(J + 1, 0);
  int top = 0;
  for (int j = 1; j <= J; ++j) {
    const auto& st = coeffs.scales[j];
    std::vector<double> kept(st.beta.size(), 0.0);
    for (std::size_t k = 0; k < kept.size(); ++k) {
      if (std::abs(st.beta[k]) > beta_cut * std::sqrt(st.sigma2[k]) && st.occupancy[k] > occupancy_cut) {
        kept[k] = st.beta[k];
        ++est.survivors[j];
      }
    }
    if (est.survivors[j] > 0) {
      add_scale(est.coefficients, frame, j, kept);
      top = j;
    }
  }
  est.coefficients = est.coefficients.resized(top == 0 ? 0 : frame.band(top).hi);
  est.provenance = "plugin(J=" + std::to_string(J) + ")";
  return est;
}

const SphericalTransform& evaluation_mesh(int band_limit) {
  struct Mesh {
    QuadratureGrid grid;
    SphericalTransform transform;
    Mesh(int degree, int L) : grid(degree), transform(grid, L) {}
  };
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<Mesh>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[band_limit];
  if (!slot) slot = std::make_unique<Mesh>(std::max(4 * band_limit, 16), band_limit);
  return slot->transform;
}

double lp_distance_on_grid(const DensityEstimate& est, const CoverageModel& g, Norm p, const QuadratureGrid& grid) {
  const auto f = SphericalTransform(grid, est.band_limit()).inverse(est.coefficients);
  const auto& gs = g.samples_on(grid);
  switch (p) {
    case Norm::L1:
    case Norm::L2: {
      const double power = p == Norm::L1 ? 1.0 : 2.0;
      double s = 0.0;
      for (std::size_t k = 0; k < f.size(); ++k) s += grid.weight(k) * std::pow(std::abs(f[k] - gs[k]), power);
      return p == Norm::L1 ? s : std::sqrt(s);
    }
    case Norm::LInf: {
      double m = 0.0;
      for (std::size_t k = 0; k < f.size(); ++k) m = std::max(m, std::abs(f[k] - gs[k]));
      return m;
    }
    case Norm::L2Star: break;
  }
  throw std::invalid_argument("lp_distance: unsupported norm " + to_string(p));
}

double lp_distance(const DensityEstimate& est, const CoverageModel& g, Norm p) {
  const int L = est.band_limit();
  if (p == Norm::L2) {
    const auto glm = g.multipoles(L);
    double in_band = 0.0, g_in_band = 0.0;
    for (int l = 0; l <= L; ++l)
      for (int m = -l; m <= l; ++m) {
        const double d = est.coefficients(l, m) - glm(l, m);
        in_band += d * d;
        g_in_band += glm(l, m) * glm(l, m);
      }
    return std::sqrt(in_band + std::max(0.0, g.squared_norm() - g_in_band));
  }
  if (p == Norm::L2Star) throw std::invalid_argument("lp_distance: 2star applies to linear estimates only");
  const auto& mesh = evaluation_mesh(L);
  const auto f = mesh.inverse(est.coefficients);
  const auto& grid = mesh.grid();
  const auto& gs = g.samples_on(grid);
  if (p == Norm::LInf) {
    double m = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) m = std::max(m, std::abs(f[k] - gs[k]));
    return m;
  }
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += grid.weight(k) * std::abs(f[k] - gs[k]);
  return s;
}

double unbiased_l2(const std::vector<std::vector<double>>& zeta, int J) {
  if (J + 1 >= static_cast<int>(zeta.size())) throw std::out_of_range("unbiased_l2: zeta missing scale J+1");
  double s = 0.0;
  for (int j = 0; j <= J + 1; ++j)
    for (double z : zeta[j]) s += z;
  return s;
}

double unbiased_l2(const HarmonicCoefficients& s, std::size_t n, const HarmonicCoefficients& g, const NeedletFrame& frame,
                   int J) {
  if (n < 2) throw std::invalid_argument("unbiased_l2: need at least two events");
  const int L = frame.band(J + 1).hi;
  if (s.band_limit() < L || g.band_limit() < L) throw std::invalid_argument("unbiased_l2: multipoles truncated");
  const double nn = static_cast<double>(n);
  const double pair = 1.0 / (nn * (nn - 1.0));
  double total = 0.0;
  for (int l = 1; l <= L; ++l) {
    const double w = frame.lowpass(J + 1, l);
    if (w == 0.0) continue;
    double ss = 0.0, gs = 0.0, gg = 0.0;
    for (int m = -l; m <= l; ++m) {
      ss += s(l, m) * s(l, m);
      gs += g(l, m) * s(l, m);
      gg += g(l, m) * g(l, m);
    }
    total += w * ((ss - nn * (2.0 * l + 1.0) / kFourPi) * pair - 2.0 / nn * gs + gg);
  }
  return total;
}

}  // namespace neediso
