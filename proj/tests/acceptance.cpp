// Acceptance runs: one PASS/FAIL line per criterion, preceded by the measured
// quantities. Select criteria with positional numbers; default is all.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "neediso/calibration.hpp"
#include "neediso/coverage.hpp"
#include "neediso/density.hpp"
#include "neediso/harmonics.hpp"
#include "neediso/isotropy.hpp"
#include "neediso/needlet_frame.hpp"
#include "neediso/simulator.hpp"

using namespace neediso;

namespace {

constexpr std::uint64_t kSeed = 20240611;
unsigned g_threads = 0;

/// Collects sub-checks of one criterion.
class Criterion {
 public:
  Criterion(int id, std::string title) : id_(id), title_(std::move(title)) {
    std::printf("== criterion %d: %s\n", id_, title_.c_str());
    std::fflush(stdout);
  }

  bool check(bool ok, const std::string& what) {
    std::printf("   %s %s\n", ok ? "ok  " : "FAIL", what.c_str());
    std::fflush(stdout);
    pass_ = pass_ && ok;
    return ok;
  }
  void note(const std::string& what) {
    std::printf("   .... %s\n", what.c_str());
    std::fflush(stdout);
  }

  bool finish() const {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::printf("%s criterion %d: %s (%.1f s)\n", pass_ ? "PASS" : "FAIL", id_, title_.c_str(), secs);
    std::fflush(stdout);
    return pass_;
  }

 private:
  int id_;
  std::string title_;
  bool pass_ = true;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Catalog uniform_catalog(std::size_t n, Rng& rng) {
  Catalog c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(sample_uniform(rng));
  return c;
}

std::shared_ptr<const CoverageModel> coverage_of(bool exposure) {
  return exposure ? std::make_shared<const CoverageModel>(ExposureCoverage{}) : std::make_shared<const CoverageModel>();
}

double binomial_se(double p, std::size_t count) { return std::sqrt(p * (1 - p) / static_cast<double>(count)); }

// ---------------------------------------------------------------------------

bool frame_identities() {
  Criterion c(1, "frame identities");
  const auto w = make_window(2.0, 15);
  double pu = 0;
  for (int J = 0; J <= 9; ++J)
    for (int l = 1; l <= (1 << J); ++l) {
      double s = 0;
      for (int j = 0; j <= J; ++j) s += w.b(std::ldexp(l, -j));
      pu = std::max(pu, std::abs(s - 1));
    }
  c.check(pu <= 1e-12, fmt("partition of unity, J <= 9: max |sum - 1| = %.2e (tol 1e-12)", pu));

  const int J = 4;
  const auto frame = build_frame(w, J + 1);
  const auto grid = build_grid(1 << (J + 3));
  Rng rng(kSeed);
  std::normal_distribution<double> gauss;
  double worst = 0;
  for (int trial = 0; trial < 1; ++trial) {
    HarmonicCoefficients a(1 << J);
    for (auto& v : a.values()) v = gauss(rng);
    const auto f = sht_inverse(a, grid.nodes());
    double energy = a(0, 0) * a(0, 0);
    for (int j = 0; j <= J + 1; ++j)
      for (std::size_t k = 0; k < frame->size(j); ++k) {
        std::vector<double> prod(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) prod[i] = f[i] * needlet_eval(*frame, j, k, grid.node(i));
        const double b = grid.integrate(prod);
        energy += b * b;
      }
    worst = std::max(worst, std::abs(energy - a.squared_norm()) / a.squared_norm());
  }
  c.check(worst <= 1e-8, fmt("tight-frame Parseval, band limit 16, random field: rel err %.2e (tol 1e-8)", worst));

  double rt = 0;
  for (int L : {16, 64, 128}) {
    HarmonicCoefficients a(L);
    for (auto& v : a.values()) v = gauss(rng);
    const auto g = build_grid(2 * L);
    const auto back = sht_forward(sht_inverse(a, g.nodes()), g, L);
    for (std::size_t i = 0; i < a.size(); ++i) rt = std::max(rt, std::abs(back.values()[i] - a.values()[i]));
  }
  c.check(rt <= 1e-10, fmt("SHT round trip, L = 16, 64, 128: max coefficient error %.2e (tol 1e-10)", rt));
  return c.finish();
}

bool oracle_equivalences() {
  Criterion c(2, "oracle equivalences");
  const auto frame = build_frame(make_window(2.0, 15), 5);
  Rng rng(kSeed + 2);

  double zeta_err = 0;
  for (const bool exposure : {false, true}) {
    const auto g = coverage_of(exposure);
    const auto cat = sample_null(*g, 50, rng);
    const auto zeta = zeta_coefficients(*frame, cat, *g, 3, CoefficientPath::Direct);
    for (int j = 0; j <= 3; ++j) {
      const auto bg = reference_coefficients(*frame, *g, j);
      for (std::size_t k = 0; k < frame->size(j); ++k) {
        std::vector<double> d;
        for (const auto& x : cat) d.push_back(needlet_eval(*frame, j, k, x) - bg[k]);
        double pairs = 0;
        for (std::size_t i = 0; i < d.size(); ++i)
          for (std::size_t i2 = 0; i2 < d.size(); ++i2)
            if (i != i2) pairs += d[i] * d[i2];
        zeta_err = std::max(zeta_err, std::abs(zeta[j][k] - pairs / (50.0 * 49.0)));
      }
    }
  }
  c.check(zeta_err <= 1e-12, fmt("zeta linear identity vs pair double sum, n = 50, uniform and exposure: %.2e (tol 1e-12)",
                                 zeta_err));

  std::size_t mismatches = 0;
  std::uniform_real_distribution<double> radius(0.0, 0.6);
  for (int s = 0; s < 100; ++s) {
    const auto cat = uniform_catalog(20 + s % 150, rng);
    const double d = radius(rng);
    mismatches += twopc_statistic(cat, d) != twopc_brute_force(cat, d) ? 1 : 0;
  }
  c.check(mismatches == 0, fmt("TwoPC sweep vs brute force on 100 catalogs: %zu mismatches (exact)", mismatches));

  double l2_err = 0;
  const CoverageModel uniform;
  for (int s = 0; s < 5; ++s) {
    const auto cat = uniform_catalog(100, rng);
    const auto est = linear_estimate(point_multipoles(cat, frame->band(4).hi), cat.size(), *frame, 3 + s % 2);
    const auto grid = build_grid(2 * est.band_limit());
    l2_err = std::max(l2_err, std::abs(lp_distance_on_grid(est, uniform, Norm::L2, grid) -
                                       lp_distance(est, uniform, Norm::L2)));
  }
  c.check(l2_err <= 1e-9, fmt("L2 distance by quadrature vs Parseval: %.2e (tol 1e-9)", l2_err));

  double dt = 0, excess = -1e300;
  for (int s = 0; s < 20; ++s) {
    const auto cat = uniform_catalog(60, rng);
    const auto d = empirical_coefficients(*frame, cat, 5, CoefficientPath::Direct);
    const auto t = empirical_coefficients(*frame, cat, 5, CoefficientPath::Transform);
    const auto b = empirical_coefficients(*frame, cat, 5, CoefficientPath::Binned);
    for (int j = 0; j <= 5; ++j)
      for (std::size_t k = 0; k < frame->size(j); ++k) {
        dt = std::max(dt, std::abs(d.scales[j].beta[k] - t.scales[j].beta[k]));
        excess = std::max(excess, std::abs(d.scales[j].beta[k] - b.scales[j].beta[k]) - binning_bound(*frame, j));
      }
  }
  c.check(dt <= 1e-10, fmt("direct vs transform coefficients: %.2e (tol 1e-10)", dt));
  c.check(excess <= 0, fmt("direct vs binned coefficients: worst |diff| - bound = %.2e (must be <= 0)", excess));
  return c.finish();
}

bool deflection_formulas() {
  Criterion c(3, "deflection formulas");
  const MagneticFieldModel field;
  const auto deg = [](double r) { return rad_to_deg(r); };
  const double reg = deg(regular_deflection(1e20, 3.0, field));
  const double turb = deg(turbulent_deflection(1e20, 3.0, field));
  const double ext = deg(extragalactic_deflection(1e20, 100.0, field));
  c.check(std::abs(reg - 3.25) <= 1e-12, fmt("regular 2 uG, 3 kpc, 1e20 eV: %.15g deg (3.25)", reg));
  c.check(std::abs(turb - 0.56) <= 1e-12, fmt("turbulent 4 uG, 50 pc, 3 kpc, 1e20 eV: %.15g deg (0.56)", turb));
  c.check(std::abs(ext - 2.4) <= 1e-12, fmt("extragalactic 1 nG, 50 pc, 100 Mpc, 1e20 eV: %.15g deg (2.4)", ext));
  double worst = 0;
  for (double e : {6e19, 1e20, 7e20})
    for (int z : {2, 5, 26}) {
      MagneticFieldModel scaled = field;
      scaled.charge = z;
      const double ze = z * e;
      worst = std::max({worst,
                        std::abs(regular_deflection(ze, 5.0, scaled) / regular_deflection(e, 5.0, field) - 1),
                        std::abs(turbulent_deflection(ze, 5.0, scaled) / turbulent_deflection(e, 5.0, field) - 1),
                        std::abs(extragalactic_deflection(ze, 40.0, scaled) /
                                     extragalactic_deflection(e, 40.0, field) - 1)});
    }
  c.check(worst <= 1e-14, fmt("(E, Z) -> (kE, kZ) leaves every deflection unchanged: rel %.2e", worst));
  return c.finish();
}

bool nn_null_law() {
  Criterion c(4, "NN null law, uniform coverage, n = 100, R = 10^4");
  const std::size_t R = 10000;
  double sum = 0, sq = 0;
  for (std::size_t r = 0; r < R; ++r) {
    auto rng = make_rng(kSeed + 4, Stream::Null, r);
    const double w = nn_statistic(uniform_catalog(100, rng));
    sum += w;
    sq += w * w;
  }
  const double mean = sum / R, var = (sq - R * mean * mean) / (R - 1);
  c.check(std::abs(mean) <= 0.05, fmt("mean(W) = %.4f (0 +- 0.05)", mean));
  c.check(std::abs(var - 1) <= 0.1, fmt("var(W) = %.4f (1 +- 0.1)", var));
  return c.finish();
}

bool level_calibration() {
  Criterion c(5, "level calibration, fresh 10^4-replicate null batches");
  const std::size_t table_R = 50000, fresh = 10000;
  const auto frame = build_frame(make_window(2.0, 15), 4);
  for (const bool exposure : {false, true})
    for (const std::size_t n : {std::size_t{25}, std::size_t{100}}) {
      const auto cov = coverage_of(exposure);
      const StatisticsEngine engine(frame, cov);
      std::vector<MethodConfig> ms(4);
      ms[0].max_scale = jstar(n);
      ms[1].method = Method::PlugIn;
      ms[1].norm = Norm::L2;
      ms[2].method = Method::NN;
      ms[3].method = Method::TwoPC;
      ms[3].delta0_deg = {10.0};
      const std::uint64_t seed = kSeed + 5 + n + (exposure ? 1000 : 0);
      const auto tables = build_tables(engine, ms, n, table_R, seed, g_threads);
      const auto stats = statistic_matrices(engine, ms, fresh, null_catalogs(engine, n, seed, Stream::Test), g_threads);
      for (std::size_t i = 0; i < ms.size(); ++i) {
        const auto cols = study_columns(ms[i]);
        const std::size_t col = cols.size() - 1;
        const auto rnd = p_value_matrix(ms[i], tables[i], stats[i], fresh, true, seed);
        const auto con = p_value_matrix(ms[i], tables[i], stats[i], fresh, false, seed);
        for (const double alpha : {0.01, 0.05}) {
          const double band = 3 * binomial_se(alpha, fresh);
          const double r = rejection_rate(rnd, cols.size(), col, alpha);
          const double k = rejection_rate(con, cols.size(), col, alpha);
          const auto label = fmt("%s n=%zu %s %s alpha=%.2f", exposure ? "exposure" : "uniform", n,
                                 to_string(ms[i].method).c_str(),
                                 (ms[i].method == Method::Multiple || ms[i].method == Method::PlugIn)
                                     ? (to_string(ms[i].norm) + " " + cols[col].label).c_str()
                                     : cols[col].label.c_str(),
                                 alpha);
          c.check(std::abs(r - alpha) <= band, fmt("%s: type-I %.4f (%.2f +- %.4f)", label.c_str(), r, alpha, band));
          c.check(k <= alpha + band, fmt("%s: conservative-tie type-I %.4f (<= %.4f)", label.c_str(), k, alpha + band));
        }
      }
    }
  return c.finish();
}

/// Power of the listed study columns at alpha = 0.05 with conservative ties.
std::map<std::string, double> power_study(const std::shared_ptr<const NeedletFrame>& frame,
                                          const std::shared_ptr<const CoverageModel>& cov,
                                          const std::vector<MethodConfig>& ms, const AlternativeSpec& alt, std::size_t n,
                                          std::size_t table_R, std::size_t alt_R, std::uint64_t seed) {
  const StatisticsEngine engine(frame, cov);
  const AlternativeSampler sampler(alt, cov, seed);
  const auto tables = build_tables(engine, ms, n, table_R, seed, g_threads);
  const auto stats = statistic_matrices(engine, ms, alt_R, [&](std::size_t r) {
    auto rng = make_rng(seed, Stream::Alternative, r);
    return sampler.sample(n, rng).directions;
  }, g_threads);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const auto cols = study_columns(ms[i]);
    const auto p = p_value_matrix(ms[i], tables[i], stats[i], alt_R, false, seed);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      std::string key = to_string(ms[i].method);
      if (ms[i].method == Method::Multiple || ms[i].method == Method::PlugIn) key += " " + to_string(ms[i].norm);
      key += " " + cols[k].label;
      out[key] = 100.0 * rejection_rate(p, cols.size(), k, 0.05);
    }
  }
  return out;
}

MethodConfig multiple(Norm norm, int max_scale) {
  MethodConfig m;
  m.norm = norm;
  m.max_scale = max_scale;
  return m;
}
MethodConfig nn() {
  MethodConfig m;
  m.method = Method::NN;
  return m;
}
MethodConfig twopc(double delta_deg) {
  MethodConfig m;
  m.method = Method::TwoPC;
  m.delta0_deg = {delta_deg};
  return m;
}

bool power_reproduction() {
  Criterion c(6, "power reproduction at n = 100, R = 1000");
  const std::size_t R = 1000, A = 1000, n = 100;
  const auto frame = build_frame(make_window(2.0, 15), 6);
  const auto within = [&](const std::map<std::string, double>& pw, const std::string& key, double target, double tol,
                          const char* tag) {
    const double v = pw.at(key);
    c.check(std::abs(v - target) <= tol, fmt("(%s) %s: %.1f%% (%.0f +- %.0f)", tag, key.c_str(), v, target, tol));
  };

  {
    const auto pw = power_study(frame, coverage_of(true), {multiple(Norm::L2Star, 4), nn(), twopc(10.0)},
                                HbSpec{100, 10.0}, n, R, A, kSeed + 61);
    within(pw, "multiple 2star J*=4", 100, 5, "a, Hb M=100 theta=10 exposure");
    within(pw, "nn W", 100, 5, "a, Hb M=100 theta=10 exposure");
    within(pw, "twopc delta=10.0000", 92, 5, "a, Hb M=100 theta=10 exposure");
  }
  {
    const auto pw = power_study(frame, coverage_of(true), {multiple(Norm::LInf, 5), nn(), twopc(5.0)},
                                HaSpec{0.08, 5.0}, n, R, A, kSeed + 62);
    const char* tag = "b, Ha delta=0.08 theta=5 exposure";
    within(pw, "multiple inf J*=5", 94, 10, tag);
    within(pw, "twopc delta=5.0000", 84, 10, tag);
    c.note(fmt("(%s) nn W: %.1f%% (19, no tolerance stated)", tag, pw.at("nn W")));
    const double m = pw.at("multiple inf J*=5"), t = pw.at("twopc delta=5.0000"), w = pw.at("nn W");
    c.check(m > t && t > w, fmt("(%s) ordering Multiple(inf) > TwoPC > NN: %.1f > %.1f > %.1f", tag, m, t, w));
  }
  {
    HcSpec hc;
    hc.sources = 100;
    hc.spectrum.e_min = 1e19;
    const auto pw = power_study(frame, coverage_of(false), {multiple(Norm::L2Star, 4), nn(), twopc(10.0)}, hc, n, R,
                                A, kSeed + 63);
    const char* tag = "c, Hc n_s=100 E_min=1e19 uniform";
    within(pw, "multiple 2star J*=4", 99, 7, tag);
    within(pw, "nn W", 82, 7, tag);
    within(pw, "twopc delta=10.0000", 62, 7, tag);
  }
  return c.finish();
}

bool separation_rate() {
  Criterion c(7, "separation-rate ordering, sqrt(n) * weight fixed, uniform coverage");
  const std::size_t R = 1000, A = 1000;
  const auto frame = build_frame(make_window(2.0, 15), 6);
  const std::vector<std::pair<std::size_t, double>> grid{{25, 0.08}, {100, 0.04}, {400, 0.02}};
  const std::vector<MethodConfig> ms{multiple(Norm::L1, 4), multiple(Norm::L2Star, 4), multiple(Norm::LInf, 4), nn(),
                                     twopc(5.0)};
  std::vector<std::map<std::string, double>> powers;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    powers.push_back(power_study(frame, coverage_of(false), ms, HaSpec{grid[g].second, 5.0}, grid[g].first, R, A,
                                 kSeed + 70 + g));
  }
  for (const auto& key : {"nn W", "twopc delta=5.0000"})
    c.note(fmt("%s: %.1f%%, %.1f%%, %.1f%% at n = 25, 100, 400", key, powers[0].at(key), powers[1].at(key),
               powers[2].at(key)));
  for (const auto& key : {"multiple 1 J*=4", "multiple 2star J*=4", "multiple inf J*=4"}) {
    bool ok = true;
    std::string detail;
    for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
      const double a = powers[g].at(key) / 100, b = powers[g + 1].at(key) / 100;
      const double slack = 2 * std::hypot(binomial_se(a, A), binomial_se(b, A));
      ok = ok && b >= a - slack;
      detail += fmt(" %.1f -> %.1f (slack %.1f);", 100 * a, 100 * b, 100 * slack);
    }
    c.check(ok, fmt("%s non-decreasing in n:%s", key, detail.c_str()));
  }
  return c.finish();
}

bool twopc_scan() {
  Criterion c(8, "TwoPC scan over [4, 14] deg, 69-event null batches, exposure coverage");
  const std::size_t n = 69, table_R = 10000, fresh = 10000;
  const auto frame = build_frame(make_window(2.0, 15), 2);
  const auto cov = coverage_of(true);
  const StatisticsEngine engine(frame, cov);
  MethodConfig m;
  m.method = Method::TwoPC;
  m.delta0_deg.clear();
  for (int k = 40; k <= 140; ++k) m.delta0_deg.push_back(k / 10.0);
  const std::vector<MethodConfig> ms{m};
  const std::uint64_t seed = kSeed + 8;
  const auto table = build_tables(engine, ms, n, table_R, seed, g_threads).front();
  const auto stats = statistic_matrices(engine, ms, fresh, null_catalogs(engine, n, seed, Stream::Test), g_threads);
  const std::size_t width = m.delta0_deg.size();
  const auto p = p_value_matrix(m, table, stats.front(), fresh, false, seed);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < fresh; ++r) {
    const auto row = std::span<const double>(p).subspan(r * width, width);
    hits += *std::min_element(row.begin(), row.end()) <= 0.008 ? 1 : 0;
  }
  const double frac = 100.0 * static_cast<double>(hits) / static_cast<double>(fresh);
  c.check(std::abs(frac - 10) <= 3, fmt("fraction with min p <= 0.008: %.2f%% (10 +- 3)", frac));
  return c.finish();
}

bool jstar_formula() {
  Criterion c(9, "J* formula");
  c.check(jstar(69) == 2, fmt("jstar(69) = %d (2)", jstar(69)));
  return c.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance runs"};
  std::vector<int> which;
  app.add_option("criteria", which, "Criteria to run (1-9); default all")->check(CLI::Range(1, 9));
  app.add_option("--threads", g_threads, "Worker threads (0 = all cores)");
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::map<int, std::function<bool()>> runs{
      {1, frame_identities}, {2, oracle_equivalences}, {3, deflection_formulas},
      {4, nn_null_law},      {5, level_calibration},   {6, power_reproduction},
      {7, separation_rate},  {8, twopc_scan},          {9, jstar_formula}};
  bool all = true;
  for (int id : which) {
    try {
      all = runs.at(id)() && all;
    } catch (const std::exception& e) {
      std::printf("FAIL criterion %d: %s\n", id, e.what());
      all = false;
    }
  }
  return all ? 0 : 1;
}
