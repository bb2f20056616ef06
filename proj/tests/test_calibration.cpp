#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "neediso/calibration.hpp"
#include "neediso/coverage.hpp"
#include "neediso/hashing.hpp"

using namespace neediso;

namespace {

std::shared_ptr<const NeedletFrame> small_frame() {
  static const auto f = build_frame(make_window(2.0, 15), 5);
  return f;
}

double declination_of(const UnitDirection& galactic) {
  return kPi / 2 - convert(galactic, FrameOfReference::Galactic, FrameOfReference::Equatorial).colatitude();
}

std::vector<MethodConfig> all_methods() {
  std::vector<MethodConfig> ms(5);
  ms[0].max_scale = 3;
  ms[1].norm = Norm::LInf;
  ms[1].max_scale = 3;
  ms[2].method = Method::PlugIn;
  ms[2].norm = Norm::L2;
  ms[3].method = Method::NN;
  ms[4].method = Method::TwoPC;
  ms[4].delta0_deg = {5, 10};
  return ms;
}

}  // namespace

TEST_CASE("relative exposure branches") {
  const ExposureCoverage site;
  // never visible: above a0 + zenith cut = 24.8 deg
  CHECK(relative_exposure(site, deg_to_rad(24.9)) == 0.0);
  CHECK(relative_exposure(site, deg_to_rad(60.0)) == 0.0);
  CHECK(relative_exposure(site, deg_to_rad(24.7)) > 0.0);
  // always visible near the south celestial pole: alpha_m = pi
  const double d = deg_to_rad(-89.0), a0 = deg_to_rad(-35.2);
  CHECK(relative_exposure(site, d) == doctest::Approx(kPi * std::sin(a0) * std::sin(d)));
  // partially visible: hand-evaluated zeta at dec = -80 deg
  const double d2 = deg_to_rad(-80.0);
  const double zeta = (0.5 - std::sin(a0) * std::sin(d2)) / (std::cos(a0) * std::cos(d2));
  CHECK(zeta > -1.0);
  const double am = std::acos(zeta);
  CHECK(relative_exposure(site, d2) ==
        doctest::Approx(std::cos(a0) * std::cos(d2) * std::sin(am) + am * std::sin(a0) * std::sin(d2)));
  const ExposureCoverage polar{-90.0, 60.0};
  CHECK(relative_exposure(polar, deg_to_rad(-45.0)) > 0.0);
  CHECK(relative_exposure(polar, deg_to_rad(-20.0)) == 0.0);
}

TEST_CASE("coverage densities integrate to one") {
  GriddedCoverage grid;
  grid.n_lat = 4;
  grid.n_lon = 8;
  for (std::size_t i = 0; i < 32; ++i) grid.values.push_back(1.0 + (i % 5));
  const QuadratureGrid q(300);
  for (const auto& g : {CoverageModel(), CoverageModel::auger(), CoverageModel(grid)}) {
    std::vector<double> v(q.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
      v[k] = g.density(q.node(k));
      CHECK(v[k] >= 0.0);
      CHECK(v[k] <= g.max_density());
    }
    CHECK(q.integrate(v) == doctest::Approx(1.0).epsilon(1e-3));  // kinks limit product quadrature
    const auto lm = g.multipoles(0);
    // exact zonal integrals for the exposure; gridded tables go through quadrature
    const double tol = std::holds_alternative<GriddedCoverage>(g.spec()) ? 1e-4 : 1e-10;
    CHECK(lm(0, 0) * std::sqrt(kFourPi) == doctest::Approx(1.0).epsilon(tol));
  }
  CHECK_THROWS(CoverageModel(GriddedCoverage{FrameOfReference::Galactic, 2, 2, {0, 0, 0, 0}}));
  CHECK_THROWS(CoverageModel(GriddedCoverage{FrameOfReference::Galactic, 2, 2, {1, 1, 1}}));
}

TEST_CASE("exposure sampling follows the declination profile") {
  const auto g = CoverageModel::auger();
  Rng rng(31);
  const int draws = 100000, bins = 30;
  std::vector<int> hist(bins, 0);
  for (const auto& x : sample_null(g, draws, rng)) {
    const double dec = declination_of(x);
    CHECK(dec <= deg_to_rad(24.8) + 1e-9);
    const double t = std::sin(dec);
    ++hist[std::min(bins - 1, static_cast<int>((t + 1.0) / 2.0 * bins))];
  }
  // expected mass per bin of t = sin(dec): proportional to int omega(asin t) dt
  std::vector<double> mass(bins);
  double total = 0;
  for (int b = 0; b < bins; ++b) {
    const double lo = -1.0 + 2.0 * b / bins, hi = -1.0 + 2.0 * (b + 1) / bins;
    mass[b] = integrate_gl([&](double t) { return relative_exposure(ExposureCoverage{}, std::asin(t)); }, lo, hi, 200);
    total += mass[b];
  }
  double chi2 = 0;
  int dof = -1;
  for (int b = 0; b < bins; ++b) {
    const double e = draws * mass[b] / total;
    if (e < 5) {
      CHECK(hist[b] <= 20);
      continue;
    }
    chi2 += (hist[b] - e) * (hist[b] - e) / e;
    ++dof;
  }
  // chi-square upper 1e-3 point is below dof + 4.5 sqrt(2 dof) for these dof
  CHECK(chi2 < dof + 4.5 * std::sqrt(2.0 * dof));
}

TEST_CASE("null sampling is reproducible and uniform coverage needs no rejection") {
  Rng a(8), b(8), c(8);
  CHECK(sample_null(CoverageModel::auger(), 50, a) == sample_null(CoverageModel::auger(), 50, b));
  const auto u = sample_null(CoverageModel(), 5, c);
  Rng d(8);
  for (const auto& x : u) CHECK(x == sample_uniform(d));
}

TEST_CASE("table ranks") {
  Rng rng(3);
  std::uniform_int_distribution<int> small(0, 20);
  TableMetadata meta;
  meta.columns = {"a", "b"};
  std::vector<double> data(2 * 500);
  for (auto& v : data) v = small(rng);
  const NullDistributionTable t(meta, 500, data);
  CHECK(table_rank(t, 0, -1.0) == 500u);
  CHECK(table_rank(t, 1, 21.0) == 0u);
  for (double v = -0.5; v < 21; v += 0.5) {
    for (std::size_t c = 0; c < 2; ++c) {
      std::size_t ge = 0, gt = 0;
      for (std::size_t r = 0; r < 500; ++r) {
        ge += t.at(r, c) >= v;
        gt += t.at(r, c) > v;
      }
      CHECK(table_rank(t, c, v) == ge);
      CHECK(t.count_greater(c, v) == gt);
    }
  }
}

TEST_CASE("table serialization round trip and CSV export") {
  TableMetadata meta;
  meta.method = Method::TwoPC;
  meta.n = 69;
  meta.coverage_id = "uniform";
  meta.frame_hash = "abc";
  meta.config_hash = "def";
  meta.seed = 42;
  meta.columns = {"delta=4.0000", "delta=5.0000"};
  meta.delta0_deg = {4, 5};
  const NullDistributionTable t(meta, 3, {1, 2, 3, 4, 5.5, 1e-300});
  const auto bytes = t.serialize();
  CHECK(bytes.substr(0, 8) == "NDLTBL01");
  const auto back = NullDistributionTable::deserialize(bytes);
  CHECK(back.serialize() == bytes);
  CHECK(back.id() == t.id());
  CHECK(back.meta().delta0_deg == meta.delta0_deg);
  CHECK(back.at(2, 1) == 1e-300);
  CHECK_THROWS(NullDistributionTable::deserialize(bytes.substr(0, bytes.size() - 3)));
  CHECK_THROWS(NullDistributionTable::deserialize("garbage"));

  std::ostringstream os;
  t.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "replicate,delta=4.0000,delta=5.0000");
  std::getline(is, line);
  CHECK(line == "0,1,2");
  std::getline(is, line);
  std::getline(is, line);
  CHECK(std::stod(line.substr(line.rfind(',') + 1)) == 1e-300);
}

TEST_CASE("table builds are deterministic and thread-count independent") {
  const auto g = std::make_shared<const CoverageModel>(ExposureCoverage{});
  const StatisticsEngine engine(small_frame(), g);
  const auto ms = all_methods();
  const auto one = build_tables(engine, ms, 40, 24, 77, 1);
  const auto four = build_tables(engine, ms, 40, 24, 77, 4);
  const auto again = build_tables(engine, ms, 40, 24, 77, 3);
  REQUIRE(one.size() == ms.size());
  for (std::size_t i = 0; i < ms.size(); ++i) {
    CHECK(one[i].serialize() == four[i].serialize());
    CHECK(one[i].serialize() == again[i].serialize());
    CHECK(one[i].rows() == 24u);
    CHECK(one[i].meta().coverage_id == g->id());
    CHECK(one[i].meta().frame_hash == hex64(small_frame()->hash()));
    CHECK(one[i].meta().config_hash == ms[i].hash());
    CHECK(one[i].cols() == ms[i].column_names().size());
  }
  CHECK(one[4].meta().delta0_deg == std::vector<double>{5, 10});
  const auto other = build_tables(engine, ms, 40, 24, 78, 1);
  CHECK(other[0].serialize() != one[0].serialize());
  // single replicate
  CHECK(build_table(engine, ms[3], 40, 1, 1).rows() == 1u);
}

TEST_CASE("study columns and p-value matrices") {
  const auto g = std::make_shared<const CoverageModel>();
  const StatisticsEngine engine(small_frame(), g);
  const auto ms = all_methods();
  const auto cols = study_columns(ms[0]);
  REQUIRE(cols.size() == 3u);
  CHECK(cols[2].jstar == 3);
  CHECK(cols[2].label == "J*=3");
  CHECK(study_columns(ms[4]).size() == 2u);

  const auto table = build_table(engine, ms[0], 30, 200, 5);
  const auto null_stats = statistic_matrices(engine, std::span(ms).first(1), 50, null_catalogs(engine, 30, 999), 1);
  const auto p = p_value_matrix(ms[0], table, null_stats[0], 50, false, 0);
  REQUIRE(p.size() == 150u);
  for (std::size_t r = 0; r < 50; ++r) {
    const std::span<const double> row(null_stats[0].data() + r * 3, 3);
    for (int j = 1; j <= 3; ++j)
      CHECK(p[r * 3 + j - 1] == doctest::Approx(multiple_decide(row, table, j, {0.05, {}, 1}).p_value));
  }
  const auto pr = p_value_matrix(ms[0], table, null_stats[0], 50, true, 3);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(pr[i] <= p[i] + 1e-15);
  CHECK(pr == p_value_matrix(ms[0], table, null_stats[0], 50, true, 3));

  const std::vector<double> pm{0.01, 0.5, 0.05, 0.2, 0.9, 0.04};
  CHECK(rejection_rate(pm, 2, 0, 0.05) == doctest::Approx(2.0 / 3));
  CHECK(rejection_rate(pm, 2, 1, 0.05) == doctest::Approx(1.0 / 3));
}
