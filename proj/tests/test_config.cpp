#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "neediso/calibration.hpp"
#include "neediso/config.hpp"
#include "neediso/hashing.hpp"

using namespace neediso;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("neediso_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json sample_config() {
  return nlohmann::json::parse(R"({
    "frame": {"bandwidth": 2, "spline_order": 15, "max_scale": 5},
    "coverage": {"type": "exposure"},
    "methods": [{"method": "multiple", "norm": "1", "max_scale": 4},
                {"method": "twopc", "delta0_deg": [5, 10]}],
    "alternative": {"model": "Hb", "sources": 12, "theta_deg": 8},
    "n": 60, "replicates": 200, "alpha": 0.01, "tie_break": "randomized",
    "seed": 99, "table_dir": "t"
  })");
}

}  // namespace

TEST_CASE("catalog round trip in both frames") {
  Rng rng(3);
  for (const auto frame : {FrameOfReference::Galactic, FrameOfReference::Equatorial}) {
    CatalogFile c;
    c.frame = frame;
    for (int i = 0; i < 50; ++i) {
      c.directions.push_back(sample_uniform(rng));
      c.energies.push_back(6e19 * (1 + i));
    }
    std::stringstream ss;
    write_catalog(ss, c);
    const auto back = read_catalog(ss);
    CHECK(back.frame == frame);
    REQUIRE(back.directions.size() == c.directions.size());
    CHECK(back.energies == c.energies);
    for (std::size_t i = 0; i < c.directions.size(); ++i)
      CHECK(geodesic_distance(back.directions[i], c.directions[i]) < 1e-10);
  }
}

TEST_CASE("equatorial catalogs are converted to Galactic") {
  std::istringstream is("# frame=equatorial\n192.85948, 27.12825\n\n# comment\n");
  const auto c = read_catalog(is);
  REQUIRE(c.directions.size() == 1);
  CHECK(c.directions[0].latitude_deg() == doctest::Approx(90.0).epsilon(1e-6));
  CHECK(c.energies.empty());
}

TEST_CASE("invalid catalog lines are data errors") {
  for (const char* text : {"360,0\n", "-1,0\n", "10,91\n", "10,-90.5\n", "abc,1\n", "1\n", "1,2,3,4\n",
                           "1,2,0\n", "1,2,-5\n", "1,2,1e20\n3,4\n", "1,2\n3,4,1e20\n", "# frame=ecliptic\n1,2\n"}) {
    std::istringstream is(text);
    CHECK_THROWS_AS(read_catalog(is), DataError);
  }
  std::istringstream ok("0,-90\n359.5,90\n");
  CHECK(read_catalog(ok).directions.size() == 2);
  CHECK_THROWS_AS(read_catalog(fs::path("/nonexistent/catalog.csv")), DataError);
}

TEST_CASE("run config parses, validates and round-trips") {
  const auto c = RunConfig::from_json(sample_config());
  CHECK(c.frame.max_scale == 5);
  CHECK(std::holds_alternative<ExposureCoverage>(c.coverage));
  REQUIRE(c.methods.size() == 2);
  CHECK(c.methods[0].norm == Norm::L1);
  CHECK(c.methods[1].delta0_deg == std::vector<double>{5, 10});
  REQUIRE(c.alternative.has_value());
  CHECK(std::get<HbSpec>(*c.alternative).sources == 12u);
  CHECK(c.n == 60u);
  CHECK(c.alpha == 0.01);
  CHECK(c.randomized_ties);
  CHECK(c.seed_given);
  CHECK(c.seed == 99u);

  const auto again = RunConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());
  CHECK(again.hash() == c.hash());

  auto j = sample_config();
  j["seed"] = 100;
  j["table_dir"] = "elsewhere";
  CHECK(RunConfig::from_json(j).hash() == c.hash());
  j["n"] = 61;
  CHECK(RunConfig::from_json(j).hash() != c.hash());

  const auto defaults = RunConfig::from_json(nlohmann::json::object());
  CHECK_FALSE(defaults.seed_given);
  CHECK(std::holds_alternative<UniformCoverage>(defaults.coverage));
}

TEST_CASE("bad run configs are config errors") {
  const auto bad = [](const char* key, nlohmann::json value) {
    auto j = sample_config();
    j[key] = std::move(value);
    return j;
  };
  CHECK_THROWS_AS(RunConfig::from_json(bad("n", 1)), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(bad("alpha", 1.0)), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(bad("alpha", 0.0)), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(bad("replicates", 0)), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(bad("tie_break", "coin")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(bad("n", "many")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(bad("coverage", {{"type", "moon"}})), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(bad("frame", {{"max_scale", 10}})), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(bad("frame", {{"bandwidth", 1.0}})), ConfigError);
  // the method's max scale exceeds the frame's
  CHECK_THROWS_AS(RunConfig::from_json(bad("methods", nlohmann::json::array({{{"method", "multiple"}, {"max_scale", 7}}}))),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(bad("alternative", {{"model", "Hz"}})), ConfigError);

  const auto dir = scratch_dir("config");
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(RunConfig::load(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(RunConfig::load(dir / "missing.json"), ConfigError);
  std::ofstream(dir / "good.json") << sample_config().dump();
  CHECK(RunConfig::load(dir / "good.json").hash() == RunConfig::from_json(sample_config()).hash());
  fs::remove_all(dir);
}

TEST_CASE("table paths separate every setting and stale tables are refused") {
  const auto frame = build_frame(make_window(2.0, 15), 4);
  const auto other_frame = build_frame(make_window(2.0, 10), 4);
  const auto uniform = std::make_shared<const CoverageModel>();
  const auto exposure = std::make_shared<const CoverageModel>(ExposureCoverage{});
  MethodConfig m;
  m.max_scale = 3;
  MethodConfig m1 = m;
  m1.norm = Norm::L1;
  const auto dir = scratch_dir("tables");

  const auto p = table_path(dir, m, 30, *uniform, *frame);
  CHECK(p.parent_path() == dir);
  CHECK(p.extension() == ".ndt");
  CHECK(p != table_path(dir, m1, 30, *uniform, *frame));
  CHECK(p != table_path(dir, m, 31, *uniform, *frame));
  CHECK(p != table_path(dir, m, 30, *exposure, *frame));
  CHECK(p != table_path(dir, m, 30, *uniform, *other_frame));
  CHECK(p == table_path(dir, m, 30, *uniform, *frame));

  CHECK_THROWS_AS(load_matching_table(p, m, 30, *uniform, *frame, 1), DataError);
  const StatisticsEngine engine(frame, uniform);
  const auto table = build_table(engine, m, 30, 20, 5, 1);
  table.save(p);
  CHECK(load_matching_table(p, m, 30, *uniform, *frame, 1).serialize() == table.serialize());
  CHECK_THROWS_AS(load_matching_table(p, m, 30, *uniform, *frame, 21), DataError);   // too few replicates
  CHECK_THROWS_AS(load_matching_table(p, m, 31, *uniform, *frame, 1), DataError);    // wrong n
  CHECK_THROWS_AS(load_matching_table(p, m1, 30, *uniform, *frame, 1), DataError);   // wrong norm
  CHECK_THROWS_AS(load_matching_table(p, m, 30, *exposure, *frame, 1), DataError);   // wrong coverage
  CHECK_THROWS_AS(load_matching_table(p, m, 30, *uniform, *other_frame, 1), DataError);
  MethodConfig deeper = m;
  deeper.max_scale = 4;
  CHECK_THROWS_AS(load_matching_table(p, deeper, 30, *uniform, *frame, 1), DataError);
  fs::remove_all(dir);
}
