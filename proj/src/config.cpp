#include "neediso/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "neediso/hashing.hpp"

namespace neediso {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (trim(field.substr(used)).empty() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw DataError("catalog line " + std::to_string(line) + ": '" + field + "' is not a number");
}

FrameOfReference frame_from_string(const std::string& s) {
  if (s == "galactic") return FrameOfReference::Galactic;
  if (s == "equatorial") return FrameOfReference::Equatorial;
  throw ConfigError("unknown frame '" + s + "' (expected galactic or equatorial)");
}

std::string frame_to_string(FrameOfReference f) { return f == FrameOfReference::Galactic ? "galactic" : "equatorial"; }

}  // namespace

CatalogFile read_catalog(std::istream& is) {
  CatalogFile out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string text = trim(raw);
    if (text.empty()) continue;
    if (text[0] == '#') {
      const auto pos = text.find("frame=");
      if (pos != std::string::npos) {
        try {
          out.frame = frame_from_string(trim(text.substr(pos + 6)));
        } catch (const ConfigError& e) {
          throw DataError(std::string("catalog header: ") + e.what());
        }
      }
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(text);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    if (fields.size() != 2 && fields.size() != 3)
      throw DataError("catalog line " + std::to_string(line) + ": expected lon,lat[,energy]");
    const double lon = parse_number(fields[0], line), lat = parse_number(fields[1], line);
    if (lon < 0.0 || lon >= 360.0) throw DataError("catalog line " + std::to_string(line) + ": longitude outside [0, 360)");
    if (lat < -90.0 || lat > 90.0) throw DataError("catalog line " + std::to_string(line) + ": latitude outside [-90, 90]");
    if (fields.size() == 3) {
      const double e = parse_number(fields[2], line);
      if (!(e > 0.0)) throw DataError("catalog line " + std::to_string(line) + ": energy must be positive");
      if (out.energies.size() != out.directions.size())
        throw DataError("catalog line " + std::to_string(line) + ": energy given for some events only");
      out.energies.push_back(e);
    } else if (!out.energies.empty()) {
      throw DataError("catalog line " + std::to_string(line) + ": energy given for some events only");
    }
    out.directions.push_back(
        convert(UnitDirection::from_lonlat_deg(lon, lat), out.frame, FrameOfReference::Galactic));
  }
  return out;
}

CatalogFile read_catalog(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open catalog " + path.string());
  return read_catalog(is);
}

void write_catalog(std::ostream& os, const CatalogFile& catalog) {
  os << "# frame=" << frame_to_string(catalog.frame) << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < catalog.directions.size(); ++i) {
    const auto u = convert(catalog.directions[i], FrameOfReference::Galactic, catalog.frame);
    double lon = u.longitude_deg();
    if (lon >= 360.0) lon -= 360.0;
    os << lon << ',' << u.latitude_deg();
    if (!catalog.energies.empty()) os << ',' << catalog.energies[i];
    os << '\n';
  }
}

void write_catalog(const std::filesystem::path& path, const CatalogFile& catalog) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write catalog " + path.string());
  write_catalog(os, catalog);
}

nlohmann::json coverage_to_json(const CoverageModel::Spec& spec) {
  if (std::holds_alternative<UniformCoverage>(spec)) return {{"type", "uniform"}};
  if (const auto* e = std::get_if<ExposureCoverage>(&spec))
    return {{"type", "exposure"}, {"site_latitude_deg", e->site_latitude_deg}, {"max_zenith_deg", e->max_zenith_deg}};
  const auto& g = std::get<GriddedCoverage>(spec);
  return {{"type", "gridded"}, {"frame", frame_to_string(g.frame)}, {"n_lat", g.n_lat}, {"n_lon", g.n_lon},
          {"values", g.values}};
}

CoverageModel::Spec coverage_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  const auto type = j.value("type", std::string("uniform"));
  if (type == "uniform") return UniformCoverage{};
  if (type == "exposure" || type == "auger") {
    ExposureCoverage e;
    e.site_latitude_deg = j.value("site_latitude_deg", e.site_latitude_deg);
    e.max_zenith_deg = j.value("max_zenith_deg", e.max_zenith_deg);
    return e;
  }
  if (type == "gridded") {
    GriddedCoverage g;
    g.frame = frame_from_string(j.value("frame", std::string("galactic")));
    if (j.contains("file")) {
      // One CSV row per latitude band, south to north.
      auto path = std::filesystem::path(j.at("file").get<std::string>());
      if (path.is_relative()) path = base / path;
      std::ifstream is(path);
      if (!is) throw DataError("cannot open coverage table " + path.string());
      std::string line;
      while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::size_t cols = 0;
        for (std::string f; std::getline(ss, f, ',');) {
          g.values.push_back(parse_number(trim(f), g.n_lat + 1));
          ++cols;
        }
        if (g.n_lat == 0) g.n_lon = cols;
        else if (cols != g.n_lon) throw DataError("coverage table " + path.string() + ": ragged rows");
        ++g.n_lat;
      }
    } else {
      g.n_lat = j.at("n_lat").get<std::size_t>();
      g.n_lon = j.at("n_lon").get<std::size_t>();
      g.values = j.at("values").get<std::vector<double>>();
    }
    return g;
  }
  throw ConfigError("unknown coverage type '" + type + "' (expected uniform, exposure or gridded)");
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  try {
    RunConfig c;
    if (j.contains("frame")) {
      const auto& f = j.at("frame");
      c.frame.bandwidth = f.value("bandwidth", c.frame.bandwidth);
      c.frame.spline_order = f.value("spline_order", c.frame.spline_order);
      c.frame.max_scale = f.value("max_scale", c.frame.max_scale);
    }
    if (j.contains("coverage")) c.coverage = coverage_from_json(j.at("coverage"), base);
    if (j.contains("methods"))
      for (const auto& m : j.at("methods")) c.methods.push_back(MethodConfig::from_json(m));
    if (j.contains("alternative")) c.alternative = alternative_from_json(j.at("alternative"));
    c.n = j.value("n", c.n);
    c.replicates = j.value("replicates", c.replicates);
    c.alt_replicates = j.value("alt_replicates", c.alt_replicates);
    c.min_replicates = j.value("min_replicates", c.min_replicates);
    c.alpha = j.value("alpha", c.alpha);
    c.randomized_ties = j.value("tie_break", std::string("conservative")) == "randomized";
    if (j.contains("seed")) {
      c.seed = j.at("seed").get<std::uint64_t>();
      c.seed_given = true;
    }
    c.threads = j.value("threads", c.threads);
    c.table_dir = j.value("table_dir", c.table_dir.string());

    if (!(c.frame.bandwidth > 1.0)) throw ConfigError("frame.bandwidth must exceed 1");
    if (c.frame.spline_order < 1) throw ConfigError("frame.spline_order must be >= 1");
    if (c.frame.max_scale < 1 || c.frame.max_scale > 9) throw ConfigError("frame.max_scale must lie in [1, 9]");
    if (c.n < 2) throw ConfigError("n must be >= 2");
    if (c.replicates < 1) throw ConfigError("replicates must be >= 1");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    const auto tie = j.value("tie_break", std::string("conservative"));
    if (tie != "conservative" && tie != "randomized") throw ConfigError("tie_break must be conservative or randomized");
    for (const auto& m : c.methods) m.validate(c.frame.max_scale);
    return c;
  } catch (const ConfigError&) {
    throw;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const std::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j{{"frame", {{"bandwidth", frame.bandwidth}, {"spline_order", frame.spline_order}, {"max_scale", frame.max_scale}}},
                   {"coverage", coverage_to_json(coverage)},
                   {"n", n},
                   {"replicates", replicates},
                   {"alt_replicates", alt_replicates},
                   {"min_replicates", min_replicates},
                   {"alpha", alpha},
                   {"tie_break", randomized_ties ? "randomized" : "conservative"},
                   {"table_dir", table_dir.string()}};
  auto ms = nlohmann::json::array();
  for (const auto& m : methods) ms.push_back(m.to_json());
  j["methods"] = ms;
  if (alternative) j["alternative"] = alternative_to_json(*alternative);
  if (seed_given) j["seed"] = seed;
  return j;
}

std::string RunConfig::hash() const {
  auto j = to_json();
  j.erase("seed");
  j.erase("table_dir");
  return hex64(fnv1a64(j.dump()));
}

std::shared_ptr<const NeedletFrame> RunConfig::build_frame() const {
  return neediso::build_frame(WindowFunction(frame.bandwidth, frame.spline_order), frame.max_scale);
}

std::shared_ptr<const CoverageModel> RunConfig::build_coverage() const {
  try {
    return std::make_shared<const CoverageModel>(coverage);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("coverage: ") + e.what());
  }
}

std::filesystem::path table_path(const std::filesystem::path& dir, const MethodConfig& method, std::size_t n,
                                 const CoverageModel& coverage, const NeedletFrame& frame) {
  std::uint64_t h = fnv1a64(method.to_json().dump());
  const auto cov_id = coverage.id();
  h = fnv1a64(cov_id.data(), cov_id.size(), h);
  const auto fh = frame.hash();
  h = fnv1a64(&fh, sizeof fh, h);
  std::string name = to_string(method.method);
  if (method.method == Method::Multiple || method.method == Method::PlugIn) name += "-p" + to_string(method.norm);
  name += "-n" + std::to_string(n) + "-" + hex64(h).substr(0, 12) + ".ndt";
  return dir / name;
}

NullDistributionTable load_matching_table(const std::filesystem::path& path, const MethodConfig& method,
                                          std::size_t n, const CoverageModel& coverage, const NeedletFrame& frame,
                                          std::size_t min_replicates) {
  if (!std::filesystem::exists(path))
    throw DataError("no calibration table at " + path.string() + " for " + to_string(method.method) + " with n = " +
                    std::to_string(n) + "; run `neediso calibrate` with this config and n first");
  try {
    auto table = NullDistributionTable::load(path);
    check_table(table, method.method, method.norm, n, coverage.id(), min_replicates);
    if (table.meta().frame_hash != hex64(frame.hash()))
      throw std::invalid_argument("table was built with a different needlet frame; rebuild it with `calibrate`");
    if (table.meta().config_hash != method.hash())
      throw std::invalid_argument("table method settings differ from the config; rebuild it with `calibrate`");
    return table;
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace neediso
