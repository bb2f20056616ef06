#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "neediso/coverage.hpp"
#include "neediso/isotropy.hpp"
#include "neediso/needlet_frame.hpp"
#include "neediso/simulator.hpp"

namespace neediso {

inline constexpr const char* kToolVersion = "1.0.0";

/// Malformed or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or invalid input data: catalogs, tables (CLI exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Text catalog: "lon_deg,lat_deg[,energy_eV]" lines after an optional
/// "# frame=galactic|equatorial" header. Directions are held in the Galactic frame.
struct CatalogFile {
  FrameOfReference frame = FrameOfReference::Galactic;
  Catalog directions;
  std::vector<double> energies;  // empty, or one per event
};

CatalogFile read_catalog(std::istream& is);
CatalogFile read_catalog(const std::filesystem::path& path);
/// Writes in `frame` with 17 significant digits so values round-trip.
void write_catalog(std::ostream& os, const CatalogFile& catalog);
void write_catalog(const std::filesystem::path& path, const CatalogFile& catalog);

struct FrameConfig {
  double bandwidth = 2.0;
  int spline_order = 15;
  int max_scale = 7;
};

/// Everything a command needs, read from one JSON document.
struct RunConfig {
  FrameConfig frame;
  CoverageModel::Spec coverage = UniformCoverage{};
  std::vector<MethodConfig> methods;
  std::optional<AlternativeSpec> alternative;
  std::size_t n = 100;
  std::size_t replicates = 10000;      // null-table size
  std::size_t alt_replicates = 1000;   // power / ROC replicates
  std::size_t min_replicates = 1000;
  double alpha = 0.05;
  bool randomized_ties = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 0;
  std::filesystem::path table_dir = "tables";

  /// `base` resolves relative file references (gridded coverage tables).
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  /// Hash of the canonical JSON form (seed excluded).
  std::string hash() const;

  std::shared_ptr<const NeedletFrame> build_frame() const;
  std::shared_ptr<const CoverageModel> build_coverage() const;
};

nlohmann::json coverage_to_json(const CoverageModel::Spec& spec);
CoverageModel::Spec coverage_from_json(const nlohmann::json& j, const std::filesystem::path& base = {});

/// Canonical table location for (config, n, coverage, frame).
std::filesystem::path table_path(const std::filesystem::path& dir, const MethodConfig& method, std::size_t n,
                                 const CoverageModel& coverage, const NeedletFrame& frame);

/// Loads a table and verifies it matches the request; DataError otherwise.
NullDistributionTable load_matching_table(const std::filesystem::path& path, const MethodConfig& method,
                                          std::size_t n, const CoverageModel& coverage, const NeedletFrame& frame,
                                          std::size_t min_replicates);

}  // namespace neediso
