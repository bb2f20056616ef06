#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "neediso/density.hpp"

namespace neediso {

enum class Method { Multiple, PlugIn, NN, TwoPC };

std::string to_string(Method m);
Method method_from_string(const std::string& tag);

struct TableMetadata {
  int version = 1;
  Method method = Method::Multiple;
  Norm norm = Norm::L2Star;
  std::size_t n = 0;
  std::string coverage_id;
  std::string frame_hash;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::vector<double> delta0_deg;  // TwoPC only, one per column

  nlohmann::json to_json() const;
  static TableMetadata from_json(const nlohmann::json& j);
};

/// R x C matrix of null statistics (one row per replicate) with per-column
/// sorted copies for O(log R) upper-tail counts.
class NullDistributionTable {
 public:
  NullDistributionTable(TableMetadata meta, std::size_t rows, std::vector<double> data);

  const TableMetadata& meta() const { return meta_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return meta_.columns.size(); }

  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const { return std::span(data_).subspan(r * cols(), cols()); }
  std::span<const double> sorted_column(std::size_t c) const { return sorted_[c]; }

  /// #{replicates with value >= v} in column c.
  std::size_t count_at_least(std::size_t c, double v) const;
  /// #{replicates with value > v} in column c.
  std::size_t count_greater(std::size_t c, double v) const;

  /// Content hash over header and data.
  std::string id() const;

  std::string serialize() const;
  static NullDistributionTable deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static NullDistributionTable load(const std::filesystem::path& path);
  void write_csv(std::ostream& os) const;

 private:
  TableMetadata meta_;
  std::size_t rows_;
  std::vector<double> data_;
  std::vector<std::vector<double>> sorted_;
};

/// Upper-tail rank r = #{table >= value}; the quantity behind every p-value.
inline std::size_t table_rank(const NullDistributionTable& table, std::size_t column, double value) {
  return table.count_at_least(column, value);
}

}  // namespace neediso
