#include "neediso/null_table.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "neediso/hashing.hpp"

namespace neediso {

namespace {

constexpr char kMagic[8] = {'N', 'D', 'L', 'T', 'B', 'L', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::Multiple: return "multiple";
    case Method::PlugIn: return "plugin";
    case Method::NN: return "nn";
    case Method::TwoPC: return "twopc";
  }
  return "?";
}

Method method_from_string(const std::string& tag) {
  std::string t = tag;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "multiple") return Method::Multiple;
  if (t == "plugin") return Method::PlugIn;
  if (t == "nn") return Method::NN;
  if (t == "twopc") return Method::TwoPC;
  throw std::invalid_argument("unknown method '" + tag + "' (expected multiple, plugin, nn or twopc)");
}

nlohmann::json TableMetadata::to_json() const {
  return {{"version", version},        {"method", to_string(method)},   {"norm", to_string(norm)},
          {"n", n},                    {"coverage", coverage_id},       {"frame_hash", frame_hash},
          {"config_hash", config_hash}, {"seed", seed},                 {"columns", columns},
          {"delta0_deg", delta0_deg}};
}

TableMetadata TableMetadata::from_json(const nlohmann::json& j) {
  TableMetadata m;
  m.version = j.at("version").get<int>();
  if (m.version != 1) throw std::runtime_error("table: unsupported version " + std::to_string(m.version));
  m.method = method_from_string(j.at("method").get<std::string>());
  m.norm = norm_from_string(j.at("norm").get<std::string>());
  m.n = j.at("n").get<std::size_t>();
  m.coverage_id = j.at("coverage").get<std::string>();
  m.frame_hash = j.at("frame_hash").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.columns = j.at("columns").get<std::vector<std::string>>();
  m.delta0_deg = j.at("delta0_deg").get<std::vector<double>>();
  return m;
}

NullDistributionTable::NullDistributionTable(TableMetadata meta, std::size_t rows, std::vector<double> data)
    : meta_(std::move(meta)), rows_(rows), data_(std::move(data)) {
  const std::size_t c = meta_.columns.size();
  if (c == 0) throw std::invalid_argument("NullDistributionTable: no columns");
  if (data_.size() != rows_ * c) throw std::invalid_argument("NullDistributionTable: data size mismatch");
  sorted_.assign(c, {});
  for (std::size_t j = 0; j < c; ++j) {
    auto& col = sorted_[j];
    col.reserve(rows_);
    for (std::size_t r = 0; r < rows_; ++r) col.push_back(data_[r * c + j]);
    std::sort(col.begin(), col.end());
  }
}

std::size_t NullDistributionTable::count_at_least(std::size_t c, double v) const {
  const auto& col = sorted_.at(c);
  return static_cast<std::size_t>(col.end() - std::lower_bound(col.begin(), col.end(), v));
}

std::size_t NullDistributionTable::count_greater(std::size_t c, double v) const {
  const auto& col = sorted_.at(c);
  return static_cast<std::size_t>(col.end() - std::upper_bound(col.begin(), col.end(), v));
}

std::string NullDistributionTable::id() const { return hex64(fnv1a64(serialize())); }

std::string NullDistributionTable::serialize() const {
  static_assert(std::endian::native == std::endian::little, "table format assumes a little-endian host");
  const std::string header = meta_.to_json().dump();
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, header.size());
  out += header;
  put_u64(out, rows_);
  const std::size_t offset = out.size();
  out.resize(offset + data_.size() * sizeof(double));
  std::memcpy(out.data() + offset, data_.data(), data_.size() * sizeof(double));
  return out;
}

NullDistributionTable NullDistributionTable::deserialize(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("table: bad magic, not a calibration table");
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (bytes.size() < 16 + header_len + 8) throw std::runtime_error("table: truncated header");
  auto meta = TableMetadata::from_json(nlohmann::json::parse(bytes.substr(16, header_len)));
  const std::uint64_t rows = get_u64(bytes, 16 + header_len);
  const std::size_t offset = 16 + header_len + 8;
  const std::size_t count = rows * meta.columns.size();
  if (bytes.size() != offset + count * sizeof(double)) throw std::runtime_error("table: data size mismatch");
  std::vector<double> data(count);
  std::memcpy(data.data(), bytes.data() + offset, count * sizeof(double));
  return NullDistributionTable(std::move(meta), rows, std::move(data));
}

void NullDistributionTable::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("table: cannot write " + path.string());
  const auto bytes = serialize();
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("table: write failed for " + path.string());
}

NullDistributionTable NullDistributionTable::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("table: cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return deserialize(ss.str());
}

void NullDistributionTable::write_csv(std::ostream& os) const {
  os << "replicate";
  for (const auto& c : meta_.columns) os << ',' << c;
  os << '\n';
  os << std::setprecision(17);
  for (std::size_t r = 0; r < rows_; ++r) {
    os << r;
    for (std::size_t c = 0; c < cols(); ++c) os << ',' << at(r, c);
    os << '\n';
  }
}

}  // namespace neediso
