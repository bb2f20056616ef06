#include "neediso/calibration.hpp"

#include <stdexcept>

#include "neediso/hashing.hpp"

namespace neediso {

CatalogSource null_catalogs(const StatisticsEngine& engine, std::size_t n, std::uint64_t seed, Stream stream) {
  const CoverageModel* cov = &engine.coverage();
  return [cov, n, seed, stream](std::size_t r) {
    auto rng = make_rng(seed, stream, r);
    return sample_null(*cov, n, rng);
  };
}

std::vector<std::vector<double>> statistic_matrices(const StatisticsEngine& engine,
                                                    std::span<const MethodConfig> configs, std::size_t count,
                                                    const CatalogSource& catalogs, unsigned threads) {
  std::vector<std::size_t> widths;
  for (const auto& c : configs) {
    c.validate(engine.frame().max_scale());
    widths.push_back(c.column_names().size());
  }
  std::vector<std::vector<double>> out(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) out[i].assign(count * widths[i], 0.0);
  parallel_for(
      count,
      [&](std::size_t r) {
        const auto catalog = catalogs(r);
        for (std::size_t i = 0; i < configs.size(); ++i) {
          const auto row = engine.row(configs[i], catalog);
          if (row.size() != widths[i]) throw std::logic_error("statistic row width mismatch");
          std::copy(row.begin(), row.end(), out[i].begin() + static_cast<std::ptrdiff_t>(r * widths[i]));
        }
      },
      threads);
  return out;
}

std::vector<NullDistributionTable> build_tables(const StatisticsEngine& engine, std::span<const MethodConfig> configs,
                                                std::size_t n, std::size_t replicates, std::uint64_t seed,
                                                unsigned threads) {
  if (replicates == 0) throw std::invalid_argument("build_table: need at least one replicate");
  if (n < 2) throw std::invalid_argument("build_table: need n >= 2");
  auto data = statistic_matrices(engine, configs, replicates, null_catalogs(engine, n, seed), threads);
  std::vector<NullDistributionTable> tables;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    TableMetadata meta;
    meta.method = configs[i].method;
    meta.norm = configs[i].norm;
    meta.n = n;
    meta.coverage_id = engine.coverage().id();
    meta.frame_hash = hex64(engine.frame().hash());
    meta.config_hash = configs[i].hash();
    meta.seed = seed;
    meta.columns = configs[i].column_names();
    if (configs[i].method == Method::TwoPC) meta.delta0_deg = configs[i].delta0_deg;
    tables.emplace_back(std::move(meta), replicates, std::move(data[i]));
  }
  return tables;
}

NullDistributionTable build_table(const StatisticsEngine& engine, const MethodConfig& config, std::size_t n,
                                  std::size_t replicates, std::uint64_t seed, unsigned threads) {
  return std::move(build_tables(engine, std::span(&config, 1), n, replicates, seed, threads).front());
}

std::vector<StudyColumn> study_columns(const MethodConfig& config) {
  std::vector<StudyColumn> out;
  const auto names = config.column_names();
  switch (config.method) {
    case Method::Multiple:
      for (int j = 1; j <= config.max_scale; ++j) out.push_back({config.method, config.norm, j, "J*=" + std::to_string(j)});
      break;
    case Method::PlugIn:
      for (std::size_t i = 0; i < names.size(); ++i)
        out.push_back({config.method, config.norm, config.plugin_jstars[i], names[i]});
      break;
    case Method::NN:
    case Method::TwoPC:
      for (const auto& name : names) out.push_back({config.method, config.norm, 0, name});
      break;
  }
  return out;
}

std::vector<double> p_value_matrix(const MethodConfig& config, const NullDistributionTable& table,
                                   std::span<const double> statistics, std::size_t count, bool randomized_ties,
                                   std::uint64_t tie_seed) {
  const std::size_t width = table.cols();
  if (statistics.size() != count * width) throw std::invalid_argument("p_value_matrix: statistics shape mismatch");
  const auto columns = study_columns(config);
  std::vector<MinPCalibrator> calibrators;
  if (config.method == Method::Multiple)
    for (int j = 1; j <= config.max_scale; ++j) {
      std::vector<std::size_t> cols(j);
      for (int c = 0; c < j; ++c) cols[c] = static_cast<std::size_t>(c);
      calibrators.emplace_back(table, std::move(cols));
    }
  std::vector<double> out(count * columns.size());
  for (std::size_t r = 0; r < count; ++r) {
    auto rng = make_rng(tie_seed, Stream::TieBreak, r);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto row = statistics.subspan(r * width, width);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::optional<double> u;
      if (randomized_ties) u = unit(rng);
      double p;
      if (config.method == Method::Multiple) p = calibrators[c].evaluate(row.first(c + 1), u).adjusted_p;
      else p = empirical_p_value(table, c, row[c], u);
      out[r * columns.size() + c] = p;
    }
  }
  return out;
}

double rejection_rate(std::span<const double> p_values, std::size_t width, std::size_t column, double alpha) {
  const std::size_t rows = p_values.size() / width;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < rows; ++r) hits += p_values[r * width + column] <= alpha ? 1 : 0;
  return rows == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(rows);
}

}  // namespace neediso
