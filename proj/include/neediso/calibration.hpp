#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "neediso/isotropy.hpp"
#include "neediso/null_table.hpp"
#include "neediso/rng.hpp"

namespace neediso {

/// Produces the catalog for replicate r. Must be safe to call concurrently.
using CatalogSource = std::function<Catalog(std::size_t replicate)>;

/// Null catalogs of size n from the engine's coverage, replicate r seeded by
/// derive_seed(seed, stream, r).
CatalogSource null_catalogs(const StatisticsEngine& engine, std::size_t n, std::uint64_t seed,
                            Stream stream = Stream::Null);

/// Row-major statistics for `count` catalogs, one block of columns per config.
/// Rows are stored by replicate index, so the result does not depend on the
/// number of worker threads.
std::vector<std::vector<double>> statistic_matrices(const StatisticsEngine& engine,
                                                    std::span<const MethodConfig> configs, std::size_t count,
                                                    const CatalogSource& catalogs, unsigned threads = 0);

/// One null table per config, all computed on the same R null catalogs.
std::vector<NullDistributionTable> build_tables(const StatisticsEngine& engine, std::span<const MethodConfig> configs,
                                                std::size_t n, std::size_t replicates, std::uint64_t seed,
                                                unsigned threads = 0);

NullDistributionTable build_table(const StatisticsEngine& engine, const MethodConfig& config, std::size_t n,
                                  std::size_t replicates, std::uint64_t seed, unsigned threads = 0);

/// One decision rule read off a table: Multiple at a given J* (min-p over
/// scales 1..J*), or a single column for the other methods.
struct StudyColumn {
  Method method;
  Norm norm;
  int jstar;           // Multiple and PlugIn; 0 = automatic / not applicable
  std::string label;   // table column name, or "J*=k" for Multiple
};

std::vector<StudyColumn> study_columns(const MethodConfig& config);

/// p-values of `count` statistic rows (row-major, table width) against
/// `table`, one column per study_columns(config). With randomized ties each
/// row draws its uniforms from derive_seed(tie_seed, TieBreak, row).
std::vector<double> p_value_matrix(const MethodConfig& config, const NullDistributionTable& table,
                                   std::span<const double> statistics, std::size_t count, bool randomized_ties,
                                   std::uint64_t tie_seed);

/// Fraction of entries in column c of a row-major p-value matrix that are <= alpha.
double rejection_rate(std::span<const double> p_values, std::size_t width, std::size_t column, double alpha);

}  // namespace neediso
