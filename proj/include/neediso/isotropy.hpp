#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "neediso/coverage.hpp"
#include "neediso/density.hpp"
#include "neediso/needlet_frame.hpp"
#include "neediso/null_table.hpp"
#include "neediso/sphere.hpp"

namespace neediso {

/// floor(log2(n / ln n) / 2), clamped below at 1. Throws for n < 2.
int jstar(std::size_t n);

/// What one calibration table (and the matching statistic) measures.
/// Columns: Multiple -> scales 1..max_scale; PlugIn -> one per entry of
/// plugin_jstars (0 = automatic); NN -> "W"; TwoPC -> one per delta0.
struct MethodConfig {
  Method method = Method::Multiple;
  Norm norm = Norm::L2Star;
  int max_scale = 6;
  std::vector<int> plugin_jstars{0};
  ThresholdRule rule;
  std::vector<double> delta0_deg{10.0};

  void validate(int frame_max_scale) const;
  std::vector<std::string> column_names() const;
  nlohmann::json to_json() const;
  static MethodConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

/// Nearest-neighbour statistic W = sqrt(12 n) (1/2 - mean phi(Y_i)),
/// phi(y) = 1 - ((1 + cos y) / 2)^(n-1).
double nn_statistic(std::span<const UnitDirection> catalog);
double nn_transform(double nn_distance, std::size_t n);

/// Pairs at geodesic distance <= delta0 (radians). Colatitude-sorted sweep.
std::size_t twopc_statistic(std::span<const UnitDirection> catalog, double delta0);
/// Reference double loop over all pairs.
std::size_t twopc_brute_force(std::span<const UnitDirection> catalog, double delta0);
/// Counts for several radii from one sorted list of pair distances.
std::vector<std::size_t> twopc_counts(std::span<const UnitDirection> catalog, std::span<const double> delta0);

/// Computes needlet statistics against a fixed coverage density, caching g_lm.
class StatisticsEngine {
 public:
  StatisticsEngine(std::shared_ptr<const NeedletFrame> frame, std::shared_ptr<const CoverageModel> coverage);

  const NeedletFrame& frame() const { return *frame_; }
  const CoverageModel& coverage() const { return *coverage_; }

  /// d(f_j, g) for j = 1..max_scale, f_j the linear estimate through scale j.
  std::vector<double> multiple(std::span<const UnitDirection> catalog, Norm norm, int max_scale) const;
  /// d(plug-in estimate, g) for each requested J* (0 = automatic rule).
  std::vector<double> plugin(std::span<const UnitDirection> catalog, Norm norm, const ThresholdRule& rule,
                             std::span<const int> jstars) const;

  /// One table row for `config`.
  std::vector<double> row(const MethodConfig& config, std::span<const UnitDirection> catalog) const;

 private:
  std::shared_ptr<const NeedletFrame> frame_;
  std::shared_ptr<const CoverageModel> coverage_;
  HarmonicCoefficients g_lm_;  // through the frame's widest band
};

/// Empirical upper-tail p-value (r + 1) / (R + 1), r = #{null >= s}. With a
/// tie uniform U, ties are split at random: (#{null > s} + U (#{null == s} + 1)) / (R + 1),
/// which is exactly uniform under the null; U = 1 recovers the conservative form.
double empirical_p_value(const NullDistributionTable& table, std::size_t column, double statistic,
                         std::optional<double> tie_uniform = std::nullopt);

struct DecisionOptions {
  double alpha = 0.05;
  std::optional<double> tie_uniform;  // nullopt: conservative ties
  std::size_t min_replicates = 1000;
};

struct TestDecision {
  Method method = Method::Multiple;
  Norm norm = Norm::L2Star;
  int jstar = 0;
  std::vector<double> statistics;
  std::vector<double> scale_p_values;  // Multiple / scan: per-column p-values
  int fired_scale = 0;                 // Multiple: scale with the smallest p-value
  double p_value = 1.0;
  double alpha = 0.05;
  bool reject = false;
  std::string table_id;
  std::string config_hash;

  nlohmann::json to_json() const;
};

/// Min-p calibration over a set of table columns. The observation and the R
/// replicates are ranked as one exchangeable pool: a member's column p-value is
/// #{pool >= it} / (R + 1), and the adjusted p-value is the pool fraction whose
/// smallest column p-value is <= the observation's. Replicate ranks against
/// the table are precomputed, so a decision costs O(C log R).
class MinPCalibrator {
 public:
  struct Result {
    std::vector<double> column_p;  // observation's per-column p-values
    std::size_t argmin = 0;        // index into the calibrated columns
    double min_p = 1.0;
    double adjusted_p = 1.0;
  };

  MinPCalibrator(const NullDistributionTable& table, std::vector<std::size_t> columns);

  std::size_t replicates() const { return table_->rows(); }
  const std::vector<std::size_t>& columns() const { return columns_; }

  /// `statistics` holds one value per calibrated column, in order. With a tie
  /// uniform U, pool members sharing the observation's min-p count U-weighted.
  Result evaluate(std::span<const double> statistics, std::optional<double> tie_uniform = std::nullopt) const;

 private:
  const NullDistributionTable* table_;
  std::vector<std::size_t> columns_;
  std::vector<std::pair<std::size_t, std::size_t>> min_rank_;  // (min_c #{table >= x_rc}, r), sorted
};

/// Checks a table against the statistic it will calibrate. Throws
/// std::invalid_argument with an actionable message on mismatch.
void check_table(const NullDistributionTable& table, Method method, Norm norm, std::size_t n,
                 const std::string& coverage_id, std::size_t min_replicates);

/// Multiple test at J* from per-scale statistics j = 1..J* (extra entries ignored).
TestDecision multiple_decide(std::span<const double> per_scale, const MinPCalibrator& calibrator, int jstar,
                             const NullDistributionTable& table, const DecisionOptions& opts);
TestDecision multiple_decide(std::span<const double> per_scale, const NullDistributionTable& table, int jstar,
                             const DecisionOptions& opts);

/// Single-column decisions (PlugIn, NN, TwoPC).
TestDecision scalar_decide(Method method, double statistic, const NullDistributionTable& table, std::size_t column,
                           const DecisionOptions& opts);

/// NN decision from the standard-normal upper tail; uniform coverage only.
TestDecision nn_decide_asymptotic(double w, const CoverageModel& coverage, const DecisionOptions& opts);

struct ScanResult {
  double min_p = 1.0;       // naive: smallest per-radius p-value
  double argmin_deg = 0.0;  // radius attaining it
  double adjusted_p = 1.0;  // same scan applied to every null replicate
};

/// TwoPC over a grid of radii. The table must carry one column per radius.
ScanResult twopc_scan_pvalue(std::span<const std::size_t> counts, const NullDistributionTable& table,
                             const MinPCalibrator& calibrator);

}  // namespace neediso
