#include "neediso/isotropy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "neediso/hashing.hpp"

namespace neediso {

int jstar(std::size_t n) {
  if (n < 2) throw std::invalid_argument("jstar: need n >= 2");
  const double nn = static_cast<double>(n);
  const int j = static_cast<int>(std::floor(0.5 * std::log2(nn / std::log(nn))));
  return std::max(j, 1);
}

namespace {

std::string delta_column(double deg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "delta=%.4f", deg);
  return buf;
}

}  // namespace

void MethodConfig::validate(int frame_max_scale) const {
  switch (method) {
    case Method::Multiple:
      if (max_scale < 1) throw std::invalid_argument("multiple: max_scale must be >= 1");
      if (max_scale + (norm == Norm::L2Star ? 1 : 0) > frame_max_scale)
        throw std::invalid_argument("multiple: max_scale " + std::to_string(max_scale) + " with norm " +
                                    to_string(norm) + " exceeds the frame's finest scale " +
                                    std::to_string(frame_max_scale));
      break;
    case Method::PlugIn:
      if (norm == Norm::L2Star) throw std::invalid_argument("plugin: norm 2star applies to linear estimates only");
      if (plugin_jstars.empty()) throw std::invalid_argument("plugin: no J* columns");
      for (int j : plugin_jstars)
        if (j < 0 || j > frame_max_scale) throw std::invalid_argument("plugin: J* out of frame range");
      if (!(rule.lambda >= 0.0) || !(rule.rho > 0.0)) throw std::invalid_argument("plugin: invalid threshold rule");
      break;
    case Method::NN: break;
    case Method::TwoPC:
      if (delta0_deg.empty()) throw std::invalid_argument("twopc: no delta0 values");
      for (double d : delta0_deg)
        if (!(d >= 0.0 && d <= 180.0)) throw std::invalid_argument("twopc: delta0 must lie in [0, 180] degrees");
      break;
  }
}

std::vector<std::string> MethodConfig::column_names() const {
  std::vector<std::string> cols;
  switch (method) {
    case Method::Multiple:
      for (int j = 1; j <= max_scale; ++j) cols.push_back("j=" + std::to_string(j));
      break;
    case Method::PlugIn:
      for (int j : plugin_jstars) cols.push_back(j == 0 ? "J*=auto" : "J*=" + std::to_string(j));
      break;
    case Method::NN: cols.push_back("W"); break;
    case Method::TwoPC:
      for (double d : delta0_deg) cols.push_back(delta_column(d));
      break;
  }
  return cols;
}

nlohmann::json MethodConfig::to_json() const {
  nlohmann::json j{{"method", to_string(method)}};
  switch (method) {
    case Method::Multiple:
      j["norm"] = to_string(norm);
      j["max_scale"] = max_scale;
      break;
    case Method::PlugIn:
      j["norm"] = to_string(norm);
      j["jstars"] = plugin_jstars;
      j["lambda"] = rule.lambda;
      j["rho"] = rule.rho;
      j["standard_error"] = rule.standard_error;
      break;
    case Method::NN: break;
    case Method::TwoPC: j["delta0_deg"] = delta0_deg; break;
  }
  return j;
}

MethodConfig MethodConfig::from_json(const nlohmann::json& j) {
  MethodConfig c;
  c.method = method_from_string(j.at("method").get<std::string>());
  if (j.contains("norm")) c.norm = norm_from_string(j.at("norm").get<std::string>());
  if (c.method == Method::PlugIn && !j.contains("norm")) c.norm = Norm::L2;
  c.max_scale = j.value("max_scale", c.max_scale);
  c.plugin_jstars = j.value("jstars", c.plugin_jstars);
  c.rule.lambda = j.value("lambda", c.rule.lambda);
  c.rule.rho = j.value("rho", c.rule.rho);
  c.rule.standard_error = j.value("standard_error", c.rule.standard_error);
  c.delta0_deg = j.value("delta0_deg", c.delta0_deg);
  return c;
}

std::string MethodConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

double nn_transform(double nn_distance, std::size_t n) {
  return 1.0 - std::pow(0.5 * (1.0 + std::cos(nn_distance)), static_cast<double>(n) - 1.0);
}

double nn_statistic(std::span<const UnitDirection> catalog) {
  const std::size_t n = catalog.size();
  if (n < 2) throw std::invalid_argument("nn_statistic: need at least two events");
  // Track the largest cosine; (1 + cos y)/2 is then exact without an acos round trip.
  std::vector<double> best(n, -1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) {
      const double c = catalog[i].dot(catalog[k]);
      best[i] = std::max(best[i], c);
      best[k] = std::max(best[k], c);
    }
  const double power = static_cast<double>(n) - 1.0;
  double sum = 0.0;
  for (double c : best) sum += 1.0 - std::pow(0.5 * (1.0 + std::clamp(c, -1.0, 1.0)), power);
  const double nn = static_cast<double>(n);
  return std::sqrt(12.0 * nn) * (0.5 - sum / nn);
}

std::size_t twopc_brute_force(std::span<const UnitDirection> catalog, double delta0) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < catalog.size(); ++i)
    for (std::size_t k = i + 1; k < catalog.size(); ++k)
      if (geodesic_distance(catalog[i], catalog[k]) <= delta0) ++count;
  return count;
}

std::size_t twopc_statistic(std::span<const UnitDirection> catalog, double delta0) {
  if (!(delta0 >= 0.0 && delta0 <= kPi)) throw std::invalid_argument("twopc_statistic: delta0 outside [0, pi]");
  const std::size_t n = catalog.size();
  std::vector<std::pair<double, std::size_t>> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = {catalog[i].colatitude(), i};
  std::sort(order.begin(), order.end());
  // The colatitude gap never exceeds the geodesic distance, so pairs further
  // apart in colatitude than delta0 can be skipped.
  const double reach = delta0 + 1e-12;
  std::size_t count = 0;
  for (std::size_t a = 0; a < n; ++a) {
    const auto& u = catalog[order[a].second];
    for (std::size_t b = a + 1; b < n && order[b].first - order[a].first <= reach; ++b)
      if (geodesic_distance(u, catalog[order[b].second]) <= delta0) ++count;
  }
  return count;
}

std::vector<std::size_t> twopc_counts(std::span<const UnitDirection> catalog, std::span<const double> delta0) {
  std::vector<double> d;
  d.reserve(catalog.size() * (catalog.size() - (catalog.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < catalog.size(); ++i)
    for (std::size_t k = i + 1; k < catalog.size(); ++k) d.push_back(geodesic_distance(catalog[i], catalog[k]));
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  out.reserve(delta0.size());
  for (double r : delta0) out.push_back(static_cast<std::size_t>(std::upper_bound(d.begin(), d.end(), r) - d.begin()));
  return out;
}

StatisticsEngine::StatisticsEngine(std::shared_ptr<const NeedletFrame> frame,
                                   std::shared_ptr<const CoverageModel> coverage)
    : frame_(std::move(frame)), coverage_(std::move(coverage)) {
  if (!frame_ || !coverage_) throw std::invalid_argument("StatisticsEngine: null frame or coverage");
  g_lm_ = coverage_->multipoles(frame_->band(frame_->max_scale()).hi);
}

std::vector<double> StatisticsEngine::multiple(std::span<const UnitDirection> catalog, Norm norm, int max_scale) const {
  const std::size_t n = catalog.size();
  if (n < 2) throw std::invalid_argument("multiple: need at least two events");
  const int top = max_scale + (norm == Norm::L2Star ? 1 : 0);
  if (max_scale < 1 || top > frame_->max_scale()) throw std::invalid_argument("multiple: scale beyond frame");
  const auto s = point_multipoles(catalog, frame_->band(top).hi);
  std::vector<double> out;
  out.reserve(max_scale);
  for (int j = 1; j <= max_scale; ++j) {
    if (norm == Norm::L2Star) {
      out.push_back(unbiased_l2(s, n, g_lm_, *frame_, j));
    } else {
      out.push_back(lp_distance(linear_estimate(s, n, *frame_, j), *coverage_, norm));
    }
  }
  return out;
}

std::vector<double> StatisticsEngine::plugin(std::span<const UnitDirection> catalog, Norm norm,
                                             const ThresholdRule& rule, std::span<const int> jstars) const {
  const std::size_t n = catalog.size();
  if (n < 2) throw std::invalid_argument("plugin: need at least two events");
  if (norm == Norm::L2Star) throw std::invalid_argument("plugin: norm 2star applies to linear estimates only");
  const int automatic = plugin_max_scale(n, rule.rho);
  int need = 0;
  for (int j : jstars) need = std::max(need, j == 0 ? automatic : j);
  if (need > frame_->max_scale())
    throw std::invalid_argument("plugin: J* = " + std::to_string(need) + " exceeds the frame's finest scale");
  std::optional<NeedletCoefficientSet> coeffs;
  if (need >= 1)
    coeffs = coefficients_from_multipoles(*frame_, point_multipoles(catalog, 2 * frame_->band(need).hi), n, need);
  std::vector<double> out;
  out.reserve(jstars.size());
  for (int j : jstars) {
    const int J = j == 0 ? automatic : j;
    const auto est = J >= 1 ? plugin_estimate(*coeffs, *frame_, rule, n, J) : constant_density();
    out.push_back(lp_distance(est, *coverage_, norm));
  }
  return out;
}

std::vector<double> StatisticsEngine::row(const MethodConfig& config, std::span<const UnitDirection> catalog) const {
  switch (config.method) {
    case Method::Multiple: return multiple(catalog, config.norm, config.max_scale);
    case Method::PlugIn: return plugin(catalog, config.norm, config.rule, config.plugin_jstars);
    case Method::NN: return {nn_statistic(catalog)};
    case Method::TwoPC: {
      std::vector<double> radii;
      for (double d : config.delta0_deg) radii.push_back(deg_to_rad(d));
      std::vector<double> out;
      for (auto c : twopc_counts(catalog, radii)) out.push_back(static_cast<double>(c));
      return out;
    }
  }
  throw std::logic_error("row: unknown method");
}

double empirical_p_value(const NullDistributionTable& table, std::size_t column, double statistic,
                         std::optional<double> tie_uniform) {
  const double denom = static_cast<double>(table.rows()) + 1.0;
  const auto at_least = table.count_at_least(column, statistic);
  if (!tie_uniform) return (static_cast<double>(at_least) + 1.0) / denom;
  const auto greater = table.count_greater(column, statistic);
  const double ties = static_cast<double>(at_least - greater);
  return (static_cast<double>(greater) + *tie_uniform * (ties + 1.0)) / denom;
}

nlohmann::json TestDecision::to_json() const {
  nlohmann::json j{{"method", to_string(method)},
                   {"jstar", jstar},
                   {"statistics", statistics},
                   {"p_value", p_value},
                   {"alpha", alpha},
                   {"reject", reject},
                   {"table_id", table_id},
                   {"config_hash", config_hash}};
  if (method == Method::Multiple || method == Method::PlugIn) j["norm"] = to_string(norm);
  if (!scale_p_values.empty()) j["scale_p_values"] = scale_p_values;
  if (method == Method::Multiple) j["fired_scale"] = fired_scale;
  return j;
}

MinPCalibrator::MinPCalibrator(const NullDistributionTable& table, std::vector<std::size_t> columns)
    : table_(&table), columns_(std::move(columns)) {
  if (columns_.empty()) throw std::invalid_argument("MinPCalibrator: no columns");
  for (auto c : columns_)
    if (c >= table.cols()) throw std::out_of_range("MinPCalibrator: column beyond table");
  min_rank_.resize(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    std::size_t k = table.rows();
    for (auto c : columns_) k = std::min(k, table.count_at_least(c, table.at(r, c)));
    min_rank_[r] = {k, r};
  }
  std::sort(min_rank_.begin(), min_rank_.end());
}

MinPCalibrator::Result MinPCalibrator::evaluate(std::span<const double> statistics,
                                                std::optional<double> tie_uniform) const {
  if (statistics.size() != columns_.size()) throw std::invalid_argument("MinPCalibrator: one statistic per column");
  const double denom = static_cast<double>(table_->rows()) + 1.0;
  Result out;
  out.column_p.resize(columns_.size());
  std::size_t obs_rank = table_->rows() + 1;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const std::size_t a = table_->count_at_least(columns_[i], statistics[i]) + 1;
    out.column_p[i] = static_cast<double>(a) / denom;
    if (a < obs_rank) {
      obs_rank = a;
      out.argmin = i;
    }
  }
  out.min_p = static_cast<double>(obs_rank) / denom;

  // Pooling adds at most one to a replicate's rank (when the observation is
  // >= its value), so only replicates with table rank obs_rank - 1 or
  // obs_rank need their pooled rank recomputed.
  auto pooled_rank = [&](std::size_t r) {
    std::size_t k = table_->rows() + 1;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const double x = table_->at(r, columns_[i]);
      k = std::min(k, table_->count_at_least(columns_[i], x) + (statistics[i] >= x ? 1 : 0));
    }
    return k;
  };
  const auto first_near = std::lower_bound(min_rank_.begin(), min_rank_.end(),
                                           std::pair<std::size_t, std::size_t>{obs_rank > 0 ? obs_rank - 1 : 0, 0});
  const auto past_near = std::lower_bound(min_rank_.begin(), min_rank_.end(),
                                          std::pair<std::size_t, std::size_t>{obs_rank + 1, 0});
  double below = static_cast<double>(first_near - min_rank_.begin());
  double ties = 0.0;
  for (auto it = first_near; it != past_near; ++it) {
    const auto k = pooled_rank(it->second);
    if (k < obs_rank) below += 1.0;
    else if (k == obs_rank) ties += 1.0;
  }
  out.adjusted_p = tie_uniform ? (below + *tie_uniform * (ties + 1.0)) / denom : (below + ties + 1.0) / denom;
  return out;
}

void check_table(const NullDistributionTable& table, Method method, Norm norm, std::size_t n,
                 const std::string& coverage_id, std::size_t min_replicates) {
  const auto& m = table.meta();
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("calibration table mismatch: " + what + "; rebuild it with `calibrate`");
  };
  if (m.method != method) fail("table is for method " + to_string(m.method) + ", not " + to_string(method));
  if ((method == Method::Multiple || method == Method::PlugIn) && m.norm != norm)
    fail("table norm " + to_string(m.norm) + " differs from requested " + to_string(norm));
  if (m.n != n) fail("table built for n = " + std::to_string(m.n) + " but the catalog has " + std::to_string(n) + " events");
  if (m.coverage_id != coverage_id) fail("table coverage '" + m.coverage_id + "' differs from '" + coverage_id + "'");
  if (table.rows() < min_replicates)
    fail("table has " + std::to_string(table.rows()) + " replicates, fewer than the required " +
         std::to_string(min_replicates));
}

TestDecision multiple_decide(std::span<const double> per_scale, const MinPCalibrator& calibrator, int jstar,
                             const NullDistributionTable& table, const DecisionOptions& opts) {
  if (jstar < 1 || static_cast<std::size_t>(jstar) > per_scale.size())
    throw std::invalid_argument("multiple_decide: J* outside the available scales");
  TestDecision d;
  d.method = Method::Multiple;
  d.norm = table.meta().norm;
  d.jstar = jstar;
  d.statistics.assign(per_scale.begin(), per_scale.begin() + jstar);
  if (calibrator.columns().size() != static_cast<std::size_t>(jstar))
    throw std::invalid_argument("multiple_decide: calibrator built for a different J*");
  auto res = calibrator.evaluate(d.statistics, opts.tie_uniform);
  d.scale_p_values = std::move(res.column_p);
  d.fired_scale = static_cast<int>(res.argmin) + 1;
  d.p_value = res.adjusted_p;
  d.alpha = opts.alpha;
  d.reject = d.p_value <= opts.alpha;
  d.table_id = table.id();
  d.config_hash = table.meta().config_hash;
  return d;
}

TestDecision multiple_decide(std::span<const double> per_scale, const NullDistributionTable& table, int jstar,
                             const DecisionOptions& opts) {
  if (table.meta().method != Method::Multiple) throw std::invalid_argument("multiple_decide: not a Multiple table");
  if (table.rows() < opts.min_replicates) throw std::invalid_argument("multiple_decide: table has too few replicates");
  if (jstar < 1 || static_cast<std::size_t>(jstar) > table.cols())
    throw std::invalid_argument("multiple_decide: table lacks scale " + std::to_string(jstar));
  std::vector<std::size_t> cols(jstar);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  return multiple_decide(per_scale, MinPCalibrator(table, cols), jstar, table, opts);
}

TestDecision scalar_decide(Method method, double statistic, const NullDistributionTable& table, std::size_t column,
                           const DecisionOptions& opts) {
  if (table.meta().method != method)
    throw std::invalid_argument("decision: table is for " + to_string(table.meta().method) + ", not " + to_string(method));
  if (table.rows() < opts.min_replicates) throw std::invalid_argument("decision: table has too few replicates");
  if (column >= table.cols()) throw std::out_of_range("decision: column beyond table");
  TestDecision d;
  d.method = method;
  d.norm = table.meta().norm;
  d.statistics = {statistic};
  d.p_value = empirical_p_value(table, column, statistic, opts.tie_uniform);
  d.alpha = opts.alpha;
  d.reject = d.p_value <= opts.alpha;
  d.table_id = table.id();
  d.config_hash = table.meta().config_hash;
  return d;
}

TestDecision nn_decide_asymptotic(double w, const CoverageModel& coverage, const DecisionOptions& opts) {
  if (!coverage.is_uniform())
    throw std::invalid_argument("nn: the asymptotic normal law holds only for uniform coverage; use a table");
  TestDecision d;
  d.method = Method::NN;
  d.statistics = {w};
  d.p_value = 0.5 * std::erfc(w / std::sqrt(2.0));
  d.alpha = opts.alpha;
  d.reject = d.p_value <= opts.alpha;
  d.table_id = "asymptotic";
  return d;
}

ScanResult twopc_scan_pvalue(std::span<const std::size_t> counts, const NullDistributionTable& table,
                             const MinPCalibrator& calibrator) {
  const auto& radii = table.meta().delta0_deg;
  if (table.meta().method != Method::TwoPC || radii.size() != table.cols())
    throw std::invalid_argument("twopc_scan: table is not a TwoPC radius family");
  if (counts.size() != radii.size()) throw std::invalid_argument("twopc_scan: one count per radius required");
  std::vector<double> stats(counts.begin(), counts.end());
  const auto res = calibrator.evaluate(stats);
  ScanResult out;
  out.min_p = res.min_p;
  out.argmin_deg = radii[calibrator.columns()[res.argmin]];
  out.adjusted_p = res.adjusted_p;
  return out;
}

}  // namespace neediso
