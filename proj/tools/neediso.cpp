// Command-line front end: simulate | calibrate | test | power | roc.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "neediso/calibration.hpp"
#include "neediso/config.hpp"
#include "neediso/hashing.hpp"
#include "neediso/simulator.hpp"

namespace fs = std::filesystem;
using namespace neediso;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::optional<std::size_t> replicates;
  std::optional<unsigned> threads;
  std::optional<double> alpha;
  std::string table_dir;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
  cmd->add_option("--n", c.n, "Catalog size (overrides the config)");
  cmd->add_option("--replicates", c.replicates, "Null-table replicates (overrides the config)");
  cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--alpha", c.alpha, "Nominal level");
  cmd->add_option("--tables", c.table_dir, "Directory holding calibration tables");
}

RunConfig resolve(const Common& c) {
  auto cfg = RunConfig::load(c.config_path);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.seed_given = true;
  }
  if (!cfg.seed_given) {
    // Record an auto-generated seed so the run can be replayed.
    cfg.seed = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
    cfg.seed_given = true;
    std::cerr << "no seed given; using seed " << cfg.seed << "\n";
  }
  if (c.n) cfg.n = *c.n;
  if (c.replicates) cfg.replicates = *c.replicates;
  if (c.threads) cfg.threads = *c.threads;
  if (c.alpha) cfg.alpha = *c.alpha;
  if (!c.table_dir.empty()) cfg.table_dir = c.table_dir;
  if (cfg.n < 2) throw ConfigError("n must be >= 2");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  return cfg;
}

json provenance(const RunConfig& cfg, const NeedletFrame& frame) {
  return {{"tool_version", kToolVersion}, {"config_hash", cfg.hash()}, {"seed", cfg.seed},
          {"frame_hash", hex64(frame.hash())}};
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Common& common, std::size_t count, const std::string& out_dir, const std::string& prefix,
                 bool null_model) {
  const auto cfg = resolve(common);
  const auto frame = cfg.build_frame();
  const auto cov = cfg.build_coverage();
  if (!null_model && !cfg.alternative) throw ConfigError("simulate: config has no \"alternative\"; pass --null for null catalogs");
  fs::create_directories(out_dir);
  std::optional<AlternativeSampler> sampler;
  if (!null_model) sampler.emplace(*cfg.alternative, cov, cfg.seed);
  json files = json::array();
  for (std::size_t r = 0; r < count; ++r) {
    CatalogFile file;
    if (sampler) {
      auto rng = make_rng(cfg.seed, Stream::Alternative, r);
      auto sim = sampler->sample(cfg.n, rng);
      file.directions = std::move(sim.directions);
      file.energies = std::move(sim.energies);
    } else {
      auto rng = make_rng(cfg.seed, Stream::Null, r);
      file.directions = sample_null(*cov, cfg.n, rng);
    }
    std::ostringstream name;
    name << prefix << "_" << std::setw(4) << std::setfill('0') << r << ".csv";
    const auto path = fs::path(out_dir) / name.str();
    write_catalog(path, file);
    files.push_back(path.string());
  }
  auto report = provenance(cfg, *frame);
  report["command"] = "simulate";
  report["files"] = files;
  std::cout << report.dump(2) << "\n";
  return 0;
}

// --------------------------------------------------------------- calibrate

int cmd_calibrate(const Common& common, bool csv) {
  const auto cfg = resolve(common);
  if (cfg.methods.empty()) throw ConfigError("calibrate: config lists no methods");
  const auto frame = cfg.build_frame();
  const auto cov = cfg.build_coverage();
  StatisticsEngine engine(frame, cov);
  const auto tables = build_tables(engine, cfg.methods, cfg.n, cfg.replicates, cfg.seed, cfg.threads);
  fs::create_directories(cfg.table_dir);
  json written = json::array();
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto path = table_path(cfg.table_dir, cfg.methods[i], cfg.n, *cov, *frame);
    tables[i].save(path);
    json entry{{"path", path.string()}, {"table_id", tables[i].id()}, {"method", to_string(cfg.methods[i].method)},
               {"replicates", tables[i].rows()}, {"columns", tables[i].meta().columns}};
    if (csv) {
      auto csv_path = path;
      csv_path.replace_extension(".csv");
      std::ofstream os(csv_path);
      if (!os) throw DataError("cannot write " + csv_path.string());
      tables[i].write_csv(os);
      entry["csv"] = csv_path.string();
    }
    written.push_back(entry);
  }
  auto report = provenance(cfg, *frame);
  report["command"] = "calibrate";
  report["n"] = cfg.n;
  report["coverage"] = cov->id();
  report["tables"] = written;
  std::cout << report.dump(2) << "\n";
  return 0;
}

// -------------------------------------------------------------------- test

int cmd_test(const Common& common, const std::string& catalog_path) {
  auto cfg = resolve(common);
  const auto catalog = read_catalog(fs::path(catalog_path));
  cfg.n = catalog.directions.size();
  if (cfg.n < 2) throw DataError("catalog " + catalog_path + " holds fewer than two events");
  if (cfg.methods.empty()) throw ConfigError("test: config lists no methods");
  const auto frame = cfg.build_frame();
  const auto cov = cfg.build_coverage();
  StatisticsEngine engine(frame, cov);
  DecisionOptions opts;
  opts.alpha = cfg.alpha;
  opts.min_replicates = cfg.min_replicates;
  Rng tie_rng(derive_seed(cfg.seed, Stream::TieBreak, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto tie = [&]() -> std::optional<double> {
    if (!cfg.randomized_ties) return std::nullopt;
    return unit(tie_rng);
  };

  json results = json::array();
  json multiple_grid = json::object();
  for (const auto& m : cfg.methods) {
    const auto table = load_matching_table(table_path(cfg.table_dir, m, cfg.n, *cov, *frame), m, cfg.n, *cov, *frame,
                                           cfg.min_replicates);
    const auto stats = engine.row(m, catalog.directions);
    switch (m.method) {
      case Method::Multiple: {
        json rows = json::array();
        for (int j = 1; j <= m.max_scale; ++j) {
          opts.tie_uniform = tie();
          auto d = multiple_decide(stats, table, j, opts);
          results.push_back(d.to_json());
          rows.push_back({{"jstar", j}, {"p_value", d.p_value}});
        }
        multiple_grid[to_string(m.norm)] = rows;
        break;
      }
      case Method::PlugIn:
        for (std::size_t c = 0; c < stats.size(); ++c) {
          opts.tie_uniform = tie();
          auto d = scalar_decide(Method::PlugIn, stats[c], table, c, opts);
          d.jstar = m.plugin_jstars[c] == 0 ? plugin_max_scale(cfg.n, m.rule.rho) : m.plugin_jstars[c];
          results.push_back(d.to_json());
        }
        break;
      case Method::NN: {
        opts.tie_uniform = tie();
        results.push_back(scalar_decide(Method::NN, stats[0], table, 0, opts).to_json());
        if (cov->is_uniform()) {
          auto j = nn_decide_asymptotic(stats[0], *cov, opts).to_json();
          j["calibration"] = "asymptotic";
          results.push_back(j);
        }
        break;
      }
      case Method::TwoPC: {
        for (std::size_t c = 0; c < stats.size(); ++c) {
          opts.tie_uniform = tie();
          auto j = scalar_decide(Method::TwoPC, stats[c], table, c, opts).to_json();
          j["delta0_deg"] = m.delta0_deg[c];
          results.push_back(j);
        }
        if (stats.size() > 1) {
          std::vector<std::size_t> cols(stats.size()), counts;
          for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = c;
          for (double s : stats) counts.push_back(static_cast<std::size_t>(s));
          const auto scan = twopc_scan_pvalue(counts, table, MinPCalibrator(table, cols));
          results.push_back({{"method", "twopc-scan"},
                             {"min_p_value", scan.min_p},
                             {"argmin_delta0_deg", scan.argmin_deg},
                             {"scan_adjusted_p_value", scan.adjusted_p},
                             {"table_id", table.id()}});
        }
        break;
      }
    }
  }
  auto report = provenance(cfg, *frame);
  report["command"] = "test";
  report["catalog"] = catalog_path;
  report["n"] = cfg.n;
  report["coverage"] = cov->id();
  report["alpha"] = cfg.alpha;
  report["results"] = results;
  if (!multiple_grid.empty()) report["multiple_pvalue_grid"] = multiple_grid;
  std::cout << report.dump(2) << "\n";
  return 0;
}

// ----------------------------------------------------------- power and roc

struct StudyData {
  MethodConfig method;
  std::vector<StudyColumn> columns;
  std::vector<double> p_values;  // alt replicates x columns
};

NullDistributionTable table_for(const RunConfig& cfg, const MethodConfig& m, std::size_t n, const StatisticsEngine& engine,
                                bool build_missing) {
  const auto path = table_path(cfg.table_dir, m, n, engine.coverage(), engine.frame());
  if (!fs::exists(path) && build_missing) return build_table(engine, m, n, cfg.replicates, cfg.seed, cfg.threads);
  return load_matching_table(path, m, n, engine.coverage(), engine.frame(), cfg.min_replicates);
}

std::vector<StudyData> run_study(const RunConfig& cfg, const StatisticsEngine& engine, const AlternativeSpec& alt,
                                 std::size_t n, bool build_missing, std::uint64_t stream_offset) {
  const AlternativeSampler sampler(alt, std::shared_ptr<const CoverageModel>(&engine.coverage(), [](auto*) {}), cfg.seed);
  const auto seed = cfg.seed + stream_offset;
  const auto stats = statistic_matrices(engine, cfg.methods, cfg.alt_replicates, [&](std::size_t r) {
    auto rng = make_rng(seed, Stream::Alternative, r);
    return sampler.sample(n, rng).directions;
  }, cfg.threads);
  std::vector<StudyData> out;
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    const auto table = table_for(cfg, cfg.methods[i], n, engine, build_missing);
    out.push_back({cfg.methods[i], study_columns(cfg.methods[i]),
                   p_value_matrix(cfg.methods[i], table, stats[i], cfg.alt_replicates, cfg.randomized_ties, seed)});
  }
  return out;
}

int cmd_power(const Common& common, bool build_missing, bool rate) {
  auto cfg = resolve(common);
  if (!cfg.alternative) throw ConfigError("power: config has no \"alternative\"");
  if (cfg.methods.empty()) throw ConfigError("power: config lists no methods");
  const auto frame = cfg.build_frame();
  const auto cov = cfg.build_coverage();
  StatisticsEngine engine(frame, cov);

  std::vector<std::pair<std::size_t, AlternativeSpec>> grid;
  if (rate) {
    // sqrt(n) * weight held constant: n x4 <-> weight / 2.
    const auto* ha = std::get_if<HaSpec>(&*cfg.alternative);
    if (!ha) throw ConfigError("power --rate needs an Ha alternative");
    for (std::size_t k = 0; k < 3; ++k) {
      HaSpec s = *ha;
      s.weight = ha->weight / static_cast<double>(1u << k);
      grid.emplace_back(cfg.n << (2 * k), s);
    }
  } else {
    grid.emplace_back(cfg.n, *cfg.alternative);
  }

  std::cout << "# " << provenance(cfg, *frame).dump() << "\n";
  std::cout << "n,alternative,method,norm,jstar,column,alpha,replicates,rejections,power_percent\n";
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& [n, alt] = grid[g];
    const auto data = run_study(cfg, engine, alt, n, build_missing, g);
    const auto alt_tag = alternative_to_json(alt).at("model").get<std::string>();
    for (const auto& d : data) {
      const std::size_t width = d.columns.size();
      for (std::size_t c = 0; c < width; ++c) {
        const double rate_c = rejection_rate(d.p_values, width, c, cfg.alpha);
        const auto hits = static_cast<std::size_t>(std::llround(rate_c * static_cast<double>(cfg.alt_replicates)));
        const auto& col = d.columns[c];
        const bool normed = col.method == Method::Multiple || col.method == Method::PlugIn;
        std::cout << n << ',' << alt_tag << ',' << to_string(col.method) << ',' << (normed ? to_string(col.norm) : "")
                  << ',' << col.jstar << ',' << col.label << ',' << format_double(cfg.alpha) << ',' << cfg.alt_replicates
                  << ',' << hits << ',' << format_double(100.0 * rate_c) << '\n';
      }
    }
  }
  return 0;
}

int cmd_roc(const Common& common, bool build_missing) {
  auto cfg = resolve(common);
  if (!cfg.alternative) throw ConfigError("roc: config has no \"alternative\"");
  if (cfg.methods.empty()) throw ConfigError("roc: config lists no methods");
  const auto frame = cfg.build_frame();
  const auto cov = cfg.build_coverage();
  StatisticsEngine engine(frame, cov);
  const auto data = run_study(cfg, engine, *cfg.alternative, cfg.n, build_missing, 0);
  std::cout << "# " << provenance(cfg, *frame).dump() << "\n";
  std::cout << "method,norm,jstar,column,alpha,power\n";
  for (const auto& d : data) {
    const std::size_t width = d.columns.size();
    for (std::size_t c = 0; c < width; ++c) {
      const auto& col = d.columns[c];
      const bool normed = col.method == Method::Multiple || col.method == Method::PlugIn;
      const std::string head = to_string(col.method) + ',' + (normed ? to_string(col.norm) : "") + ',' +
                               std::to_string(col.jstar) + ',' + col.label + ',';
      // Power jumps only at observed p-values: emit each jump as a step.
      std::vector<double> p;
      for (std::size_t r = 0; r < cfg.alt_replicates; ++r) p.push_back(d.p_values[r * width + c]);
      std::sort(p.begin(), p.end());
      const double total = static_cast<double>(p.size());
      std::cout << head << "0,0\n";
      for (std::size_t i = 0; i < p.size();) {
        std::size_t k = i;
        while (k < p.size() && p[k] == p[i]) ++k;
        if (p[i] > 0.0 && p[i] < 1.0) {
          std::cout << head << format_double(p[i]) << ',' << format_double(static_cast<double>(i) / total) << '\n';
          std::cout << head << format_double(p[i]) << ',' << format_double(static_cast<double>(k) / total) << '\n';
        }
        i = k;
      }
      std::cout << head << "1,1\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Needlet-based isotropy tests for directional data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common sim_c, cal_c, test_c, pow_c, roc_c;
  std::size_t sim_count = 1;
  std::string sim_dir = ".", sim_prefix = "catalog", catalog;
  bool sim_null = false, cal_csv = false, pow_build = false, pow_rate = false, roc_build = false;

  auto* sim = app.add_subcommand("simulate", "Simulate catalogs from the configured alternative or the null");
  add_common(sim, sim_c);
  sim->add_option("--count", sim_count, "Number of catalogs");
  sim->add_option("-o,--out-dir", sim_dir, "Output directory");
  sim->add_option("--prefix", sim_prefix, "File name prefix");
  sim->add_flag("--null", sim_null, "Draw from the coverage density instead of the alternative");

  auto* cal = app.add_subcommand("calibrate", "Build Monte-Carlo null tables for every configured method");
  add_common(cal, cal_c);
  cal->add_flag("--csv", cal_csv, "Also export each table as CSV");

  auto* tst = app.add_subcommand("test", "Test one catalog against the calibrated tables");
  add_common(tst, test_c);
  tst->add_option("catalog", catalog, "Catalog file (lon_deg,lat_deg[,energy_eV])")->required();

  auto* pow = app.add_subcommand("power", "Estimate power under the configured alternative (CSV)");
  add_common(pow, pow_c);
  pow->add_flag("--build-missing", pow_build, "Build absent tables in memory instead of failing");
  pow->add_flag("--rate", pow_rate, "Separation-rate grid: n, 4n, 16n with the Ha weight halved each step");

  auto* roc = app.add_subcommand("roc", "Power as a function of level for each method (CSV)");
  add_common(roc, roc_c);
  roc->add_flag("--build-missing", roc_build, "Build absent tables in memory instead of failing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_c, sim_count, sim_dir, sim_prefix, sim_null);
    if (cal->parsed()) return cmd_calibrate(cal_c, cal_csv);
    if (tst->parsed()) return cmd_test(test_c, catalog);
    if (pow->parsed()) return cmd_power(pow_c, pow_build, pow_rate);
    if (roc->parsed()) return cmd_roc(roc_c, roc_build);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
