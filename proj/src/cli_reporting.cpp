#include "netmom/cli_reporting.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "netmom/csv.hpp"
#include "netmom/errors.hpp"
#include "netmom/graph_analysis.hpp"
#include "netmom/graph_store.hpp"

namespace netmom {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

namespace {

constexpr std::array<int, 5> kAllowedLookbacks{252, 504, 756, 1008, 1260};

void check_range(double v, double lo, double hi, const std::string& what, bool open_lo = false) {
  const bool ok = (open_lo ? v > lo : v >= lo) && v <= hi;
  if (!ok) {
    throw ConfigError(what + " = " + csv::format_double(v) + " is outside " + (open_lo ? "(" : "[") +
                      csv::format_double(lo) + ", " + csv::format_double(hi) + "]");
  }
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& section) {
  if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key '" + section + (section.empty() ? "" : ".") + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  const std::string name = section + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(name + " must be true or false");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(name + " must be an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(name + " must be a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(name + " must be a string");
  }
  try {
    out = v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(name + " has the wrong type");
  }
}

template <typename T>
void read_list(const json& obj, const char* key, std::vector<T>& out, const std::string& section) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(section + "." + key + " must be a list");
  out.clear();
  for (const auto& item : v) {
    if constexpr (std::is_integral_v<T>) {
      if (!item.is_number_integer()) throw ConfigError(section + "." + key + " must hold integers");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!item.is_number()) throw ConfigError(section + "." + key + " must hold numbers");
    } else {
      if (!item.is_string()) throw ConfigError(section + "." + key + " must hold strings");
    }
    out.push_back(item.get<T>());
  }
}

std::string drawdown_name(DrawdownDuration d) {
  return d == DrawdownDuration::PeakToRecovery ? "peak_to_recovery" : "peak_to_trough";
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::string optional_csv(const std::optional<double>& v) { return v ? csv::format_double(*v) : ""; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Regular files below `dir`, relative and sorted; manifest.json itself is left out.
std::vector<std::string> list_files(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = e.path().lexically_relative(dir).generic_string();
    if (rel != "manifest.json" && !rel.ends_with(".tmp")) out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path stage_dir(const RunConfig& config, std::string_view stage) {
  const fs::path dir = config.paths.output / stage;
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& dir, const std::string& name, std::string_view contents,
           std::vector<std::string>& files) {
  csv::write_atomic(dir / name, contents);
  files.push_back(name);
}

}  // namespace

void RunConfig::validate(bool need_inputs) const {
  if (need_inputs) {
    if (!fs::is_regular_file(paths.universe)) {
      throw ConfigError("universe file not found: " + paths.universe.string());
    }
    if (!fs::is_directory(paths.prices)) throw ConfigError("price directory not found: " + paths.prices.string());
  }
  if (paths.output.empty()) throw ConfigError("paths.output is required");
  check_range(jobs, 1, 256, "jobs");
  check_range(winsor.multiplier, 0.0, 100.0, "features.winsor_multiplier", true);
  check_range(winsor.half_life, 1.0, 10000.0, "features.winsor_half_life");
  if (alpha_axis.empty() || beta_axis.empty()) throw ConfigError("graph.alpha and graph.beta must be non-empty");
  for (double a : alpha_axis) check_range(a, 1e-6, 1e3, "graph.alpha");
  for (double b : beta_axis) check_range(b, 1e-6, 1e3, "graph.beta");
  const auto& g = backtest.graph;
  if (g.lookbacks.empty()) throw ConfigError("graph.lookbacks must be non-empty");
  std::set<int> seen;
  for (int lb : g.lookbacks) {
    if (std::find(kAllowedLookbacks.begin(), kAllowedLookbacks.end(), lb) == kAllowedLookbacks.end()) {
      throw ConfigError("graph.lookbacks value " + std::to_string(lb) + " is not one of 252, 504, 756, 1008, 1260");
    }
    if (!seen.insert(lb).second) throw ConfigError("graph.lookbacks lists " + std::to_string(lb) + " twice");
  }
  check_range(g.max_missing_frac, 0.0, 1.0, "graph.max_missing_frac");
  if (g.max_missing_frac >= 1.0) throw ConfigError("graph.max_missing_frac must be below 1");
  check_range(g.edge_threshold, 0.0, 0.5, "graph.edge_threshold");
  check_range(g.solver.tol, 0.0, 1e-2, "graph.solver.tol", true);
  check_range(g.solver.max_iter, 1, 1e7, "graph.solver.max_iter");
  check_range(backtest.stride, 1, 252, "graph.stride");
  check_range(backtest.search_stride, 1, 252, "graph.search_stride");
  check_range(backtest.max_solver_failure_frac, 0.0, 1.0, "graph.max_solver_failure_frac");
  check_range(backtest.anchors.first_train_end_year, 1900, 2200, "backtest.first_train_end_year");
  check_range(backtest.anchors.step_years, 1, 50, "backtest.step_years");
  check_range(backtest.anchors.validation_fraction, 0.0, 0.5, "backtest.validation_fraction", true);
  check_range(backtest.target_vol, 0.0, 1.0, "backtest.target_vol", true);
  if (backtest.costs_bps.empty()) throw ConfigError("backtest.costs_bps must be non-empty");
  for (double c : backtest.costs_bps) check_range(c, 0.0, 100.0, "backtest.costs_bps");
  if (backtest.strategies.empty()) throw ConfigError("backtest.strategies must be non-empty");
  std::set<StrategyKind> kinds(backtest.strategies.begin(), backtest.strategies.end());
  if (kinds.size() != backtest.strategies.size()) throw ConfigError("backtest.strategies has duplicates");
  std::set<Ablation> abl(backtest.ablations.begin(), backtest.ablations.end());
  if (abl.size() != backtest.ablations.size()) throw ConfigError("backtest.ablations has duplicates");
  check_range(clusters, 1, 100, "analysis.clusters");
  synth.validate();
  backtest.validate();
}

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir, const RunOverrides& overrides) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, {"paths", "seed", "jobs", "features", "graph", "backtest", "analysis", "synth"}, "");
  RunConfig c;
  auto resolve = [&](const std::string& p) { return (fs::path(p).is_absolute() ? fs::path(p) : base_dir / p).lexically_normal(); };
  if (root.contains("paths")) {
    const auto& p = root.at("paths");
    check_keys(p, {"universe", "prices", "output"}, "paths");
    std::string s;
    if (p.contains("universe")) { read(p, "universe", s, "paths"); c.paths.universe = resolve(s); }
    if (p.contains("prices")) { read(p, "prices", s, "paths"); c.paths.prices = resolve(s); }
    if (p.contains("output")) { read(p, "output", s, "paths"); c.paths.output = resolve(s); }
  }
  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    c.seed = root.at("seed").get<std::uint64_t>();
  }
  read(root, "jobs", c.jobs, "");
  if (root.contains("features")) {
    const auto& f = root.at("features");
    check_keys(f, {"winsor_multiplier", "winsor_half_life"}, "features");
    read(f, "winsor_multiplier", c.winsor.multiplier, "features");
    read(f, "winsor_half_life", c.winsor.half_life, "features");
  }
  auto& bt = c.backtest;
  if (root.contains("graph")) {
    const auto& g = root.at("graph");
    check_keys(g, {"lookbacks", "max_missing_frac", "edge_threshold", "stride", "search_stride", "alpha", "beta",
                   "solver", "max_solver_failure_frac"},
               "graph");
    read_list(g, "lookbacks", bt.graph.lookbacks, "graph");
    read(g, "max_missing_frac", bt.graph.max_missing_frac, "graph");
    read(g, "edge_threshold", bt.graph.edge_threshold, "graph");
    read(g, "stride", bt.stride, "graph");
    read(g, "search_stride", bt.search_stride, "graph");
    read_list(g, "alpha", c.alpha_axis, "graph");
    read_list(g, "beta", c.beta_axis, "graph");
    read(g, "max_solver_failure_frac", bt.max_solver_failure_frac, "graph");
    if (g.contains("solver")) {
      const auto& s = g.at("solver");
      check_keys(s, {"tol", "max_iter", "unit_mean_scaling"}, "graph.solver");
      read(s, "tol", bt.graph.solver.tol, "graph.solver");
      read(s, "max_iter", bt.graph.solver.max_iter, "graph.solver");
      read(s, "unit_mean_scaling", bt.graph.solver.unit_mean_scaling, "graph.solver");
    }
  }
  if (root.contains("backtest")) {
    const auto& b = root.at("backtest");
    check_keys(b, {"first_train_end_year", "step_years", "validation_fraction", "target_vol", "costs_bps",
                   "strategies", "ablations", "drawdown_duration"},
               "backtest");
    read(b, "first_train_end_year", bt.anchors.first_train_end_year, "backtest");
    read(b, "step_years", bt.anchors.step_years, "backtest");
    read(b, "validation_fraction", bt.anchors.validation_fraction, "backtest");
    read(b, "target_vol", bt.target_vol, "backtest");
    read_list(b, "costs_bps", bt.costs_bps, "backtest");
    std::vector<std::string> names;
    if (b.contains("strategies")) {
      read_list(b, "strategies", names, "backtest");
      bt.strategies.clear();
      for (const auto& n : names) bt.strategies.push_back(parse_strategy(n));
    }
    if (b.contains("ablations")) {
      read_list(b, "ablations", names, "backtest");
      bt.ablations.clear();
      for (const auto& n : names) bt.ablations.push_back(parse_ablation(n));
    }
    if (b.contains("drawdown_duration")) {
      std::string d;
      read(b, "drawdown_duration", d, "backtest");
      if (d == "peak_to_recovery") bt.drawdown = DrawdownDuration::PeakToRecovery;
      else if (d == "peak_to_trough") bt.drawdown = DrawdownDuration::PeakToTrough;
      else throw ConfigError("backtest.drawdown_duration must be peak_to_recovery or peak_to_trough");
    }
  }
  if (root.contains("analysis")) {
    const auto& a = root.at("analysis");
    check_keys(a, {"clusters"}, "analysis");
    read(a, "clusters", c.clusters, "analysis");
  }
  if (root.contains("synth")) {
    const auto& s = root.at("synth");
    check_keys(s, {"blocks", "assets_per_block", "days", "rho", "lambda", "idio_vol", "factor_vol", "start_date"},
               "synth");
    read(s, "blocks", c.synth.blocks, "synth");
    read(s, "assets_per_block", c.synth.assets_per_block, "synth");
    read(s, "days", c.synth.days, "synth");
    read(s, "rho", c.synth.rho, "synth");
    read(s, "lambda", c.synth.lambda, "synth");
    read(s, "idio_vol", c.synth.idio_vol, "synth");
    read(s, "factor_vol", c.synth.factor_vol, "synth");
    if (s.contains("start_date")) {
      std::string d;
      read(s, "start_date", d, "synth");
      try {
        c.synth.start = Date::parse(d);
      } catch (const DataError&) {
        throw ConfigError("synth.start_date must be YYYY-MM-DD");
      }
    }
  }
  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.stride) bt.stride = *overrides.stride;
  if (overrides.jobs) c.jobs = *overrides.jobs;
  bt.jobs = c.jobs;
  bt.grid.clear();
  for (double a : c.alpha_axis) {
    for (double b : c.beta_axis) bt.grid.push_back({a, b});
  }
  return c;
}

RunConfig load_run_config(const fs::path& path, const RunOverrides& overrides) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text, path.parent_path(), overrides);
}

namespace {

json graph_settings_json(const RunConfig& c) {
  const auto& bt = c.backtest;
  json ablations = json::array();
  for (auto a : bt.ablations) ablations.push_back(std::string(to_string(a)));
  return {{"lookbacks", bt.graph.lookbacks},
          {"max_missing_frac", bt.graph.max_missing_frac},
          {"edge_threshold", bt.graph.edge_threshold},
          {"solver", {{"tol", bt.graph.solver.tol},
                      {"max_iter", bt.graph.solver.max_iter},
                      {"unit_mean_scaling", bt.graph.solver.unit_mean_scaling}}},
          {"stride", bt.stride},
          {"search_stride", bt.search_stride},
          {"alpha", c.alpha_axis},
          {"beta", c.beta_axis},
          {"max_solver_failure_frac", bt.max_solver_failure_frac},
          {"first_train_end_year", bt.anchors.first_train_end_year},
          {"step_years", bt.anchors.step_years},
          {"validation_fraction", bt.anchors.validation_fraction},
          {"ablations", ablations}};
}

}  // namespace

std::string canonical_config(const RunConfig& c) {
  const auto& bt = c.backtest;
  json strategies = json::array();
  for (auto k : bt.strategies) strategies.push_back(std::string(to_string(k)));
  json j{{"seed", c.seed},
         {"features", {{"winsor_multiplier", c.winsor.multiplier}, {"winsor_half_life", c.winsor.half_life}}},
         {"graph", graph_settings_json(c)},
         {"backtest", {{"target_vol", bt.target_vol},
                       {"costs_bps", bt.costs_bps},
                       {"strategies", strategies},
                       {"drawdown_duration", drawdown_name(bt.drawdown)}}},
         {"analysis", {{"clusters", c.clusters}}},
         {"synth", {{"blocks", c.synth.blocks},
                    {"assets_per_block", c.synth.assets_per_block},
                    {"days", c.synth.days},
                    {"rho", c.synth.rho},
                    {"lambda", c.synth.lambda},
                    {"idio_vol", c.synth.idio_vol},
                    {"factor_vol", c.synth.factor_vol},
                    {"start_date", c.synth.start.iso()}}}};
  return j.dump();
}

std::string config_hash(const RunConfig& config) { return hex64(fnv1a(canonical_config(config))); }

std::string graph_store_key(const RunConfig& config, const MarketData& market) {
  std::uint64_t h = fnv1a(graph_settings_json(config).dump());
  h = fnv1a(json{{"winsor_multiplier", config.winsor.multiplier}, {"winsor_half_life", config.winsor.half_life}}.dump(), h);
  for (const auto& d : market.panel.calendar) h = fnv1a(d.iso(), h);
  for (const auto& [ticker, cls] : market.classes) h = fnv1a(ticker + ":" + std::to_string(cls) + ";", h);
  const auto& p = market.panel.prices;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) h = fnv1a(csv::format_double(p(i, j)) + ",", h);
  }
  return hex64(h);
}

std::string RunManifest::json() const {
  nlohmann::json files_json = nlohmann::json::array();
  for (const auto& f : files) files_json.push_back({{"path", f.path}, {"bytes", f.bytes}, {"fnv1a", f.fnv1a}});
  return nlohmann::json{{"stage", stage},
                        {"config_hash", config_hash},
                        {"code_version", code_version},
                        {"seed", seed},
                        {"files", files_json}}
             .dump(2) +
         "\n";
}

RunManifest write_manifest(const fs::path& dir, std::string stage, const RunConfig& config,
                           std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  RunManifest m;
  m.stage = std::move(stage);
  m.config_hash = config_hash(config);
  m.seed = config.seed;
  for (const auto& f : files) {
    const std::string bytes = read_file(dir / f);
    m.files.push_back({f, bytes.size(), hex64(fnv1a(bytes))});
  }
  csv::write_atomic(dir / "manifest.json", m.json());
  return m;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const SolverBudgetError*>(&e) != nullptr) return 4;
  return 1;
}

std::vector<ClassCoverage> coverage_by_class(const PricePanel& panel) {
  std::map<int, ClassCoverage> by;
  for (Eigen::Index a = 0; a < panel.prices.cols(); ++a) {
    const auto cls = panel.assets[static_cast<std::size_t>(a)].asset_class;
    auto& c = by[static_cast<int>(cls)];
    c.asset_class = std::string(to_token(cls));
    ++c.assets;
    Eigen::Index first = -1;
    Eigen::Index last = -1;
    for (Eigen::Index t = 0; t < panel.prices.rows(); ++t) {
      if (is_missing(panel.prices(t, a))) continue;
      if (first < 0) first = t;
      last = t;
      ++c.observations;
    }
    if (first < 0) continue;
    for (Eigen::Index t = first; t <= last; ++t) c.missing += is_missing(panel.prices(t, a)) ? 1 : 0;
    const Date f = panel.calendar[static_cast<std::size_t>(first)];
    const Date l = panel.calendar[static_cast<std::size_t>(last)];
    if (c.first == Date{} || f < c.first) c.first = f;
    if (l > c.last) c.last = l;
  }
  std::vector<ClassCoverage> out;
  for (auto& [k, c] : by) out.push_back(c);
  return out;
}

MarketData load_market(const RunConfig& config) {
  const auto universe = load_universe(config.paths.universe);
  return prepare_market(load_prices(config.paths.prices, universe), config.winsor);
}

void cmd_synth(const RunConfig& config) {
  const auto m = synth_market(config.synth, config.seed);
  write_universe(config.paths.universe, m.panel.assets);
  write_prices(config.paths.prices, m.panel);
  const fs::path dir = stage_dir(config, "synth");
  std::vector<std::string> files;
  files.push_back(config.paths.universe.lexically_relative(dir).generic_string());
  for (const auto& a : m.panel.assets) {
    files.push_back((config.paths.prices / (a.ticker + ".csv")).lexically_relative(dir).generic_string());
  }
  std::ostringstream labels;
  labels << "ticker,block\n";
  for (std::size_t i = 0; i < m.block_labels.size(); ++i) {
    labels << csv::escape(m.panel.assets[i].ticker) << ',' << m.block_labels[i] << '\n';
  }
  write(dir, "blocks.csv", labels.str(), files);
  write_manifest(dir, "synth", config, files);
  std::cout << "synth: " << m.panel.assets.size() << " assets x " << m.panel.calendar.size() << " days\n";
}

void cmd_ingest(const RunConfig& config) {
  const auto universe = load_universe(config.paths.universe);
  const auto panel = load_prices(config.paths.prices, universe);
  panel.validate();
  const fs::path dir = stage_dir(config, "ingest");
  std::vector<std::string> files;

  std::ostringstream wide;
  wide << "date";
  for (const auto& a : panel.assets) wide << ',' << csv::escape(a.ticker);
  wide << '\n';
  for (std::size_t t = 0; t < panel.calendar.size(); ++t) {
    wide << panel.calendar[t].iso();
    for (Eigen::Index a = 0; a < panel.prices.cols(); ++a) {
      wide << ',' << csv::format_double(panel.prices(static_cast<Eigen::Index>(t), a));
    }
    wide << '\n';
  }
  write(dir, "panel.csv", wide.str(), files);

  std::ostringstream cov;
  cov << "asset_class,assets,observations,missing,first_date,last_date\n";
  std::cout << "ingest: " << panel.assets.size() << " assets, " << panel.calendar.size() << " dates\n";
  for (const auto& c : coverage_by_class(panel)) {
    cov << c.asset_class << ',' << c.assets << ',' << c.observations << ',' << c.missing << ','
        << c.first.iso() << ',' << c.last.iso() << '\n';
    std::cout << "  " << std::left << std::setw(5) << c.asset_class << c.assets << " assets, " << c.observations
              << " observations, " << c.missing << " gaps, " << c.first.iso() << " to " << c.last.iso() << '\n';
  }
  write(dir, "coverage.csv", cov.str(), files);
  write_manifest(dir, "ingest", config, files);
}

void cmd_features(const RunConfig& config) {
  const auto universe = load_universe(config.paths.universe);
  const auto panel = load_prices(config.paths.prices, universe);
  const auto history = compute_feature_history(panel, config.winsor);
  const fs::path dir = stage_dir(config, "features");
  std::vector<std::string> files;
  write(dir, "features.csv", feature_dump_csv(history), files);

  std::ostringstream miss;
  miss << "feature,missing_fraction\n";
  std::cout << "features: missing fraction over priced asset-days\n";
  for (int k = 0; k < kNumFeatures; ++k) {
    std::size_t priced = 0;
    std::size_t missing = 0;
    for (Eigen::Index t = 0; t < history.days(); ++t) {
      for (Eigen::Index a = 0; a < history.assets(); ++a) {
        if (is_missing(panel.prices(t, a))) continue;
        ++priced;
        missing += is_missing(history.value(t, a, k)) ? 1 : 0;
      }
    }
    const double frac = priced > 0 ? static_cast<double>(missing) / static_cast<double>(priced) : 0.0;
    miss << kFeatureNames[static_cast<std::size_t>(k)] << ',' << csv::format_double(frac) << '\n';
    std::cout << "  " << std::left << std::setw(12) << kFeatureNames[static_cast<std::size_t>(k)]
              << csv::format_fixed(frac, 4) << '\n';
  }
  write(dir, "missing.csv", miss.str(), files);
  write_manifest(dir, "features", config, files);
}

namespace {

fs::path store_path(const RunConfig& config, const MarketData& market) {
  return config.paths.output / "graphs" / "store" / graph_store_key(config, market);
}

Eigen::Index batch_days(const RunConfig& config) { return 64 * static_cast<Eigen::Index>(config.backtest.stride); }

std::vector<WalkForwardSplit> splits_for(const RunConfig& config, const MarketData& market) {
  auto splits = generate_splits(market.panel.calendar, config.backtest.anchors);
  if (splits.empty()) {
    throw DataError("the calendar has no test span after " +
                    std::to_string(config.backtest.anchors.first_train_end_year) +
                    "; lower backtest.first_train_end_year or supply more data");
  }
  return splits;
}

}  // namespace

void cmd_graphs(const RunConfig& config, const CommandOptions& options) {
  const auto market = load_market(config);
  const auto splits = splits_for(config, market);
  const fs::path store_dir = store_path(config, market);
  if (!options.resume && fs::exists(store_dir)) fs::remove_all(store_dir);
  FileScheduleStore store(store_dir, batch_days(config), config.backtest.graph.edge_threshold);
  const auto graphs = learn_walk_forward_graphs(market, splits, config.backtest, &store);

  const fs::path dir = stage_dir(config, "graphs");
  std::vector<std::string> files;
  json hp = json::array();
  json stats = json::array();
  std::vector<GraphSnapshot> test_graphs;
  for (std::size_t k = 0; k < splits.size(); ++k) {
    const auto& s = splits[k];
    const auto& g = graphs[k];
    json scores = json::array();
    for (const auto& sc : g.search) {
      scores.push_back({{"alpha", sc.hp.alpha}, {"beta", sc.hp.beta}, {"sharpe", optional_json(sc.sharpe)}});
    }
    hp.push_back({{"split", s.test_label()},
                  {"train", std::to_string(s.train_first_year) + "-" + std::to_string(s.train_last_year)},
                  {"alpha", g.hp.alpha},
                  {"beta", g.hp.beta},
                  {"scores", scores}});
    const auto dates = recompute_dates(0, s.test_last, config.backtest.stride);
    const auto skipped = dates.size() - g.schedule.entries().size();
    stats.push_back({{"split", s.test_label()},
                     {"recompute_dates", dates.size()},
                     {"graphs", g.schedule.entries().size()},
                     {"skipped_dates", skipped},
                     {"solver_runs", g.schedule.solver_runs()},
                     {"solver_failures", g.schedule.solver_failures()}});
    if (skipped > 0) {
      std::cerr << "graphs: split " << s.test_label() << ": " << skipped
                << " recompute dates had no window with two or more qualifying assets and were skipped\n";
    }
    for (const auto& [t, entry] : g.schedule.entries()) {
      if (t >= s.test_first && t <= s.test_last) test_graphs.push_back(entry->normalized);
    }
  }
  write(dir, "hyperparams.json", hp.dump(2) + "\n", files);
  write(dir, "stats.json", json{{"store", store_dir.filename().string()}, {"splits", stats}}.dump(2) + "\n", files);
  write(dir, "edges.csv", graph_edges_csv(test_graphs), files);
  for (const auto& f : list_files(dir)) files.push_back(f);
  write_manifest(dir, "graphs", config, files);
  std::cout << "graphs: " << splits.size() << " splits, " << test_graphs.size() << " test-span graphs, store "
            << store_dir.filename().string() << '\n';
}

namespace {

std::string perf_row(const std::string& name, const PerfReport& p) {
  std::ostringstream os;
  os << csv::escape(name) << ',' << p.days << ',' << csv::format_double(p.annual_return) << ','
     << csv::format_double(p.volatility) << ',' << optional_csv(p.sharpe) << ','
     << csv::format_double(p.downside_deviation) << ',' << csv::format_double(p.max_drawdown) << ','
     << csv::format_double(p.mdd_duration) << ',' << optional_csv(p.sortino) << ',' << optional_csv(p.calmar)
     << ',' << csv::format_double(p.hit_rate) << ',' << optional_csv(p.avg_profit_loss) << '\n';
  return os.str();
}

constexpr const char* kPerfHeader =
    "strategy,days,annual_return,volatility,sharpe,downside_deviation,max_drawdown,mdd_duration,sortino,calmar,"
    "hit_rate,avg_profit_loss\n";

json perf_json(const PerfReport& p) {
  return {{"days", p.days},
          {"annual_return", p.annual_return},
          {"volatility", p.volatility},
          {"sharpe", optional_json(p.sharpe)},
          {"downside_deviation", p.downside_deviation},
          {"max_drawdown", p.max_drawdown},
          {"mdd_duration", p.mdd_duration},
          {"sortino", optional_json(p.sortino)},
          {"calmar", optional_json(p.calmar)},
          {"hit_rate", p.hit_rate},
          {"avg_profit_loss", optional_json(p.avg_profit_loss)}};
}

std::string matrix_csv(const std::vector<std::string>& names, const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << "strategy";
  for (const auto& n : names) os << ',' << csv::escape(n);
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << csv::escape(names[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << csv::format_double(m(i, j));
    os << '\n';
  }
  return os.str();
}

}  // namespace

void cmd_backtest(const RunConfig& config) {
  const auto market = load_market(config);
  const auto splits = splits_for(config, market);
  std::vector<SplitGraphs> graphs;
  if (config.backtest.needs_graphs()) {
    const fs::path store_dir = store_path(config, market);
    FileScheduleStore store(store_dir, batch_days(config), config.backtest.graph.edge_threshold, true);
    if (!store.exists()) {
      throw DataError("no graph store for this configuration and data (expected " + store_dir.string() +
                      "); run `netmom graphs` with the same config first");
    }
    graphs = learn_walk_forward_graphs(market, splits, config.backtest, &store);
  }
  const auto result = run_walk_forward(market, splits, graphs, config.backtest);

  const fs::path dir = stage_dir(config, "backtest");
  for (const auto& f : list_files(dir)) fs::remove(dir / f);
  std::vector<std::string> files;
  std::vector<std::string> names;
  for (const auto& s : result.strategies) names.push_back(s.name);

  json strategies = json::array();
  std::ostringstream raw_table;
  std::ostringstream scaled_table;
  std::ostringstream returns;
  std::ostringstream turnover;
  std::ostringstream costs;
  raw_table << kPerfHeader;
  scaled_table << kPerfHeader;
  returns << "date,strategy,raw_return,scaled_return\n";
  turnover << "strategy,average_turnover\n";
  costs << "strategy,cost_bps,sharpe\n";
  for (const auto& s : result.strategies) {
    json cost_curve = json::array();
    for (std::size_t c = 0; c < config.backtest.costs_bps.size(); ++c) {
      cost_curve.push_back({{"cost_bps", config.backtest.costs_bps[c]}, {"sharpe", optional_json(s.cost_sharpe[c])}});
      costs << csv::escape(s.name) << ',' << csv::format_double(config.backtest.costs_bps[c]) << ','
            << optional_csv(s.cost_sharpe[c]) << '\n';
    }
    strategies.push_back({{"name", s.name},
                          {"raw", perf_json(s.perf_raw)},
                          {"scaled", perf_json(s.perf_scaled)},
                          {"average_turnover", s.turnover.average},
                          {"cost_curve", cost_curve}});
    raw_table << perf_row(s.name, s.perf_raw);
    scaled_table << perf_row(s.name, s.perf_scaled);
    turnover << csv::escape(s.name) << ',' << csv::format_double(s.turnover.average) << '\n';
    std::map<Date, double> scaled;
    for (std::size_t i = 0; i < s.scaled.dates.size(); ++i) scaled[s.scaled.dates[i]] = s.scaled.values[i];
    for (std::size_t i = 0; i < s.raw.dates.size(); ++i) {
      auto it = scaled.find(s.raw.dates[i]);
      returns << s.raw.dates[i].iso() << ',' << csv::escape(s.name) << ',' << csv::format_double(s.raw.values[i])
              << ',' << (it == scaled.end() ? "" : csv::format_double(it->second)) << '\n';
    }
  }
  json hp = json::array();
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    hp.push_back({{"split", splits[k].test_label()}, {"alpha", graphs[k].hp.alpha}, {"beta", graphs[k].hp.beta}});
  }
  const json metrics{{"periods", result.periods},
                     {"target_vol", config.backtest.target_vol},
                     {"hyperparams", hp},
                     {"strategies", strategies}};
  write(dir, "metrics.json", metrics.dump(2) + "\n", files);
  write(dir, "summary_raw.csv", raw_table.str(), files);
  write(dir, "summary_scaled.csv", scaled_table.str(), files);
  write(dir, "returns.csv", returns.str(), files);
  write(dir, "turnover.csv", turnover.str(), files);
  write(dir, "cost_curve.csv", costs.str(), files);
  write(dir, "correlation.csv", matrix_csv(names, result.return_correlation), files);
  write(dir, "sign_agreement.csv", matrix_csv(names, result.sign_agreement), files);

  std::vector<SignalSeries> signals;
  for (const auto& s : result.strategies) signals.push_back(s.signals);
  write(dir, "signals.csv", signals_csv(signals), files);

  auto coefficients = [&](const std::string& name, const std::vector<RegressionModel>& models) {
    if (models.empty()) return;
    const auto table = coefficient_report(result.periods, models);
    write(dir, "coefficients_" + name + ".csv", table.wide_csv, files);
    write(dir, "coefficients_" + name + "_long.csv", table.long_csv, files);
  };
  coefficients("linreg", result.linreg_models);
  coefficients("gmom", result.gmom_models);
  coefficients("regcombo", result.regcombo_models);

  if (!result.test_graphs.empty()) {
    const auto stats = topology_series(result.test_graphs, market.classes);
    write(dir, "topology.csv", topology_csv(stats), files);
    std::string labels = "date,ticker,cluster\n";
    for (const auto& g : result.test_graphs) {
      if (g.nodes() == 0) continue;
      const int k = std::min<int>(config.clusters, static_cast<int>(g.nodes()));
      const auto csv_text = cluster_labels_csv(g, spectral_clustering(g, k, config.seed));
      labels += csv_text.substr(csv_text.find('\n') + 1);
    }
    write(dir, "clusters.csv", labels, files);
  }
  write_manifest(dir, "backtest", config, files);

  std::cout << "backtest: " << result.strategies.size() << " strategies over " << result.periods.size()
            << " test periods\n";
  for (const auto& s : result.strategies) {
    std::cout << "  " << std::left << std::setw(14) << s.name << " sharpe "
              << (s.perf_scaled.sharpe ? csv::format_fixed(*s.perf_scaled.sharpe, 3) : std::string("n/a")) << '\n';
  }
}

namespace {

std::map<std::string, std::size_t> column_index(const csv::Table& t) {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out[t.header[i]] = i;
  return out;
}

}  // namespace

void cmd_report(const RunConfig& config) {
  const std::vector<std::string> stages{"ingest", "features", "graphs", "backtest"};
  std::vector<std::pair<std::string, json>> found;
  for (const auto& stage : stages) {
    const fs::path m = config.paths.output / stage / "manifest.json";
    if (fs::exists(m)) found.emplace_back(stage, json::parse(read_file(m)));
  }
  if (found.empty()) {
    throw DataError("nothing to report: no stage manifests under " + config.paths.output.string());
  }
  const fs::path dir = config.paths.output / "report";
  if (fs::exists(dir)) fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> files;
  for (const auto& [stage, manifest] : found) {
    for (const auto& f : manifest.at("files")) {
      const auto rel = f.at("path").get<std::string>();
      if (rel.rfind("store/", 0) == 0) continue;
      const fs::path target = dir / stage / rel;
      fs::create_directories(target.parent_path());
      csv::write_atomic(target, read_file(config.paths.output / stage / rel));
      files.push_back((fs::path(stage) / rel).generic_string());
    }
  }

  const fs::path backtest = config.paths.output / "backtest";
  if (fs::exists(backtest / "returns.csv")) {
    const auto t = csv::read(backtest / "returns.csv");
    const auto col = column_index(t);
    std::map<std::string, std::pair<double, double>> equity;
    std::ostringstream os;
    os << "date,strategy,series,cumulative_return\n";
    for (const auto& row : t.rows) {
      const auto& name = row[col.at("strategy")];
      auto& [raw, scaled] = equity.try_emplace(name, 1.0, 1.0).first->second;
      raw *= 1.0 + csv::parse_double(row[col.at("raw_return")], "raw_return");
      os << row[col.at("date")] << ',' << csv::escape(name) << ",raw," << csv::format_double(raw - 1.0) << '\n';
      const auto& s = row[col.at("scaled_return")];
      if (s.empty()) continue;
      scaled *= 1.0 + csv::parse_double(s, "scaled_return");
      os << row[col.at("date")] << ',' << csv::escape(name) << ",scaled," << csv::format_double(scaled - 1.0)
         << '\n';
    }
    write(dir, "figures/cumulative_returns.csv", os.str(), files);
  }
  if (fs::exists(backtest / "cost_curve.csv")) {
    write(dir, "figures/cost_curve.csv", read_file(backtest / "cost_curve.csv"), files);
  }
  if (fs::exists(backtest / "topology.csv")) {
    const auto t = csv::read(backtest / "topology.csv");
    std::ostringstream os;
    os << "date,statistic,value\n";
    for (const auto& row : t.rows) {
      for (std::size_t c = 1; c < t.header.size(); ++c) {
        os << row[0] << ',' << t.header[c] << ',' << (c < row.size() ? row[c] : "") << '\n';
      }
    }
    write(dir, "figures/topology_long.csv", os.str(), files);
  }
  if (fs::exists(backtest / "correlation.csv") && fs::exists(backtest / "sign_agreement.csv")) {
    const auto corr = csv::read(backtest / "correlation.csv");
    const auto agree = csv::read(backtest / "sign_agreement.csv");
    std::ostringstream os;
    os << "strategy_a,strategy_b,correlation,sign_agreement\n";
    for (std::size_t i = 0; i < corr.rows.size(); ++i) {
      for (std::size_t j = 1; j < corr.header.size(); ++j) {
        os << csv::escape(corr.rows[i][0]) << ',' << csv::escape(corr.header[j]) << ',' << corr.rows[i][j] << ','
           << agree.rows[i][j] << '\n';
      }
    }
    write(dir, "figures/correlation_long.csv", os.str(), files);
  }
  const auto manifest = write_manifest(dir, "report", config, files);
  std::cout << "report: " << manifest.files.size() << " files, manifest "
            << hex64(fnv1a(read_file(dir / "manifest.json"))) << '\n';
}

}  // namespace netmom
