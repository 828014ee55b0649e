#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"
#include "netmom/cli_reporting.hpp"
#include "netmom/csv.hpp"
#include "netmom/errors.hpp"

using namespace netmom;
namespace fs = std::filesystem;
using testing_support::read_text;
using testing_support::TempDir;
using testing_support::write_text;

namespace {

constexpr const char* kSmallConfig = R"({
  "paths": {"universe": "data/universe.csv", "prices": "data/prices", "output": "out"},
  "seed": 3,
  "graph": {"lookbacks": [252], "stride": 21, "search_stride": 63, "alpha": [0.1, 1.0], "beta": [1.0]},
  "backtest": {"first_train_end_year": 1994},
  "synth": {"blocks": 2, "assets_per_block": 3, "days": 1800, "rho": 0.9}
})";

struct Quiet {
  std::ostringstream sink;
  std::streambuf* saved_out = std::cout.rdbuf(sink.rdbuf());
  std::streambuf* saved_err = std::cerr.rdbuf(sink.rdbuf());
  ~Quiet() {
    std::cout.rdbuf(saved_out);
    std::cerr.rdbuf(saved_err);
  }
};

RunConfig small_config(const TempDir& dir, const std::string& text = kSmallConfig) {
  write_text(dir / "config.json", text);
  return load_run_config(dir / "config.json");
}

RunConfig parse(const std::string& text) { return parse_run_config(text, "/base"); }

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_text(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("config parsing rejects unknown keys and out-of-range values") {
  CHECK_THROWS_WITH_AS(parse(R"({"graph": {"alpah": [1]}})"), "unknown config key 'graph.alpah'", ConfigError);
  CHECK_THROWS_WITH_AS(parse(R"({"colour": 1})"), "unknown config key 'colour'", ConfigError);
  CHECK_THROWS_AS(parse(R"({"graph": {"stride": "ten"}})"), ConfigError);
  CHECK_THROWS_AS(parse("{not json"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"backtest": {"strategies": ["Momentum"]}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"backtest": {"drawdown_duration": "forever"}})"), ConfigError);

  const std::vector<std::string> bad{
      R"({"graph": {"lookbacks": [100]}})",
      R"({"graph": {"max_missing_frac": 1.5}})",
      R"({"graph": {"stride": 0}})",
      R"({"graph": {"alpha": [-1]}})",
      R"({"graph": {"beta": []}})",
      R"({"backtest": {"target_vol": 0}})",
      R"({"backtest": {"validation_fraction": 1.0}})",
      R"({"features": {"winsor_multiplier": 0}})",
      R"({"synth": {"rho": 1.5}})",
      R"({"jobs": 0})",
  };
  for (const auto& text : bad) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse(text).validate(false), ConfigError);
  }
  CHECK_THROWS_WITH_AS(parse("{}").validate(false), "paths.output is required", ConfigError);
  CHECK_NOTHROW(parse(R"({"paths": {"output": "o"}})").validate(false));
}

TEST_CASE("config paths resolve against the file and overrides win") {
  const auto c = parse_run_config(R"({"paths": {"universe": "u.csv", "prices": "/abs/p", "output": "o"},
                                     "seed": 5, "graph": {"stride": 10}})",
                                  "/base", RunOverrides{9, 42, std::nullopt});
  CHECK(c.paths.universe == fs::path("/base/u.csv"));
  CHECK(c.paths.prices == fs::path("/abs/p"));
  CHECK(c.paths.output == fs::path("/base/o"));
  CHECK(c.seed == 9);
  CHECK(c.backtest.stride == 42);
}

TEST_CASE("config hash ignores the output directory only") {
  const auto a = parse(R"({"paths": {"output": "x"}})");
  const auto b = parse(R"({"paths": {"output": "y"}})");
  const auto c = parse(R"({"paths": {"output": "x"}, "seed": 1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 16);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(hex64(fnv1a("a")) == "af63dc4c8601ec8c");
}

TEST_CASE("error kinds map to exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(DataError("x")) == 3);
  CHECK(exit_code_for(SolverBudgetError("x")) == 4);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("ingest coverage counts observations and interior gaps") {
  TempDir dir("cli-ingest");
  oracle::Gen g(11);
  const auto dates = oracle::calendar(40);
  std::string universe = "ticker,class,description,first_date,last_date\n";
  for (const std::string t : {"AA,COMM", "BB,COMM", "CC,FI"}) universe += t + ",," + dates.front().iso() + "," + dates.back().iso() + "\n";
  write_text(dir / "universe.csv", universe);
  fs::create_directories(dir / "prices");
  std::map<std::string, std::vector<bool>> present;
  for (const std::string t : {"AA", "BB", "CC"}) {
    std::ostringstream os;
    os << "date,price\n";
    auto& p = present[t];
    const int lo = g.integer(0, 5), hi = g.integer(30, 39);
    for (int d = 0; d < 40; ++d) {
      const bool here = d >= lo && d <= hi && (d == lo || d == hi || !g.chance(0.2));
      p.push_back(here);
      if (here) os << dates[d].iso() << ',' << csv::format_double(g.uniform(10, 20)) << '\n';
    }
    write_text(dir / "prices" / (t + ".csv"), os.str());
  }
  write_text(dir / "config.json", R"({"paths": {"universe": "universe.csv", "prices": "prices", "output": "out"}})");
  const auto config = load_run_config(dir / "config.json");
  {
    Quiet q;
    cmd_ingest(config);
  }

  // Oracle over the union calendar the loader builds.
  std::set<int> days;
  for (const auto& [t, p] : present) {
    for (int d = 0; d < 40; ++d) {
      if (p[d]) days.insert(d);
    }
  }
  std::map<std::string, std::array<int, 2>> want;  // observations, gaps
  for (const auto& [t, p] : present) {
    const std::string cls = t == "CC" ? "FI" : "COMM";
    int first = -1, last = -1;
    for (int d : days) {
      if (!p[d]) continue;
      if (first < 0) first = d;
      last = d;
      ++want[cls][0];
    }
    for (int d : days) want[cls][1] += d >= first && d <= last && !p[d];
  }
  const auto t = csv::read(config.paths.output / "ingest" / "coverage.csv");
  REQUIRE(t.rows.size() == 2);
  for (const auto& row : t.rows) {
    CAPTURE(row[0]);
    CHECK(std::stoi(row[2]) == want.at(row[0])[0]);
    CHECK(std::stoi(row[3]) == want.at(row[0])[1]);
  }
  const auto panel = read_text(config.paths.output / "ingest" / "panel.csv");
  CHECK(std::count(panel.begin(), panel.end(), '\n') == static_cast<long>(days.size()) + 1);
}

TEST_CASE("pipeline stages: store, resume, manifests and reports") {
  TempDir dir("cli-pipeline");
  const auto config = small_config(dir);
  Quiet q;
  cmd_synth(config);
  cmd_ingest(config);
  cmd_features(config);

  {
    auto empty = config;
    empty.paths.output = dir / "nothing";
    CHECK_THROWS_AS(cmd_report(empty), DataError);
  }

  CHECK_THROWS_AS(cmd_backtest(config), DataError);
  cmd_graphs(config);
  const fs::path graphs = config.paths.output / "graphs";
  const auto before = tree(graphs);

  // Drop the last batch of every store key and resume: the rebuilt store is byte-identical.
  int dropped = 0;
  for (const auto& key : fs::directory_iterator(graphs / "store")) {
    for (const auto& sub : fs::directory_iterator(key.path())) {
      std::vector<fs::path> batches;
      if (!sub.is_directory()) continue;
      for (const auto& f : fs::directory_iterator(sub.path())) {
        if (f.path().filename().string().rfind("batch_", 0) == 0) batches.push_back(f.path());
      }
      if (batches.empty()) continue;
      fs::remove(*std::max_element(batches.begin(), batches.end()));
      ++dropped;
    }
  }
  CHECK(dropped > 0);
  cmd_graphs(config, {true});
  CHECK(tree(graphs) == before);

  cmd_backtest(config);
  cmd_report(config);
  const fs::path report = config.paths.output / "report" / "manifest.json";
  const auto first = read_text(report);
  cmd_report(config);
  CHECK(read_text(report) == first);

  // Every manifest lists exactly the files of its stage, with matching hashes.
  for (const std::string stage : {"ingest", "features", "graphs", "backtest", "report"}) {
    CAPTURE(stage);
    const fs::path sdir = config.paths.output / stage;
    auto files = tree(sdir);
    files.erase("manifest.json");
    const auto text = read_text(sdir / "manifest.json");
    CHECK(text.find(config_hash(config)) != std::string::npos);
    CHECK(text.find("\"stage\": \"" + stage + "\"") != std::string::npos);
    for (const auto& [path, bytes] : files) {
      CAPTURE(path);
      CHECK(text.find("\"" + path + "\"") != std::string::npos);
      CHECK(text.find(hex64(fnv1a(bytes))) != std::string::npos);
    }
    std::size_t listed = 0;
    for (std::size_t p = text.find("\"fnv1a\""); p != std::string::npos; p = text.find("\"fnv1a\"", p + 1)) ++listed;
    CHECK(listed == files.size());
  }

  // SignCombo can be rebuilt from its parents in signals.csv.
  const auto signals = csv::read(config.paths.output / "backtest" / "signals.csv");
  std::map<std::string, std::map<std::string, double>> by;
  for (const auto& row : signals.rows) by[row[2]][row[0] + "/" + row[1]] = std::stod(row[3]);
  REQUIRE(by.count("SignCombo"));
  CHECK(by.size() == 6);
  for (const auto& [cell, v] : by["SignCombo"]) {
    CAPTURE(cell);
    REQUIRE(by["LinReg"].count(cell));
    REQUIRE(by["GMOM"].count(cell));
    CHECK(v == doctest::Approx(0.5 * (by["LinReg"][cell] + by["GMOM"][cell])).epsilon(1e-12));
  }
}

TEST_CASE("a long-only run needs no graphs") {
  TempDir dir("cli-longonly");
  std::string text = kSmallConfig;
  text.replace(text.find(R"("first_train_end_year": 1994)"), 28,
               R"("first_train_end_year": 1994, "strategies": ["LongOnly"])");
  const auto config = small_config(dir, text);
  Quiet q;
  cmd_synth(config);
  cmd_backtest(config);
  const auto metrics = read_text(config.paths.output / "backtest" / "metrics.json");
  CHECK(metrics.find("LongOnly") != std::string::npos);
  CHECK(metrics.find("GMOM") == std::string::npos);
  CHECK_FALSE(fs::exists(config.paths.output / "graphs"));
}

#ifdef NETMOM_CLI_PATH
TEST_CASE("the command-line tool reports errors through exit codes") {
  TempDir dir("cli-binary");
  const std::string exe = NETMOM_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int status = std::system((exe + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  write_text(dir / "bad.json", R"({"graph": {"stride": -3}})");
  write_text(dir / "good.json", kSmallConfig);
  CHECK(run("synth --config " + (dir / "bad.json").string()) == 2);
  CHECK(run("synth --config " + (dir / "missing.json").string()) == 2);
  CHECK(run("synth --config " + (dir / "good.json").string() + " --bogus") == 2);
  CHECK(run("ingest --config " + (dir / "good.json").string()) == 2);
  CHECK(run("synth --config " + (dir / "good.json").string()) == 0);
  CHECK(run("backtest --config " + (dir / "good.json").string()) == 3);
  CHECK(run("report --config " + (dir / "good.json").string()) == 3);
}
#endif
