#include "netmom/graph_store.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "netmom/csv.hpp"
#include "netmom/errors.hpp"

namespace netmom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json report_json(const SolverReport& r) {
  return {{"iterations", r.iterations},
          {"objective", r.objective},
          {"kkt_residual", r.kkt_residual},
          {"converged", r.converged}};
}

SolverReport report_from(const json& j) {
  SolverReport r;
  r.iterations = j.at("iterations").get<int>();
  r.objective = j.at("objective").get<double>();
  r.kkt_residual = j.at("kkt_residual").get<double>();
  r.converged = j.at("converged").get<bool>();
  return r;
}

json snapshot_json(const GraphSnapshot& g) {
  json reports = json::array();
  for (const auto& r : g.provenance.solver) reports.push_back(report_json(r));
  const Eigen::VectorXd w = edges_from_adjacency(g.adjacency);
  return {{"tickers", g.tickers},
          {"lookbacks", g.provenance.lookbacks},
          {"alpha", g.provenance.hyperparams.alpha},
          {"beta", g.provenance.hyperparams.beta},
          {"weights", std::vector<double>(w.data(), w.data() + w.size())},
          {"solver", reports}};
}

GraphSnapshot snapshot_from(const json& j, Date date, GraphKind kind) {
  GraphSnapshot g;
  g.date = date;
  g.kind = kind;
  g.tickers = j.at("tickers").get<std::vector<std::string>>();
  g.provenance.lookbacks = j.at("lookbacks").get<std::vector<int>>();
  g.provenance.hyperparams = {j.at("alpha").get<double>(), j.at("beta").get<double>()};
  for (const auto& r : j.at("solver")) g.provenance.solver.push_back(report_from(r));
  const auto w = j.at("weights").get<std::vector<double>>();
  const auto n = static_cast<Eigen::Index>(g.tickers.size());
  if (static_cast<Eigen::Index>(w.size()) != edge_count(n)) {
    throw DataError("stored graph on " + date.iso() + " has the wrong number of weights");
  }
  g.adjacency = adjacency_from_edges(Eigen::Map<const Eigen::VectorXd>(w.data(), n * (n - 1) / 2), n);
  return g;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("corrupt graph store file " + path.string() + ": " + e.what());
  }
}

}  // namespace

FileScheduleStore::FileScheduleStore(fs::path root, Eigen::Index batch_days, double edge_threshold,
                                     bool read_only)
    : root_(std::move(root)), batch_days_(batch_days), edge_threshold_(edge_threshold), read_only_(read_only) {
  if (batch_days_ < 1) throw ConfigError("graph store batch length must be >= 1 day");
}

bool FileScheduleStore::exists() const { return fs::is_directory(root_); }

fs::path FileScheduleStore::batch_path(const std::string& key, Eigen::Index batch) const {
  std::ostringstream name;
  name << "batch_" << std::setw(5) << std::setfill('0') << batch << ".json";
  return root_ / key / name.str();
}

std::set<Eigen::Index> FileScheduleStore::load(const std::string& key, GraphSchedule& schedule) {
  auto& attempted = attempted_[key];
  const fs::path dir = root_ / key;
  if (!fs::is_directory(dir)) return attempted;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    const json batch = read_json(path);
    for (const auto& item : batch.at("dates")) {
      const auto t = item.at("t").get<Eigen::Index>();
      attempted.insert(t);
      const auto& graph = item.at("graph");
      if (graph.is_null()) continue;
      const Date date = Date::parse(item.at("date").get<std::string>());
      PipelineGraph p;
      p.ensemble = snapshot_from(graph.at("ensemble"), date, GraphKind::Ensemble);
      p.normalized = propagation_graph(p.ensemble, edge_threshold_);
      for (const auto& raw : graph.at("raw")) p.raw.push_back(snapshot_from(raw, date, GraphKind::Raw));
      schedule.add(t, std::move(p));
    }
  }
  return attempted;
}

void FileScheduleStore::save(const std::string& key, std::span<const Eigen::Index> attempted,
                             const GraphSchedule& schedule) {
  if (read_only_) throw ConfigError("graph store is read-only");
  auto& done = attempted_[key];
  std::set<Eigen::Index> batches;
  for (auto t : attempted) {
    done.insert(t);
    batches.insert(t / batch_days_);
  }
  fs::create_directories(root_ / key);
  for (auto b : batches) {
    json dates = json::array();
    for (auto it = done.lower_bound(b * batch_days_); it != done.end() && *it < (b + 1) * batch_days_; ++it) {
      json item{{"t", *it}, {"graph", nullptr}};
      if (schedule.contains(*it)) {
        const auto& p = *schedule.entries().at(*it);
        json raw = json::array();
        for (const auto& g : p.raw) raw.push_back(snapshot_json(g));
        item["date"] = p.ensemble.date.iso();
        item["graph"] = {{"ensemble", snapshot_json(p.ensemble)}, {"raw", raw}};
      }
      dates.push_back(std::move(item));
    }
    csv::write_atomic(batch_path(key, b), json{{"key", key}, {"dates", dates}}.dump(1) + "\n");
  }
}

std::optional<GridSearchResult> FileScheduleStore::load_search(const std::string& split) {
  const fs::path path = root_ / "search" / (split + ".json");
  if (!fs::exists(path)) return std::nullopt;
  const json j = read_json(path);
  GridSearchResult out;
  out.best = {j.at("best").at("alpha").get<double>(), j.at("best").at("beta").get<double>()};
  for (const auto& s : j.at("scores")) {
    HyperParamScore score{{s.at("alpha").get<double>(), s.at("beta").get<double>()}, std::nullopt};
    if (!s.at("sharpe").is_null()) score.sharpe = s.at("sharpe").get<double>();
    out.scores.push_back(score);
  }
  return out;
}

void FileScheduleStore::save_search(const std::string& split, const GridSearchResult& result) {
  if (read_only_) throw ConfigError("graph store is read-only");
  json scores = json::array();
  for (const auto& s : result.scores) {
    scores.push_back({{"alpha", s.hp.alpha},
                      {"beta", s.hp.beta},
                      {"sharpe", s.sharpe ? json(*s.sharpe) : json(nullptr)}});
  }
  fs::create_directories(root_ / "search");
  const json j{{"split", split}, {"best", {{"alpha", result.best.alpha}, {"beta", result.best.beta}}},
               {"scores", scores}};
  csv::write_atomic(root_ / "search" / (split + ".json"), j.dump(1) + "\n");
}

}  // namespace netmom
