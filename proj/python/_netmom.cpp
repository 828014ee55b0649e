#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "netmom/backtest.hpp"
#include "netmom/cli_reporting.hpp"
#include "netmom/errors.hpp"
#include "netmom/graph_analysis.hpp"
#include "netmom/graph_learning.hpp"

namespace py = pybind11;
using namespace netmom;

namespace {

GraphSnapshot make_graph(const Eigen::MatrixXd& adjacency, std::vector<std::string> tickers) {
  if (adjacency.rows() != adjacency.cols()) throw ConfigError("adjacency must be square");
  if (tickers.empty()) {
    for (Eigen::Index i = 0; i < adjacency.rows(); ++i) tickers.push_back("n" + std::to_string(i));
  }
  if (static_cast<Eigen::Index>(tickers.size()) != adjacency.rows()) {
    throw ConfigError("ticker count does not match the adjacency");
  }
  GraphSnapshot g;
  g.tickers = std::move(tickers);
  g.adjacency = adjacency;
  return g;
}

py::dict perf_dict(const PerfReport& p) {
  py::dict d;
  d["days"] = p.days;
  d["annual_return"] = p.annual_return;
  d["volatility"] = p.volatility;
  d["sharpe"] = p.sharpe;
  d["downside_deviation"] = p.downside_deviation;
  d["max_drawdown"] = p.max_drawdown;
  d["mdd_duration"] = p.mdd_duration;
  d["sortino"] = p.sortino;
  d["calmar"] = p.calmar;
  d["hit_rate"] = p.hit_rate;
  d["avg_profit_loss"] = p.avg_profit_loss;
  return d;
}

}  // namespace

PYBIND11_MODULE(_netmom, m) {
  m.doc() = "Network momentum: graph learning, strategies and walk-forward backtests";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<SolverBudgetError>(m, "SolverBudgetError", PyExc_RuntimeError);

  m.def(
      "synth_market",
      [](int blocks, int assets_per_block, int days, double rho, double lam, std::uint64_t seed) {
        SynthConfig c;
        c.blocks = blocks;
        c.assets_per_block = assets_per_block;
        c.days = days;
        c.rho = rho;
        c.lambda = lam;
        const auto s = synth_market(c, seed);
        py::dict d;
        d["tickers"] = s.panel.tickers();
        d["prices"] = s.panel.prices;
        d["blocks"] = s.block_labels;
        std::vector<std::string> dates;
        for (const auto& day : s.panel.calendar) dates.push_back(day.iso());
        d["dates"] = dates;
        return d;
      },
      py::arg("blocks") = 3, py::arg("assets_per_block") = 4, py::arg("days") = 2000, py::arg("rho") = 0.3,
      py::arg("lam") = 1.0, py::arg("seed") = 0);

  m.def(
      "learn_graph",
      [](const Eigen::MatrixXd& features, double alpha, double beta, double tol) {
        std::vector<std::string> tickers;
        for (Eigen::Index i = 0; i < features.rows(); ++i) tickers.push_back("n" + std::to_string(i));
        SolverOptions options;
        options.tol = tol;
        const auto learned = learn_graph(pairwise_sq_distances(features, tickers), {alpha, beta}, options);
        py::dict d;
        d["adjacency"] = learned.graph.adjacency;
        d["weights"] = learned.weights;
        d["objective"] = learned.report.objective;
        d["kkt_residual"] = learned.report.kkt_residual;
        d["iterations"] = learned.report.iterations;
        d["converged"] = learned.report.converged;
        return d;
      },
      py::arg("features"), py::arg("alpha"), py::arg("beta"), py::arg("tol") = 1e-6,
      "Learns a graph from node feature rows.");

  m.def(
      "graph_objective",
      [](const Eigen::VectorXd& z, const Eigen::VectorXd& w, double alpha, double beta, Eigen::Index n) {
        return graph_objective(z, w, {alpha, beta}, n);
      },
      py::arg("z"), py::arg("w"), py::arg("alpha"), py::arg("beta"), py::arg("n"));

  m.def(
      "normalize_graph",
      [](const Eigen::MatrixXd& a) { return normalize_graph(make_graph(a, {})).adjacency; }, py::arg("adjacency"));
  m.def(
      "sparsify",
      [](const Eigen::MatrixXd& a, double rel_eps) { return sparsify(make_graph(a, {}), rel_eps).adjacency; },
      py::arg("adjacency"), py::arg("rel_eps") = 1e-4);

  m.def(
      "edge_sparsity", [](const Eigen::MatrixXd& a) { return edge_sparsity(make_graph(a, {})); },
      py::arg("adjacency"));
  m.def(
      "avg_degree", [](const Eigen::MatrixXd& a) { return avg_degree(make_graph(a, {})); }, py::arg("adjacency"));
  m.def(
      "clustering_coeff", [](const Eigen::MatrixXd& a) { return clustering_coeff(make_graph(a, {})); },
      py::arg("adjacency"));
  m.def(
      "community_ratio",
      [](const Eigen::MatrixXd& a, std::vector<int> classes) { return community_ratio(make_graph(a, {}), classes); },
      py::arg("adjacency"), py::arg("classes"));
  m.def(
      "jaccard_index",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        return jaccard_index(make_graph(a, {}), make_graph(b, {}));
      },
      py::arg("adjacency"), py::arg("previous"));
  m.def(
      "spectral_clustering",
      [](const Eigen::MatrixXd& a, int k, std::uint64_t seed) { return spectral_clustering(make_graph(a, {}), k, seed); },
      py::arg("adjacency"), py::arg("k"), py::arg("seed") = 0);

  m.def("macd_response", &macd_response, py::arg("y"));
  m.def(
      "perf_metrics", [](const std::vector<double>& r) { return perf_dict(perf_metrics(r)); }, py::arg("returns"));
  m.def(
      "max_drawdown", [](const std::vector<double>& equity) { return max_drawdown(equity).depth; },
      py::arg("equity"));

  m.def(
      "generate_splits",
      [](const std::vector<std::string>& dates, int first_train_end_year, int step_years) {
        TradingCalendar cal;
        for (const auto& d : dates) cal.push_back(Date::parse(d));
        py::list out;
        for (const auto& s : generate_splits(cal, {first_train_end_year, step_years, 0.10})) {
          py::dict d;
          d["train"] = std::make_pair(s.train_first_year, s.train_last_year);
          d["test"] = std::make_pair(s.test_first_year, s.test_last_year);
          d["train_rows"] = std::make_pair(s.train_first, s.train_last);
          d["validation_first"] = s.validation_first;
          d["test_rows"] = std::make_pair(s.test_first, s.test_last);
          out.append(d);
        }
        return out;
      },
      py::arg("dates"), py::arg("first_train_end_year") = 1999, py::arg("step_years") = 5);

  m.def(
      "config_hash", [](const std::filesystem::path& path) { return config_hash(load_run_config(path)); },
      py::arg("config"));
  m.def(
      "run_stage",
      [](const std::string& stage, const std::filesystem::path& path, bool resume) {
        const auto config = load_run_config(path);
        config.validate(stage != "synth");
        py::gil_scoped_release release;
        if (stage == "synth") cmd_synth(config);
        else if (stage == "ingest") cmd_ingest(config);
        else if (stage == "features") cmd_features(config);
        else if (stage == "graphs") cmd_graphs(config, {resume});
        else if (stage == "backtest") cmd_backtest(config);
        else if (stage == "report") cmd_report(config);
        else throw ConfigError("unknown stage '" + stage + "'");
      },
      py::arg("stage"), py::arg("config"), py::arg("resume") = false,
      "Runs one pipeline stage from a JSON config file.");
}
