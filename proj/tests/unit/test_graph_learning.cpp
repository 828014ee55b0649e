#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "../support/oracles.hpp"
#include "netmom/errors.hpp"
#include "netmom/graph_learning.hpp"

using namespace netmom;

namespace {

PairwiseDistances random_distances(oracle::Gen& g, int n, int f, double scale) {
  Eigen::MatrixXd v(n, f);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < f; ++j) v(i, j) = g.normal(scale);
  }
  return pairwise_sq_distances(v, oracle::names(n));
}

FeatureHistory smooth_history(int days, int assets, std::uint64_t seed) {
  oracle::Gen g(seed);
  std::array<Eigen::MatrixXd, kNumFeatures> f;
  for (auto& m : f) {
    m.resize(days, assets);
    for (int a = 0; a < assets; ++a) {
      double level = g.normal();
      for (int t = 0; t < days; ++t) m(t, a) = level += g.normal(0.1);
    }
  }
  return FeatureHistory(oracle::calendar(days), oracle::names(assets), f);
}

}  // namespace

TEST_CASE("edge indexing enumerates the upper triangle row by row") {
  for (Eigen::Index n = 2; n < 12; ++n) {
    Eigen::Index e = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) CHECK(edge_index(i, j, n) == e++);
    }
    CHECK(e == edge_count(n));
  }
  oracle::Gen g(1);
  const auto a = oracle::adjacency(g, 7, 0.5);
  CHECK((adjacency_from_edges(edges_from_adjacency(a), 7).array() == a.array()).all());
}

TEST_CASE("pairwise distances are squared Euclidean") {
  Eigen::MatrixXd v(3, 2);
  v << 0, 0, 3, 4, 1, 1;
  const auto d = pairwise_sq_distances(v, {"a", "b", "c"});
  CHECK(d.z(0) == 25.0);
  CHECK(d.z(1) == 2.0);
  CHECK(d.z(2) == 13.0);
  CHECK_THROWS_AS(pairwise_sq_distances(v.topRows(1), {"a"}), ConfigError);
  v(1, 1) = NAN;
  CHECK_THROWS_AS(pairwise_sq_distances(v, {"a", "b", "c"}), ConfigError);
}

TEST_CASE("objective and gradient agree with the definition") {
  oracle::Gen g(2);
  for (int c = 0; c < 100; ++c) {
    const int n = g.integer(2, 8);
    const auto d = random_distances(g, n, 3, 1.0);
    Eigen::VectorXd w(d.z.size());
    for (Eigen::Index e = 0; e < w.size(); ++e) w(e) = g.uniform(0.01, 2.0);
    const GraphHyperParams hp{g.uniform(0.01, 5.0), g.uniform(0.01, 5.0)};
    const double f = graph_objective(d.z, w, hp, n);
    CHECK(f == doctest::Approx(oracle::objective(d.z, w, hp.alpha, hp.beta, n)).epsilon(1e-12));
    const auto grad = graph_gradient(d.z, w, hp, n);
    for (Eigen::Index e = 0; e < w.size(); ++e) {
      const double h = 1e-6 * w(e);
      Eigen::VectorXd up = w, down = w;
      up(e) += h;
      down(e) -= h;
      const double fd = (oracle::objective(d.z, up, hp.alpha, hp.beta, n) -
                         oracle::objective(d.z, down, hp.alpha, hp.beta, n)) /
                        (2 * h);
      CHECK(grad(e) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
  }
  CHECK(std::isinf(graph_objective(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), {1, 1}, 3)));
}

TEST_CASE("zero distances give the uniform stationary weight") {
  for (int n = 2; n <= 9; ++n) {
    for (double alpha : {0.01, 1.0, 10.0}) {
      for (double beta : {0.001, 0.5, 5.0}) {
        PairwiseDistances d{oracle::names(n), Eigen::VectorXd::Zero(edge_count(n))};
        const auto learned = learn_graph(d, {alpha, beta});
        const double w0 = std::sqrt(alpha / (2 * beta * (n - 1)));
        CHECK(uniform_edge_weight({alpha, beta}, n) == doctest::Approx(w0));
        CHECK(learned.report.converged);
        for (Eigen::Index e = 0; e < learned.weights.size(); ++e) CHECK(learned.weights(e) == doctest::Approx(w0));
      }
    }
  }
}

TEST_CASE("solver matches exact coordinate descent on random instances") {
  oracle::Gen g(3);
  for (int c = 0; c < 60; ++c) {
    const int n = g.integer(2, 10);
    const auto d = random_distances(g, n, g.integer(2, 8), c % 4 == 0 ? 30.0 : 1.0);
    const GraphHyperParams hp{kHyperParamAxis[static_cast<std::size_t>(g.integer(0, 10))],
                              kHyperParamAxis[static_cast<std::size_t>(g.integer(0, 10))]};
    const auto learned = learn_graph(d, hp);
    CAPTURE(n);
    CAPTURE(hp.alpha);
    CAPTURE(hp.beta);
    REQUIRE(learned.report.converged);
    CHECK(learned.report.kkt_residual <= 1e-6);
    CHECK((learned.weights.array() >= 0.0).all());
    const auto ref = oracle::coordinate_descent(d.z, hp.alpha, hp.beta, n);
    const double fr = oracle::objective(d.z, ref, hp.alpha, hp.beta, n);
    const double fs = oracle::objective(d.z, learned.weights, hp.alpha, hp.beta, n);
    CHECK(std::abs(fs - fr) / std::max(1.0, std::abs(fr)) <= 1e-6);
    CHECK(learned.report.objective == doctest::Approx(fs).epsilon(1e-12));

    const auto& a = learned.graph.adjacency;
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.rowwise().sum().array() > 0.0).all());
  }
}

TEST_CASE("warm starts and tolerance options") {
  oracle::Gen g(4);
  const auto d = random_distances(g, 8, 4, 1.0);
  const auto cold = learn_graph(d, {1.0, 0.1});
  const auto warm = learn_graph(d, {1.0, 0.1}, {}, &cold.weights);
  CHECK(warm.report.converged);
  CHECK(warm.report.iterations <= cold.report.iterations);
  CHECK((warm.weights - cold.weights).cwiseAbs().maxCoeff() < 1e-6);

  SolverOptions scaled;
  scaled.unit_mean_scaling = true;
  CHECK(learn_graph(d, {1.0, 0.1}, scaled).report.converged);

  SolverOptions capped;
  capped.max_iter = 1;
  capped.tol = 1e-14;
  const auto r = learn_graph(d, {1.0, 0.1}, capped);
  CHECK_FALSE(r.report.converged);
  CHECK(r.report.iterations <= 1);

  CHECK_THROWS_AS(learn_graph(d, {0.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(learn_graph(d, {1.0, -1.0}), ConfigError);
}

TEST_CASE("KKT residual is zero at the oracle optimum and positive elsewhere") {
  oracle::Gen g(5);
  const auto d = random_distances(g, 6, 3, 1.0);
  const GraphHyperParams hp{0.5, 0.5};
  const auto w = oracle::coordinate_descent(d.z, hp.alpha, hp.beta, 6);
  CHECK(kkt_residual(d.z, w, hp, 6, 1e-9) < 1e-8);
  Eigen::VectorXd off = w.array() + 0.1;
  CHECK(kkt_residual(d.z, off, hp, 6, 1e-9) > 1e-3);
}

TEST_CASE("ensembles average over the node union") {
  GraphSnapshot a, b;
  a.tickers = {"x", "y"};
  a.adjacency = (Eigen::MatrixXd(2, 2) << 0, 2, 2, 0).finished();
  a.provenance.lookbacks = {252};
  b.tickers = {"y", "z"};
  b.adjacency = (Eigen::MatrixXd(2, 2) << 0, 4, 4, 0).finished();
  b.provenance.lookbacks = {504};
  const std::vector<GraphSnapshot> both{a, b};
  const auto e = ensemble_graphs(both);
  CHECK(e.tickers == std::vector<std::string>{"x", "y", "z"});
  CHECK(e.adjacency(0, 1) == 1.0);
  CHECK(e.adjacency(1, 2) == 2.0);
  CHECK(e.adjacency(0, 2) == 0.0);
  CHECK(e.provenance.lookbacks == std::vector<int>{252, 504});
  CHECK(e.kind == GraphKind::Ensemble);
  b.date = Date::from_ymd(2000, 1, 3);
  const std::vector<GraphSnapshot> mixed{a, b};
  CHECK_THROWS_AS(ensemble_graphs(mixed), ConfigError);
}

TEST_CASE("normalisation matches the brute-force formula and bounds the spectrum") {
  oracle::Gen g(6);
  for (int c = 0; c < 100; ++c) {
    const int n = g.integer(1, 10);
    const auto a = oracle::adjacency(g, n, g.uniform(0.0, 1.0));
    const auto norm = normalize_graph(oracle::graph(a, oracle::names(n)));
    const auto want = oracle::normalize(a);
    CHECK((norm.adjacency - want).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((norm.adjacency - norm.adjacency.transpose()).cwiseAbs().maxCoeff() == 0.0);
    if (n > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(norm.adjacency);
      CHECK(es.eigenvalues().cwiseAbs().maxCoeff() <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("sparsify drops weights below the relative threshold") {
  Eigen::MatrixXd a(3, 3);
  a << 0, 1, 1e-5, 1, 0, 0.5, 1e-5, 0.5, 0;
  const auto s = sparsify(oracle::graph(a, oracle::names(3)), 1e-4);
  CHECK(s.adjacency(0, 2) == 0.0);
  CHECK(s.adjacency(2, 0) == 0.0);
  CHECK(s.adjacency(1, 2) == 0.5);
  CHECK_THROWS_AS(sparsify(oracle::graph(a, oracle::names(3)), -1.0), ConfigError);
}

TEST_CASE("reordering permutes rows and columns together") {
  oracle::Gen g(7);
  const auto a = oracle::adjacency(g, 4, 0.8);
  const auto graph = oracle::graph(a, {"a", "b", "c", "d"});
  const std::vector<std::string> order{"c", "zz", "a"};
  const auto r = reorder_nodes(graph, order);
  CHECK(r.tickers == std::vector<std::string>{"c", "a", "b", "d"});
  CHECK(r.adjacency(0, 1) == a(2, 0));
  CHECK(r.adjacency(2, 3) == a(1, 3));
}

TEST_CASE("pipeline ensembles one graph per usable lookback") {
  const auto h = smooth_history(80, 5, 11);
  GraphPipelineConfig cfg;
  cfg.lookbacks = {20, 40, 100};
  cfg.keep_raw = true;
  const auto p = learn_graph_pipeline(h, 60, {1.0, 1.0}, cfg);
  CHECK(p.raw.size() == 2);
  CHECK(p.ensemble.provenance.lookbacks == std::vector<int>{20, 40});
  CHECK(p.ensemble.tickers == h.tickers());
  const std::vector<GraphSnapshot> raw_span = p.raw;
  const auto manual = reorder_nodes(ensemble_graphs(raw_span), h.tickers());
  CHECK((manual.adjacency.array() == p.ensemble.adjacency.array()).all());
  CHECK((propagation_graph(p.ensemble, cfg.edge_threshold).adjacency.array() == p.normalized.adjacency.array()).all());
  CHECK_THROWS_AS(learn_graph_pipeline(h, 10, {1.0, 1.0}, cfg), DataError);

  DistanceCache cache;
  const auto cached = learn_graph_pipeline(h, 60, {1.0, 1.0}, cfg, &cache);
  CHECK(cache.size() == 3);
  const auto again = learn_graph_pipeline(h, 60, {1.0, 1.0}, cfg, &cache);
  CHECK((cached.normalized.adjacency.array() == again.normalized.adjacency.array()).all());
  CHECK((cached.normalized.adjacency.array() == p.normalized.adjacency.array()).all());
}

TEST_CASE("schedules hold the last graph between recomputes") {
  const auto h = smooth_history(90, 4, 12);
  GraphPipelineConfig cfg;
  cfg.lookbacks = {30};
  CHECK(recompute_dates(3, 12, 4) == std::vector<Eigen::Index>{3, 7, 11});
  CHECK_THROWS_AS(recompute_dates(0, 5, 0), ConfigError);

  const auto s = learn_graph_schedule(h, 0, 89, 10, {1.0, 1.0}, cfg);
  // Dates 0..20 have no full 30-day window and are skipped.
  CHECK(s.entries().begin()->first == 30);
  CHECK(s.at(25) == nullptr);
  CHECK(s.at(39) == s.entries().at(30).get());
  CHECK(s.at(40) == s.entries().at(40).get());
  CHECK(s.solver_runs() == s.entries().size());
  CHECK(s.solver_failures() == 0);

  const auto parallel = learn_graph_schedule(h, 0, 89, 10, {1.0, 1.0}, cfg, 3);
  REQUIRE(parallel.entries().size() == s.entries().size());
  for (const auto& [t, e] : s.entries()) {
    CHECK((parallel.entries().at(t)->normalized.adjacency.array() == e->normalized.adjacency.array()).all());
  }
  const auto csv = graph_edges_csv(std::vector<GraphSnapshot>{s.at(89)->normalized});
  CHECK(csv.rfind("date,kind,ticker_i,ticker_j,weight\n", 0) == 0);
}
