#include <doctest.h>

#include <numeric>
#include <set>

#include "../support/oracles.hpp"
#include "netmom/errors.hpp"
#include "netmom/graph_analysis.hpp"

using namespace netmom;

namespace {

// Triangle a-b-c plus a pendant d on c.
GraphSnapshot kite() {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
  a(0, 1) = a(1, 0) = 1.0;
  a(1, 2) = a(2, 1) = 2.0;
  a(0, 2) = a(2, 0) = 0.5;
  a(2, 3) = a(3, 2) = 1.0;
  return oracle::graph(a, {"a", "b", "c", "d"});
}

bool same_partition(const std::vector<int>& x, const std::vector<int>& y) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      if ((x[i] == x[j]) != (y[i] == y[j])) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("topology statistics on a kite") {
  const auto g = kite();
  CHECK(edge_set(g).size() == 4);
  CHECK(edge_sparsity(g) == doctest::Approx(4.0 / 6.0));
  CHECK(avg_degree(g) == doctest::Approx(2.0));
  // Local clustering: a 1, b 1, c 1/3, d 0.
  CHECK(clustering_coeff(g) == doctest::Approx((1 + 1 + 1.0 / 3) / 4));
  CHECK(clustering_coeff(g, LowDegreeClustering::Exclude) == doctest::Approx((1 + 1 + 1.0 / 3) / 3));
  const std::vector<int> classes{0, 0, 0, 1};
  // Pairs: ab ac bc connected same-class (3), ad bd unconnected cross (2), cd connected cross.
  CHECK(community_ratio(g, classes) == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("topology statistics match brute-force counts") {
  oracle::Gen gen(1);
  for (int c = 0; c < 100; ++c) {
    const int n = gen.integer(2, 10);
    const auto a = oracle::adjacency(gen, n, gen.uniform(0.1, 0.9));
    const auto g = oracle::graph(a, oracle::names(n));
    std::vector<int> classes;
    for (int i = 0; i < n; ++i) classes.push_back(gen.integer(0, 2));
    int edges = 0, agree = 0;
    double cc = 0.0;
    for (int i = 0; i < n; ++i) {
      int d = 0, tri = 0;
      for (int j = 0; j < n; ++j) {
        d += a(i, j) > 0;
        for (int k = j + 1; k < n; ++k) tri += a(i, j) > 0 && a(i, k) > 0 && a(j, k) > 0;
      }
      if (d >= 2) cc += 2.0 * tri / (d * (d - 1));
      for (int j = i + 1; j < n; ++j) {
        edges += a(i, j) > 0;
        agree += (a(i, j) > 0) == (classes[i] == classes[j]);
      }
    }
    CHECK(edge_sparsity(g) == doctest::Approx(2.0 * edges / (n * (n - 1))));
    CHECK(avg_degree(g) == doctest::Approx(2.0 * edges / n));
    CHECK(clustering_coeff(g) == doctest::Approx(cc / n));
    CHECK(community_ratio(g, classes) == doctest::Approx(2.0 * agree / (n * (n - 1))));
  }
}

TEST_CASE("Jaccard index compares edges by ticker") {
  const auto g = kite();
  CHECK(jaccard_index(g, g) == 1.0);
  const auto r = reorder_nodes(g, std::vector<std::string>{"d", "c", "b", "a"});
  CHECK(jaccard_index(g, r) == 1.0);
  auto h = g;
  h.adjacency(2, 3) = h.adjacency(3, 2) = 0.0;
  CHECK(jaccard_index(g, h) == doctest::Approx(3.0 / 4.0));
  const auto empty = oracle::graph(Eigen::MatrixXd::Zero(2, 2), {"x", "y"});
  CHECK(jaccard_index(empty, empty) == 1.0);
  CHECK(jaccard_index(g, empty) == 0.0);
}

TEST_CASE("spectral clustering separates disconnected blocks") {
  oracle::Gen gen(2);
  for (int c = 0; c < 30; ++c) {
    const int k = gen.integer(2, 4);
    const int size = gen.integer(2, 5);
    const int n = k * size;
    std::vector<int> truth(static_cast<std::size_t>(n));
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen.rng);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) truth[perm[i]] = i / size;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (truth[i] == truth[j]) a(i, j) = a(j, i) = gen.uniform(0.5, 2.0);
        else if (gen.chance(0.1)) a(i, j) = a(j, i) = gen.uniform(0.0, 0.01);
      }
    }
    const auto g = oracle::graph(a, oracle::names(n));
    const auto labels = spectral_clustering(g, k, 5);
    CHECK(same_partition(labels, truth));
    CHECK(labels[0] == 0);
    CHECK(labels == spectral_clustering(g, k, 5));
    CHECK(std::set<int>(labels.begin(), labels.end()).size() == static_cast<std::size_t>(k));
  }
  CHECK_THROWS_AS(spectral_clustering(kite(), 0), ConfigError);
  CHECK_THROWS_AS(spectral_clustering(kite(), 5), ConfigError);
}

TEST_CASE("masks split the adjacency exactly") {
  oracle::Gen gen(3);
  for (int c = 0; c < 100; ++c) {
    const int n = gen.integer(1, 10);
    const auto g = oracle::graph(oracle::adjacency(gen, n, 0.7), oracle::names(n));
    std::vector<int> classes;
    for (int i = 0; i < n; ++i) classes.push_back(gen.integer(0, 3));
    const auto intra = mask_edges(g, {EdgeMask::Mode::IntraOnly, 0}, classes);
    const auto inter = mask_edges(g, {EdgeMask::Mode::InterOnly, 0}, classes);
    CHECK(((intra.adjacency + inter.adjacency).array() == g.adjacency.array()).all());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (classes[i] == classes[j]) CHECK(inter.adjacency(i, j) == 0.0);
        else CHECK(intra.adjacency(i, j) == 0.0);
      }
    }
    const int kept = gen.integer(0, 3);
    const auto sub = mask_edges(g, {EdgeMask::Mode::ClassSubset, kept}, classes);
    CHECK(sub.nodes() == std::count(classes.begin(), classes.end(), kept));
    const auto norm = apply_mask(g, {EdgeMask::Mode::InterOnly, 0}, classes);
    CHECK((norm.adjacency - oracle::normalize(inter.adjacency)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  const std::vector<int> short_classes{0};
  CHECK_THROWS_AS(mask_edges(kite(), {}, short_classes), ConfigError);
}

TEST_CASE("node classes come from the ticker map") {
  const std::map<std::string, int> m{{"a", 0}, {"b", 1}, {"c", 1}, {"d", 2}};
  CHECK(node_classes(kite(), m) == std::vector<int>{0, 1, 1, 2});
  CHECK_THROWS_AS(node_classes(kite(), {{"a", 0}}), ConfigError);
}

TEST_CASE("topology series and csv outputs") {
  auto g1 = kite();
  g1.date = Date::from_ymd(2020, 1, 2);
  auto g2 = g1;
  g2.date = Date::from_ymd(2020, 1, 3);
  g2.adjacency(0, 1) = g2.adjacency(1, 0) = 0.0;
  const std::vector<GraphSnapshot> seq{g1, g2};
  const std::map<std::string, int> m{{"a", 0}, {"b", 0}, {"c", 0}, {"d", 1}};
  const auto stats = topology_series(seq, m);
  REQUIRE(stats.size() == 2);
  CHECK_FALSE(stats[0].jaccard.has_value());
  CHECK(*stats[1].jaccard == doctest::Approx(0.75));
  CHECK(stats[1].nodes == 4);
  const auto csv = topology_csv(stats);
  CHECK(csv.rfind("date,n_nodes,sparsity,avg_degree,clustering,community_ratio,jaccard\n", 0) == 0);
  CHECK(csv.find("2020-01-03,4,") != std::string::npos);
  const std::vector<int> labels{0, 0, 1, 1};
  CHECK(cluster_labels_csv(g1, labels) == "date,ticker,cluster\n2020-01-02,a,0\n2020-01-02,b,0\n2020-01-02,c,1\n2020-01-02,d,1\n");
}
