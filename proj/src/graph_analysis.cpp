#include "netmom/graph_analysis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "netmom/csv.hpp"
#include "netmom/errors.hpp"

namespace netmom {

namespace {

Eigen::Index edge_count_of(const GraphSnapshot& g) {
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < g.nodes(); ++i) {
    for (Eigen::Index j = i + 1; j < g.nodes(); ++j) count += g.adjacency(i, j) > 0.0 ? 1 : 0;
  }
  return count;
}

void check_classes(const GraphSnapshot& g, std::span<const int> classes) {
  if (static_cast<Eigen::Index>(classes.size()) != g.nodes()) {
    throw ConfigError("class labels do not match the graph's node count");
  }
}

}  // namespace

EdgeSet edge_set(const GraphSnapshot& g) {
  EdgeSet out;
  for (Eigen::Index i = 0; i < g.nodes(); ++i) {
    for (Eigen::Index j = i + 1; j < g.nodes(); ++j) {
      if (!(g.adjacency(i, j) > 0.0)) continue;
      const auto& a = g.tickers[static_cast<std::size_t>(i)];
      const auto& b = g.tickers[static_cast<std::size_t>(j)];
      out.emplace(std::min(a, b), std::max(a, b));
    }
  }
  return out;
}

double edge_sparsity(const GraphSnapshot& g) {
  const auto n = static_cast<double>(g.nodes());
  if (n < 2) return 0.0;
  return 2.0 * static_cast<double>(edge_count_of(g)) / (n * (n - 1.0));
}

double avg_degree(const GraphSnapshot& g) {
  if (g.nodes() == 0) return 0.0;
  return 2.0 * static_cast<double>(edge_count_of(g)) / static_cast<double>(g.nodes());
}

double clustering_coeff(const GraphSnapshot& g, LowDegreeClustering mode) {
  const Eigen::Index n = g.nodes();
  const Eigen::MatrixXd a = (g.adjacency.array() > 0.0).cast<double>();
  double total = 0.0;
  Eigen::Index counted = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = a.row(i).sum();
    if (d < 2.0) {
      if (mode == LowDegreeClustering::Zero) ++counted;
      continue;
    }
    double triangles = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (a(i, j) == 0.0) continue;
      for (Eigen::Index k = j + 1; k < n; ++k) triangles += a(i, k) * a(j, k);
    }
    total += 2.0 * triangles / (d * (d - 1.0));
    ++counted;
  }
  return counted > 0 ? total / static_cast<double>(counted) : 0.0;
}

double community_ratio(const GraphSnapshot& g, std::span<const int> classes) {
  check_classes(g, classes);
  const Eigen::Index n = g.nodes();
  if (n < 2) return 0.0;
  double aligned = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const bool edge = g.adjacency(i, j) > 0.0;
      const bool same = classes[static_cast<std::size_t>(i)] == classes[static_cast<std::size_t>(j)];
      aligned += edge == same ? 1.0 : 0.0;
    }
  }
  const auto nd = static_cast<double>(n);
  return std::clamp(2.0 * aligned / (nd * (nd - 1.0)), 0.0, 1.0);
}

double jaccard_index(const GraphSnapshot& g, const GraphSnapshot& prev) {
  const auto a = edge_set(g);
  const auto b = edge_set(prev);
  std::size_t common = 0;
  for (const auto& e : a) common += b.count(e);
  const std::size_t uni = a.size() + b.size() - common;
  return uni == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(uni);
}

std::vector<int> spectral_clustering(const GraphSnapshot& g, int k, std::uint64_t seed, int restarts) {
  const Eigen::Index n = g.nodes();
  if (k < 1) throw ConfigError("cluster count must be >= 1");
  if (k > n) throw ConfigError("cluster count exceeds the number of nodes");
  if (restarts < 1) throw ConfigError("k-means restarts must be >= 1");

  const Eigen::VectorXd deg = g.adjacency.rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_sqrt(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  const Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n) -
                              inv_sqrt.asDiagonal() * g.adjacency * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (lap + lap.transpose()));
  Eigen::MatrixXd emb = eig.eigenvectors().leftCols(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = emb.row(i).norm();
    if (norm > 0.0) emb.row(i) /= norm;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> best;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    // k-means++ seeding.
    Eigen::MatrixXd centres(k, emb.cols());
    centres.row(0) = emb.row(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
    Eigen::VectorXd dist(n);
    for (int c = 1; c < k; ++c) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (int p = 0; p < c; ++p) m = std::min(m, (emb.row(i) - centres.row(p)).squaredNorm());
        dist(i) = m;
      }
      const double total = dist.sum();
      Eigen::Index pick = 0;
      if (total > 0.0) {
        double target = unif(rng) * total;
        for (pick = 0; pick < n - 1; ++pick) {
          target -= dist(pick);
          if (target < 0.0) break;
        }
      } else {
        pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
      }
      centres.row(c) = emb.row(pick);
    }

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < 300; ++iter) {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        int arg = 0;
        double m = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          const double d = (emb.row(i) - centres.row(c)).squaredNorm();
          if (d < m) {
            m = d;
            arg = c;
          }
        }
        if (labels[static_cast<std::size_t>(i)] != arg) {
          labels[static_cast<std::size_t>(i)] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      for (int c = 0; c < k; ++c) {
        Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(emb.cols());
        int count = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (labels[static_cast<std::size_t>(i)] == c) {
            sum += emb.row(i);
            ++count;
          }
        }
        if (count > 0) centres.row(c) = sum / count;
      }
    }
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      inertia += (emb.row(i) - centres.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    }
    if (inertia < best_inertia - 1e-12) {
      best_inertia = inertia;
      best = labels;
    }
  }

  std::vector<int> relabel(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (auto& l : best) {
    if (relabel[static_cast<std::size_t>(l)] < 0) relabel[static_cast<std::size_t>(l)] = next++;
    l = relabel[static_cast<std::size_t>(l)];
  }
  return best;
}

GraphSnapshot mask_edges(const GraphSnapshot& g, const EdgeMask& mask, std::span<const int> classes) {
  check_classes(g, classes);
  GraphSnapshot out = g;
  const Eigen::Index n = g.nodes();
  if (mask.mode == EdgeMask::Mode::ClassSubset) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (classes[static_cast<std::size_t>(i)] == mask.kept_class) keep.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(keep.size());
    out.tickers.clear();
    out.adjacency.resize(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
      out.tickers.push_back(g.tickers[static_cast<std::size_t>(keep[static_cast<std::size_t>(r)])]);
      for (Eigen::Index c = 0; c < m; ++c) {
        out.adjacency(r, c) = g.adjacency(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(c)]);
      }
    }
    return out;
  }
  const bool keep_same = mask.mode == EdgeMask::Mode::IntraOnly;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool same = classes[static_cast<std::size_t>(i)] == classes[static_cast<std::size_t>(j)];
      if (same != keep_same) out.adjacency(i, j) = 0.0;
    }
  }
  return out;
}

GraphSnapshot apply_mask(const GraphSnapshot& g, const EdgeMask& mask, std::span<const int> classes) {
  return normalize_graph(mask_edges(g, mask, classes));
}

std::vector<int> node_classes(const GraphSnapshot& g, const std::map<std::string, int>& classes) {
  std::vector<int> out;
  out.reserve(g.tickers.size());
  for (const auto& t : g.tickers) {
    auto it = classes.find(t);
    if (it == classes.end()) throw ConfigError("no class label for ticker " + t);
    out.push_back(it->second);
  }
  return out;
}

std::vector<TopologyStats> topology_series(std::span<const GraphSnapshot> graphs,
                                           const std::map<std::string, int>& classes) {
  std::vector<TopologyStats> out;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const auto& g = graphs[k];
    const auto labels = node_classes(g, classes);
    TopologyStats s;
    s.date = g.date;
    s.nodes = g.nodes();
    s.sparsity = edge_sparsity(g);
    s.avg_degree = avg_degree(g);
    s.clustering = clustering_coeff(g);
    s.community_ratio = community_ratio(g, labels);
    if (k > 0) s.jaccard = jaccard_index(g, graphs[k - 1]);
    out.push_back(s);
  }
  return out;
}

std::string topology_csv(std::span<const TopologyStats> stats) {
  std::ostringstream os;
  os << "date,n_nodes,sparsity,avg_degree,clustering,community_ratio,jaccard\n";
  for (const auto& s : stats) {
    os << s.date.iso() << ',' << s.nodes << ',' << csv::format_double(s.sparsity) << ','
       << csv::format_double(s.avg_degree) << ',' << csv::format_double(s.clustering) << ','
       << csv::format_double(s.community_ratio) << ','
       << (s.jaccard ? csv::format_double(*s.jaccard) : std::string()) << '\n';
  }
  return os.str();
}

std::string cluster_labels_csv(const GraphSnapshot& g, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != g.nodes()) {
    throw ConfigError("cluster labels do not match the graph's node count");
  }
  std::ostringstream os;
  os << "date,ticker,cluster\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << g.date.iso() << ',' << csv::escape(g.tickers[i]) << ',' << labels[i] << '\n';
  }
  return os.str();
}

}  // namespace netmom
