#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netmom/graph_learning.hpp"

namespace netmom {

/// Unordered ticker pairs (first < second) with a strictly positive weight.
using EdgeSet = std::set<std::pair<std::string, std::string>>;
EdgeSet edge_set(const GraphSnapshot& g);

/// 2|E| / (N (N - 1)); 0 for graphs with fewer than two nodes.
double edge_sparsity(const GraphSnapshot& g);
/// Mean number of neighbours per node.
double avg_degree(const GraphSnapshot& g);

enum class LowDegreeClustering { Zero, Exclude };
/// Mean local clustering 2 T_i / (d_i (d_i - 1)). Nodes with d_i < 2 count as 0, or are
/// left out of the mean with LowDegreeClustering::Exclude.
double clustering_coeff(const GraphSnapshot& g, LowDegreeClustering mode = LowDegreeClustering::Zero);

/// Fraction of unordered node pairs whose edge presence agrees with class membership:
/// connected same-class pairs plus unconnected cross-class pairs. `classes` follows the
/// node order.
double community_ratio(const GraphSnapshot& g, std::span<const int> classes);

/// |E_t n E_prev| / |E_t u E_prev| over ticker-identified edges; 1 when both are empty.
double jaccard_index(const GraphSnapshot& g, const GraphSnapshot& prev);

/// k smallest eigenvectors of the symmetric normalised Laplacian, rows scaled to unit
/// length, grouped by seeded k-means++ with restarts. Labels are numbered by first
/// appearance in node order.
std::vector<int> spectral_clustering(const GraphSnapshot& g, int k, std::uint64_t seed = 0,
                                     int restarts = 10);

struct EdgeMask {
  enum class Mode { IntraOnly, InterOnly, ClassSubset };
  Mode mode = Mode::IntraOnly;
  /// Class kept by ClassSubset.
  int kept_class = 0;
};

/// Zeroes the masked weights (ClassSubset drops the other nodes entirely).
GraphSnapshot mask_edges(const GraphSnapshot& g, const EdgeMask& mask, std::span<const int> classes);
/// mask_edges followed by symmetric normalisation.
GraphSnapshot apply_mask(const GraphSnapshot& g, const EdgeMask& mask, std::span<const int> classes);

/// Class labels for a graph's nodes from a ticker lookup; throws ConfigError for
/// unknown tickers.
std::vector<int> node_classes(const GraphSnapshot& g, const std::map<std::string, int>& classes);

struct TopologyStats {
  Date date;
  Eigen::Index nodes = 0;
  double sparsity = 0.0;
  double avg_degree = 0.0;
  double clustering = 0.0;
  double community_ratio = 0.0;
  /// Missing for the first graph of the sequence.
  std::optional<double> jaccard;
};

std::vector<TopologyStats> topology_series(std::span<const GraphSnapshot> graphs,
                                           const std::map<std::string, int>& classes);

/// `date,n_nodes,sparsity,avg_degree,clustering,community_ratio,jaccard`.
std::string topology_csv(std::span<const TopologyStats> stats);

/// `date,ticker,cluster`.
std::string cluster_labels_csv(const GraphSnapshot& g, std::span<const int> labels);

}  // namespace netmom
