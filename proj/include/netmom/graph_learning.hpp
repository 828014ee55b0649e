#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netmom/dates.hpp"
#include "netmom/momentum_features.hpp"

namespace netmom {

struct GraphHyperParams {
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const;
  auto operator<=>(const GraphHyperParams&) const = default;
};

/// The alpha/beta grid searched during training, per axis.
inline constexpr std::array<double, 11> kHyperParamAxis{0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05,
                                                        0.1,    0.5,    1.0,   5.0,   10.0};

/// Full cartesian product of kHyperParamAxis.
std::vector<GraphHyperParams> default_hyperparam_grid();

/// Index of the unordered pair (i, j), i < j, in the row-major upper triangle of an
/// n-node graph.
inline Eigen::Index edge_index(Eigen::Index i, Eigen::Index j, Eigen::Index n) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}
inline Eigen::Index edge_count(Eigen::Index n) { return n * (n - 1) / 2; }

/// Squared Euclidean distances between node feature rows, one per unordered pair.
struct PairwiseDistances {
  std::vector<std::string> tickers;
  Eigen::VectorXd z;

  Eigen::Index nodes() const { return static_cast<Eigen::Index>(tickers.size()); }
};

/// Throws ConfigError for fewer than two rows or missing entries.
PairwiseDistances pairwise_sq_distances(const Eigen::MatrixXd& features,
                                        std::vector<std::string> tickers);
PairwiseDistances pairwise_sq_distances(const StackedFeatureMatrix& stacked);

struct SolverOptions {
  double tol = 1e-6;
  int max_iter = 50000;
  /// Rescales z to unit mean before solving (off by default).
  bool unit_mean_scaling = false;
};

struct SolverReport {
  int iterations = 0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double wall_seconds = 0.0;
  bool converged = false;
};

enum class GraphKind { Raw, Ensemble, Normalized };
std::string_view to_string(GraphKind kind);

struct GraphProvenance {
  std::vector<int> lookbacks;
  GraphHyperParams hyperparams;
  std::vector<SolverReport> solver;
};

/// Symmetric, non-negative adjacency with zero diagonal over a named node set.
struct GraphSnapshot {
  Date date;
  std::vector<std::string> tickers;
  Eigen::MatrixXd adjacency;
  GraphKind kind = GraphKind::Raw;
  GraphProvenance provenance;

  Eigen::Index nodes() const { return adjacency.rows(); }
  std::optional<Eigen::Index> node_index(std::string_view ticker) const;
};

Eigen::MatrixXd adjacency_from_edges(const Eigen::VectorXd& w, Eigen::Index n);
Eigen::VectorXd edges_from_adjacency(const Eigen::MatrixXd& adjacency);

/// F(w) = z'w - alpha sum_i log d_i(w) + 2 beta |w|^2; +inf when any degree <= 0.
double graph_objective(const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                       const GraphHyperParams& hp, Eigen::Index n);
Eigen::VectorXd graph_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                               const GraphHyperParams& hp, Eigen::Index n);
/// max over edges of |g_e| when w_e > tol, else max(0, -g_e).
double kkt_residual(const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                    const GraphHyperParams& hp, Eigen::Index n, double tol);
/// w0 = sqrt(alpha / (2 beta (n - 1))), the minimiser when z = 0.
double uniform_edge_weight(const GraphHyperParams& hp, Eigen::Index n);

struct LearnedGraph {
  GraphSnapshot graph;
  Eigen::VectorXd weights;
  SolverReport report;
};

/// Minimises the log-barrier graph objective over w >= 0 with a two-metric projected
/// Newton method and Armijo backtracking along the projection arc. A non-converged
/// result is still returned; check report.converged.
LearnedGraph learn_graph(const PairwiseDistances& distances, const GraphHyperParams& hp,
                         const SolverOptions& options = {},
                         const Eigen::VectorXd* warm_start = nullptr);

/// Mean of the inputs embedded into the union node set (absent nodes contribute zeros).
GraphSnapshot ensemble_graphs(std::span<const GraphSnapshot> graphs);

/// D^{-1/2} A D^{-1/2}; isolated nodes keep zero rows and columns.
GraphSnapshot normalize_graph(const GraphSnapshot& graph);

/// Zeroes weights below rel_eps * max weight.
GraphSnapshot sparsify(const GraphSnapshot& graph, double rel_eps = 1e-4);

struct GraphPipelineConfig {
  std::vector<int> lookbacks{252, 504, 756, 1008, 1260};
  double max_missing_frac = 0.10;
  SolverOptions solver;
  /// Applied to the normalised graph; edges below this fraction of the max are dropped.
  double edge_threshold = 1e-4;
  /// Keep the per-lookback raw graphs in PipelineGraph::raw.
  bool keep_raw = false;
};

/// Memoises pairwise distances per (date index, lookback, asset subset). Thread-safe.
class DistanceCache {
 public:
  std::optional<PairwiseDistances> get(Eigen::Index t, int lookback) const;
  void put(Eigen::Index t, int lookback, PairwiseDistances d);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<Eigen::Index, int>, PairwiseDistances> entries_;
};

/// A normalised graph together with the ensemble it came from.
struct PipelineGraph {
  GraphSnapshot ensemble;
  GraphSnapshot normalized;
  std::vector<GraphSnapshot> raw;
};

/// Normalised and sparsified graph used for propagation.
GraphSnapshot propagation_graph(const GraphSnapshot& ensemble, double edge_threshold);

/// Same graph with nodes listed in the order they appear in `order`; nodes missing
/// from `order` go last in their current order.
GraphSnapshot reorder_nodes(const GraphSnapshot& g, std::span<const std::string> order);

/// Learns one graph per lookback window, ensembles them (nodes in history ticker order)
/// and normalises. Windows with
/// fewer than two qualifying nodes are skipped; throws DataError when none remain.
PipelineGraph learn_graph_pipeline(const FeatureHistory& history, Eigen::Index t,
                                   const GraphHyperParams& hp, const GraphPipelineConfig& config,
                                   DistanceCache* cache = nullptr);

/// Graphs recomputed on a stride and held constant in between. Copies share the graphs.
class GraphSchedule {
 public:
  using Entry = std::shared_ptr<const PipelineGraph>;

  void add(Eigen::Index t, PipelineGraph graph);
  void add(Eigen::Index t, Entry graph);
  /// Most recent graph recomputed at or before t, or nullptr.
  const PipelineGraph* at(Eigen::Index t) const;
  const std::map<Eigen::Index, Entry>& entries() const { return entries_; }
  bool contains(Eigen::Index t) const { return entries_.count(t) > 0; }
  bool empty() const { return entries_.empty(); }
  std::size_t solver_failures() const;
  std::size_t solver_runs() const;

 private:
  std::map<Eigen::Index, Entry> entries_;
};

/// Recompute dates for [first, last]: first, first + stride, ...
std::vector<Eigen::Index> recompute_dates(Eigen::Index first, Eigen::Index last, int stride);

/// Runs the pipeline at each recompute date, in parallel over `jobs` threads. Dates with
/// no learnable window are left out of the schedule.
GraphSchedule learn_graph_schedule(const FeatureHistory& history, Eigen::Index first,
                                   Eigen::Index last, int stride, const GraphHyperParams& hp,
                                   const GraphPipelineConfig& config, int jobs = 1,
                                   DistanceCache* cache = nullptr);

/// Runs the pipeline at the given dates and adds the results to `schedule`.
void learn_graphs_at(const FeatureHistory& history, std::span<const Eigen::Index> dates,
                     const GraphHyperParams& hp, const GraphPipelineConfig& config,
                     GraphSchedule& schedule, int jobs = 1, DistanceCache* cache = nullptr);

/// `date,kind,ticker_i,ticker_j,weight` rows (i < j, non-zero weights only).
std::string graph_edges_csv(std::span<const GraphSnapshot> graphs, bool with_header = true);

}  // namespace netmom
