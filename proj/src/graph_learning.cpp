#include "netmom/graph_learning.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "netmom/csv.hpp"
#include "netmom/errors.hpp"
#include "parallel.hpp"

namespace netmom {

void GraphHyperParams::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("graph hyperparameters must be positive");
}

std::vector<GraphHyperParams> default_hyperparam_grid() {
  std::vector<GraphHyperParams> grid;
  for (double a : kHyperParamAxis) {
    for (double b : kHyperParamAxis) grid.push_back({a, b});
  }
  return grid;
}

std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::Raw: return "raw";
    case GraphKind::Ensemble: return "ensemble";
    case GraphKind::Normalized: return "normalized";
  }
  return "?";
}

std::optional<Eigen::Index> GraphSnapshot::node_index(std::string_view ticker) const {
  auto it = std::find(tickers.begin(), tickers.end(), ticker);
  if (it == tickers.end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - tickers.begin());
}

PairwiseDistances pairwise_sq_distances(const Eigen::MatrixXd& features,
                                        std::vector<std::string> tickers) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw ConfigError("pairwise distances need at least two nodes");
  if (static_cast<Eigen::Index>(tickers.size()) != n) {
    throw ConfigError("ticker count does not match feature rows");
  }
  if (features.hasNaN()) throw ConfigError("feature matrix has missing entries");
  // Node vectors as contiguous columns.
  const Eigen::MatrixXd cols = features.transpose();
  PairwiseDistances out{std::move(tickers), Eigen::VectorXd(edge_count(n))};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      out.z(edge_index(i, j, n)) = (cols.col(i) - cols.col(j)).squaredNorm();
    }
  }
  return out;
}

PairwiseDistances pairwise_sq_distances(const StackedFeatureMatrix& stacked) {
  return pairwise_sq_distances(stacked.values, stacked.tickers);
}

Eigen::MatrixXd adjacency_from_edges(const Eigen::VectorXd& w, Eigen::Index n) {
  if (w.size() != edge_count(n)) throw ConfigError("edge vector length does not match node count");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      a(i, j) = a(j, i) = w(edge_index(i, j, n));
    }
  }
  return a;
}

Eigen::VectorXd edges_from_adjacency(const Eigen::MatrixXd& adjacency) {
  const Eigen::Index n = adjacency.rows();
  Eigen::VectorXd w(edge_count(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) w(edge_index(i, j, n)) = adjacency(i, j);
  }
  return w;
}

namespace {

constexpr double kMinDegree = 1e-12;
constexpr Eigen::Index kDenseNewtonLimit = 2500;

struct EdgeEndpoints {
  std::vector<Eigen::Index> head;
  std::vector<Eigen::Index> tail;

  explicit EdgeEndpoints(Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        head.push_back(i);
        tail.push_back(j);
      }
    }
  }
  Eigen::Index size() const { return static_cast<Eigen::Index>(head.size()); }
};

Eigen::VectorXd degrees(const Eigen::VectorXd& w, const EdgeEndpoints& edges, Eigen::Index n) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  for (Eigen::Index e = 0; e < edges.size(); ++e) {
    d(edges.head[e]) += w(e);
    d(edges.tail[e]) += w(e);
  }
  return d;
}

double objective_with(const Eigen::VectorXd& z, const Eigen::VectorXd& w, const Eigen::VectorXd& d,
                      const GraphHyperParams& hp) {
  if (d.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
  return z.dot(w) - hp.alpha * d.array().log().sum() + 2.0 * hp.beta * w.squaredNorm();
}

Eigen::VectorXd gradient_with(const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                              const Eigen::VectorXd& d, const GraphHyperParams& hp,
                              const EdgeEndpoints& edges) {
  Eigen::VectorXd g(edges.size());
  for (Eigen::Index e = 0; e < edges.size(); ++e) {
    g(e) = z(e) - hp.alpha * (1.0 / d(edges.head[e]) + 1.0 / d(edges.tail[e])) +
           4.0 * hp.beta * w(e);
  }
  return g;
}

double residual_with(const Eigen::VectorXd& w, const Eigen::VectorXd& g, double tol) {
  double r = 0.0;
  for (Eigen::Index e = 0; e < w.size(); ++e) {
    r = std::max(r, w(e) > tol ? std::abs(g(e)) : std::max(0.0, -g(e)));
  }
  return r;
}

// Newton system on the free edges. The Hessian restricted to them is
//   H = c I + alpha B' D^-2 B,  c = 4 beta,
// with B the node-edge incidence of free edges. Woodbury reduces H^-1 v to an
// n x n solve: H^-1 v = (v - B' K^-1 B v) / c, K = (c / alpha) D^2 + B B'.
class FreeEdgeNewton {
 public:
  FreeEdgeNewton(const EdgeEndpoints& edges, const std::vector<Eigen::Index>& free_edges,
                 const Eigen::VectorXd& d, const GraphHyperParams& hp)
      : edges_(edges), free_(free_edges), d_(d), hp_(hp), c_(4.0 * hp.beta) {
    const Eigen::Index n = d.size();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    k.diagonal() = (c_ / hp.alpha) * d.array().square().matrix();
    for (auto e : free_) {
      const auto i = edges.head[e];
      const auto j = edges.tail[e];
      k(i, i) += 1.0;
      k(j, j) += 1.0;
      k(i, j) += 1.0;
      k(j, i) += 1.0;
    }
    ldlt_.compute(k);
  }

  // v indexed like free_.
  Eigen::VectorXd apply_hessian(const Eigen::VectorXd& v) const {
    Eigen::VectorXd bv = Eigen::VectorXd::Zero(d_.size());
    scatter(v, bv);
    bv.array() *= hp_.alpha / d_.array().square();
    Eigen::VectorXd out = c_ * v;
    gather(bv, out);
    return out;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& v) const {
    Eigen::VectorXd bv = Eigen::VectorXd::Zero(d_.size());
    scatter(v, bv);
    const Eigen::VectorXd y = ldlt_.solve(bv);
    Eigen::VectorXd out = v;
    Eigen::VectorXd neg = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(free_.size()));
    gather(y, neg);
    return (out - neg) / c_;
  }

  bool ok() const { return ldlt_.info() == Eigen::Success; }

  Eigen::VectorXd dense_solve(const Eigen::VectorXd& v) {
    if (!dense_) {
      const auto nf = static_cast<Eigen::Index>(free_.size());
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d_.size(), nf);
      for (Eigen::Index f = 0; f < nf; ++f) {
        const auto e = free_[static_cast<std::size_t>(f)];
        m(edges_.head[e], f) = std::sqrt(hp_.alpha) / d_(edges_.head[e]);
        m(edges_.tail[e], f) = std::sqrt(hp_.alpha) / d_(edges_.tail[e]);
      }
      Eigen::MatrixXd h = m.transpose() * m;
      h.diagonal().array() += c_;
      dense_.emplace(h);
    }
    return dense_->solve(v);
  }

 private:
  void scatter(const Eigen::VectorXd& v, Eigen::VectorXd& nodes) const {
    for (std::size_t f = 0; f < free_.size(); ++f) {
      const auto e = free_[f];
      nodes(edges_.head[e]) += v(static_cast<Eigen::Index>(f));
      nodes(edges_.tail[e]) += v(static_cast<Eigen::Index>(f));
    }
  }
  void gather(const Eigen::VectorXd& nodes, Eigen::VectorXd& out) const {
    for (std::size_t f = 0; f < free_.size(); ++f) {
      const auto e = free_[f];
      out(static_cast<Eigen::Index>(f)) += nodes(edges_.head[e]) + nodes(edges_.tail[e]);
    }
  }

  const EdgeEndpoints& edges_;
  const std::vector<Eigen::Index>& free_;
  const Eigen::VectorXd& d_;
  GraphHyperParams hp_;
  double c_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> dense_;
};

}  // namespace

double graph_objective(const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                       const GraphHyperParams& hp, Eigen::Index n) {
  const EdgeEndpoints edges(n);
  return objective_with(z, w, degrees(w, edges, n), hp);
}

Eigen::VectorXd graph_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                               const GraphHyperParams& hp, Eigen::Index n) {
  const EdgeEndpoints edges(n);
  return gradient_with(z, w, degrees(w, edges, n), hp, edges);
}

double kkt_residual(const Eigen::VectorXd& z, const Eigen::VectorXd& w, const GraphHyperParams& hp,
                    Eigen::Index n, double tol) {
  return residual_with(w, graph_gradient(z, w, hp, n), tol);
}

double uniform_edge_weight(const GraphHyperParams& hp, Eigen::Index n) {
  return std::sqrt(hp.alpha / (2.0 * hp.beta * static_cast<double>(n - 1)));
}

LearnedGraph learn_graph(const PairwiseDistances& distances, const GraphHyperParams& hp,
                         const SolverOptions& options, const Eigen::VectorXd* warm_start) {
  hp.validate();
  if (!(options.tol > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (options.max_iter < 1) throw ConfigError("solver max_iter must be >= 1");
  const Eigen::Index n = distances.nodes();
  if (n < 2) throw ConfigError("graph learning needs at least two nodes");
  if (distances.z.size() != edge_count(n)) throw ConfigError("distance vector has wrong length");
  if (distances.z.minCoeff() < 0.0 || distances.z.hasNaN()) {
    throw ConfigError("distances must be finite and non-negative");
  }

  const auto started = std::chrono::steady_clock::now();
  const EdgeEndpoints edges(n);
  const Eigen::Index m = edges.size();
  Eigen::VectorXd z = distances.z;
  if (options.unit_mean_scaling && z.mean() > 0.0) z /= z.mean();

  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, uniform_edge_weight(hp, n));
  if (warm_start != nullptr && warm_start->size() == m && warm_start->minCoeff() >= 0.0 &&
      degrees(*warm_start, edges, n).minCoeff() > kMinDegree) {
    w = *warm_start;
  }

  constexpr double kArmijo = 1e-4;
  const double tol = options.tol;
  Eigen::VectorXd d = degrees(w, edges, n);
  double f = objective_with(z, w, d, hp);
  Eigen::VectorXd g = gradient_with(z, w, d, hp, edges);
  // Stopping uses exact complementarity (only w_e == 0 counts as the bound). The
  // reported residual treats w_e <= tol as the bound, so it is never larger.
  double strict = residual_with(w, g, 0.0);

  int iter = 0;
  std::vector<Eigen::Index> free_edges;
  free_edges.reserve(static_cast<std::size_t>(m));
  Eigen::VectorXd w_next, d_next, g_next;
  while (strict > tol && iter < options.max_iter) {
    ++iter;
    Eigen::VectorXd diag_h(m);
    for (Eigen::Index e = 0; e < m; ++e) {
      const double di = d(edges.head[e]);
      const double dj = d(edges.tail[e]);
      diag_h(e) = 4.0 * hp.beta + hp.alpha * (1.0 / (di * di) + 1.0 / (dj * dj));
    }
    // Active-set threshold shrinks with the diagonally scaled projected step, which
    // stays meaningful when the weights are many orders of magnitude below 1.
    const double eps =
        std::min(1e-3, (w - (w - g.cwiseQuotient(diag_h)).cwiseMax(0.0)).norm());
    free_edges.clear();
    Eigen::VectorXd p(m);
    for (Eigen::Index e = 0; e < m; ++e) {
      if (w(e) <= eps && g(e) > 0.0) {
        p(e) = -g(e) / diag_h(e);
      } else {
        free_edges.push_back(e);
      }
    }
    if (!free_edges.empty()) {
      const auto nf = static_cast<Eigen::Index>(free_edges.size());
      Eigen::VectorXd gf(nf);
      for (Eigen::Index k = 0; k < nf; ++k) gf(k) = g(free_edges[static_cast<std::size_t>(k)]);
      FreeEdgeNewton newton(edges, free_edges, d, hp);
      Eigen::VectorXd pf;
      bool solved = false;
      if (newton.ok()) {
        pf = newton.solve(-gf);
        for (int refine = 0; refine < 2; ++refine) pf += newton.solve(-gf - newton.apply_hessian(pf));
        solved = (newton.apply_hessian(pf) + gf).norm() <= 1e-8 * gf.norm();
      }
      // Woodbury loses accuracy when alpha / d^2 dwarfs 4 beta on a bipartite free
      // subgraph; fall back to a dense factorisation of the free-edge Hessian.
      if (!solved && nf <= kDenseNewtonLimit) {
        pf = newton.dense_solve(-gf);
        pf += newton.dense_solve(-gf - newton.apply_hessian(pf));
      }
      if (pf.size() != nf || !pf.allFinite() || gf.dot(pf) >= 0.0) {
        pf.resize(nf);
        for (Eigen::Index k = 0; k < nf; ++k) {
          pf(k) = -gf(k) / diag_h(free_edges[static_cast<std::size_t>(k)]);
        }
      }
      for (Eigen::Index k = 0; k < nf; ++k) p(free_edges[static_cast<std::size_t>(k)]) = pf(k);
    }

    // Objective differences below this are rounding noise; there the step is judged
    // by the optimality residual instead.
    const double f_noise =
        1e-13 * (std::abs(z.dot(w)) + hp.alpha * d.array().log().abs().sum() +
                 2.0 * hp.beta * w.squaredNorm());

    // Armijo backtracking along the projection arc w(s) = max(0, w + s p).
    double step = 1.0;
    bool accepted = false;
    double f_next = f;
    double strict_next = strict;
    for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
      w_next = (w + step * p).cwiseMax(0.0);
      d_next = degrees(w_next, edges, n);
      if (d_next.minCoeff() <= kMinDegree) continue;
      f_next = objective_with(z, w_next, d_next, hp);
      double predicted = 0.0;
      std::size_t fi = 0;
      for (Eigen::Index e = 0; e < m; ++e) {
        if (fi < free_edges.size() && free_edges[fi] == e) {
          predicted += -step * g(e) * p(e);
          ++fi;
        } else {
          predicted += g(e) * (w(e) - w_next(e));
        }
      }
      g_next = gradient_with(z, w_next, d_next, hp, edges);
      strict_next = residual_with(w_next, g_next, 0.0);
      if (predicted <= f_noise) {
        if (strict_next < strict && f_next <= f + f_noise) {
          accepted = true;
          break;
        }
      } else if (f_next <= f - kArmijo * predicted) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    w.swap(w_next);
    d.swap(d_next);
    g.swap(g_next);
    f = f_next;
    strict = strict_next;
  }

  SolverReport report;
  report.iterations = iter;
  report.objective = f;
  report.kkt_residual = residual_with(w, g, tol);
  report.converged = report.kkt_residual <= tol;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  LearnedGraph out;
  out.weights = w;
  out.report = report;
  out.graph.tickers = distances.tickers;
  out.graph.adjacency = adjacency_from_edges(w, n);
  out.graph.kind = GraphKind::Raw;
  out.graph.provenance.hyperparams = hp;
  out.graph.provenance.solver.push_back(report);
  return out;
}

GraphSnapshot ensemble_graphs(std::span<const GraphSnapshot> graphs) {
  if (graphs.empty()) throw ConfigError("ensemble needs at least one graph");
  GraphSnapshot out;
  out.date = graphs.front().date;
  out.kind = GraphKind::Ensemble;
  out.provenance.hyperparams = graphs.front().provenance.hyperparams;
  for (const auto& g : graphs) {
    if (g.date != out.date) throw ConfigError("ensemble inputs must share one date");
    for (const auto& t : g.tickers) {
      if (std::find(out.tickers.begin(), out.tickers.end(), t) == out.tickers.end()) {
        out.tickers.push_back(t);
      }
    }
    out.provenance.lookbacks.insert(out.provenance.lookbacks.end(), g.provenance.lookbacks.begin(),
                                    g.provenance.lookbacks.end());
    out.provenance.solver.insert(out.provenance.solver.end(), g.provenance.solver.begin(),
                                 g.provenance.solver.end());
  }
  const auto n = static_cast<Eigen::Index>(out.tickers.size());
  out.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (const auto& g : graphs) {
    std::vector<Eigen::Index> map(g.tickers.size());
    for (std::size_t i = 0; i < g.tickers.size(); ++i) map[i] = *out.node_index(g.tickers[i]);
    for (Eigen::Index i = 0; i < g.nodes(); ++i) {
      for (Eigen::Index j = 0; j < g.nodes(); ++j) {
        out.adjacency(map[static_cast<std::size_t>(i)], map[static_cast<std::size_t>(j)]) +=
            g.adjacency(i, j);
      }
    }
  }
  out.adjacency /= static_cast<double>(graphs.size());
  return out;
}

GraphSnapshot normalize_graph(const GraphSnapshot& graph) {
  GraphSnapshot out = graph;
  out.kind = GraphKind::Normalized;
  const Eigen::VectorXd deg = graph.adjacency.rowwise().sum();
  Eigen::VectorXd inv_sqrt(deg.size());
  for (Eigen::Index i = 0; i < deg.size(); ++i) inv_sqrt(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  out.adjacency = inv_sqrt.asDiagonal() * graph.adjacency * inv_sqrt.asDiagonal();
  // Exact symmetry regardless of rounding in the two products.
  out.adjacency = 0.5 * (out.adjacency + out.adjacency.transpose()).eval();
  return out;
}

GraphSnapshot sparsify(const GraphSnapshot& graph, double rel_eps) {
  if (!(rel_eps >= 0.0)) throw ConfigError("sparsify threshold must be non-negative");
  GraphSnapshot out = graph;
  if (graph.adjacency.size() == 0) return out;
  const double threshold = rel_eps * graph.adjacency.maxCoeff();
  out.adjacency = (graph.adjacency.array() < threshold).select(0.0, graph.adjacency);
  return out;
}

GraphSnapshot propagation_graph(const GraphSnapshot& ensemble, double edge_threshold) {
  return sparsify(normalize_graph(ensemble), edge_threshold);
}

GraphSnapshot reorder_nodes(const GraphSnapshot& g, std::span<const std::string> order) {
  std::vector<Eigen::Index> perm;
  std::vector<bool> used(g.tickers.size(), false);
  for (const auto& t : order) {
    if (auto idx = g.node_index(t)) {
      perm.push_back(*idx);
      used[static_cast<std::size_t>(*idx)] = true;
    }
  }
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (!used[i]) perm.push_back(static_cast<Eigen::Index>(i));
  }
  GraphSnapshot out = g;
  const auto n = static_cast<Eigen::Index>(perm.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    out.tickers[static_cast<std::size_t>(r)] = g.tickers[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])];
    for (Eigen::Index c = 0; c < n; ++c) {
      out.adjacency(r, c) = g.adjacency(perm[static_cast<std::size_t>(r)], perm[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

std::optional<PairwiseDistances> DistanceCache::get(Eigen::Index t, int lookback) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find({t, lookback});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void DistanceCache::put(Eigen::Index t, int lookback, PairwiseDistances d) {
  std::lock_guard lock(mutex_);
  entries_.insert_or_assign({t, lookback}, std::move(d));
}

std::size_t DistanceCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

PipelineGraph learn_graph_pipeline(const FeatureHistory& history, Eigen::Index t,
                                   const GraphHyperParams& hp, const GraphPipelineConfig& config,
                                   DistanceCache* cache) {
  if (config.lookbacks.empty()) throw ConfigError("graph pipeline needs at least one lookback");
  const Date date = history.dates().at(static_cast<std::size_t>(t));
  std::vector<GraphSnapshot> raw;
  for (int lookback : config.lookbacks) {
    std::optional<PairwiseDistances> dist;
    if (cache != nullptr) dist = cache->get(t, lookback);
    if (!dist) {
      const auto stacked = stack_lookback(history, t, lookback, config.max_missing_frac);
      if (stacked.tickers.size() >= 2) dist = pairwise_sq_distances(stacked);
      else dist = PairwiseDistances{stacked.tickers, Eigen::VectorXd()};
      if (cache != nullptr) cache->put(t, lookback, *dist);
    }
    if (dist->nodes() < 2) continue;
    auto learned = learn_graph(*dist, hp, config.solver);
    learned.graph.date = date;
    learned.graph.provenance.lookbacks = {lookback};
    raw.push_back(std::move(learned.graph));
  }
  if (raw.empty()) {
    throw DataError("no lookback window has two or more qualifying assets on " + date.iso());
  }
  PipelineGraph out;
  out.ensemble = reorder_nodes(ensemble_graphs(raw), history.tickers());
  out.normalized = propagation_graph(out.ensemble, config.edge_threshold);
  if (config.keep_raw) out.raw = std::move(raw);
  return out;
}

void GraphSchedule::add(Eigen::Index t, PipelineGraph graph) {
  add(t, std::make_shared<const PipelineGraph>(std::move(graph)));
}

void GraphSchedule::add(Eigen::Index t, Entry graph) { entries_.insert_or_assign(t, std::move(graph)); }

const PipelineGraph* GraphSchedule::at(Eigen::Index t) const {
  auto it = entries_.upper_bound(t);
  if (it == entries_.begin()) return nullptr;
  return std::prev(it)->second.get();
}

std::size_t GraphSchedule::solver_failures() const {
  std::size_t count = 0;
  for (const auto& [t, g] : entries_) {
    for (const auto& r : g->ensemble.provenance.solver) count += r.converged ? 0 : 1;
  }
  return count;
}

std::size_t GraphSchedule::solver_runs() const {
  std::size_t count = 0;
  for (const auto& [t, g] : entries_) count += g->ensemble.provenance.solver.size();
  return count;
}

std::vector<Eigen::Index> recompute_dates(Eigen::Index first, Eigen::Index last, int stride) {
  if (stride < 1) throw ConfigError("graph stride must be >= 1 day");
  std::vector<Eigen::Index> out;
  for (Eigen::Index t = first; t <= last; t += stride) out.push_back(t);
  return out;
}

GraphSchedule learn_graph_schedule(const FeatureHistory& history, Eigen::Index first,
                                   Eigen::Index last, int stride, const GraphHyperParams& hp,
                                   const GraphPipelineConfig& config, int jobs,
                                   DistanceCache* cache) {
  const auto dates = recompute_dates(std::max<Eigen::Index>(first, 0),
                                     std::min(last, history.days() - 1), stride);
  GraphSchedule schedule;
  learn_graphs_at(history, dates, hp, config, schedule, jobs, cache);
  return schedule;
}

void learn_graphs_at(const FeatureHistory& history, std::span<const Eigen::Index> dates,
                     const GraphHyperParams& hp, const GraphPipelineConfig& config,
                     GraphSchedule& schedule, int jobs, DistanceCache* cache) {
  std::vector<std::optional<PipelineGraph>> results(dates.size());
  detail::parallel_for(dates.size(), jobs, [&](std::size_t i) {
    try {
      results[i] = learn_graph_pipeline(history, dates[i], hp, config, cache);
    } catch (const DataError&) {
      // No learnable window on this date; the previous graph stays in force.
    }
  });
  for (std::size_t i = 0; i < dates.size(); ++i) {
    if (results[i]) schedule.add(dates[i], std::move(*results[i]));
  }
}

std::string graph_edges_csv(std::span<const GraphSnapshot> graphs, bool with_header) {
  std::ostringstream os;
  if (with_header) os << "date,kind,ticker_i,ticker_j,weight\n";
  for (const auto& g : graphs) {
    const std::string date = g.date.iso();
    for (Eigen::Index i = 0; i < g.nodes(); ++i) {
      for (Eigen::Index j = i + 1; j < g.nodes(); ++j) {
        const double w = g.adjacency(i, j);
        if (w == 0.0) continue;
        os << date << ',' << to_string(g.kind) << ',' << csv::escape(g.tickers[static_cast<std::size_t>(i)])
           << ',' << csv::escape(g.tickers[static_cast<std::size_t>(j)]) << ','
           << csv::format_double(w) << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace netmom
