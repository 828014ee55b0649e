#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "netmom/backtest.hpp"
#include "netmom/csv.hpp"
#include "netmom/errors.hpp"

namespace netmom {

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::Intra: return "intra";
    case Ablation::Inter: return "inter";
    case Ablation::ClassTrade: return "class";
    case Ablation::ClassGraph: return "class_graph";
    case Ablation::Lookback: return "lookback";
  }
  return "?";
}

Ablation parse_ablation(std::string_view name) {
  for (auto a : {Ablation::Intra, Ablation::Inter, Ablation::ClassTrade, Ablation::ClassGraph,
                 Ablation::Lookback}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown ablation '" + std::string(name) + "'");
}

bool BacktestConfig::needs_graphs() const {
  if (!ablations.empty()) return true;
  return std::any_of(strategies.begin(), strategies.end(), [](StrategyKind k) {
    return k == StrategyKind::Gmom || k == StrategyKind::RegCombo || k == StrategyKind::SignCombo;
  });
}

void BacktestConfig::validate() const {
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  if (stride < 1 || search_stride < 1) throw ConfigError("graph strides must be >= 1");
  if (!(target_vol > 0.0)) throw ConfigError("target volatility must be positive");
  if (!(max_solver_failure_frac >= 0.0 && max_solver_failure_frac <= 1.0)) {
    throw ConfigError("solver failure budget must lie in [0, 1]");
  }
  for (double c : costs_bps) {
    if (!(c >= 0.0)) throw ConfigError("costs must be non-negative");
  }
  if (needs_graphs()) {
    if (grid.empty()) throw ConfigError("hyperparameter grid is empty");
    for (const auto& hp : grid) hp.validate();
    if (graph.lookbacks.empty()) throw ConfigError("at least one lookback window is required");
  }
}

namespace {

/// Propagation graphs over time; each entry holds until the next one.
class GraphTimeline {
 public:
  using Entry = std::shared_ptr<const GraphSnapshot>;

  void add(Eigen::Index t, Entry g) { entries_.insert_or_assign(t, std::move(g)); }
  const GraphSnapshot* at(Eigen::Index t) const {
    auto it = entries_.upper_bound(t);
    if (it == entries_.begin()) return nullptr;
    return std::prev(it)->second.get();
  }

 private:
  std::map<Eigen::Index, Entry> entries_;
};

GraphTimeline base_timeline(const GraphSchedule& schedule) {
  GraphTimeline out;
  for (const auto& [t, entry] : schedule.entries()) {
    out.add(t, GraphTimeline::Entry(entry, &entry->normalized));
  }
  return out;
}

template <typename Fn>
GraphTimeline derived_timeline(const GraphSchedule& schedule, Fn&& derive) {
  GraphTimeline out;
  for (const auto& [t, entry] : schedule.entries()) {
    if (auto g = derive(*entry)) out.add(t, std::make_shared<const GraphSnapshot>(std::move(*g)));
  }
  return out;
}

/// Row-major sample accumulator for the pooled regression.
struct Samples {
  Eigen::Index width = 0;
  std::vector<double> x;
  std::vector<double> y;

  explicit Samples(Eigen::Index w) : width(w) {}
  void add(const Eigen::Ref<const Eigen::RowVectorXd>& row, double target) {
    for (Eigen::Index k = 0; k < width; ++k) x.push_back(row(k));
    y.push_back(target);
  }
  RegressionModel fit(std::vector<std::string> names) const {
    const auto n = static_cast<Eigen::Index>(y.size());
    const Eigen::MatrixXd xm =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x.data(), n, width);
    const Eigen::VectorXd ym = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    return fit_ols(xm, ym, std::move(names));
  }
};

std::vector<std::string> feature_names(const std::string& prefix) {
  std::vector<std::string> out;
  for (auto n : kFeatureNames) out.push_back(prefix + std::string(n));
  return out;
}

std::vector<std::string> combo_names() {
  auto out = feature_names("");
  for (auto& n : feature_names("net_")) out.push_back(std::move(n));
  return out;
}

/// Adds (propagated features, target) rows for t in [first, last].
void add_network_samples(const MarketData& market, const FeatureHistory& history,
                         const GraphTimeline& graphs, Eigen::Index first, Eigen::Index last,
                         Samples& out) {
  std::unordered_map<std::string, Eigen::Index> col;
  for (const auto& t : history.tickers()) col.emplace(t, *market.returns.ticker_index(t));
  for (Eigen::Index t = std::max<Eigen::Index>(first, 0); t <= last; ++t) {
    const GraphSnapshot* g = graphs.at(t);
    if (g == nullptr || g->nodes() == 0) continue;
    const auto prop = propagate(*g, history.panel_at(t));
    for (std::size_t i = 0; i < prop.tickers.size(); ++i) {
      const double y = market.targets(t, col.at(prop.tickers[i]));
      if (!is_missing(y)) out.add(prop.values.row(static_cast<Eigen::Index>(i)), y);
    }
  }
}

/// GMOM positions for signal row t written into `row` (market column order).
void network_positions(const MarketData& market, const FeatureHistory& history,
                       const GraphTimeline& graphs, const RegressionModel& model, Eigen::Index t,
                       Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  const GraphSnapshot* g = graphs.at(t);
  if (g == nullptr || g->nodes() == 0) return;
  const auto prop = propagate(*g, history.panel_at(t));
  const auto x = signals_gmom(model, prop);
  for (std::size_t i = 0; i < prop.tickers.size(); ++i) {
    const Eigen::Index c = *market.returns.ticker_index(prop.tickers[i]);
    if (!is_missing(market.panel.prices(t, c))) row(c) = x[i];
  }
}

SignalSeries empty_series(const MarketData& market, std::string name, const std::vector<Eigen::Index>& rows) {
  SignalSeries s;
  s.strategy = std::move(name);
  s.positions.tickers = market.panel.tickers();
  for (auto t : rows) s.positions.dates.push_back(market.panel.calendar[static_cast<std::size_t>(t)]);
  s.positions.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(rows.size()),
                                                 market.panel.prices.cols(), kMissing);
  return s;
}

bool better(const HyperParamScore& a, const HyperParamScore& b) {
  const double sa = a.sharpe.value_or(-std::numeric_limits<double>::infinity());
  const double sb = b.sharpe.value_or(-std::numeric_limits<double>::infinity());
  if (sa != sb) return sa > sb;
  if (a.hp.alpha != b.hp.alpha) return a.hp.alpha > b.hp.alpha;
  return a.hp.beta > b.hp.beta;
}

std::string class_token(int cls) { return std::string(to_token(static_cast<AssetClass>(cls))); }

}  // namespace

GridSearchResult grid_search(const MarketData& market, const WalkForwardSplit& split,
                             std::span<const GraphHyperParams> grid, const GraphPipelineConfig& config,
                             int stride, int jobs, DistanceCache* cache) {
  if (grid.empty()) throw ConfigError("hyperparameter grid is empty");
  if (split.validation_first >= split.train_last) throw DataError("validation span is empty");
  const auto dates = recompute_dates(0, split.train_last, stride);
  std::vector<Eigen::Index> val_rows;
  for (Eigen::Index t = split.validation_first; t < split.train_last; ++t) val_rows.push_back(t);

  GridSearchResult out;
  bool any_model = false;
  for (const auto& hp : grid) {
    hp.validate();
    HyperParamScore score{hp, std::nullopt};
    GraphSchedule schedule;
    learn_graphs_at(market.features, dates, hp, config, schedule, jobs, cache);
    const auto graphs = base_timeline(schedule);
    Samples samples(kNumFeatures);
    add_network_samples(market, market.features, graphs, 0, split.validation_first - 2, samples);
    try {
      const auto model = samples.fit(feature_names(""));
      any_model = true;
      auto signals = empty_series(market, "GMOM", val_rows);
      for (std::size_t r = 0; r < val_rows.size(); ++r) {
        network_positions(market, market.features, graphs, model, val_rows[r],
                          signals.positions.values.row(static_cast<Eigen::Index>(r)));
      }
      const auto port = portfolio_returns(signals, market.returns, market.sigma);
      if (!port.values.empty()) score.sharpe = perf_metrics(port.values).sharpe;
    } catch (const DataError&) {
      // Unfittable grid point: ranks last.
    }
    out.scores.push_back(score);
  }
  if (!any_model) throw DataError("no grid point produced a fittable GMOM regression");
  out.best = std::min_element(out.scores.begin(), out.scores.end(),
                              [](const auto& a, const auto& b) { return better(a, b); })
                 ->hp;
  return out;
}

FeatureHistory class_history(const MarketData& market, int cls) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index a = 0; a < market.features.assets(); ++a) {
    if (market.classes.at(market.features.tickers()[static_cast<std::size_t>(a)]) == cls) cols.push_back(a);
  }
  return market.features.select_assets(cols);
}

namespace {

std::vector<int> present_classes(const MarketData& market) {
  std::set<int> s;
  for (const auto& [t, c] : market.classes) s.insert(c);
  return {s.begin(), s.end()};
}

bool has(const std::vector<Ablation>& list, Ablation a) {
  return std::find(list.begin(), list.end(), a) != list.end();
}

/// A schedule under construction, with every date tried so far.
struct Built {
  GraphSchedule schedule;
  std::set<Eigen::Index> attempted;
  bool loaded = false;
};

inline constexpr std::size_t kSaveBatch = 64;

void extend_schedule(const FeatureHistory& history, Built& b, const std::string& key, Eigen::Index last,
                     int stride, const GraphHyperParams& hp, const GraphPipelineConfig& config,
                     int jobs, DistanceCache* cache, ScheduleStore* store) {
  if (store != nullptr && !b.loaded) {
    b.attempted = store->load(key, b.schedule);
    b.loaded = true;
  }
  std::vector<Eigen::Index> todo;
  for (auto t : recompute_dates(0, std::min(last, history.days() - 1), stride)) {
    if (!b.attempted.count(t)) todo.push_back(t);
  }
  if (todo.empty()) return;
  if (store != nullptr && store->read_only()) {
    throw DataError("graph store has no graphs for " + key + " from " +
                    history.dates()[static_cast<std::size_t>(todo.front())].iso() +
                    "; run the graphs stage with this configuration first");
  }
  for (std::size_t k = 0; k < todo.size(); k += kSaveBatch) {
    const std::span<const Eigen::Index> chunk(todo.data() + k, std::min(kSaveBatch, todo.size() - k));
    learn_graphs_at(history, chunk, hp, config, b.schedule, jobs, cache);
    b.attempted.insert(chunk.begin(), chunk.end());
    if (store != nullptr) store->save(key, chunk, b.schedule);
  }
}

GraphSchedule truncate(const GraphSchedule& s, Eigen::Index last) {
  GraphSchedule out;
  for (const auto& [t, g] : s.entries()) {
    if (t <= last) out.add(t, g);
  }
  return out;
}

}  // namespace

std::string schedule_key(const GraphHyperParams& hp, std::optional<int> cls) {
  std::string key = "a" + csv::format_double(hp.alpha) + "_b" + csv::format_double(hp.beta);
  if (cls) key += "_" + class_token(*cls);
  return key;
}

std::vector<SplitGraphs> learn_walk_forward_graphs(const MarketData& market,
                                                   std::span<const WalkForwardSplit> splits,
                                                   const BacktestConfig& config, ScheduleStore* store) {
  config.validate();
  GraphPipelineConfig pipeline = config.graph;
  pipeline.keep_raw = pipeline.keep_raw || has(config.ablations, Ablation::Lookback);
  DistanceCache cache;
  std::map<GraphHyperParams, Built> built;
  std::map<std::pair<int, GraphHyperParams>, Built> built_class;
  std::map<int, FeatureHistory> histories;
  std::map<int, DistanceCache> class_caches;

  std::vector<SplitGraphs> out;
  for (const auto& split : splits) {
    SplitGraphs sg;
    if (config.grid.size() == 1) {
      sg.hp = config.grid.front();
    } else {
      std::optional<GridSearchResult> search;
      if (store != nullptr) search = store->load_search(split.test_label());
      if (!search) {
        if (store != nullptr && store->read_only()) {
          throw DataError("graph store has no hyperparameter search for split " + split.test_label() +
                          "; run the graphs stage with this configuration first");
        }
        search = grid_search(market, split, config.grid, pipeline, config.search_stride, config.jobs, &cache);
        if (store != nullptr) store->save_search(split.test_label(), *search);
      }
      sg.hp = search->best;
      sg.search = std::move(search->scores);
    }
    auto& b = built[sg.hp];
    extend_schedule(market.features, b, schedule_key(sg.hp), split.test_last, config.stride, sg.hp,
                    pipeline, config.jobs, &cache, store);
    sg.schedule = truncate(b.schedule, split.test_last);
    if (has(config.ablations, Ablation::ClassGraph)) {
      GraphPipelineConfig class_pipeline = pipeline;
      class_pipeline.keep_raw = false;
      for (int cls : present_classes(market)) {
        if (!histories.count(cls)) histories.emplace(cls, class_history(market, cls));
        const auto& h = histories.at(cls);
        if (h.assets() < 2) continue;
        auto& bc = built_class[{cls, sg.hp}];
        extend_schedule(h, bc, schedule_key(sg.hp, cls), split.test_last, config.stride, sg.hp,
                        class_pipeline, config.jobs, &class_caches[cls], store);
        sg.class_schedules.emplace(cls, truncate(bc.schedule, split.test_last));
      }
    }
    out.push_back(std::move(sg));
  }

  std::size_t runs = 0;
  std::size_t failures = 0;
  auto tally = [&](const GraphSchedule& s) {
    runs += s.solver_runs();
    failures += s.solver_failures();
  };
  for (const auto& [hp, b] : built) tally(b.schedule);
  for (const auto& [key, b] : built_class) tally(b.schedule);
  if (runs > 0 && static_cast<double>(failures) > config.max_solver_failure_frac * static_cast<double>(runs)) {
    throw SolverBudgetError(std::to_string(failures) + " of " + std::to_string(runs) +
                            " graph solves did not converge (budget " +
                            csv::format_double(config.max_solver_failure_frac) + ")");
  }
  return out;
}

namespace {

/// A GMOM-style model: graphs, feature history and the assets it may trade.
struct NetworkVariant {
  std::string name;
  const FeatureHistory* history = nullptr;
  GraphTimeline graphs;
};

void fail_split(const WalkForwardSplit& split, const std::string& what, const DataError& e) {
  throw DataError("split " + split.test_label() + ": " + what + ": " + e.what());
}

}  // namespace

BacktestResult run_walk_forward(const MarketData& market, std::span<const WalkForwardSplit> splits,
                                std::span<const SplitGraphs> graphs, const BacktestConfig& config) {
  config.validate();
  if (config.needs_graphs() && graphs.size() != splits.size()) {
    throw ConfigError("graph store does not cover every split; run the graphs stage first");
  }
  const auto& strategies = config.strategies;
  auto wants = [&](StrategyKind k) { return std::find(strategies.begin(), strategies.end(), k) != strategies.end(); };
  const bool want_linreg = wants(StrategyKind::LinReg) || wants(StrategyKind::SignCombo);
  const bool want_gmom = wants(StrategyKind::Gmom) || wants(StrategyKind::SignCombo) ||
                         has(config.ablations, Ablation::ClassTrade);
  const bool want_combo = wants(StrategyKind::RegCombo);
  const auto classes = present_classes(market);

  std::vector<Eigen::Index> test_rows;
  for (const auto& s : splits) {
    for (Eigen::Index t = s.test_first; t <= s.test_last; ++t) test_rows.push_back(t);
  }

  BacktestResult result;
  std::map<std::string, SignalSeries> series;
  std::vector<std::string> order;
  auto series_for = [&](const std::string& name) -> SignalSeries& {
    auto it = series.find(name);
    if (it == series.end()) {
      order.push_back(name);
      it = series.emplace(name, empty_series(market, name, test_rows)).first;
    }
    return it->second;
  };

  std::map<int, FeatureHistory> histories;
  for (int cls : classes) {
    if (has(config.ablations, Ablation::ClassGraph)) histories.emplace(cls, class_history(market, cls));
  }

  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < splits.size(); ++k) {
    const auto& split = splits[k];
    result.periods.push_back(split.test_label());
    const Eigen::Index fit_last = split.train_last - 1;
    std::vector<Eigen::Index> rows;
    for (Eigen::Index t = split.test_first; t <= split.test_last; ++t) rows.push_back(t);
    auto out_row = [&](std::size_t r) { return offset + static_cast<Eigen::Index>(r); };

    // Individual features and the base graph share one pass over the training days.
    GraphTimeline base;
    if (config.needs_graphs()) base = base_timeline(graphs[k].schedule);
    Samples lin(kNumFeatures);
    Samples net(kNumFeatures);
    Samples combo(2 * kNumFeatures);
    for (Eigen::Index t = 0; t <= fit_last; ++t) {
      if (!want_linreg && !want_gmom && !want_combo) break;
      const auto panel = market.features.panel_at(t);
      if (want_linreg) {
        for (std::size_t i = 0; i < panel.tickers.size(); ++i) {
          const double y = market.targets(t, *market.returns.ticker_index(panel.tickers[i]));
          if (!is_missing(y)) lin.add(panel.values.row(static_cast<Eigen::Index>(i)), y);
        }
      }
      if (!want_gmom && !want_combo) continue;
      const GraphSnapshot* g = base.at(t);
      if (g == nullptr || g->nodes() == 0) continue;
      const auto prop = propagate(*g, panel);
      if (want_gmom) {
        for (std::size_t i = 0; i < prop.tickers.size(); ++i) {
          const double y = market.targets(t, *market.returns.ticker_index(prop.tickers[i]));
          if (!is_missing(y)) net.add(prop.values.row(static_cast<Eigen::Index>(i)), y);
        }
      }
      if (want_combo) {
        const auto both = combine_features(panel, prop);
        for (std::size_t i = 0; i < both.tickers.size(); ++i) {
          const double y = market.targets(t, *market.returns.ticker_index(both.tickers[i]));
          if (!is_missing(y)) combo.add(both.values.row(static_cast<Eigen::Index>(i)), y);
        }
      }
    }

    std::optional<RegressionModel> lin_model;
    std::optional<RegressionModel> net_model;
    std::optional<RegressionModel> combo_model;
    try {
      if (want_linreg) lin_model = lin.fit(feature_names(""));
    } catch (const DataError& e) {
      fail_split(split, "LinReg", e);
    }
    try {
      if (want_gmom) net_model = net.fit(feature_names("net_"));
    } catch (const DataError& e) {
      fail_split(split, "GMOM", e);
    }
    try {
      if (want_combo) combo_model = combo.fit(combo_names());
    } catch (const DataError& e) {
      fail_split(split, "RegCombo", e);
    }
    if (lin_model) result.linreg_models.push_back(*lin_model);
    if (net_model) result.gmom_models.push_back(*net_model);
    if (combo_model) result.regcombo_models.push_back(*combo_model);

    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Eigen::Index t = rows[r];
      const auto panel = market.features.panel_at(t);
      std::vector<Eigen::Index> cols;
      for (const auto& ticker : panel.tickers) cols.push_back(*market.returns.ticker_index(ticker));
      if (wants(StrategyKind::LongOnly)) {
        auto& s = series_for("LongOnly");
        for (Eigen::Index a = 0; a < market.panel.prices.cols(); ++a) {
          if (!is_missing(market.panel.prices(t, a))) s.positions.values(out_row(r), a) = 1.0;
        }
      }
      if (wants(StrategyKind::Macd)) {
        auto& s = series_for("MACD");
        const auto x = signals_macd(panel);
        for (std::size_t i = 0; i < cols.size(); ++i) s.positions.values(out_row(r), cols[i]) = x[i];
      }
      if (lin_model) {
        auto& s = series_for("LinReg");
        const auto x = signals_linreg(*lin_model, panel);
        for (std::size_t i = 0; i < cols.size(); ++i) s.positions.values(out_row(r), cols[i]) = x[i];
      }
      if (net_model) {
        network_positions(market, market.features, base, *net_model, t,
                          series_for("GMOM").positions.values.row(out_row(r)));
      }
      if (combo_model) {
        const GraphSnapshot* g = base.at(t);
        if (g != nullptr && g->nodes() > 0) {
          auto& s = series_for("RegCombo");
          const auto x = signals_regcombo(*combo_model, panel, propagate(*g, panel));
          for (std::size_t i = 0; i < cols.size(); ++i) {
            if (!is_missing(x[i])) s.positions.values(out_row(r), cols[i]) = x[i];
          }
        } else {
          series_for("RegCombo");
        }
      }
    }

    // Graph ablations, each refitted on its own propagated features.
    std::vector<NetworkVariant> variants;
    if (config.needs_graphs()) {
      const auto& schedule = graphs[k].schedule;
      auto masked = [&](EdgeMask::Mode mode) {
        return derived_timeline(schedule, [&](const PipelineGraph& p) -> std::optional<GraphSnapshot> {
          const auto labels = node_classes(p.ensemble, market.classes);
          return propagation_graph(mask_edges(p.ensemble, {mode, 0}, labels), config.graph.edge_threshold);
        });
      };
      if (has(config.ablations, Ablation::Intra)) {
        variants.push_back({"GMOM-Intra", &market.features, masked(EdgeMask::Mode::IntraOnly)});
      }
      if (has(config.ablations, Ablation::Inter)) {
        variants.push_back({"GMOM-Inter", &market.features, masked(EdgeMask::Mode::InterOnly)});
      }
      if (has(config.ablations, Ablation::ClassGraph)) {
        for (const auto& [cls, sched] : graphs[k].class_schedules) {
          variants.push_back({"S-" + class_token(cls), &histories.at(cls), base_timeline(sched)});
        }
      }
      if (has(config.ablations, Ablation::Lookback)) {
        for (int lb : config.graph.lookbacks) {
          variants.push_back({"GMOM-LB" + std::to_string(lb), &market.features,
                              derived_timeline(schedule, [&](const PipelineGraph& p) -> std::optional<GraphSnapshot> {
                                for (const auto& raw : p.raw) {
                                  if (raw.provenance.lookbacks == std::vector<int>{lb}) {
                                    return propagation_graph(reorder_nodes(raw, market.features.tickers()),
                                                             config.graph.edge_threshold);
                                  }
                                }
                                return std::nullopt;
                              })});
        }
      }
    }
    for (const auto& v : variants) {
      Samples s(kNumFeatures);
      add_network_samples(market, *v.history, v.graphs, 0, fit_last, s);
      if (std::all_of(s.x.begin(), s.x.end(), [](double x) { return x == 0.0; })) {
        throw DataError("split " + split.test_label() + ": " + v.name +
                        ": its graphs have no edges during training, so every network feature is zero");
      }
      RegressionModel model;
      try {
        model = s.fit(feature_names("net_"));
      } catch (const DataError& e) {
        fail_split(split, v.name, e);
      }
      auto& out = series_for(v.name);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        network_positions(market, *v.history, v.graphs, model, rows[r], out.positions.values.row(out_row(r)));
      }
    }

    if (config.needs_graphs()) {
      for (const auto& [t, entry] : graphs[k].schedule.entries()) {
        if (t >= split.test_first && t <= split.test_last) {
          GraphSnapshot g = entry->normalized;
          g.date = market.panel.calendar[static_cast<std::size_t>(t)];
          result.test_graphs.push_back(std::move(g));
        }
      }
    }
    offset += static_cast<Eigen::Index>(rows.size());
  }

  if (has(config.ablations, Ablation::ClassTrade) && series.count("GMOM")) {
    const auto& gmom = series.at("GMOM");
    for (int cls : classes) {
      auto& s = series_for("M-" + class_token(cls));
      for (Eigen::Index a = 0; a < gmom.positions.cols(); ++a) {
        if (market.classes.at(gmom.positions.tickers[static_cast<std::size_t>(a)]) == cls) {
          s.positions.values.col(a) = gmom.positions.values.col(a);
        }
      }
    }
  }
  if (wants(StrategyKind::SignCombo)) {
    series.insert_or_assign("SignCombo", signals_signcombo(series.at("LinReg"), series.at("GMOM")));
    if (std::find(order.begin(), order.end(), "SignCombo") == order.end()) order.push_back("SignCombo");
  }

  // Requested strategies first in config order, then ablations in creation order.
  std::vector<std::string> names;
  for (auto k : strategies) names.emplace_back(to_string(k));
  for (const auto& n : order) {
    if (std::find(names.begin(), names.end(), n) == names.end() && n != "LinReg" && n != "GMOM") {
      names.push_back(n);
    }
  }
  for (const auto& name : names) {
    StrategyResult sr;
    sr.name = name;
    sr.signals = series.at(name);
    sr.raw = portfolio_returns(sr.signals, market.returns, market.sigma, config.target_vol);
    sr.scaled = scale_to_target_vol(sr.raw, config.target_vol);
    if (!sr.raw.values.empty()) sr.perf_raw = perf_metrics(sr.raw.values, config.drawdown);
    if (!sr.scaled.values.empty()) sr.perf_scaled = perf_metrics(sr.scaled.values, config.drawdown);
    sr.turnover = turnover(sr.signals, market.sigma, config.target_vol);
    const auto mult = target_vol_multipliers(sr.raw, config.target_vol);
    for (double c : config.costs_bps) {
      const auto costed = cost_adjusted_returns(sr.signals, market.returns, market.sigma, sr.turnover, c,
                                                config.target_vol);
      std::vector<double> scaled;
      for (std::size_t i = 0; i < costed.values.size(); ++i) {
        if (!is_missing(mult[i])) scaled.push_back(costed.values[i] * mult[i]);
      }
      sr.cost_sharpe.push_back(scaled.empty() ? std::nullopt : perf_metrics(scaled).sharpe);
    }
    result.strategies.push_back(std::move(sr));
  }

  const auto n = static_cast<Eigen::Index>(result.strategies.size());
  result.return_correlation = Eigen::MatrixXd::Constant(n, n, kMissing);
  result.sign_agreement = Eigen::MatrixXd::Constant(n, n, kMissing);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& a = result.strategies[static_cast<std::size_t>(i)];
      const auto& b = result.strategies[static_cast<std::size_t>(j)];
      try {
        result.return_correlation(i, j) = return_correlation(a.scaled, b.scaled);
      } catch (const DataError&) {
        // Too little overlap; stays missing.
      }
      result.sign_agreement(i, j) = sign_agreement(a.signals, b.signals);
    }
  }
  return result;
}

}  // namespace netmom
