#pragma once

#include <Eigen/Core>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "netmom/graph_analysis.hpp"
#include "netmom/graph_learning.hpp"
#include "netmom/market_data.hpp"
#include "netmom/momentum_features.hpp"
#include "netmom/strategies.hpp"

namespace netmom {

inline constexpr double kTargetVolatility = 0.15;

struct SplitAnchors {
  /// Calendar year in which the first training span ends.
  int first_train_end_year = 1999;
  /// Years between retrains, which is also the length of each test span.
  int step_years = 5;
  double validation_fraction = 0.10;
};

/// Row indices into the trading calendar, all spans inclusive.
struct WalkForwardSplit {
  Eigen::Index train_first = 0;
  Eigen::Index train_last = 0;
  Eigen::Index validation_first = 0;
  Eigen::Index test_first = 0;
  Eigen::Index test_last = 0;
  int train_first_year = 0;
  int train_last_year = 0;
  int test_first_year = 0;
  int test_last_year = 0;

  /// Test span as `YYYY-YYYY`.
  std::string test_label() const;
};

/// Expanding-window splits: train through the anchor year, test the next step_years
/// (clipped to the calendar), then extend training and repeat. The validation span is
/// the last ceil(fraction x train days) of each training span.
std::vector<WalkForwardSplit> generate_splits(const TradingCalendar& calendar,
                                              const SplitAnchors& anchors = {});

/// Everything derived from prices that the strategies consume.
struct MarketData {
  PricePanel panel;
  ReturnPanel returns;
  /// Daily EWM volatility (span 60) of daily returns.
  DatedMatrix sigma;
  FeatureHistory features;
  /// targets(t, i) = r_{i,t+1} / sigma_{i,t}.
  Eigen::MatrixXd targets;
  std::map<std::string, int> classes;
};

MarketData prepare_market(PricePanel panel, const WinsorSpec& winsor = {});

/// Daily portfolio returns keyed by signal date t (each earns r_{t:t+1}).
struct PortfolioReturns {
  std::string strategy;
  bool scaled = false;
  std::vector<Date> dates;
  std::vector<double> values;
  /// Assets in the average each day (N_t).
  std::vector<int> counts;
  /// Asset-days dropped because sigma was zero.
  std::size_t zero_vol_exclusions = 0;
};

/// (1 / N_t) sum_i x_i sigma_tgt / sigma_i r_{i,t:t+1} with sigma annualised, over assets
/// with a position, next-day return and volatility. When `turnover` and a
/// positive cost are given, c * zeta_i is subtracted inside the average.
PortfolioReturns portfolio_returns(const SignalSeries& signals, const ReturnPanel& returns,
                                   const DatedMatrix& sigma_daily,
                                   double target_vol = kTargetVolatility,
                                   const DatedMatrix* turnover = nullptr, double cost_bps = 0.0);

/// Turnover zeta_{i,t} = sigma_tgt |x_t / sigma_t - x_{t-1} / sigma_{t-1}| per signal row;
/// a missing position counts as flat.
struct TurnoverReport {
  DatedMatrix zeta;
  /// Mean over days of the cross-sectional mean of zeta over traded assets.
  double average = 0.0;
};
TurnoverReport turnover(const SignalSeries& signals, const DatedMatrix& sigma_daily,
                        double target_vol = kTargetVolatility);

PortfolioReturns cost_adjusted_returns(const SignalSeries& signals, const ReturnPanel& returns,
                                       const DatedMatrix& sigma_daily, const TurnoverReport& turnover,
                                       double cost_bps, double target_vol = kTargetVolatility);

inline constexpr int kPortfolioVolSpan = 60;

/// Ex-ante portfolio-level scaling. Day k is multiplied by
/// sigma_tgt / (ewm_std_60 of days < k x sqrt(252)); the first 60 days and days with
/// zero estimated volatility are dropped.
PortfolioReturns scale_to_target_vol(const PortfolioReturns& raw, double target_vol = kTargetVolatility);

/// Multipliers used by scale_to_target_vol, aligned with raw.values (NaN = dropped).
std::vector<double> target_vol_multipliers(const PortfolioReturns& raw,
                                           double target_vol = kTargetVolatility);

enum class DrawdownDuration { PeakToRecovery, PeakToTrough };

struct PerfReport {
  std::size_t days = 0;
  double annual_return = 0.0;
  double volatility = 0.0;
  std::optional<double> sharpe;
  double downside_deviation = 0.0;
  double max_drawdown = 0.0;
  double mdd_duration = 0.0;
  std::optional<double> sortino;
  std::optional<double> calmar;
  double hit_rate = 0.0;
  std::optional<double> avg_profit_loss;
};

struct Drawdown {
  double depth = 0.0;
  std::size_t peak = 0;
  std::size_t trough = 0;
  /// First index at or above the peak after the trough, or the curve length.
  std::size_t recovery = 0;
};
/// Largest peak-to-trough decline, 1 - trough / peak, of an equity curve.
Drawdown max_drawdown(std::span<const double> equity);

PerfReport perf_metrics(std::span<const double> returns,
                        DrawdownDuration duration = DrawdownDuration::PeakToRecovery);

/// Pearson correlation on common dates; throws DataError with fewer than 30.
double return_correlation(const PortfolioReturns& a, const PortfolioReturns& b);

/// Share of (date, ticker) cells, both non-zero, where the positions agree in sign.
/// NaN when there is no such cell.
double sign_agreement(const SignalSeries& a, const SignalSeries& b);

// ---------------------------------------------------------------------------------
// Walk-forward protocol.

enum class Ablation { Intra, Inter, ClassTrade, ClassGraph, Lookback };
std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view name);

struct BacktestConfig {
  std::vector<StrategyKind> strategies{StrategyKind::LongOnly, StrategyKind::Macd,
                                       StrategyKind::LinReg,   StrategyKind::Gmom,
                                       StrategyKind::RegCombo, StrategyKind::SignCombo};
  std::vector<Ablation> ablations;
  SplitAnchors anchors;
  GraphPipelineConfig graph;
  std::vector<GraphHyperParams> grid = default_hyperparam_grid();
  /// Graph recompute stride in trading days for the backtest and the search.
  int stride = 1;
  int search_stride = 21;
  double target_vol = kTargetVolatility;
  std::vector<double> costs_bps{0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0};
  DrawdownDuration drawdown = DrawdownDuration::PeakToRecovery;
  int jobs = 1;
  /// Largest tolerated share of non-converged solver runs across the learned schedules.
  double max_solver_failure_frac = 0.01;

  bool needs_graphs() const;
  void validate() const;
};

struct HyperParamScore {
  GraphHyperParams hp;
  /// Validation Sharpe of raw GMOM signals; empty when undefined or unfittable.
  std::optional<double> sharpe;
};

/// Picks the grid point with the best validation Sharpe of raw GMOM signals, with graphs
/// recomputed every `stride` days. The regression is fitted on targets that end before
/// the validation span. Ties go to the larger alpha, then the larger beta; undefined
/// Sharpe ratios rank last. Throws DataError when no grid point yields a model.
struct GridSearchResult {
  GraphHyperParams best;
  std::vector<HyperParamScore> scores;
};
GridSearchResult grid_search(const MarketData& market, const WalkForwardSplit& split,
                             std::span<const GraphHyperParams> grid, const GraphPipelineConfig& config,
                             int stride, int jobs = 1, DistanceCache* cache = nullptr);

/// Graphs one split needs: the selected hyperparameters, the main schedule over
/// [0, test_last] and, for the per-class ablation, schedules learned on each class alone.
struct SplitGraphs {
  GraphHyperParams hp;
  std::vector<HyperParamScore> search;
  GraphSchedule schedule;
  std::map<int, GraphSchedule> class_schedules;
};

/// Class-restricted copy of the market's feature history.
FeatureHistory class_history(const MarketData& market, int cls);

/// Persistence for learned schedules and search results, so an interrupted run can pick
/// up where it stopped. Schedules are keyed by schedule_key().
class ScheduleStore {
 public:
  virtual ~ScheduleStore() = default;
  /// Adds stored graphs to `schedule`; returns every date already attempted.
  virtual std::set<Eigen::Index> load(const std::string& key, GraphSchedule& schedule) = 0;
  /// Records newly attempted dates; graphs are read from `schedule`.
  virtual void save(const std::string& key, std::span<const Eigen::Index> attempted,
                    const GraphSchedule& schedule) = 0;
  virtual std::optional<GridSearchResult> load_search(const std::string& split) = 0;
  virtual void save_search(const std::string& split, const GridSearchResult& result) = 0;
  /// When true, anything not already stored is a DataError instead of being learned.
  virtual bool read_only() const { return false; }
};

/// `a<alpha>_b<beta>`, with `_<CLASS>` for class-only schedules.
std::string schedule_key(const GraphHyperParams& hp, std::optional<int> cls = std::nullopt);

/// Learns (or loads) every graph the splits need. Throws SolverBudgetError when more than
/// max_solver_failure_frac of the solver runs did not converge.
std::vector<SplitGraphs> learn_walk_forward_graphs(const MarketData& market,
                                                   std::span<const WalkForwardSplit> splits,
                                                   const BacktestConfig& config,
                                                   ScheduleStore* store = nullptr);

struct StrategyResult {
  std::string name;
  SignalSeries signals;
  PortfolioReturns raw;
  PortfolioReturns scaled;
  PerfReport perf_raw;
  PerfReport perf_scaled;
  TurnoverReport turnover;
  /// Sharpe of the volatility-scaled, cost-adjusted series per cost in config order.
  std::vector<std::optional<double>> cost_sharpe;
};

struct BacktestResult {
  std::vector<StrategyResult> strategies;
  std::vector<std::string> periods;
  std::vector<RegressionModel> linreg_models;
  std::vector<RegressionModel> gmom_models;
  std::vector<RegressionModel> regcombo_models;
  /// Pairwise over `strategies` (scaled returns / signals).
  Eigen::MatrixXd return_correlation;
  Eigen::MatrixXd sign_agreement;
  /// Propagation graphs recomputed inside the test spans, in date order.
  std::vector<GraphSnapshot> test_graphs;
};

/// Fits every strategy and ablation per split on data up to the split's training end
/// and emits signals over its test span; test spans are concatenated.
BacktestResult run_walk_forward(const MarketData& market, std::span<const WalkForwardSplit> splits,
                                std::span<const SplitGraphs> graphs, const BacktestConfig& config);

}  // namespace netmom
