#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"
#include "netmom/backtest.hpp"
#include "netmom/errors.hpp"
#include "netmom/graph_store.hpp"

using namespace netmom;

namespace {

struct Fixture {
  std::vector<Date> dates;
  std::vector<std::string> tickers;
  DatedMatrix ret, sig;
  SignalSeries signals;
};

Fixture random_fixture(oracle::Gen& g) {
  Fixture f;
  f.dates = oracle::calendar(g.integer(3, 40));
  f.tickers = oracle::names(g.integer(1, 6));
  f.ret = oracle::dated(g, f.dates, f.tickers, 0.1, -0.05, 0.05);
  f.sig = oracle::dated(g, f.dates, f.tickers, 0.1, 0.001, 0.03);
  for (Eigen::Index r = 0; r < f.sig.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.sig.cols(); ++c) {
      if (g.chance(0.05)) f.sig.values(r, c) = 0.0;
    }
  }
  f.signals = oracle::signals(g, f.dates, f.tickers);
  return f;
}

SynthConfig persistent() {
  SynthConfig c;
  c.rho = 0.95;
  c.days = 2520;
  return c;
}

BacktestConfig quick() {
  BacktestConfig cfg;
  cfg.anchors.first_train_end_year = 1995;
  cfg.graph.lookbacks = {252};
  cfg.grid = {{0.1, 0.1}, {1.0, 1.0}};
  cfg.stride = 21;
  cfg.search_stride = 63;
  return cfg;
}

}  // namespace

TEST_CASE("split generation covers the calendar with expanding windows") {
  oracle::Gen g(1);
  for (int c = 0; c < 100; ++c) {
    const int start = g.integer(1980, 2000);
    const int end = start + g.integer(3, 30);
    const auto cal = business_days(Date::from_ymd(start, g.integer(1, 12), 1), Date::from_ymd(end, 12, 31));
    SplitAnchors anchors{start + g.integer(0, end - start - 1), g.integer(1, 6), g.uniform(0.05, 0.5)};
    if (cal.front().year() > anchors.first_train_end_year) continue;
    const auto splits = generate_splits(cal, anchors);
    REQUIRE_FALSE(splits.empty());
    for (std::size_t k = 0; k < splits.size(); ++k) {
      const auto& s = splits[k];
      CHECK(s.train_first == 0);
      CHECK(s.test_first == s.train_last + 1);
      CHECK(cal[static_cast<std::size_t>(s.train_last)].year() == s.train_last_year);
      CHECK(cal[static_cast<std::size_t>(s.test_first)].year() == s.test_first_year);
      CHECK(cal[static_cast<std::size_t>(s.test_last)].year() == s.test_last_year);
      CHECK(s.test_last_year - s.test_first_year + 1 <= anchors.step_years);
      const auto train_days = static_cast<double>(s.train_last + 1);
      CHECK(s.train_last + 1 - s.validation_first ==
            static_cast<Eigen::Index>(std::ceil(anchors.validation_fraction * train_days - 1e-9)));
      if (k > 0) CHECK(s.test_first == splits[k - 1].test_last + 1);
    }
    CHECK(splits.back().test_last + 1 == static_cast<Eigen::Index>(cal.size()));
  }
  const auto cal = business_days(Date::from_ymd(2000, 1, 1), Date::from_ymd(2003, 12, 31));
  CHECK_THROWS_AS(generate_splits(cal, {2003, 1, 0.1}), DataError);
  CHECK_THROWS_AS(generate_splits(cal, {2001, 0, 0.1}), ConfigError);
}

TEST_CASE("portfolio returns, turnover and costs match brute-force loops") {
  oracle::Gen g(2);
  for (int c = 0; c < 150; ++c) {
    auto f = random_fixture(g);
    const double tv = g.uniform(0.05, 0.3);
    const auto got = portfolio_returns(f.signals, f.ret, f.sig, tv);
    const auto want = oracle::portfolio(f.signals.positions, f.ret, f.sig, tv, nullptr, 0.0);
    REQUIRE(got.values.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(got.dates[k] == want[k].date);
      CHECK(got.counts[k] == want[k].count);
      CHECK(std::abs(got.values[k] - want[k].value) <= 1e-12);
    }

    double avg = 0.0;
    const auto zeta = oracle::turnover(f.signals.positions, f.sig, tv, &avg);
    const auto to = turnover(f.signals, f.sig, tv);
    for (Eigen::Index r = 0; r < zeta.rows(); ++r) {
      for (Eigen::Index k = 0; k < zeta.cols(); ++k) {
        const double a = to.zeta.values(r, k), b = zeta(r, k);
        CHECK(((std::isnan(a) && std::isnan(b)) || std::abs(a - b) <= 1e-12));
      }
    }
    CHECK(std::abs(to.average - avg) <= 1e-12);

    // Costs only ever lower a day's return.
    const auto cheap = cost_adjusted_returns(f.signals, f.ret, f.sig, to, 1.0, tv);
    const auto dear = cost_adjusted_returns(f.signals, f.ret, f.sig, to, 3.0, tv);
    REQUIRE(cheap.values.size() == got.values.size());
    for (std::size_t k = 0; k < got.values.size(); ++k) {
      CHECK(cheap.values[k] <= got.values[k] + 1e-15);
      CHECK(dear.values[k] <= cheap.values[k] + 1e-15);
    }
  }
}

TEST_CASE("zero volatility excludes the asset-day") {
  const auto dates = oracle::calendar(3);
  DatedMatrix ret{dates, {"a", "b"}, Eigen::MatrixXd::Constant(3, 2, 0.01)};
  DatedMatrix sig{dates, {"a", "b"}, Eigen::MatrixXd::Constant(3, 2, 0.01)};
  sig.values(0, 1) = 0.0;
  SignalSeries s{"S", {dates, {"a", "b"}, Eigen::MatrixXd::Ones(3, 2)}};
  const auto r = portfolio_returns(s, ret, sig, 0.15);
  CHECK(r.zero_vol_exclusions == 1);
  CHECK(r.counts == std::vector<int>{1, 2});
  CHECK(r.values[0] == doctest::Approx(0.15 / (0.01 * std::sqrt(252.0)) * 0.01));
  SignalSeries bad{"S", {dates, {"zz"}, Eigen::MatrixXd::Ones(3, 1)}};
  CHECK_THROWS_AS(portfolio_returns(bad, ret, sig), ConfigError);
}

TEST_CASE("target-vol scaling uses only past portfolio returns") {
  oracle::Gen g(3);
  PortfolioReturns raw;
  for (const auto& d : oracle::calendar(200)) {
    raw.dates.push_back(d);
    raw.values.push_back(g.normal(0.01));
    raw.counts.push_back(3);
  }
  const auto scaled = scale_to_target_vol(raw, 0.15);
  REQUIRE(scaled.values.size() == 200 - kPortfolioVolSpan);
  const double a = 2.0 / (kPortfolioVolSpan + 1.0);
  for (std::size_t k = kPortfolioVolSpan; k < 200; ++k) {
    double sw = 0.0, swx = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      const double w = std::pow(1.0 - a, static_cast<double>(k - 1 - s));
      sw += w;
      swx += w * raw.values[s];
    }
    double ss = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      ss += std::pow(1.0 - a, static_cast<double>(k - 1 - s)) * std::pow(raw.values[s] - swx / sw, 2);
    }
    const double mult = 0.15 / (std::sqrt(ss / sw) * std::sqrt(252.0));
    CHECK(scaled.values[k - kPortfolioVolSpan] == doctest::Approx(raw.values[k] * mult).epsilon(1e-10));
    CHECK(scaled.dates[k - kPortfolioVolSpan] == raw.dates[k]);
  }
  CHECK(scaled.scaled);
}

TEST_CASE("max drawdown agrees with the quadratic scan") {
  oracle::Gen g(4);
  for (int c = 0; c < 200; ++c) {
    const int n = g.integer(1, 60);
    std::vector<double> eq(static_cast<std::size_t>(n));
    double level = 1.0;
    for (auto& v : eq) v = level *= 1.0 + g.normal(0.05);
    double want = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) want = std::max(want, 1.0 - eq[j] / eq[i]);
    }
    const auto dd = max_drawdown(eq);
    CHECK(dd.depth == doctest::Approx(want).epsilon(1e-12));
    if (dd.depth > 0) {
      CHECK(1.0 - eq[dd.trough] / eq[dd.peak] == doctest::Approx(dd.depth));
      CHECK(dd.recovery > dd.trough);
    }
  }
}

TEST_CASE("performance metrics on a hand-checked series") {
  const std::vector<double> r{0.01, -0.02, 0.03, 0.0, -0.01};
  const auto p = perf_metrics(r);
  const double mean = 0.002;
  double ss = 0.0;
  for (double v : r) ss += (v - mean) * (v - mean);
  const double vol = std::sqrt(ss / 4) * std::sqrt(252.0);
  CHECK(p.days == 5);
  CHECK(p.annual_return == doctest::Approx(mean * 252));
  CHECK(p.volatility == doctest::Approx(vol));
  CHECK(*p.sharpe == doctest::Approx(mean * 252 / vol));
  const double dd = std::sqrt((0.0004 + 0.0001) / 5) * std::sqrt(252.0);
  CHECK(p.downside_deviation == doctest::Approx(dd));
  CHECK(*p.sortino == doctest::Approx(mean * 252 / dd));
  // Equity 1, 1.01, 0.9898, 1.019494, 1.019494, 1.00929906: drawdown from 1.019494.
  CHECK(p.max_drawdown == doctest::Approx(0.02));
  CHECK(*p.calmar == doctest::Approx(mean * 252 / 0.02));
  CHECK(p.hit_rate == doctest::Approx(0.4));
  CHECK(*p.avg_profit_loss == doctest::Approx(0.02 / 0.015));
  // Peak at day 1 (equity 1.01), recovered on day 3: two of five days.
  CHECK(p.mdd_duration == doctest::Approx(0.4));
  CHECK(perf_metrics(r, DrawdownDuration::PeakToTrough).mdd_duration == doctest::Approx(0.2));

  const std::vector<double> flat{0.0, 0.0};
  const auto q = perf_metrics(flat);
  CHECK_FALSE(q.sharpe.has_value());
  CHECK_FALSE(q.calmar.has_value());
  CHECK_THROWS_AS(perf_metrics(std::vector<double>{}), DataError);
}

TEST_CASE("correlation and sign agreement") {
  oracle::Gen g(5);
  PortfolioReturns a, b;
  for (const auto& d : oracle::calendar(50)) {
    a.dates.push_back(d);
    a.values.push_back(g.normal());
  }
  b = a;
  for (auto& v : b.values) v = 3.0 * v + 1.0;
  CHECK(return_correlation(a, b) == doctest::Approx(1.0));
  b.dates.erase(b.dates.begin(), b.dates.begin() + 25);
  b.values.erase(b.values.begin(), b.values.begin() + 25);
  CHECK_THROWS_AS(return_correlation(a, b), DataError);

  for (int c = 0; c < 100; ++c) {
    const auto dates = oracle::calendar(20);
    auto x = oracle::signals(g, dates, oracle::names(4));
    auto y = oracle::signals(g, dates, oracle::names(4));
    std::size_t agree = 0, total = 0;
    for (std::size_t r = 0; r < x.positions.dates.size(); ++r) {
      for (std::size_t k = 0; k < x.positions.tickers.size(); ++k) {
        for (std::size_t r2 = 0; r2 < y.positions.dates.size(); ++r2) {
          for (std::size_t k2 = 0; k2 < y.positions.tickers.size(); ++k2) {
            if (y.positions.dates[r2] != x.positions.dates[r] || y.positions.tickers[k2] != x.positions.tickers[k]) continue;
            const double u = x.positions.values(r, k), v = y.positions.values(r2, k2);
            if (std::isnan(u) || std::isnan(v) || u == 0 || v == 0) continue;
            ++total;
            agree += (u > 0) == (v > 0);
          }
        }
      }
    }
    const double s = sign_agreement(x, y);
    if (total == 0) {
      CHECK(std::isnan(s));
    } else {
      CHECK(s == doctest::Approx(static_cast<double>(agree) / total));
    }
  }
}

TEST_CASE("config validation and ablation names") {
  for (auto a : {Ablation::Intra, Ablation::Inter, Ablation::ClassTrade, Ablation::ClassGraph, Ablation::Lookback}) {
    CHECK(parse_ablation(to_string(a)) == a);
  }
  CHECK_THROWS_AS(parse_ablation("Intra"), ConfigError);
  BacktestConfig cfg;
  cfg.validate();
  cfg.strategies = {StrategyKind::LongOnly, StrategyKind::Macd};
  CHECK_FALSE(cfg.needs_graphs());
  cfg.costs_bps = {-1.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_solver_failure_frac = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.grid = {{0.0, 1.0}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("walk-forward run on a persistent synthetic market") {
  const auto m = synth_market(persistent(), 7);
  const auto market = prepare_market(m.panel);
  auto cfg = quick();
  const auto splits = generate_splits(market.panel.calendar, cfg.anchors);
  const auto graphs = learn_walk_forward_graphs(market, splits, cfg);
  REQUIRE(graphs.size() == 1);
  CHECK(std::find(cfg.grid.begin(), cfg.grid.end(), graphs[0].hp) != cfg.grid.end());
  CHECK(graphs[0].search.size() == 2);
  const auto r = run_walk_forward(market, splits, graphs, cfg);

  std::vector<std::string> names;
  for (const auto& s : r.strategies) names.push_back(s.name);
  CHECK(names == std::vector<std::string>{"LongOnly", "MACD", "LinReg", "GMOM", "RegCombo", "SignCombo"});
  CHECK(r.periods == std::vector<std::string>{"1996-1999"});
  CHECK(r.gmom_models.size() == 1);
  CHECK(r.return_correlation.rows() == 6);

  const auto& test_first = market.panel.calendar[static_cast<std::size_t>(splits[0].test_first)];
  for (const auto& s : r.strategies) {
    CHECK(s.signals.positions.dates.front() == test_first);
    CHECK(s.cost_sharpe.size() == cfg.costs_bps.size());
    CHECK(s.perf_raw.days == s.raw.values.size());
  }
  // SignCombo is recoverable from its parents.
  const auto& lin = r.strategies[2].signals.positions.values;
  const auto& gm = r.strategies[3].signals.positions.values;
  const auto& sc = r.strategies[5].signals.positions.values;
  for (Eigen::Index i = 0; i < sc.rows(); ++i) {
    for (Eigen::Index j = 0; j < sc.cols(); ++j) {
      if (std::isnan(sc(i, j))) {
        CHECK((std::isnan(lin(i, j)) || std::isnan(gm(i, j))));
      } else {
        CHECK(sc(i, j) == 0.5 * (lin(i, j) + gm(i, j)));
      }
    }
  }
  for (Eigen::Index i = 0; i < r.return_correlation.rows(); ++i) CHECK(r.return_correlation(i, i) == doctest::Approx(1.0));
}

TEST_CASE("long-only backtests need no graphs") {
  SynthConfig c;
  c.days = 1600;
  const auto market = prepare_market(synth_market(c, 1).panel);
  BacktestConfig cfg;
  cfg.strategies = {StrategyKind::LongOnly};
  cfg.anchors.first_train_end_year = 1993;
  const auto splits = generate_splits(market.panel.calendar, cfg.anchors);
  const auto graphs = learn_walk_forward_graphs(market, splits, cfg);
  const auto r = run_walk_forward(market, splits, graphs, cfg);
  REQUIRE(r.strategies.size() == 1);
  CHECK(r.strategies[0].name == "LongOnly");
  CHECK(r.test_graphs.empty());
}

TEST_CASE("solver failure budget") {
  const auto market = prepare_market(synth_market(persistent(), 7).panel);
  auto cfg = quick();
  cfg.graph.solver.max_iter = 1;
  cfg.graph.solver.tol = 1e-12;
  cfg.max_solver_failure_frac = 0.0;
  const auto splits = generate_splits(market.panel.calendar, cfg.anchors);
  CHECK_THROWS_AS(learn_walk_forward_graphs(market, splits, cfg), SolverBudgetError);
  cfg.max_solver_failure_frac = 1.0;
  CHECK_NOTHROW(learn_walk_forward_graphs(market, splits, cfg));
}

TEST_CASE("graph store round-trips schedules and resumes without relearning") {
  testing_support::TempDir dir("store");
  const auto market = prepare_market(synth_market(persistent(), 7).panel);
  auto cfg = quick();
  const auto splits = generate_splits(market.panel.calendar, cfg.anchors);

  FileScheduleStore store(dir.path(), 64 * cfg.stride, cfg.graph.edge_threshold);
  const auto first = learn_walk_forward_graphs(market, splits, cfg, &store);
  CHECK(store.exists());
  const auto plain = learn_walk_forward_graphs(market, splits, cfg);

  FileScheduleStore reader(dir.path(), 64 * cfg.stride, cfg.graph.edge_threshold, true);
  const auto loaded = learn_walk_forward_graphs(market, splits, cfg, &reader);
  REQUIRE(loaded[0].schedule.entries().size() == first[0].schedule.entries().size());
  CHECK(loaded[0].hp == plain[0].hp);
  for (const auto& [t, e] : plain[0].schedule.entries()) {
    const auto& other = loaded[0].schedule.entries().at(t);
    CHECK((other->normalized.adjacency.array() == e->normalized.adjacency.array()).all());
    CHECK((other->ensemble.adjacency.array() == e->ensemble.adjacency.array()).all());
    CHECK(other->normalized.tickers == e->normalized.tickers);
  }
  const auto a = run_walk_forward(market, splits, plain, cfg);
  const auto b = run_walk_forward(market, splits, loaded, cfg);
  for (std::size_t k = 0; k < a.strategies.size(); ++k) CHECK(a.strategies[k].raw.values == b.strategies[k].raw.values);

  // A read-only store refuses to learn what it does not hold.
  testing_support::TempDir empty("store-empty");
  FileScheduleStore missing(empty.path(), 64, 1e-4, true);
  CHECK_THROWS_AS(learn_walk_forward_graphs(market, splits, cfg, &missing), DataError);
  CHECK_THROWS_AS(missing.save_search("x", {}), ConfigError);

  // Interrupted run: keep only the first batch, then resume and compare files.
  const auto key_dir = dir.path() / schedule_key(plain[0].hp);
  std::map<std::string, std::string> before;
  for (const auto& e : std::filesystem::directory_iterator(key_dir)) {
    before[e.path().filename().string()] = testing_support::read_text(e.path());
  }
  REQUIRE(before.size() >= 2);
  std::filesystem::remove(key_dir / std::prev(before.end())->first);
  FileScheduleStore resumed(dir.path(), 64 * cfg.stride, cfg.graph.edge_threshold);
  learn_walk_forward_graphs(market, splits, cfg, &resumed);
  for (const auto& [name, text] : before) CHECK(testing_support::read_text(key_dir / name) == text);
}

TEST_CASE("schedule keys") {
  CHECK(schedule_key({1.0, 0.5}) == "a1_b0.5");
  CHECK(schedule_key({0.0001, 10.0}, 2) == "a1e-04_b10_FI");
}
