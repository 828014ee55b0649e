#include "netmom/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "netmom/errors.hpp"

namespace netmom {

std::string WalkForwardSplit::test_label() const {
  return std::to_string(test_first_year) + "-" + std::to_string(test_last_year);
}

std::vector<WalkForwardSplit> generate_splits(const TradingCalendar& calendar, const SplitAnchors& anchors) {
  if (anchors.step_years < 1) throw ConfigError("split step must be at least one year");
  if (!(anchors.validation_fraction > 0.0) || !(anchors.validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  if (calendar.empty()) throw DataError("calendar is empty");
  const int first_year = calendar.front().year();
  const int last_year = calendar.back().year();
  // Last row of each year, by binary search on the sorted calendar.
  auto last_row_through = [&](int year) -> Eigen::Index {
    auto it = std::upper_bound(calendar.begin(), calendar.end(), Date::from_ymd(year, 12, 31));
    return static_cast<Eigen::Index>(it - calendar.begin()) - 1;
  };

  std::vector<WalkForwardSplit> out;
  for (int end = anchors.first_train_end_year; end < last_year; end += anchors.step_years) {
    const Eigen::Index train_last = last_row_through(end);
    if (train_last < 0) throw DataError("calendar starts after the first training span ends");
    const int test_end = std::min(end + anchors.step_years, last_year);
    WalkForwardSplit s;
    s.train_first = 0;
    s.train_last = train_last;
    const auto train_days = static_cast<double>(train_last + 1);
    const auto validation_days =
        static_cast<Eigen::Index>(std::ceil(anchors.validation_fraction * train_days - 1e-9));
    s.validation_first = train_last + 1 - std::max<Eigen::Index>(validation_days, 1);
    s.test_first = train_last + 1;
    s.test_last = last_row_through(test_end);
    s.train_first_year = first_year;
    s.train_last_year = end;
    s.test_first_year = end + 1;
    s.test_last_year = test_end;
    out.push_back(s);
  }
  if (out.empty()) {
    throw DataError("calendar too short: it must extend past " +
                    std::to_string(anchors.first_train_end_year));
  }
  return out;
}

MarketData prepare_market(PricePanel panel, const WinsorSpec& winsor) {
  panel.validate();
  MarketData m;
  m.returns = daily_returns(panel);
  m.sigma = daily_volatility(m.returns);
  m.features = compute_feature_history(panel, winsor);
  const Eigen::Index days = panel.prices.rows();
  const Eigen::Index assets = panel.prices.cols();
  m.targets = Eigen::MatrixXd::Constant(days, assets, kMissing);
  for (Eigen::Index t = 0; t + 1 < days; ++t) {
    for (Eigen::Index a = 0; a < assets; ++a) {
      const double r = m.returns.values(t + 1, a);
      const double s = m.sigma.values(t, a);
      if (!is_missing(r) && !is_missing(s) && s > 0.0) m.targets(t, a) = r / s;
    }
  }
  for (const auto& meta : panel.assets) m.classes[meta.ticker] = static_cast<int>(meta.asset_class);
  m.panel = std::move(panel);
  return m;
}

namespace {

const double kRootYear = std::sqrt(kTradingDaysPerYear);

/// Column of each signal ticker in a dated panel.
std::vector<Eigen::Index> column_map(const DatedMatrix& signals, const DatedMatrix& panel) {
  std::vector<Eigen::Index> out;
  for (const auto& t : signals.tickers) {
    auto idx = panel.ticker_index(t);
    if (!idx) throw ConfigError("signal ticker " + t + " is not in the return panel");
    out.push_back(*idx);
  }
  return out;
}

Eigen::Index row_of(const DatedMatrix& panel, Date d) {
  auto idx = panel.date_index(d);
  if (!idx) throw ConfigError("signal date " + d.iso() + " is not on the return calendar");
  return *idx;
}

}  // namespace

PortfolioReturns portfolio_returns(const SignalSeries& signals, const ReturnPanel& returns,
                                   const DatedMatrix& sigma_daily, double target_vol,
                                   const DatedMatrix* turnover, double cost_bps) {
  if (!(target_vol > 0.0)) throw ConfigError("target volatility must be positive");
  if (!(cost_bps >= 0.0)) throw ConfigError("cost must be non-negative");
  const auto& pos = signals.positions;
  const auto cols = column_map(pos, returns);
  const double cost = cost_bps * 1e-4;
  PortfolioReturns out;
  out.strategy = signals.strategy;
  for (Eigen::Index k = 0; k < pos.rows(); ++k) {
    const Eigen::Index t = row_of(returns, pos.dates[static_cast<std::size_t>(k)]);
    if (t + 1 >= returns.rows()) continue;
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index a = 0; a < pos.cols(); ++a) {
      const double x = pos.values(k, a);
      const Eigen::Index c = cols[static_cast<std::size_t>(a)];
      const double r = returns.values(t + 1, c);
      const double s = sigma_daily.values(t, c);
      if (is_missing(x) || is_missing(r) || is_missing(s)) continue;
      if (s == 0.0) {
        ++out.zero_vol_exclusions;
        continue;
      }
      double term = x * target_vol / (s * kRootYear) * r;
      if (turnover != nullptr && cost > 0.0) {
        const double z = turnover->values(k, a);
        if (!is_missing(z)) term -= cost * z;
      }
      sum += term;
      ++count;
    }
    if (count == 0) continue;
    out.dates.push_back(pos.dates[static_cast<std::size_t>(k)]);
    out.values.push_back(sum / count);
    out.counts.push_back(count);
  }
  return out;
}

TurnoverReport turnover(const SignalSeries& signals, const DatedMatrix& sigma_daily, double target_vol) {
  const auto& pos = signals.positions;
  const auto cols = column_map(pos, sigma_daily);
  TurnoverReport out;
  out.zeta.dates = pos.dates;
  out.zeta.tickers = pos.tickers;
  out.zeta.values = Eigen::MatrixXd::Constant(pos.rows(), pos.cols(), kMissing);
  // Previous scaled position x / sigma; flat before the first row.
  std::vector<double> prev(static_cast<std::size_t>(pos.cols()), 0.0);
  double total = 0.0;
  int days = 0;
  for (Eigen::Index k = 0; k < pos.rows(); ++k) {
    const Eigen::Index t = row_of(sigma_daily, pos.dates[static_cast<std::size_t>(k)]);
    double day_sum = 0.0;
    int day_count = 0;
    for (Eigen::Index a = 0; a < pos.cols(); ++a) {
      const double x = pos.values(k, a);
      const double s = sigma_daily.values(t, cols[static_cast<std::size_t>(a)]);
      double cur = 0.0;
      if (!is_missing(x) && x != 0.0) {
        cur = (is_missing(s) || s == 0.0) ? kMissing : x / (s * kRootYear);
      }
      auto& p = prev[static_cast<std::size_t>(a)];
      if (!is_missing(cur)) {
        const double z = target_vol * std::abs(cur - (is_missing(p) ? 0.0 : p));
        out.zeta.values(k, a) = z;
        if (!is_missing(x)) {
          day_sum += z;
          ++day_count;
        }
      }
      p = cur;
    }
    if (day_count > 0) {
      total += day_sum / day_count;
      ++days;
    }
  }
  out.average = days > 0 ? total / days : 0.0;
  return out;
}

PortfolioReturns cost_adjusted_returns(const SignalSeries& signals, const ReturnPanel& returns,
                                       const DatedMatrix& sigma_daily, const TurnoverReport& turnover,
                                       double cost_bps, double target_vol) {
  return portfolio_returns(signals, returns, sigma_daily, target_vol, &turnover.zeta, cost_bps);
}

std::vector<double> target_vol_multipliers(const PortfolioReturns& raw, double target_vol) {
  if (!(target_vol > 0.0)) throw ConfigError("target volatility must be positive");
  std::vector<double> out(raw.values.size(), kMissing);
  if (raw.values.empty()) return out;
  const auto sd = ewm_std(raw.values, EwmSpec::span(kPortfolioVolSpan));
  for (std::size_t k = kPortfolioVolSpan; k < raw.values.size(); ++k) {
    const double s = sd[k - 1];
    if (!is_missing(s) && s > 0.0) out[k] = target_vol / (s * kRootYear);
  }
  return out;
}

PortfolioReturns scale_to_target_vol(const PortfolioReturns& raw, double target_vol) {
  const auto mult = target_vol_multipliers(raw, target_vol);
  PortfolioReturns out;
  out.strategy = raw.strategy;
  out.scaled = true;
  out.zero_vol_exclusions = raw.zero_vol_exclusions;
  for (std::size_t k = 0; k < mult.size(); ++k) {
    if (is_missing(mult[k])) continue;
    out.dates.push_back(raw.dates[k]);
    out.values.push_back(raw.values[k] * mult[k]);
    out.counts.push_back(raw.counts.empty() ? 0 : raw.counts[k]);
  }
  return out;
}

Drawdown max_drawdown(std::span<const double> equity) {
  Drawdown dd;
  if (equity.empty()) return dd;
  std::size_t peak = 0;
  for (std::size_t k = 1; k < equity.size(); ++k) {
    if (equity[k] > equity[peak]) {
      peak = k;
      continue;
    }
    const double depth = 1.0 - equity[k] / equity[peak];
    if (depth > dd.depth) {
      dd.depth = depth;
      dd.peak = peak;
      dd.trough = k;
    }
  }
  dd.recovery = equity.size();
  if (dd.depth > 0.0) {
    for (std::size_t k = dd.trough + 1; k < equity.size(); ++k) {
      if (equity[k] >= equity[dd.peak]) {
        dd.recovery = k;
        break;
      }
    }
  } else {
    dd.recovery = 0;
  }
  return dd;
}

PerfReport perf_metrics(std::span<const double> returns, DrawdownDuration duration) {
  if (returns.empty()) throw DataError("performance metrics need a non-empty return series");
  PerfReport p;
  const auto n = returns.size();
  p.days = n;
  const auto nd = static_cast<double>(n);
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= nd;
  double ss = 0.0;
  double down = 0.0;
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (double r : returns) {
    ss += (r - mean) * (r - mean);
    if (r < 0.0) {
      down += r * r;
      neg_sum += r;
      ++neg;
    } else if (r > 0.0) {
      pos_sum += r;
      ++pos;
    }
  }
  const double sd = n > 1 ? std::sqrt(ss / (nd - 1.0)) : 0.0;
  p.annual_return = mean * kTradingDaysPerYear;
  p.volatility = sd * kRootYear;
  if (p.volatility > 0.0) p.sharpe = p.annual_return / p.volatility;
  p.downside_deviation = kRootYear * std::sqrt(down / nd);
  if (p.downside_deviation > 0.0) p.sortino = p.annual_return / p.downside_deviation;

  std::vector<double> equity(n + 1, 1.0);
  for (std::size_t k = 0; k < n; ++k) equity[k + 1] = equity[k] * (1.0 + returns[k]);
  const auto dd = max_drawdown(equity);
  p.max_drawdown = dd.depth;
  if (dd.depth > 0.0) {
    const auto end = duration == DrawdownDuration::PeakToRecovery ? std::min(dd.recovery, n) : dd.trough;
    p.mdd_duration = static_cast<double>(end - dd.peak) / nd;
    p.calmar = p.annual_return / p.max_drawdown;
  }
  p.hit_rate = static_cast<double>(pos) / nd;
  if (pos > 0 && neg > 0) {
    p.avg_profit_loss = (pos_sum / static_cast<double>(pos)) / std::abs(neg_sum / static_cast<double>(neg));
  }
  return p;
}

double return_correlation(const PortfolioReturns& a, const PortfolioReturns& b) {
  std::vector<double> x;
  std::vector<double> y;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.dates.size() && j < b.dates.size()) {
    if (a.dates[i] < b.dates[j]) {
      ++i;
    } else if (b.dates[j] < a.dates[i]) {
      ++j;
    } else {
      x.push_back(a.values[i++]);
      y.push_back(b.values[j++]);
    }
  }
  if (x.size() < 30) throw DataError("return correlation needs at least 30 common dates");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return kMissing;
  return sxy / std::sqrt(sxx * syy);
}

double sign_agreement(const SignalSeries& a, const SignalSeries& b) {
  const auto& pa = a.positions;
  const auto& pb = b.positions;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cols;
  for (Eigen::Index c = 0; c < pa.cols(); ++c) {
    if (auto other = pb.ticker_index(pa.tickers[static_cast<std::size_t>(c)])) cols.emplace_back(c, *other);
  }
  std::size_t agree = 0;
  std::size_t total = 0;
  for (Eigen::Index r = 0; r < pa.rows(); ++r) {
    auto rb = pb.date_index(pa.dates[static_cast<std::size_t>(r)]);
    if (!rb) continue;
    for (const auto& [ca, cb] : cols) {
      const double x = pa.values(r, ca);
      const double y = pb.values(*rb, cb);
      if (is_missing(x) || is_missing(y) || x == 0.0 || y == 0.0) continue;
      ++total;
      agree += (x > 0.0) == (y > 0.0) ? 1 : 0;
    }
  }
  return total > 0 ? static_cast<double>(agree) / static_cast<double>(total) : kMissing;
}

}  // namespace netmom
