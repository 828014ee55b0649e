#include "netmom/momentum_features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "netmom/csv.hpp"
#include "netmom/errors.hpp"

namespace netmom {

namespace {

FeatureSeries make_series(std::size_t n, MissingReason initial) {
  return {std::vector<double>(n, kMissing), std::vector<MissingReason>(n, initial)};
}

void set_value(FeatureSeries& s, std::size_t t, double v) {
  s.values[t] = v;
  s.reasons[t] = MissingReason::None;
}

}  // namespace

FeatureSeries vol_scaled_return(std::span<const double> prices,
                                std::span<const double> sigma_daily, int delta) {
  if (delta < 1) throw ConfigError("return horizon must be >= 1 day");
  if (prices.size() != sigma_daily.size()) {
    throw ConfigError("price and volatility series differ in length");
  }
  auto out = make_series(prices.size(), MissingReason::InsufficientHistory);
  const double root = std::sqrt(static_cast<double>(delta));
  for (std::size_t t = static_cast<std::size_t>(delta); t < prices.size(); ++t) {
    const double p = prices[t];
    const double p0 = prices[t - static_cast<std::size_t>(delta)];
    const double sigma = sigma_daily[t];
    if (is_missing(p) || is_missing(p0) || is_missing(sigma)) {
      out.reasons[t] = MissingReason::MissingInput;
    } else if (sigma == 0.0) {
      out.reasons[t] = MissingReason::DegenerateVolatility;
    } else {
      set_value(out, t, (p / p0 - 1.0) / (sigma * root));
    }
  }
  return out;
}

std::vector<double> rolling_std(std::span<const double> series, int window) {
  if (window < 2) throw ConfigError("rolling std window must be >= 2");
  const auto w = static_cast<std::size_t>(window);
  std::vector<double> out(series.size(), kMissing);
  // Track the most recent missing index so incomplete windows are skipped in O(1).
  std::ptrdiff_t last_missing = -1;
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (is_missing(series[t])) last_missing = static_cast<std::ptrdiff_t>(t);
    if (t + 1 < w || last_missing > static_cast<std::ptrdiff_t>(t) - window) continue;
    const std::size_t first = t + 1 - w;
    double mean = 0.0;
    for (std::size_t k = first; k <= t; ++k) mean += series[k];
    mean /= static_cast<double>(w);
    double ss = 0.0;
    for (std::size_t k = first; k <= t; ++k) ss += (series[k] - mean) * (series[k] - mean);
    out[t] = std::sqrt(ss / static_cast<double>(w - 1));
  }
  return out;
}

FeatureSeries macd_feature(std::span<const double> prices, int short_scale, int long_scale) {
  if (short_scale < 1 || long_scale <= short_scale) {
    throw ConfigError("MACD scales need 1 <= S < L");
  }
  const std::size_t n = prices.size();
  auto out = make_series(n, MissingReason::InsufficientHistory);
  if (n == 0) return out;

  const auto fast = ewm_mean(prices, EwmSpec::scale(short_scale));
  const auto slow = ewm_mean(prices, EwmSpec::scale(long_scale));
  const auto price_sd = rolling_std(prices, kMacdPriceStdWindow);

  FeatureSeries normalised = make_series(n, MissingReason::InsufficientHistory);
  for (std::size_t t = 0; t < n; ++t) {
    if (is_missing(prices[t])) {
      normalised.reasons[t] = MissingReason::MissingInput;
    } else if (is_missing(price_sd[t])) {
      normalised.reasons[t] = MissingReason::InsufficientHistory;
    } else if (price_sd[t] == 0.0) {
      normalised.reasons[t] = MissingReason::DegenerateVolatility;
    } else {
      set_value(normalised, t, (fast[t] - slow[t]) / price_sd[t]);
    }
  }

  const auto signal_sd = rolling_std(normalised.values, kMacdSignalStdWindow);
  for (std::size_t t = 0; t < n; ++t) {
    if (is_missing(normalised.values[t])) {
      out.reasons[t] = normalised.reasons[t];
    } else if (is_missing(signal_sd[t])) {
      out.reasons[t] = MissingReason::InsufficientHistory;
    } else if (signal_sd[t] == 0.0) {
      out.reasons[t] = MissingReason::DegenerateVolatility;
    } else {
      set_value(out, t, normalised.values[t] / signal_sd[t]);
    }
  }
  return out;
}

std::vector<double> winsorize(std::span<const double> raw, const WinsorSpec& spec) {
  if (!(spec.multiplier > 0.0) || !(spec.half_life > 0.0)) {
    throw ConfigError("winsorisation multiplier and half-life must be positive");
  }
  std::vector<double> out(raw.begin(), raw.end());
  if (raw.empty()) return out;
  const auto mean = ewm_mean(raw, EwmSpec::half_life(spec.half_life));
  const auto sd = ewm_std(raw, EwmSpec::half_life(spec.half_life));
  for (std::size_t t = 0; t < raw.size(); ++t) {
    if (is_missing(raw[t]) || is_missing(sd[t])) continue;
    const double band = spec.multiplier * sd[t];
    out[t] = std::clamp(raw[t], mean[t] - band, mean[t] + band);
  }
  return out;
}

FeatureHistory::FeatureHistory(std::vector<Date> dates, std::vector<std::string> tickers,
                               std::array<Eigen::MatrixXd, kNumFeatures> features)
    : dates_(std::move(dates)), tickers_(std::move(tickers)), features_(std::move(features)) {
  for (const auto& f : features_) {
    if (f.rows() != days() || f.cols() != assets()) {
      throw ConfigError("feature matrix shape does not match dates x tickers");
    }
  }
}

bool FeatureHistory::available(Eigen::Index t, Eigen::Index asset) const {
  for (const auto& f : features_) {
    if (is_missing(f(t, asset))) return false;
  }
  return true;
}

FeaturePanel FeatureHistory::panel_at(Eigen::Index t) const {
  FeaturePanel out;
  out.date = dates_.at(static_cast<std::size_t>(t));
  std::vector<Eigen::Index> rows;
  for (Eigen::Index a = 0; a < assets(); ++a) {
    if (available(t, a)) rows.push_back(a);
  }
  out.values.resize(static_cast<Eigen::Index>(rows.size()), kNumFeatures);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.tickers.push_back(tickers_[static_cast<std::size_t>(rows[r])]);
    for (int k = 0; k < kNumFeatures; ++k) {
      out.values(static_cast<Eigen::Index>(r), k) = value(t, rows[r], k);
    }
  }
  return out;
}

FeatureHistory FeatureHistory::select_assets(std::span<const Eigen::Index> columns) const {
  std::vector<std::string> tickers;
  std::array<Eigen::MatrixXd, kNumFeatures> features;
  for (auto& f : features) f.resize(days(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    tickers.push_back(tickers_.at(static_cast<std::size_t>(columns[c])));
    for (int k = 0; k < kNumFeatures; ++k) {
      features[static_cast<std::size_t>(k)].col(static_cast<Eigen::Index>(c)) =
          features_[static_cast<std::size_t>(k)].col(columns[c]);
    }
  }
  return FeatureHistory(dates_, std::move(tickers), std::move(features));
}

std::array<FeatureSeries, kNumFeatures> raw_features(std::span<const double> prices) {
  std::vector<double> returns(prices.size(), kMissing);
  for (std::size_t t = 1; t < prices.size(); ++t) {
    if (!is_missing(prices[t]) && !is_missing(prices[t - 1])) {
      returns[t] = prices[t] / prices[t - 1] - 1.0;
    }
  }
  std::vector<double> sigma(prices.size(), kMissing);
  if (!prices.empty()) sigma = ewm_std(returns, EwmSpec::span(60.0));

  std::array<FeatureSeries, kNumFeatures> out;
  for (std::size_t h = 0; h < kReturnHorizons.size(); ++h) {
    out[h] = vol_scaled_return(prices, sigma, kReturnHorizons[h]);
  }
  for (std::size_t m = 0; m < kMacdScales.size(); ++m) {
    out[kReturnHorizons.size() + m] =
        macd_feature(prices, kMacdScales[m].first, kMacdScales[m].second);
  }
  return out;
}

FeatureHistory compute_feature_history(const PricePanel& panel, const WinsorSpec& spec) {
  const Eigen::Index days = panel.prices.rows();
  const Eigen::Index assets = panel.prices.cols();
  std::array<Eigen::MatrixXd, kNumFeatures> features;
  for (auto& f : features) f = Eigen::MatrixXd::Constant(days, assets, kMissing);
  for (Eigen::Index j = 0; j < assets; ++j) {
    const auto raw = raw_features(panel.column(j));
    for (int k = 0; k < kNumFeatures; ++k) {
      const auto clipped = winsorize(raw[static_cast<std::size_t>(k)].values, spec);
      for (Eigen::Index t = 0; t < days; ++t) {
        features[static_cast<std::size_t>(k)](t, j) = clipped[static_cast<std::size_t>(t)];
      }
    }
  }
  return FeatureHistory(panel.calendar, panel.tickers(), std::move(features));
}

FeaturePanel build_feature_panel(const PricePanel& panel, Date date, const WinsorSpec& spec) {
  const auto it = std::lower_bound(panel.calendar.begin(), panel.calendar.end(), date);
  if (it == panel.calendar.end() || *it != date) {
    throw DataError("date " + date.iso() + " is not on the panel calendar");
  }
  return compute_feature_history(panel, spec).panel_at(it - panel.calendar.begin());
}

StackedFeatureMatrix stack_lookback(const FeatureHistory& history, Eigen::Index t, int delta,
                                    double max_missing_frac) {
  if (delta < 1) throw ConfigError("lookback must be >= 1 day");
  if (!(max_missing_frac >= 0.0) || !(max_missing_frac < 1.0)) {
    throw ConfigError("max_missing_frac must lie in [0, 1)");
  }
  StackedFeatureMatrix out;
  out.date = history.dates().at(static_cast<std::size_t>(t));
  out.lookback = delta;
  const Eigen::Index first = t - delta + 1;
  if (first < 0) {
    out.values.resize(0, static_cast<Eigen::Index>(kNumFeatures) * delta);
    return out;
  }
  for (Eigen::Index a = 0; a < history.assets(); ++a) {
    int missing = 0;
    for (Eigen::Index s = first; s <= t; ++s) {
      if (!history.available(s, a)) ++missing;
    }
    if (missing == 0 || static_cast<double>(missing) / delta < max_missing_frac) {
      out.asset_columns.push_back(a);
      out.tickers.push_back(history.tickers()[static_cast<std::size_t>(a)]);
    }
  }
  const auto n = static_cast<Eigen::Index>(out.asset_columns.size());
  out.values.resize(n, static_cast<Eigen::Index>(kNumFeatures) * delta);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index a = out.asset_columns[static_cast<std::size_t>(r)];
    for (int k = 0; k < kNumFeatures; ++k) {
      double last = 0.0;
      for (Eigen::Index s = first; s <= t; ++s) {
        const double v = history.value(s, a, k);
        if (!is_missing(v)) last = v;
        out.values(r, (s - first) * kNumFeatures + k) = last;
      }
    }
  }
  return out;
}

std::string feature_dump_csv(const FeatureHistory& history) {
  std::ostringstream os;
  os << "date,ticker,f1,f2,f3,f4,f5,f6,f7,f8\n";
  for (Eigen::Index t = 0; t < history.days(); ++t) {
    for (Eigen::Index a = 0; a < history.assets(); ++a) {
      if (!history.available(t, a)) continue;
      os << history.dates()[static_cast<std::size_t>(t)].iso() << ','
         << csv::escape(history.tickers()[static_cast<std::size_t>(a)]);
      for (int k = 0; k < kNumFeatures; ++k) os << ',' << csv::format_double(history.value(t, a, k));
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace netmom
