#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "netmom/market_data.hpp"

namespace netmom {

/// Feature columns, in this fixed order everywhere (regression coefficients depend on it):
/// vol-scaled returns over 1, 21, 63, 126, 252 days, then normalised MACD for
/// (8,24), (16,48), (32,96).
inline constexpr int kNumFeatures = 8;
inline constexpr std::array<int, 5> kReturnHorizons{1, 21, 63, 126, 252};
inline constexpr std::array<std::pair<int, int>, 3> kMacdScales{{{8, 24}, {16, 48}, {32, 96}}};
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames{
    "ret_1d", "ret_21d", "ret_63d", "ret_126d", "ret_252d", "macd_8_24", "macd_16_48", "macd_32_96"};

/// Rolling windows in the MACD normalisation.
inline constexpr int kMacdPriceStdWindow = 63;
inline constexpr int kMacdSignalStdWindow = 252;

enum class MissingReason : unsigned char {
  None,
  InsufficientHistory,
  MissingInput,
  DegenerateVolatility,
};

/// A feature time series with the reason attached to every missing value.
struct FeatureSeries {
  std::vector<double> values;
  std::vector<MissingReason> reasons;
};

struct WinsorSpec {
  double multiplier = 5.0;
  double half_life = 252.0;
};

/// (p_t / p_{t-delta} - 1) / (sigma_t sqrt(delta)).
FeatureSeries vol_scaled_return(std::span<const double> prices,
                                std::span<const double> sigma_daily, int delta);

/// Normalised MACD y(S, L): EWMA difference (alpha = 1/J) over the 63-day rolling std of
/// prices, then over the 252-day rolling std of that ratio.
FeatureSeries macd_feature(std::span<const double> prices, int short_scale, int long_scale);

/// Equal-weight rolling standard deviation (n - 1 denominator); missing unless the full
/// window is present.
std::vector<double> rolling_std(std::span<const double> series, int window);

/// Clips each value to mean +/- multiplier * std of the EWM (half-life) statistics of the
/// raw series through and including that point.
std::vector<double> winsorize(std::span<const double> raw, const WinsorSpec& spec = {});

/// Feature matrix U_t: one row per available asset.
struct FeaturePanel {
  Date date;
  std::vector<std::string> tickers;
  Eigen::MatrixXd values;  // N_t x 8
};

/// All eight winsorised features for every asset and day of a price panel.
class FeatureHistory {
 public:
  FeatureHistory() = default;
  FeatureHistory(std::vector<Date> dates, std::vector<std::string> tickers,
                 std::array<Eigen::MatrixXd, kNumFeatures> features);

  const std::vector<Date>& dates() const { return dates_; }
  const std::vector<std::string>& tickers() const { return tickers_; }
  Eigen::Index days() const { return static_cast<Eigen::Index>(dates_.size()); }
  Eigen::Index assets() const { return static_cast<Eigen::Index>(tickers_.size()); }

  /// days x assets matrix for feature k.
  const Eigen::MatrixXd& feature(int k) const { return features_[static_cast<std::size_t>(k)]; }
  double value(Eigen::Index t, Eigen::Index asset, int k) const { return feature(k)(t, asset); }
  /// True when all eight features are present.
  bool available(Eigen::Index t, Eigen::Index asset) const;
  /// U_t restricted to available assets, in ticker order.
  FeaturePanel panel_at(Eigen::Index t) const;
  /// Copy restricted to a subset of asset columns.
  FeatureHistory select_assets(std::span<const Eigen::Index> columns) const;

 private:
  std::vector<Date> dates_;
  std::vector<std::string> tickers_;
  std::array<Eigen::MatrixXd, kNumFeatures> features_;
};

/// Raw (unwinsorised) features of one asset, one vector per feature column.
std::array<FeatureSeries, kNumFeatures> raw_features(std::span<const double> prices);

FeatureHistory compute_feature_history(const PricePanel& panel, const WinsorSpec& spec = {});

/// U_t for a single date of the panel.
FeaturePanel build_feature_panel(const PricePanel& panel, Date date, const WinsorSpec& spec = {});

/// V_t: N x 8*delta stack of the last `delta` daily feature rows (day-major columns).
struct StackedFeatureMatrix {
  Date date;
  int lookback = 0;
  std::vector<std::string> tickers;
  /// Column indices of `tickers` in the source history.
  std::vector<Eigen::Index> asset_columns;
  Eigen::MatrixXd values;
};

/// Node set: assets missing fewer than `max_missing_frac` of the window's feature-days.
/// Remaining gaps are forward-filled within the window, then zero-filled. A window that
/// starts before the first date, or has no qualifying asset, yields an empty matrix.
StackedFeatureMatrix stack_lookback(const FeatureHistory& history, Eigen::Index t, int delta,
                                    double max_missing_frac = 0.10);

/// `date,ticker,f1..f8` rows for every available (date, asset).
std::string feature_dump_csv(const FeatureHistory& history);

}  // namespace netmom
