#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netmom/dates.hpp"

namespace netmom {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return v != v; }

/// Trading days per year used for every annualisation.
inline constexpr double kTradingDaysPerYear = 252.0;

enum class AssetClass { Commodity, Equity, FixedIncome, Currency };

/// CSV token: COMM, EQ, FI or FX.
std::string_view to_token(AssetClass c);
/// Strict inverse of to_token; throws DataError for anything else.
AssetClass parse_asset_class(std::string_view token);

struct AssetMeta {
  std::string ticker;
  AssetClass asset_class = AssetClass::Commodity;
  std::string description;
  Date first_date;
  Date last_date;
};

/// Strictly increasing list of business dates.
using TradingCalendar = std::vector<Date>;

/// Date x ticker matrix, rows are dates. Missing cells hold NaN.
struct DatedMatrix {
  std::vector<Date> dates;
  std::vector<std::string> tickers;
  Eigen::MatrixXd values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  std::span<const double> column(Eigen::Index j) const {
    return {values.col(j).data(), static_cast<std::size_t>(values.rows())};
  }
  std::optional<Eigen::Index> ticker_index(std::string_view ticker) const;
  std::optional<Eigen::Index> date_index(Date d) const;
};

struct PricePanel {
  TradingCalendar calendar;
  std::vector<AssetMeta> assets;
  /// calendar.size() x assets.size(); every present price is > 0.
  Eigen::MatrixXd prices;

  std::vector<std::string> tickers() const;
  std::span<const double> column(Eigen::Index j) const {
    return {prices.col(j).data(), static_cast<std::size_t>(prices.rows())};
  }
  /// Throws DataError when an invariant is broken.
  void validate() const;
};

/// Simple daily returns, same shape as the source panel; row 0 is always missing.
using ReturnPanel = DatedMatrix;

struct EwmSpec {
  enum class Mode { Span, HalfLife, Scale };
  Mode mode = Mode::Span;
  double parameter = 60.0;

  static EwmSpec span(double n) { return {Mode::Span, n}; }
  static EwmSpec half_life(double hl) { return {Mode::HalfLife, hl}; }
  static EwmSpec scale(double j) { return {Mode::Scale, j}; }

  /// Smoothing factor: 2/(N+1), 1 - 2^(-1/HL) or 1/J.
  double alpha() const;
};

std::vector<AssetMeta> load_universe(const std::filesystem::path& meta_path);
void write_universe(const std::filesystem::path& path, std::span<const AssetMeta> universe);

/// Reads `<price_dir>/<ticker>.csv` (header `date,price`) for every asset and aligns
/// them on the union of their dates.
PricePanel load_prices(const std::filesystem::path& price_dir, std::span<const AssetMeta> universe);
void write_prices(const std::filesystem::path& price_dir, const PricePanel& panel);

ReturnPanel daily_returns(const PricePanel& panel);

/// Expanding exponentially weighted mean with normalised weights (1-a)^lag.
/// Missing observations carry no weight but still age the older ones.
std::vector<double> ewm_mean(std::span<const double> series, const EwmSpec& spec);

/// Companion weighted standard deviation (no bias correction); missing until two
/// observations are available.
std::vector<double> ewm_std(std::span<const double> series, const EwmSpec& spec);

/// Daily volatility per asset: ewm_std with a 60-day span over daily returns.
DatedMatrix daily_volatility(const ReturnPanel& returns);

struct SynthConfig {
  int blocks = 3;
  int assets_per_block = 4;
  int days = 2000;
  double rho = 0.3;
  double lambda = 1.0;
  double idio_vol = 0.01;
  double factor_vol = 0.01;
  Date start = Date::from_ymd(1990, 1, 1);

  void validate() const;
};

struct SynthMarket {
  PricePanel panel;
  /// Block index of each asset, aligned with panel.assets.
  std::vector<int> block_labels;
};

/// Block-factor market: per block an AR(1) factor f_t = rho f_{t-1} + eta_t and asset
/// returns lambda f_t + eps; prices compound from 100. Deterministic given the seed.
SynthMarket synth_market(const SynthConfig& config, std::uint64_t seed);

/// Portable standard-normal stream: mt19937_64, 53-bit uniforms, polar Box-Muller.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed);
  double uniform();
  double next();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace netmom
