#include "netmom/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "netmom/csv.hpp"
#include "netmom/errors.hpp"

namespace netmom {

std::string_view to_token(AssetClass c) {
  switch (c) {
    case AssetClass::Commodity: return "COMM";
    case AssetClass::Equity: return "EQ";
    case AssetClass::FixedIncome: return "FI";
    case AssetClass::Currency: return "FX";
  }
  return "?";
}

AssetClass parse_asset_class(std::string_view token) {
  if (token == "COMM") return AssetClass::Commodity;
  if (token == "EQ") return AssetClass::Equity;
  if (token == "FI") return AssetClass::FixedIncome;
  if (token == "FX") return AssetClass::Currency;
  throw DataError("unknown asset class '" + std::string(token) + "' (expected COMM, EQ, FI or FX)");
}

std::optional<Eigen::Index> DatedMatrix::ticker_index(std::string_view ticker) const {
  auto it = std::find(tickers.begin(), tickers.end(), ticker);
  if (it == tickers.end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - tickers.begin());
}

std::optional<Eigen::Index> DatedMatrix::date_index(Date d) const {
  auto it = std::lower_bound(dates.begin(), dates.end(), d);
  if (it == dates.end() || *it != d) return std::nullopt;
  return static_cast<Eigen::Index>(it - dates.begin());
}

std::vector<std::string> PricePanel::tickers() const {
  std::vector<std::string> out;
  out.reserve(assets.size());
  for (const auto& a : assets) out.push_back(a.ticker);
  return out;
}

void PricePanel::validate() const {
  for (std::size_t i = 1; i < calendar.size(); ++i) {
    if (!(calendar[i - 1] < calendar[i])) throw DataError("calendar is not strictly increasing");
  }
  if (prices.rows() != static_cast<Eigen::Index>(calendar.size()) ||
      prices.cols() != static_cast<Eigen::Index>(assets.size())) {
    throw DataError("price matrix shape does not match calendar x assets");
  }
  for (Eigen::Index j = 0; j < prices.cols(); ++j) {
    const auto& a = assets[j];
    for (Eigen::Index t = 0; t < prices.rows(); ++t) {
      const double p = prices(t, j);
      if (is_missing(p)) continue;
      if (!(p > 0.0)) {
        throw DataError("non-positive price for " + a.ticker + " on " + calendar[t].iso());
      }
      if (calendar[t] < a.first_date || a.last_date < calendar[t]) {
        throw DataError("price for " + a.ticker + " on " + calendar[t].iso() +
                        " lies outside its span " + a.first_date.iso() + ".." + a.last_date.iso());
      }
    }
  }
}

double EwmSpec::alpha() const {
  if (!(parameter > 0.0)) throw ConfigError("EWM parameter must be positive");
  switch (mode) {
    case Mode::Span: return 2.0 / (parameter + 1.0);
    case Mode::HalfLife: return 1.0 - std::exp2(-1.0 / parameter);
    case Mode::Scale:
      if (parameter < 1.0) throw ConfigError("EWM scale must be >= 1");
      return 1.0 / parameter;
  }
  return 0.0;
}

std::vector<AssetMeta> load_universe(const std::filesystem::path& meta_path) {
  const auto table = csv::read(meta_path);
  const std::vector<std::string> expected{"ticker", "class", "description", "first_date",
                                          "last_date"};
  if (table.header != expected) {
    throw DataError(meta_path.string() +
                    ": header must be ticker,class,description,first_date,last_date");
  }
  std::vector<AssetMeta> out;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    AssetMeta m;
    m.ticker = row[0];
    if (m.ticker.empty()) throw DataError(meta_path.string() + ": empty ticker");
    if (!seen.insert(m.ticker).second) {
      throw DataError(meta_path.string() + ": duplicate ticker '" + m.ticker + "'");
    }
    m.asset_class = parse_asset_class(row[1]);
    m.description = row[2];
    m.first_date = Date::parse(row[3]);
    m.last_date = Date::parse(row[4]);
    if (m.last_date < m.first_date) {
      throw DataError(meta_path.string() + ": first_date after last_date for " + m.ticker);
    }
    out.push_back(std::move(m));
  }
  return out;
}

void write_universe(const std::filesystem::path& path, std::span<const AssetMeta> universe) {
  std::ostringstream os;
  os << "ticker,class,description,first_date,last_date\n";
  for (const auto& a : universe) {
    os << csv::escape(a.ticker) << ',' << to_token(a.asset_class) << ','
       << csv::escape(a.description) << ',' << a.first_date.iso() << ',' << a.last_date.iso()
       << '\n';
  }
  csv::write_atomic(path, os.str());
}

PricePanel load_prices(const std::filesystem::path& price_dir, std::span<const AssetMeta> universe) {
  std::vector<std::map<Date, double>> series(universe.size());
  std::set<Date> all_dates;
  for (std::size_t j = 0; j < universe.size(); ++j) {
    const auto& a = universe[j];
    const auto path = price_dir / (a.ticker + ".csv");
    if (!std::filesystem::exists(path)) {
      throw DataError("missing price file for ticker '" + a.ticker + "': " + path.string());
    }
    const auto table = csv::read(path);
    if (table.header != std::vector<std::string>{"date", "price"}) {
      throw DataError(path.string() + ": header must be date,price");
    }
    for (const auto& row : table.rows) {
      const Date d = Date::parse(row[0]);
      const double p = csv::parse_double(row[1], a.ticker + " price on " + row[0]);
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw DataError("non-positive price " + row[1] + " for " + a.ticker + " on " + d.iso());
      }
      if (!series[j].emplace(d, p).second) {
        throw DataError("duplicate date " + d.iso() + " for " + a.ticker);
      }
      all_dates.insert(d);
    }
  }
  PricePanel panel;
  panel.calendar.assign(all_dates.begin(), all_dates.end());
  panel.assets.assign(universe.begin(), universe.end());
  panel.prices = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(panel.calendar.size()),
                                           static_cast<Eigen::Index>(universe.size()), kMissing);
  for (std::size_t j = 0; j < universe.size(); ++j) {
    for (const auto& [d, p] : series[j]) {
      const auto it = std::lower_bound(panel.calendar.begin(), panel.calendar.end(), d);
      panel.prices(it - panel.calendar.begin(), static_cast<Eigen::Index>(j)) = p;
    }
  }
  panel.validate();
  return panel;
}

void write_prices(const std::filesystem::path& price_dir, const PricePanel& panel) {
  for (std::size_t j = 0; j < panel.assets.size(); ++j) {
    std::ostringstream os;
    os << "date,price\n";
    for (std::size_t t = 0; t < panel.calendar.size(); ++t) {
      const double p = panel.prices(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j));
      if (is_missing(p)) continue;
      os << panel.calendar[t].iso() << ',' << csv::format_double(p) << '\n';
    }
    csv::write_atomic(price_dir / (panel.assets[j].ticker + ".csv"), os.str());
  }
}

ReturnPanel daily_returns(const PricePanel& panel) {
  ReturnPanel out;
  out.dates = panel.calendar;
  out.tickers = panel.tickers();
  out.values = Eigen::MatrixXd::Constant(panel.prices.rows(), panel.prices.cols(), kMissing);
  for (Eigen::Index j = 0; j < panel.prices.cols(); ++j) {
    for (Eigen::Index t = 1; t < panel.prices.rows(); ++t) {
      const double prev = panel.prices(t - 1, j);
      const double cur = panel.prices(t, j);
      if (!is_missing(prev) && !is_missing(cur)) out.values(t, j) = cur / prev - 1.0;
    }
  }
  return out;
}

namespace {

// Weighted incremental statistics with exponential forgetting: every step ages the
// accumulated weight by (1 - alpha); a present observation enters with weight 1.
struct EwmAccumulator {
  double decay;
  double weight = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  int count = 0;

  void age() {
    weight *= decay;
    m2 *= decay;
  }
  void add(double x) {
    const double w_new = weight + 1.0;
    const double delta = x - mean;
    const double mean_new = mean + delta / w_new;
    m2 += delta * (x - mean_new);
    mean = mean_new;
    weight = w_new;
    ++count;
  }
};

void check_series(std::span<const double> series) {
  if (series.empty()) throw ConfigError("EWM statistics need a non-empty series");
}

}  // namespace

std::vector<double> ewm_mean(std::span<const double> series, const EwmSpec& spec) {
  check_series(series);
  EwmAccumulator acc{1.0 - spec.alpha()};
  std::vector<double> out(series.size(), kMissing);
  for (std::size_t t = 0; t < series.size(); ++t) {
    acc.age();
    if (!is_missing(series[t])) acc.add(series[t]);
    if (acc.count > 0) out[t] = acc.mean;
  }
  return out;
}

std::vector<double> ewm_std(std::span<const double> series, const EwmSpec& spec) {
  check_series(series);
  EwmAccumulator acc{1.0 - spec.alpha()};
  std::vector<double> out(series.size(), kMissing);
  for (std::size_t t = 0; t < series.size(); ++t) {
    acc.age();
    if (!is_missing(series[t])) acc.add(series[t]);
    if (acc.count >= 2) out[t] = std::sqrt(std::max(0.0, acc.m2 / acc.weight));
  }
  return out;
}

DatedMatrix daily_volatility(const ReturnPanel& returns) {
  DatedMatrix out{returns.dates, returns.tickers,
                  Eigen::MatrixXd::Constant(returns.rows(), returns.cols(), kMissing)};
  if (returns.rows() == 0) return out;
  for (Eigen::Index j = 0; j < returns.cols(); ++j) {
    const auto sd = ewm_std(returns.column(j), EwmSpec::span(60.0));
    for (Eigen::Index t = 0; t < returns.rows(); ++t) out.values(t, j) = sd[t];
  }
  return out;
}

void SynthConfig::validate() const {
  if (blocks < 1 || assets_per_block < 1) throw ConfigError("synthetic market needs >= 1 block and asset");
  if (days < 2) throw ConfigError("synthetic market needs at least 2 days");
  if (!(rho >= 0.0) || !(rho < 1.0)) throw ConfigError("factor persistence rho must lie in [0, 1)");
  if (!(lambda >= 0.0)) throw ConfigError("factor loading lambda must be non-negative");
  if (!(idio_vol > 0.0) || !(factor_vol > 0.0)) throw ConfigError("volatilities must be positive");
}

NormalStream::NormalStream(std::uint64_t seed) : engine_(seed) {}

double NormalStream::uniform() {
  // 53 random bits mapped onto [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NormalStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

SynthMarket synth_market(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  const int n_assets = config.blocks * config.assets_per_block;
  SynthMarket out;
  auto& panel = out.panel;
  panel.calendar = business_days(config.start, config.days);
  for (int b = 0; b < config.blocks; ++b) {
    for (int i = 0; i < config.assets_per_block; ++i) {
      AssetMeta a;
      a.ticker = "B" + std::to_string(b) + "A" + std::to_string(i);
      a.asset_class = static_cast<AssetClass>(b % 4);
      a.description = "synthetic block " + std::to_string(b) + " asset " + std::to_string(i);
      a.first_date = panel.calendar.front();
      a.last_date = panel.calendar.back();
      panel.assets.push_back(std::move(a));
      out.block_labels.push_back(b);
    }
  }
  panel.prices.resize(config.days, n_assets);
  NormalStream normal(seed);
  std::vector<double> factor(static_cast<std::size_t>(config.blocks), 0.0);
  for (int t = 0; t < config.days; ++t) {
    for (auto& f : factor) f = config.rho * f + config.factor_vol * normal.next();
    for (int j = 0; j < n_assets; ++j) {
      const double r = config.lambda * factor[static_cast<std::size_t>(out.block_labels[j])] +
                       config.idio_vol * normal.next();
      if (t == 0) {
        panel.prices(t, j) = 100.0;
      } else {
        // Floor keeps prices positive under extreme configurations.
        panel.prices(t, j) = panel.prices(t - 1, j) * (1.0 + std::max(r, -0.99));
      }
    }
  }
  return out;
}

}  // namespace netmom
