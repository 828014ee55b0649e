#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netmom/graph_learning.hpp"
#include "netmom/market_data.hpp"
#include "netmom/momentum_features.hpp"

namespace netmom {

/// Network momentum features: row i is sum_j A~_ij u_j over neighbours with features.
struct PropagatedFeatures {
  Date date;
  std::vector<std::string> tickers;
  Eigen::MatrixXd values;  // nodes x 8
};

/// Propagates U_t over a normalised graph. Every graph node gets a row; neighbours that
/// are absent from the panel contribute nothing, so an isolated node gets zeros.
PropagatedFeatures propagate(const GraphSnapshot& graph, const FeaturePanel& features);

/// Pooled OLS on standardised covariates: y = b + sum_k beta_k (x_k - mean_k) / std_k.
struct RegressionModel {
  std::vector<std::string> feature_names;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  Eigen::VectorXd std_errors;
  double intercept_std_error = 0.0;
  /// NaN where the standard error is zero.
  Eigen::VectorXd t_stats;
  Eigen::Index samples = 0;
  double residual_variance = 0.0;

  Eigen::Index features() const { return coefficients.size(); }
  double predict(std::span<const double> x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  /// Two-sided 5% test under the normal approximation.
  bool significant(Eigen::Index k) const;
};

inline constexpr double kSignificanceZ = 1.959963984540054;

/// Rows with any NaN are dropped. Throws DataError for too few rows or a singular
/// design; the message names the collinear columns.
RegressionModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        std::vector<std::string> feature_names);

/// -1, 0 or +1; NaN stays NaN.
double sign_position(double prediction);

/// phi(y) = y exp(-y^2 / 4) / 0.89.
double macd_response(double y);
/// Maximum of phi, reached at y = sqrt(2).
inline constexpr double kMacdResponseMax = 0.9637796460232662;

/// Positions aligned with the input rows; NaN where inputs are incomplete.
std::vector<double> signals_gmom(const RegressionModel& model, const PropagatedFeatures& propagated);
std::vector<double> signals_linreg(const RegressionModel& model, const FeaturePanel& features);
std::vector<double> signals_macd(const FeaturePanel& features);
/// Rows follow `features`; assets missing from `propagated` get NaN.
std::vector<double> signals_regcombo(const RegressionModel& model, const FeaturePanel& features,
                                     const PropagatedFeatures& propagated);

/// 16 covariates: individual features followed by network features, for tickers in
/// both inputs (feature panel order).
struct CombinedFeatures {
  std::vector<std::string> tickers;
  Eigen::MatrixXd values;
};
CombinedFeatures combine_features(const FeaturePanel& features, const PropagatedFeatures& propagated);

enum class StrategyKind { LongOnly, Macd, LinReg, Gmom, RegCombo, SignCombo };
std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy(std::string_view name);

/// Positions by date and ticker; NaN where the strategy holds no view.
struct SignalSeries {
  std::string strategy;
  DatedMatrix positions;
};

SignalSeries signals_long_only(const PricePanel& panel, std::span<const Eigen::Index> rows);
SignalSeries signals_signcombo(const SignalSeries& a, const SignalSeries& b,
                               std::string name = "SignCombo");

/// `date,ticker,strategy,position` rows for every non-missing cell.
std::string signals_csv(std::span<const SignalSeries> series);

/// Table of coefficients per training period: a wide table with one row per period,
/// cells `coef (se)` plus `*` when significant, and a long table with every field.
struct CoefficientTable {
  std::string wide_csv;
  std::string long_csv;
};
CoefficientTable coefficient_report(std::span<const std::string> periods,
                                    std::span<const RegressionModel> models);

}  // namespace netmom
