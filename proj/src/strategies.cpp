#include "netmom/strategies.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "netmom/csv.hpp"
#include "netmom/errors.hpp"

namespace netmom {

PropagatedFeatures propagate(const GraphSnapshot& graph, const FeaturePanel& features) {
  PropagatedFeatures out;
  out.date = features.date;
  out.tickers = graph.tickers;
  const Eigen::Index n = graph.nodes();
  const Eigen::Index k = features.values.cols() > 0 ? features.values.cols() : kNumFeatures;
  // Panel rows for each graph node, or -1 when the node has no features today.
  std::unordered_map<std::string_view, Eigen::Index> panel_row;
  for (std::size_t r = 0; r < features.tickers.size(); ++r) {
    panel_row.emplace(features.tickers[r], static_cast<Eigen::Index>(r));
  }
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index j = 0; j < n; ++j) {
    auto it = panel_row.find(graph.tickers[static_cast<std::size_t>(j)]);
    if (it != panel_row.end()) u.row(j) = features.values.row(it->second);
  }
  out.values = graph.adjacency * u;
  return out;
}

double RegressionModel::predict(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != features()) {
    throw ConfigError("prediction input has the wrong number of features");
  }
  double y = intercept;
  for (Eigen::Index k = 0; k < features(); ++k) {
    y += coefficients(k) * (x[static_cast<std::size_t>(k)] - mean(k)) / scale(k);
  }
  return y;
}

Eigen::VectorXd RegressionModel::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Eigen::VectorXd row = x.row(r).transpose();
    out(r) = predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  return out;
}

bool RegressionModel::significant(Eigen::Index k) const {
  return !is_missing(t_stats(k)) && std::abs(t_stats(k)) > kSignificanceZ;
}

RegressionModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        std::vector<std::string> feature_names) {
  const Eigen::Index p = x.cols();
  if (y.size() != x.rows()) throw ConfigError("covariate and target row counts differ");
  if (static_cast<Eigen::Index>(feature_names.size()) != p) {
    throw ConfigError("feature name count does not match covariate columns");
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (!x.row(r).hasNaN() && !is_missing(y(r))) keep.push_back(r);
  }
  const auto n = static_cast<Eigen::Index>(keep.size());
  if (n < p + 1) {
    throw DataError("regression needs at least " + std::to_string(p + 1) +
                    " complete rows, got " + std::to_string(n));
  }
  Eigen::MatrixXd z(n, p);
  Eigen::VectorXd target(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    z.row(r) = x.row(keep[static_cast<std::size_t>(r)]);
    target(r) = y(keep[static_cast<std::size_t>(r)]);
  }

  RegressionModel model;
  model.feature_names = std::move(feature_names);
  model.samples = n;
  model.mean = z.colwise().mean().transpose();
  z.rowwise() -= model.mean.transpose();
  model.scale = (z.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt().transpose();
  for (Eigen::Index k = 0; k < p; ++k) {
    if (!(model.scale(k) > 0.0)) {
      throw DataError("singular design: column " + model.feature_names[static_cast<std::size_t>(k)] +
                      " is constant");
    }
  }
  z.array().rowwise() /= model.scale.transpose().array();

  // Condition diagnostic on the correlation matrix of the standardised columns.
  const Eigen::MatrixXd gram = z.transpose() * z;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram / static_cast<double>(n));
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(p - 1);
  if (!(lo > 1e-10 * hi)) {
    const Eigen::VectorXd v = eig.eigenvectors().col(0);
    std::string names;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (std::abs(v(k)) > 0.1) {
        if (!names.empty()) names += ", ";
        names += model.feature_names[static_cast<std::size_t>(k)];
      }
    }
    throw DataError("singular design: collinear columns " + names);
  }

  model.intercept = target.mean();
  const Eigen::VectorXd centred = target.array() - model.intercept;
  model.coefficients = z.householderQr().solve(centred);
  const Eigen::VectorXd residual = centred - z * model.coefficients;
  const Eigen::Index dof = n - p - 1;
  model.residual_variance = dof > 0 ? residual.squaredNorm() / static_cast<double>(dof) : kMissing;

  const Eigen::MatrixXd inv = gram.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  model.std_errors = (model.residual_variance * inv.diagonal()).cwiseSqrt();
  model.intercept_std_error = std::sqrt(model.residual_variance / static_cast<double>(n));
  model.t_stats.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double se = model.std_errors(k);
    model.t_stats(k) = se > 0.0 ? model.coefficients(k) / se : kMissing;
  }
  return model;
}

double sign_position(double prediction) {
  if (is_missing(prediction)) return kMissing;
  return prediction > 0.0 ? 1.0 : (prediction < 0.0 ? -1.0 : 0.0);
}

double macd_response(double y) { return y * std::exp(-y * y / 4.0) / 0.89; }

namespace {

std::vector<double> sign_predictions(const RegressionModel& model, const Eigen::MatrixXd& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()), kMissing);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (x.row(r).hasNaN()) continue;
    const Eigen::VectorXd row = x.row(r).transpose();
    out[static_cast<std::size_t>(r)] =
        sign_position(model.predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
  }
  return out;
}

}  // namespace

std::vector<double> signals_gmom(const RegressionModel& model, const PropagatedFeatures& propagated) {
  return sign_predictions(model, propagated.values);
}

std::vector<double> signals_linreg(const RegressionModel& model, const FeaturePanel& features) {
  return sign_predictions(model, features.values);
}

std::vector<double> signals_macd(const FeaturePanel& features) {
  std::vector<double> out(features.tickers.size(), kMissing);
  const int first = static_cast<int>(kReturnHorizons.size());
  for (Eigen::Index r = 0; r < features.values.rows(); ++r) {
    double sum = 0.0;
    for (int k = first; k < kNumFeatures; ++k) sum += macd_response(features.values(r, k));
    out[static_cast<std::size_t>(r)] = sum / static_cast<double>(kMacdScales.size());
  }
  return out;
}

CombinedFeatures combine_features(const FeaturePanel& features, const PropagatedFeatures& propagated) {
  std::unordered_map<std::string_view, Eigen::Index> node;
  for (std::size_t i = 0; i < propagated.tickers.size(); ++i) {
    node.emplace(propagated.tickers[i], static_cast<Eigen::Index>(i));
  }
  CombinedFeatures out;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> rows;
  for (std::size_t r = 0; r < features.tickers.size(); ++r) {
    auto it = node.find(features.tickers[r]);
    if (it == node.end()) continue;
    rows.emplace_back(static_cast<Eigen::Index>(r), it->second);
    out.tickers.push_back(features.tickers[r]);
  }
  out.values.resize(static_cast<Eigen::Index>(rows.size()), 2 * kNumFeatures);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.values.row(r).head(kNumFeatures) = features.values.row(rows[i].first);
    out.values.row(r).tail(kNumFeatures) = propagated.values.row(rows[i].second);
  }
  return out;
}

std::vector<double> signals_regcombo(const RegressionModel& model, const FeaturePanel& features,
                                     const PropagatedFeatures& propagated) {
  const auto combined = combine_features(features, propagated);
  const auto signs = sign_predictions(model, combined.values);
  std::vector<double> out(features.tickers.size(), kMissing);
  std::size_t c = 0;
  for (std::size_t r = 0; r < features.tickers.size() && c < combined.tickers.size(); ++r) {
    if (features.tickers[r] == combined.tickers[c]) out[r] = signs[c++];
  }
  return out;
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::LongOnly: return "LongOnly";
    case StrategyKind::Macd: return "MACD";
    case StrategyKind::LinReg: return "LinReg";
    case StrategyKind::Gmom: return "GMOM";
    case StrategyKind::RegCombo: return "RegCombo";
    case StrategyKind::SignCombo: return "SignCombo";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  for (auto kind : {StrategyKind::LongOnly, StrategyKind::Macd, StrategyKind::LinReg,
                    StrategyKind::Gmom, StrategyKind::RegCombo, StrategyKind::SignCombo}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

SignalSeries signals_long_only(const PricePanel& panel, std::span<const Eigen::Index> rows) {
  SignalSeries out;
  out.strategy = "LongOnly";
  out.positions.tickers = panel.tickers();
  out.positions.values.resize(static_cast<Eigen::Index>(rows.size()), panel.prices.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.positions.dates.push_back(panel.calendar.at(static_cast<std::size_t>(rows[i])));
    for (Eigen::Index a = 0; a < panel.prices.cols(); ++a) {
      out.positions.values(static_cast<Eigen::Index>(i), a) =
          is_missing(panel.prices(rows[i], a)) ? kMissing : 1.0;
    }
  }
  return out;
}

SignalSeries signals_signcombo(const SignalSeries& a, const SignalSeries& b, std::string name) {
  if (a.positions.dates != b.positions.dates || a.positions.tickers != b.positions.tickers) {
    throw ConfigError("sign combination needs aligned signal series");
  }
  SignalSeries out;
  out.strategy = std::move(name);
  out.positions = a.positions;
  // NaN propagates through the sum, so a missing parent leaves the cell missing.
  out.positions.values = 0.5 * (a.positions.values + b.positions.values);
  return out;
}

std::string signals_csv(std::span<const SignalSeries> series) {
  std::ostringstream os;
  os << "date,ticker,strategy,position\n";
  for (const auto& s : series) {
    const auto& m = s.positions;
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
      const std::string date = m.dates[static_cast<std::size_t>(t)].iso();
      for (Eigen::Index a = 0; a < m.cols(); ++a) {
        if (is_missing(m.values(t, a))) continue;
        os << date << ',' << csv::escape(m.tickers[static_cast<std::size_t>(a)]) << ','
           << csv::escape(s.strategy) << ',' << csv::format_double(m.values(t, a)) << '\n';
      }
    }
  }
  return os.str();
}

CoefficientTable coefficient_report(std::span<const std::string> periods,
                                    std::span<const RegressionModel> models) {
  if (periods.size() != models.size()) throw ConfigError("one period label per model required");
  std::ostringstream wide;
  std::ostringstream lng;
  lng << "period,feature,coefficient,std_error,t_stat,significant\n";
  if (!models.empty()) {
    wide << "period";
    for (const auto& name : models.front().feature_names) wide << ',' << csv::escape(name);
    wide << '\n';
  }
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& model = models[m];
    wide << csv::escape(periods[m]);
    for (Eigen::Index k = 0; k < model.features(); ++k) {
      const bool star = model.significant(k);
      wide << ',' << csv::escape(csv::format_fixed(model.coefficients(k), 4) + " (" +
                                 csv::format_fixed(model.std_errors(k), 4) + ")" + (star ? "*" : ""));
      lng << csv::escape(periods[m]) << ','
          << csv::escape(model.feature_names[static_cast<std::size_t>(k)]) << ','
          << csv::format_double(model.coefficients(k)) << ','
          << csv::format_double(model.std_errors(k)) << ',' << csv::format_double(model.t_stats(k))
          << ',' << (star ? 1 : 0) << '\n';
    }
    wide << '\n';
  }
  return {wide.str(), lng.str()};
}

}  // namespace netmom
