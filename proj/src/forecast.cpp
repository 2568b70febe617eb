#include "cbwatch/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cbwatch/random.hpp"

namespace cbwatch {

void WindowDataset::append(const WindowDataset& other) {
  windows.insert(windows.end(), other.windows.begin(), other.windows.end());
  targets.insert(targets.end(), other.targets.begin(), other.targets.end());
  sources.insert(sources.end(), other.sources.begin(), other.sources.end());
}

WindowDataset make_windows(const std::string& id, std::span<const double> series, const ForecastConfig& cfg) {
  cfg.validate();
  const auto w = static_cast<std::size_t>(cfg.window);
  if (series.size() <= w)
    throw Error(Errc::SeriesTooShort, id,
                fmt::format("series {} has {} points, window {} needs at least {}", id, series.size(), w, w + 1));
  WindowDataset ds;
  for (std::size_t t = w; t < series.size(); ++t) {
    ds.windows.emplace_back(series.begin() + static_cast<std::ptrdiff_t>(t - w),
                            series.begin() + static_cast<std::ptrdiff_t>(t));
    ds.targets.push_back(series[t]);
    ds.sources.push_back(id);
  }
  return ds;
}

WindowDataset make_windows(const std::vector<IncidentSeries>& series, const ForecastConfig& cfg) {
  WindowDataset ds;
  for (const auto& s : series) ds.append(make_windows(s.incident_id, s.offensive_counts(), cfg));
  return ds;
}

std::string_view to_string(ForecastKind k) noexcept {
  switch (k) {
    case ForecastKind::nlinear: return "nlinear";
    case ForecastKind::dlinear: return "dlinear";
    case ForecastKind::persistence: return "persistence";
    case ForecastKind::moving_average: return "moving_average";
  }
  return "?";
}

std::optional<ForecastKind> parse_forecast_kind(std::string_view s) {
  for (auto k : kAllForecastKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::vector<double> moving_average_trend(std::span<const double> x, int kernel) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t half = kernel / 2;
  std::vector<double> trend(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::ptrdiff_t k = i - half; k <= i + half; ++k) sum += x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, n - 1))];
    trend[static_cast<std::size_t>(i)] = sum / kernel;
  }
  return trend;
}

namespace {

// Model features for one window: the learned kinds are linear in these plus a
// bias, with nlinear predicting relative to the last value.
std::vector<double> features(ForecastKind kind, std::span<const double> x, int kernel) {
  if (kind == ForecastKind::nlinear) {
    std::vector<double> f(x.begin(), x.end());
    const double last = x.back();
    for (auto& v : f) v -= last;
    return f;
  }
  const auto trend = moving_average_trend(x, kernel);
  std::vector<double> f(trend);
  for (std::size_t i = 0; i < x.size(); ++i) f.push_back(x[i] - trend[i]);
  return f;
}

double offset(ForecastKind kind, std::span<const double> x) {
  return kind == ForecastKind::nlinear ? x.back() : 0.0;
}

bool learned(ForecastKind k) { return k == ForecastKind::nlinear || k == ForecastKind::dlinear; }

void fit_gradient(LinearForecaster& m, const std::vector<std::vector<double>>& feats, const std::vector<double>& y,
                  const std::vector<std::string>& sources, const FitOptions& opts) {
  const std::size_t dim = feats.front().size();
  Rng rng(opts.seed);
  std::vector<double> theta(dim + 1);
  for (std::size_t i = 0; i < dim; ++i) theta[i] = rng.normal() * 0.01;
  std::vector<double> mom(dim + 1, 0.0), vel(dim + 1, 0.0), grad(dim + 1);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  // Training incidents are visited in order, each for `epochs` passes.
  std::vector<std::string> order;
  for (const auto& s : sources)
    if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
  for (const auto& src : order) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (sources[i] == src) idx.push_back(i);
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
      rng.shuffle(idx);
      for (std::size_t b = 0; b < idx.size(); b += static_cast<std::size_t>(opts.batch_size)) {
        const std::size_t e = std::min(idx.size(), b + static_cast<std::size_t>(opts.batch_size));
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t k = b; k < e; ++k) {
          const auto& f = feats[idx[k]];
          double pred = theta[dim];
          for (std::size_t j = 0; j < dim; ++j) pred += theta[j] * f[j];
          const double r = 2.0 * (pred - y[idx[k]]) / static_cast<double>(e - b);
          for (std::size_t j = 0; j < dim; ++j) grad[j] += r * f[j];
          grad[dim] += r;
        }
        ++step;
        for (std::size_t j = 0; j <= dim; ++j) {
          mom[j] = beta1 * mom[j] + (1 - beta1) * grad[j];
          vel[j] = beta2 * vel[j] + (1 - beta2) * grad[j] * grad[j];
          const double mh = mom[j] / (1 - std::pow(beta1, step));
          const double vh = vel[j] / (1 - std::pow(beta2, step));
          theta[j] -= opts.learning_rate * mh / (std::sqrt(vh) + eps);
        }
      }
    }
  }
  m.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(dim));
  m.bias = theta[dim];
}

}  // namespace

double LinearForecaster::raw_predict(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != window)
    throw Error(Errc::DimensionMismatch, "window",
                fmt::format("expected a window of {} values, got {}", window, x.size()));
  switch (kind) {
    case ForecastKind::persistence: return x.back();
    case ForecastKind::moving_average: return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    case ForecastKind::nlinear:
    case ForecastKind::dlinear: break;
  }
  const auto f = features(kind, x, kernel);
  double y = bias;
  for (std::size_t i = 0; i < f.size(); ++i) y += weights[i] * f[i];
  return y + offset(kind, x);
}

double LinearForecaster::predict(std::span<const double> x) const { return std::max(0.0, raw_predict(x)); }

std::vector<double> ridge_solve(const std::vector<std::vector<double>>& rows, std::span<const double> y,
                                double lambda) {
  if (rows.empty()) throw Error(Errc::EmptyTrainSet, "no rows to fit");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd a(n, d);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    b(i) = y[static_cast<std::size_t>(i)];
  }
  Eigen::MatrixXd gram = a.transpose() * a;
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd theta = gram.ldlt().solve(a.transpose() * b);
  return {theta.data(), theta.data() + theta.size()};
}

LinearForecaster fit(const WindowDataset& train, ForecastKind kind, const ForecastConfig& cfg,
                     const FitOptions& opts) {
  cfg.validate();
  LinearForecaster m;
  m.kind = kind;
  m.window = cfg.window;
  m.kernel = cfg.dlinear_kernel;
  if (!learned(kind)) return m;
  if (train.empty()) throw Error(Errc::EmptyTrainSet, "training set is empty");

  std::vector<std::vector<double>> feats;
  std::vector<double> y;
  feats.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& x = train.windows[i];
    if (static_cast<int>(x.size()) != cfg.window)
      throw Error(Errc::DimensionMismatch, "window", "training window size differs from the configured window");
    feats.push_back(features(kind, x, cfg.dlinear_kernel));
    y.push_back(train.targets[i] - offset(kind, x));
  }
  if (opts.mode == FitMode::gradient) {
    fit_gradient(m, feats, y, train.sources, opts);
    return m;
  }
  for (auto& f : feats) f.push_back(1.0);
  auto theta = ridge_solve(feats, y, cfg.ridge_lambda);
  m.bias = theta.back();
  theta.pop_back();
  m.weights = std::move(theta);
  return m;
}

ErrorReport error_report(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.empty()) throw Error(Errc::EmptyTestSet, "test set is empty");
  if (predicted.size() != actual.size()) throw Error(Errc::LengthMismatch, "prediction and target counts differ");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - actual[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const auto n = static_cast<double>(predicted.size());
  ErrorReport r{abs_sum / n, std::sqrt(sq_sum / n), predicted.size()};
  // Guard against rounding putting rmse a hair under mae.
  r.rmse = std::max(r.rmse, r.mae);
  return r;
}

ErrorReport evaluate(std::span<const LinearForecaster> models, const WindowDataset& test) {
  if (test.empty()) throw Error(Errc::EmptyTestSet, "test set is empty");
  if (models.empty()) throw Error(Errc::InvalidArgument, "models", "no models to evaluate");
  std::vector<double> pred;
  pred.reserve(test.size());
  for (const auto& x : test.windows) {
    double sum = 0.0;
    for (const auto& m : models) sum += m.predict(x);
    pred.push_back(sum / static_cast<double>(models.size()));
  }
  return error_report(pred, test.targets);
}

ErrorReport evaluate(const LinearForecaster& model, const WindowDataset& test) {
  return evaluate(std::span<const LinearForecaster>(&model, 1), test);
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

ExperimentReport experiment(const std::vector<IncidentSeries>& series, const ForecastConfig& cfg,
                            const ExperimentOptions& opts) {
  cfg.validate();
  std::map<std::string, const IncidentSeries*> by_id;
  for (const auto& s : series) by_id[s.incident_id] = &s;
  const std::set<std::string> train_ids(opts.train_incidents.begin(), opts.train_incidents.end());
  for (const auto& id : train_ids)
    if (!by_id.count(id)) throw Error(Errc::UnknownIncident, id, "unknown training incident " + id);
  if (train_ids.empty()) throw Error(Errc::EmptyTrainSet, "no training incidents given");

  ExperimentReport report;
  std::vector<WindowDataset> train_parts;
  WindowDataset train, test;
  for (const auto& id : opts.train_incidents) {
    if (std::find(report.train_incidents.begin(), report.train_incidents.end(), id) != report.train_incidents.end())
      continue;
    report.train_incidents.push_back(id);
    train_parts.push_back(make_windows(id, by_id[id]->offensive_counts(), cfg));
    train.append(train_parts.back());
  }
  for (const auto& [id, s] : by_id) {
    if (train_ids.count(id)) continue;
    report.test_incidents.push_back(id);
    test.append(make_windows(id, s->offensive_counts(), cfg));
  }
  if (test.empty()) throw Error(Errc::EmptyTestSet, "no test incidents left after the training split");
  report.train_pairs = train.size();
  report.test_pairs = test.size();

  const std::vector<std::uint64_t> seeds = opts.seeds.empty() ? std::vector<std::uint64_t>{0} : opts.seeds;
  for (ForecastKind kind : opts.kinds) {
    std::vector<double> maes, rmses;
    for (std::uint64_t seed : seeds) {
      FitOptions fo = opts.fit;
      fo.seed = seed;
      std::vector<LinearForecaster> models;
      if (opts.per_event && learned(kind)) {
        for (const auto& part : train_parts) models.push_back(fit(part, kind, cfg, fo));
      } else {
        models.push_back(fit(train, kind, cfg, fo));
      }
      const ErrorReport e = evaluate(models, test);
      maes.push_back(e.mae);
      rmses.push_back(e.rmse);
    }
    ExperimentRow row{kind};
    std::tie(row.mae, row.mae_sd) = mean_sd(maes);
    std::tie(row.rmse, row.rmse_sd) = mean_sd(rmses);
    report.rows.push_back(row);
  }
  return report;
}

std::string to_table(const ExperimentReport& r) {
  std::string out = fmt::format("{:<16}{:>24}{:>24}\n", "Method", "MAE", "RMSE");
  for (const auto& row : r.rows)
    out += fmt::format("{:<16}{:>24}{:>24}\n", to_string(row.kind), fmt::format("{:.4f} (± {:.4f})", row.mae, row.mae_sd),
                       fmt::format("{:.4f} (± {:.4f})", row.rmse, row.rmse_sd));
  return out;
}

std::string to_csv(const ExperimentReport& r) {
  std::string out = "kind,mae,mae_sd,rmse,rmse_sd\n";
  for (const auto& row : r.rows)
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", to_string(row.kind), row.mae, row.mae_sd, row.rmse,
                       row.rmse_sd);
  return out;
}

json to_json(const ExperimentReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"kind", to_string(row.kind)},
                    {"mae", row.mae},
                    {"mae_sd", row.mae_sd},
                    {"rmse", row.rmse},
                    {"rmse_sd", row.rmse_sd}});
  return json{{"train_incidents", r.train_incidents},
              {"test_incidents", r.test_incidents},
              {"train_pairs", r.train_pairs},
              {"test_pairs", r.test_pairs},
              {"rows", rows}};
}

}  // namespace cbwatch
