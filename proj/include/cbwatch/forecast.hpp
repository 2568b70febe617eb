#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbwatch/core.hpp"
#include "cbwatch/incident.hpp"

namespace cbwatch {

struct WindowDataset {
  std::vector<std::vector<double>> windows;
  std::vector<double> targets;
  std::vector<std::string> sources;  // incident id per pair

  std::size_t size() const { return targets.size(); }
  bool empty() const { return targets.empty(); }
  void append(const WindowDataset& other);
};

/// Pairs (x[t-w..t-1], x[t]) for every valid t of one series.
/// Throws SeriesTooShort unless the series is longer than the window.
WindowDataset make_windows(const std::string& id, std::span<const double> series, const ForecastConfig& cfg);
/// Offensive counts of every series, never crossing incident boundaries.
WindowDataset make_windows(const std::vector<IncidentSeries>& series, const ForecastConfig& cfg);

enum class ForecastKind { nlinear, dlinear, persistence, moving_average };
std::string_view to_string(ForecastKind k) noexcept;
std::optional<ForecastKind> parse_forecast_kind(std::string_view s);
inline constexpr std::array<ForecastKind, 4> kAllForecastKinds = {
    ForecastKind::nlinear, ForecastKind::dlinear, ForecastKind::persistence, ForecastKind::moving_average};

enum class FitMode { closed_form, gradient };

struct FitOptions {
  FitMode mode = FitMode::closed_form;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  int epochs = 10;  // per training incident
  int batch_size = 32;
};

struct LinearForecaster {
  ForecastKind kind = ForecastKind::persistence;
  int window = 5;
  int kernel = 3;
  // nlinear: `window` weights; dlinear: trend weights then remainder weights.
  std::vector<double> weights;
  double bias = 0.0;

  /// Unclamped model output. Throws DimensionMismatch.
  double raw_predict(std::span<const double> x) const;
  /// raw_predict clamped at 0.
  double predict(std::span<const double> x) const;
};

/// Moving average with edge replication; `kernel` odd.
std::vector<double> moving_average_trend(std::span<const double> x, int kernel);

/// argmin ||A theta - y||^2 + lambda ||theta||^2 via the normal equations.
std::vector<double> ridge_solve(const std::vector<std::vector<double>>& rows, std::span<const double> y,
                                double lambda);

/// Throws EmptyTrainSet for learned kinds on an empty set.
LinearForecaster fit(const WindowDataset& train, ForecastKind kind, const ForecastConfig& cfg = {},
                     const FitOptions& opts = {});

struct ErrorReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
};

/// Predictions are the mean over `models` (one model for pooled training).
/// Throws EmptyTestSet.
ErrorReport evaluate(std::span<const LinearForecaster> models, const WindowDataset& test);
ErrorReport evaluate(const LinearForecaster& model, const WindowDataset& test);
ErrorReport error_report(std::span<const double> predicted, std::span<const double> actual);

struct ExperimentOptions {
  std::vector<std::string> train_incidents;
  std::vector<ForecastKind> kinds{kAllForecastKinds.begin(), kAllForecastKinds.end()};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool per_event = false;
  FitOptions fit;
};

struct ExperimentRow {
  ForecastKind kind;
  double mae = 0.0;
  double mae_sd = 0.0;
  double rmse = 0.0;
  double rmse_sd = 0.0;
};

struct ExperimentReport {
  std::vector<std::string> train_incidents;
  std::vector<std::string> test_incidents;
  std::size_t train_pairs = 0;
  std::size_t test_pairs = 0;
  std::vector<ExperimentRow> rows;
};

/// Fits every kind on the training incidents, tests on the rest; one run per
/// seed, mean and sample standard deviation reported.
/// Throws UnknownIncident, EmptyTestSet.
ExperimentReport experiment(const std::vector<IncidentSeries>& series, const ForecastConfig& cfg,
                            const ExperimentOptions& opts);

std::string to_table(const ExperimentReport& r);
std::string to_csv(const ExperimentReport& r);
json to_json(const ExperimentReport& r);

}  // namespace cbwatch
