#include <cmath>

#include <gtest/gtest.h>

#include "cbwatch/forecast.hpp"
#include "cbwatch/random.hpp"

using namespace cbwatch;

namespace {

std::vector<double> affine(double a, double b, int n) {
  std::vector<double> v;
  for (int t = 0; t < n; ++t) v.push_back(a + b * t);
  return v;
}

IncidentSeries counts_series(const std::string& id, const std::vector<double>& counts) {
  IncidentSeries s;
  s.incident_id = id;
  for (double c : counts) s.bins.push_back({static_cast<std::int64_t>(c) * 4, static_cast<std::int64_t>(c)});
  return s;
}

// Plain Gaussian elimination with partial pivoting on the ridge normal equations.
std::vector<double> ridge_oracle(const std::vector<std::vector<double>>& rows, const std::vector<double>& y,
                                 double lambda) {
  const std::size_t d = rows.front().size();
  std::vector<std::vector<long double>> m(d, std::vector<long double>(d + 1, 0.0L));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < rows.size(); ++k) m[i][j] += static_cast<long double>(rows[k][i]) * rows[k][j];
    m[i][i] += lambda;
    for (std::size_t k = 0; k < rows.size(); ++k) m[i][d] += static_cast<long double>(rows[k][i]) * y[k];
  }
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < d; ++r)
      if (std::fabs(m[r][c]) > std::fabs(m[p][c])) p = r;
    std::swap(m[c], m[p]);
    for (std::size_t r = 0; r < d; ++r) {
      if (r == c) continue;
      const long double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k <= d; ++k) m[r][k] -= f * m[c][k];
    }
  }
  std::vector<double> x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = static_cast<double>(m[i][d] / m[i][i]);
  return x;
}

WindowDataset affine_training_set(const ForecastConfig& cfg) {
  WindowDataset ds;
  for (double slope : {0.5, 1.0, 2.0, 3.5})
    for (double icpt : {20.0, 50.0}) ds.append(make_windows("tr", affine(icpt, slope, 30), cfg));
  return ds;
}

}  // namespace

TEST(Windows, SevenBinsGiveTwoPairs) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7};
  const WindowDataset ds = make_windows("e", x, {});
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.windows[0], (std::vector<double>{1, 2, 3, 4, 5}));
  EXPECT_EQ(ds.targets[0], 6);
  EXPECT_EQ(ds.windows[1], (std::vector<double>{2, 3, 4, 5, 6}));
  EXPECT_EQ(ds.targets[1], 7);
  EXPECT_EQ(ds.sources, (std::vector<std::string>{"e", "e"}));
}

TEST(Windows, ShortSeriesIsRejected) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  try {
    make_windows("e5", x, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SeriesTooShort);
    EXPECT_EQ(e.subject(), "e5");
  }
}

TEST(Windows, NeverCrossIncidentBoundaries) {
  const std::vector<IncidentSeries> all = {counts_series("a", affine(1, 1, 8)), counts_series("b", affine(100, 0, 6))};
  const WindowDataset ds = make_windows(all, {});
  ASSERT_EQ(ds.size(), 4u);  // 3 from a, 1 from b
  EXPECT_EQ(ds.windows[3], (std::vector<double>(5, 100.0)));
  EXPECT_EQ(ds.sources[3], "b");
}

TEST(Baselines, PersistenceAndMovingAverage) {
  const std::vector<double> x = {1, 2, 3, 4, 10};
  const LinearForecaster p = fit({}, ForecastKind::persistence);
  const LinearForecaster m = fit({}, ForecastKind::moving_average);
  EXPECT_EQ(p.predict(x), 10.0);
  EXPECT_DOUBLE_EQ(m.predict(x), 4.0);
  EXPECT_THROW(p.predict(std::vector<double>{1, 2}), Error);
}

TEST(MovingAverage, EdgeReplication) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const auto t = moving_average_trend(x, 3);
  const std::vector<double> expect = {4.0 / 3, 2, 3, 4, 14.0 / 3};
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(t[i], expect[i], 1e-12);
}

TEST(MovingAverage, ConstantSeriesIsItsOwnTrend) {
  Rng rng(4);
  for (int k : {1, 3, 5}) {
    const double c = rng.uniform() * 50;
    const std::vector<double> x(7, c);
    const auto t = moving_average_trend(x, k);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(t[i], c, 1e-12);
      EXPECT_NEAR(t[i] + (x[i] - t[i]), x[i], 1e-12);
    }
  }
}

TEST(Ridge, MatchesGaussianEliminationOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng.below(40), d = 2 + rng.below(8);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    std::vector<double> y(n);
    for (auto& r : rows)
      for (auto& v : r) v = rng.normal() * 3;
    for (auto& v : y) v = rng.normal() * 10;
    const double lambda = trial % 2 ? 1e-6 : 0.5;
    const auto got = ridge_solve(rows, y, lambda);
    const auto want = ridge_oracle(rows, y, lambda);
    ASSERT_EQ(got.size(), d);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(got[j], want[j], 1e-8) << trial;
  }
}

TEST(Fit, RampPredictsNextValue) {
  const WindowDataset train = affine_training_set({});
  for (auto kind : {ForecastKind::nlinear, ForecastKind::dlinear}) {
    const LinearForecaster m = fit(train, kind);
    EXPECT_NEAR(m.predict(std::vector<double>{10, 11, 12, 13, 14}), 15.0, 1e-6) << to_string(kind);
  }
}

TEST(Fit, AffineSeriesAreLearnedExactly) {
  const WindowDataset train = affine_training_set({});
  WindowDataset test;
  test.append(make_windows("te", affine(7.0, 1.25, 20), {}));
  test.append(make_windows("te2", affine(80.0, 0.75, 20), {}));
  for (auto kind : {ForecastKind::nlinear, ForecastKind::dlinear}) {
    const ErrorReport e = evaluate(fit(train, kind), test);
    EXPECT_LT(e.mae, 1e-6) << to_string(kind);
    EXPECT_GE(e.rmse, e.mae);
  }
}

TEST(Fit, ConstantSeries) {
  WindowDataset train;
  for (double c : {3.0, 9.0, 40.0}) train.append(make_windows("c", std::vector<double>(12, c), {}));
  const LinearForecaster n = fit(train, ForecastKind::nlinear);
  EXPECT_NEAR(n.predict(std::vector<double>(5, 17.0)), 17.0, 1e-9);
  EXPECT_EQ(fit(train, ForecastKind::persistence).predict(std::vector<double>(5, 17.0)), 17.0);
}

TEST(Fit, PredictionsAreClampedAtZero) {
  LinearForecaster m;
  m.kind = ForecastKind::nlinear;
  m.weights = std::vector<double>(5, 0.0);
  m.bias = -100.0;
  const std::vector<double> x = {1, 1, 1, 1, 1};
  EXPECT_EQ(m.raw_predict(x), -99.0);
  EXPECT_EQ(m.predict(x), 0.0);
}

TEST(Fit, Errors) {
  EXPECT_THROW(fit({}, ForecastKind::nlinear), Error);
  WindowDataset odd;
  odd.windows = {{1, 2, 3}};
  odd.targets = {4};
  odd.sources = {"x"};
  try {
    fit(odd, ForecastKind::dlinear);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(Fit, GradientModeIsSeededAndConverges) {
  const WindowDataset train = affine_training_set({});
  FitOptions opts;
  opts.mode = FitMode::gradient;
  opts.learning_rate = 1e-2;
  opts.epochs = 200;
  opts.seed = 5;
  const LinearForecaster a = fit(train, ForecastKind::nlinear, {}, opts);
  const LinearForecaster b = fit(train, ForecastKind::nlinear, {}, opts);
  EXPECT_EQ(a.weights, b.weights);
  opts.seed = 6;
  EXPECT_NE(fit(train, ForecastKind::nlinear, {}, opts).weights, a.weights);
  EXPECT_NEAR(a.predict(std::vector<double>{10, 11, 12, 13, 14}), 15.0, 0.5);
}

TEST(ErrorReport, WorkedExamples) {
  const std::vector<double> actual = {1, 1};
  const ErrorReport a = error_report(std::vector<double>{2, 0}, actual);  // errors 1, -1
  EXPECT_DOUBLE_EQ(a.mae, 1.0);
  EXPECT_DOUBLE_EQ(a.rmse, 1.0);
  const ErrorReport b = error_report(std::vector<double>{1, 3}, actual);  // errors 0, 2
  EXPECT_DOUBLE_EQ(b.mae, 1.0);
  EXPECT_NEAR(b.rmse, std::sqrt(2.0), 1e-15);
  EXPECT_THROW(error_report(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST(ErrorReport, RmseNeverBelowMae) {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> p(1 + rng.below(20)), y(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] = rng.uniform() * 10;
      y[k] = rng.uniform() * 10;
    }
    const ErrorReport e = error_report(p, y);
    ASSERT_GE(e.rmse, e.mae);
  }
}

TEST(Evaluate, ShiftEquivariance) {
  Rng rng(9);
  std::vector<double> base(40);
  for (auto& v : base) v = 20 + rng.uniform() * 10;
  for (double c : {5.0, 123.25}) {
    std::vector<double> shifted = base;
    for (auto& v : shifted) v += c;
    const WindowDataset tr = make_windows("a", std::span(base).first(25), {});
    const WindowDataset tr2 = make_windows("a", std::span(shifted).first(25), {});
    const WindowDataset te = make_windows("b", std::span(base).subspan(25), {});
    const WindowDataset te2 = make_windows("b", std::span(shifted).subspan(25), {});
    for (auto kind : {ForecastKind::nlinear, ForecastKind::persistence, ForecastKind::moving_average}) {
      const LinearForecaster m = fit(tr, kind), m2 = fit(tr2, kind);
      for (std::size_t i = 0; i < te.size(); ++i)
        ASSERT_NEAR(m2.predict(te2.windows[i]), m.predict(te.windows[i]) + c, 1e-9) << to_string(kind);
      EXPECT_NEAR(evaluate(m2, te2).mae, evaluate(m, te).mae, 1e-9);
    }
  }
}

TEST(Experiment, AllZeroSeriesGiveZeroError) {
  std::vector<IncidentSeries> all;
  for (const char* id : {"a", "b", "c"}) all.push_back(counts_series(id, std::vector<double>(10, 0.0)));
  ExperimentOptions opts;
  opts.train_incidents = {"a", "b"};
  const ExperimentReport r = experiment(all, {}, opts);
  EXPECT_EQ(r.test_incidents, (std::vector<std::string>{"c"}));
  EXPECT_EQ(r.train_pairs, 10u);
  EXPECT_EQ(r.test_pairs, 5u);
  ASSERT_EQ(r.rows.size(), 4u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.mae, 0.0);
    EXPECT_EQ(row.mae_sd, 0.0);
  }
}

TEST(Experiment, Errors) {
  std::vector<IncidentSeries> all = {counts_series("a", affine(1, 1, 10)), counts_series("b", affine(1, 2, 10))};
  ExperimentOptions opts;
  opts.train_incidents = {"zz"};
  try {
    experiment(all, {}, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownIncident);
  }
  opts.train_incidents = {"a", "b"};
  try {
    experiment(all, {}, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyTestSet);
  }
}

TEST(Experiment, OutputFormats) {
  std::vector<IncidentSeries> all = {counts_series("a", affine(1, 1, 12)), counts_series("b", affine(3, 1, 12))};
  ExperimentOptions opts;
  opts.train_incidents = {"a"};
  opts.seeds = {1, 2};
  const ExperimentReport r = experiment(all, {}, opts);
  const std::string csv = to_csv(r);
  EXPECT_TRUE(csv.starts_with("kind,mae,mae_sd,rmse,rmse_sd\n"));
  EXPECT_NE(csv.find("\nnlinear,"), std::string::npos);
  EXPECT_NE(to_table(r).find("persistence"), std::string::npos);
  EXPECT_EQ(to_json(r)["rows"].size(), 4u);
  EXPECT_EQ(parse_forecast_kind("dlinear"), ForecastKind::dlinear);
  EXPECT_FALSE(parse_forecast_kind("arima"));
}
