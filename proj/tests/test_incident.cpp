#include <gtest/gtest.h>

#include "cbwatch/incident.hpp"
#include "cbwatch/ingest.hpp"
#include "cbwatch/random.hpp"
#include "support.hpp"

using namespace cbwatch;

namespace {

constexpr Timestamp kT0 = 1699999200;  // hour-aligned

struct Fixture {
  std::vector<Comment> comments;
  std::map<std::string, Label> labels;

  void add(Timestamp offset, int label) {
    const std::string id = "k" + std::to_string(comments.size());
    comments.push_back(tst::make_comment(id, "文本", kT0 + offset));
    labels[id] = label_from_int(label);
  }
  std::vector<const Comment*> ptrs() const {
    std::vector<const Comment*> out;
    for (const auto& c : comments) out.push_back(&c);
    return out;
  }
};

IncidentSeries series_of(const std::vector<Bin>& bins) {
  IncidentSeries s;
  s.incident_id = "e";
  s.start = kT0;
  s.bins = bins;
  return s;
}

// Integer-only oracles. Ratio thresholds are the defaults: 1/20 and 1/2.
std::vector<std::size_t> rule1_oracle(const std::vector<Bin>& bins, Rule1Denominator d) {
  std::int64_t grand = 0;
  for (const auto& b : bins) grand += b.total;
  std::vector<std::size_t> hits;
  std::int64_t running = 0;
  for (std::size_t t = 0; t < bins.size(); ++t) {
    running += bins[t].total;
    const std::int64_t denom =
        d == Rule1Denominator::total ? grand : d == Rule1Denominator::cumulative ? running : bins[t].total;
    if (denom > 0 && 20 * bins[t].offensive > denom) hits.push_back(t);
  }
  return hits;
}

int rule2_oracle(const std::vector<Bin>& bins) {
  int n = 0;
  for (const auto& b : bins) n += b.total > 0 && 2 * b.offensive > b.total;
  return n;
}

std::vector<Bin> random_bins(Rng& rng) {
  std::vector<Bin> bins(1 + rng.below(30));
  for (auto& b : bins) {
    b.total = static_cast<std::int64_t>(rng.below(rng.below(4) == 0 ? 3 : 120));
    b.offensive = b.total ? static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(b.total) + 1)) : 0;
  }
  return bins;
}

}  // namespace

TEST(BuildSeries, BinsByHourWithGaps) {
  Fixture f;
  f.add(10 * 60, 1);
  f.add(20 * 60, 0);
  f.add(70 * 60, 1);
  const IncidentSeries s = build_series(f.ptrs(), f.labels);
  EXPECT_EQ(s.start, kT0);
  EXPECT_EQ(s.bins, (std::vector<Bin>{{2, 1}, {1, 1}}));
  EXPECT_EQ(s.ratios(), (std::vector<double>{0.5, 1.0}));

  Fixture gap;
  gap.add(5, 1);
  gap.add(3 * 3600 + 5, 0);
  EXPECT_EQ(build_series(gap.ptrs(), gap.labels).bins, (std::vector<Bin>{{1, 1}, {0, 0}, {0, 0}, {1, 0}}));
}

TEST(BuildSeries, StartIsAlignedToTheInterval) {
  Fixture f;
  f.add(1800, 0);
  RuleConfig cfg;
  cfg.interval_seconds = 900;
  const IncidentSeries s = build_series(f.ptrs(), f.labels, cfg);
  EXPECT_EQ(s.start, kT0 + 1800);
  EXPECT_EQ(s.interval_seconds, 900);
}

TEST(BuildSeries, Errors) {
  Fixture f;
  EXPECT_THROW(build_series(f.ptrs(), f.labels), Error);
  f.add(0, 1);
  f.labels.clear();
  try {
    build_series(f.ptrs(), f.labels);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingLabel);
    EXPECT_EQ(e.subject(), "k0");
  }
  Fixture mixed;
  mixed.add(0, 1);
  mixed.add(1, 0);
  mixed.comments[1].incident_id = "other";
  EXPECT_THROW(build_series(mixed.ptrs(), mixed.labels), Error);
}

TEST(BuildSeries, ShuffledInputGivesTheSameSeries) {
  Rng rng(3);
  Fixture f;
  for (int i = 0; i < 300; ++i) f.add(static_cast<Timestamp>(rng.below(20 * 3600)), static_cast<int>(rng.below(2)));
  const IncidentSeries base = build_series(f.ptrs(), f.labels);
  std::int64_t total = 0;
  for (const auto& b : base.bins) total += b.total;
  EXPECT_EQ(total, 300);
  for (int k = 0; k < 5; ++k) {
    auto p = f.ptrs();
    rng.shuffle(p);
    EXPECT_EQ(build_series(p, f.labels).bins, base.bins);
  }
}

TEST(Rule1, CumulativeDenominator) {
  RuleConfig cfg;
  cfg.rule1_denominator = Rule1Denominator::cumulative;
  const auto s = series_of({{100, 0}, {100, 12}});
  EXPECT_EQ(rule1_peak(s, cfg), (std::vector<std::size_t>{1}));  // 12/200 = 0.06
}

TEST(Rule1, TotalDenominatorAndTies) {
  // 5 of 100 is exactly the threshold and is not a hit.
  EXPECT_TRUE(rule1_peak(series_of({{50, 5}, {50, 0}})).empty());
  EXPECT_EQ(rule1_peak(series_of({{50, 6}, {50, 0}})), (std::vector<std::size_t>{0}));
}

TEST(Rule2, CountsBinsAboveHalf) {
  const std::vector<double> ratios = {0.6, 0.55, 0.7, 0.8, 0.51, 0.2};
  std::vector<Bin> bins;
  for (double r : ratios) bins.push_back({100, static_cast<std::int64_t>(r * 100 + 0.5)});
  const auto s = series_of(bins);
  EXPECT_EQ(rule2_clusters(s), 5);
  const IncidentVerdict v = classify(s);
  EXPECT_TRUE(v.rule2_triggered);
  EXPECT_TRUE(v.verdict);
  // exactly one half does not count; empty bins never count
  EXPECT_EQ(rule2_clusters(series_of({{10, 5}, {0, 0}, {3, 2}})), 1);
}

TEST(Classify, SingleBinIncident) {
  const IncidentVerdict v = classify(series_of({{10, 6}}));
  EXPECT_TRUE(v.rule1_triggered);
  EXPECT_FALSE(v.rule2_triggered);
  EXPECT_EQ(v.rule2_count, 1);
  EXPECT_TRUE(v.verdict);
  RuleConfig all;
  all.policy = VerdictPolicy::all_rules;
  EXPECT_FALSE(classify(series_of({{10, 6}}), all).verdict);
}

TEST(Classify, NoOffensiveCommentsMeansNoVerdict) {
  const IncidentVerdict v = classify(series_of({{40, 0}, {0, 0}, {12, 0}}));
  EXPECT_FALSE(v.rule1_triggered);
  EXPECT_EQ(v.rule2_count, 0);
  EXPECT_FALSE(v.verdict);
}

TEST(Classify, RandomSeriesAgainstIntegerOracle) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto bins = random_bins(rng);
    const auto s = series_of(bins);
    for (auto d : {Rule1Denominator::total, Rule1Denominator::cumulative, Rule1Denominator::interval}) {
      RuleConfig cfg;
      cfg.rule1_denominator = d;
      ASSERT_EQ(rule1_peak(s, cfg), rule1_oracle(bins, d)) << i;
    }
    const int r2 = rule2_oracle(bins);
    ASSERT_EQ(rule2_clusters(s), r2);
    const bool r1 = !rule1_oracle(bins, Rule1Denominator::total).empty();
    ASSERT_EQ(classify(s).verdict, r1 || r2 >= 5);
    RuleConfig all;
    all.policy = VerdictPolicy::all_rules;
    ASSERT_EQ(classify(s, all).verdict, r1 && r2 >= 5);
  }
}

TEST(Classify, MoreOffensiveCommentsNeverClearAVerdict) {
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    auto bins = random_bins(rng);
    const bool before = classify(series_of(bins)).verdict;
    const std::size_t t = rng.below(bins.size());
    if (bins[t].offensive < bins[t].total) ++bins[t].offensive;
    // The grand total is unchanged, so rule 1 cannot lose a hit either.
    if (before) ASSERT_TRUE(classify(series_of(bins)).verdict) << i;
  }
}

TEST(TrendExport, HourRatioRows) {
  const std::string csv = trend_export(series_of({{4, 1}, {0, 0}, {3, 3}}));
  EXPECT_EQ(csv, "hour,ratio\n0,0.250000\n1,0.000000\n2,1.000000\n");
}

TEST(IncidentJson, Fields) {
  const auto s = series_of({{4, 1}});
  const json j = to_json(classify(s));
  for (const char* k : {"incident_id", "rule1_hits", "rule2_count", "rule1_triggered", "rule2_triggered", "verdict"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(to_json(s)["bins"][0]["offensive"], 1);
}

TEST(Synthetic, BullyingAndNormalProfilesWithGoldLabels) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto bully = generate_synthetic(SynthProfile::bullying(seed));
    const auto calm = generate_synthetic(SynthProfile::normal(seed));
    const auto b = build_all_series(bully.corpus, bully.gold);
    const auto n = build_all_series(calm.corpus, calm.gold);
    ASSERT_EQ(b.size(), 1u);
    ASSERT_EQ(n.size(), 1u);
    EXPECT_TRUE(classify(b[0]).verdict) << seed;
    EXPECT_FALSE(classify(n[0]).verdict) << seed;
    EXPECT_TRUE(classify(b[0]).rule2_triggered);
  }
}
