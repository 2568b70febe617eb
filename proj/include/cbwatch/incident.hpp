#pragma once

#include <map>
#include <string>
#include <vector>

#include "cbwatch/core.hpp"
#include "cbwatch/ingest.hpp"

namespace cbwatch {

struct Bin {
  std::int64_t total = 0;
  std::int64_t offensive = 0;

  friend bool operator==(const Bin&, const Bin&) = default;
};

struct IncidentSeries {
  std::string incident_id;
  Timestamp start = 0;  // aligned to the interval boundary
  std::int64_t interval_seconds = 3600;
  std::vector<Bin> bins;  // gap-free; empty intervals are {0, 0}

  std::int64_t total() const;
  /// offensive / total per bin, 0 for empty bins.
  std::vector<double> ratios() const;
  /// Offensive counts as reals, the forecasting input.
  std::vector<double> offensive_counts() const;
};

struct IncidentVerdict {
  std::string incident_id;
  std::vector<std::size_t> rule1_hits;
  int rule2_count = 0;
  bool rule1_triggered = false;
  bool rule2_triggered = false;
  bool verdict = false;
  std::vector<double> ratios;
};

/// Bins one incident's comments. Every comment needs a label; all must share
/// one incident id. Throws EmptyIncident, MissingLabel, InvalidArgument.
IncidentSeries build_series(const std::vector<const Comment*>& comments,
                            const std::map<std::string, Label>& labels, const RuleConfig& cfg = {});

/// One series per incident in the corpus, ordered by incident id.
std::vector<IncidentSeries> build_all_series(const Corpus& corpus, const std::map<std::string, Label>& labels,
                                             const RuleConfig& cfg = {});

std::vector<std::size_t> rule1_peak(const IncidentSeries& s, const RuleConfig& cfg = {});
int rule2_clusters(const IncidentSeries& s, const RuleConfig& cfg = {});
IncidentVerdict classify(const IncidentSeries& s, const RuleConfig& cfg = {});

/// "hour,ratio" rows with a header line.
std::string trend_export(const IncidentSeries& s);

json to_json(const IncidentVerdict& v);
json to_json(const IncidentSeries& s);

}  // namespace cbwatch
