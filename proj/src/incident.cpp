#include "cbwatch/incident.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace cbwatch {

std::int64_t IncidentSeries::total() const {
  std::int64_t n = 0;
  for (const auto& b : bins) n += b.total;
  return n;
}

std::vector<double> IncidentSeries::ratios() const {
  std::vector<double> r;
  r.reserve(bins.size());
  for (const auto& b : bins)
    r.push_back(b.total > 0 ? static_cast<double>(b.offensive) / static_cast<double>(b.total) : 0.0);
  return r;
}

std::vector<double> IncidentSeries::offensive_counts() const {
  std::vector<double> v;
  v.reserve(bins.size());
  for (const auto& b : bins) v.push_back(static_cast<double>(b.offensive));
  return v;
}

namespace {

Timestamp floor_to(Timestamp t, std::int64_t step) {
  Timestamp q = t / step;
  if (t % step != 0 && t < 0) --q;
  return q * step;
}

}  // namespace

IncidentSeries build_series(const std::vector<const Comment*>& comments,
                            const std::map<std::string, Label>& labels, const RuleConfig& cfg) {
  cfg.validate();
  if (comments.empty()) throw Error(Errc::EmptyIncident, "incident has no comments");
  IncidentSeries s;
  s.incident_id = comments.front()->incident_id;
  s.interval_seconds = cfg.interval_seconds;
  Timestamp lo = comments.front()->timestamp;
  Timestamp hi = lo;
  for (const Comment* c : comments) {
    if (c->incident_id != s.incident_id)
      throw Error(Errc::InvalidArgument, c->id,
                  fmt::format("comment {} belongs to {}, not {}", c->id, c->incident_id, s.incident_id));
    lo = std::min(lo, c->timestamp);
    hi = std::max(hi, c->timestamp);
  }
  s.start = floor_to(lo, cfg.interval_seconds);
  s.bins.resize(static_cast<std::size_t>((hi - s.start) / cfg.interval_seconds + 1));
  for (const Comment* c : comments) {
    auto it = labels.find(c->id);
    if (it == labels.end()) throw Error(Errc::MissingLabel, c->id, "no label for comment " + c->id);
    Bin& b = s.bins[static_cast<std::size_t>((c->timestamp - s.start) / cfg.interval_seconds)];
    ++b.total;
    if (it->second == Label::cyberbullying) ++b.offensive;
  }
  return s;
}

std::vector<IncidentSeries> build_all_series(const Corpus& corpus, const std::map<std::string, Label>& labels,
                                             const RuleConfig& cfg) {
  std::vector<IncidentSeries> out;
  for (const auto& [id, _] : corpus.incidents) out.push_back(build_series(corpus.incident_comments(id), labels, cfg));
  return out;
}

std::vector<std::size_t> rule1_peak(const IncidentSeries& s, const RuleConfig& cfg) {
  std::vector<std::size_t> hits;
  const std::int64_t grand = s.total();
  std::int64_t running = 0;
  for (std::size_t t = 0; t < s.bins.size(); ++t) {
    const Bin& b = s.bins[t];
    running += b.total;
    std::int64_t denom = 0;
    switch (cfg.rule1_denominator) {
      case Rule1Denominator::total: denom = grand; break;
      case Rule1Denominator::cumulative: denom = running; break;
      case Rule1Denominator::interval: denom = b.total; break;
    }
    if (denom > 0 && static_cast<double>(b.offensive) / static_cast<double>(denom) > cfg.rule1_ratio)
      hits.push_back(t);
  }
  return hits;
}

int rule2_clusters(const IncidentSeries& s, const RuleConfig& cfg) {
  int n = 0;
  for (const Bin& b : s.bins)
    if (b.total > 0 && static_cast<double>(b.offensive) / static_cast<double>(b.total) > cfg.rule2_interval_ratio)
      ++n;
  return n;
}

IncidentVerdict classify(const IncidentSeries& s, const RuleConfig& cfg) {
  IncidentVerdict v;
  v.incident_id = s.incident_id;
  v.rule1_hits = rule1_peak(s, cfg);
  v.rule2_count = rule2_clusters(s, cfg);
  v.rule1_triggered = !v.rule1_hits.empty();
  v.rule2_triggered = v.rule2_count >= cfg.rule2_min_intervals;
  v.verdict = cfg.policy == VerdictPolicy::any_rule ? (v.rule1_triggered || v.rule2_triggered)
                                                    : (v.rule1_triggered && v.rule2_triggered);
  v.ratios = s.ratios();
  return v;
}

std::string trend_export(const IncidentSeries& s) {
  std::string out = "hour,ratio\n";
  const auto r = s.ratios();
  for (std::size_t t = 0; t < r.size(); ++t) out += fmt::format("{},{:.6f}\n", t, r[t]);
  return out;
}

json to_json(const IncidentVerdict& v) {
  return json{{"incident_id", v.incident_id},         {"rule1_hits", v.rule1_hits},
              {"rule2_count", v.rule2_count},         {"rule1_triggered", v.rule1_triggered},
              {"rule2_triggered", v.rule2_triggered}, {"verdict", v.verdict}};
}

json to_json(const IncidentSeries& s) {
  json bins = json::array();
  for (const auto& b : s.bins) bins.push_back({{"total", b.total}, {"offensive", b.offensive}});
  return json{{"incident_id", s.incident_id},
              {"start", s.start},
              {"interval_seconds", s.interval_seconds},
              {"bins", bins},
              {"ratios", s.ratios()}};
}

}  // namespace cbwatch
