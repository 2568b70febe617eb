#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cbwatch/core.hpp"

namespace cbwatch {

struct Corpus {
  std::vector<Comment> comments;                          // grouped by incident, time-ordered
  std::map<std::string, std::vector<std::string>> incidents;  // incident_id -> comment ids
  std::size_t dropped_duplicates = 0;

  /// Builds from comments: drops repeated ids (first wins), stable-sorts by
  /// (incident_id, timestamp) and fills the incident index.
  static Corpus from_comments(std::vector<Comment> comments);

  const Comment* find(const std::string& id) const;
  std::vector<const Comment*> incident_comments(const std::string& incident_id) const;
  std::size_t size() const { return comments.size(); }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  void reindex();
};

/// Reads a line-delimited corpus; each record goes through validate_comment.
/// Validation failures surface as ParseError with the 1-based line number as
/// subject.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

enum class SynthKind { bullying, normal };

struct SynthProfile {
  SynthKind kind = SynthKind::bullying;
  std::string incident_id = "ev01";
  Genre genre = Genre::society;
  int n_comments = 2425;
  int duration_hours = 48;
  double offensive_proportion = 0.2576;
  int peak_hour = 12;
  double peak_intensity = 0.7;  // offensive / total inside the peak hour
  double peak_share = 0.07;     // offensive in the peak hour / all comments
  int cluster_hours = 5;        // hours forced above 50% offensive (bullying only)
  Timestamp start = 1699999200;  // hour-aligned
  std::uint64_t seed = 0;

  static SynthProfile bullying(std::uint64_t seed);
  static SynthProfile normal(std::uint64_t seed);
};

struct SynthResult {
  Corpus corpus;
  std::map<std::string, Label> gold;
};

/// Deterministic for a fixed profile. Bullying events get a triangular burst
/// of `cluster_hours` hours around `peak_hour`, allocated exactly; the rest of
/// the comments land uniformly at random over the remaining hours. Normal
/// events spread both classes uniformly. Throws InfeasibleProfile.
SynthResult generate_synthetic(const SynthProfile& profile);

struct IncidentStats {
  std::string incident_id;
  std::size_t comments = 0;
  std::size_t offensive = 0;
  double proportion = 0.0;
};

struct StatReport {
  std::size_t total_comments = 0;
  std::size_t offensive_comments = 0;
  double offensive_share = 0.0;
  std::size_t incident_count = 0;
  double avg_text_length = 0.0;  // code points
  double avg_comments_per_incident = 0.0;
  std::vector<IncidentStats> incidents;
};

/// Throws MissingLabel(id) for the first unlabeled comment.
StatReport corpus_stats(const Corpus& corpus, const std::map<std::string, Label>& labels);

json to_json(const StatReport& r);
std::string to_tsv(const StatReport& r);

}  // namespace cbwatch
