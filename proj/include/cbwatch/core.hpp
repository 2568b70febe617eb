#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cbwatch/error.hpp"

namespace cbwatch {

using json = nlohmann::json;

/// UTC seconds since the Unix epoch.
using Timestamp = std::int64_t;

enum class Platform { douyin, weibo, xiaohongshu, bilibili, other };
enum class Genre { business, entertainment, sports, society, politics };

std::string_view to_string(Platform p) noexcept;
std::string_view to_string(Genre g) noexcept;
std::optional<Platform> parse_platform(std::string_view s);
std::optional<Genre> parse_genre(std::string_view s);

inline constexpr std::array<Genre, 5> kAllGenres = {
    Genre::business, Genre::entertainment, Genre::sports, Genre::society, Genre::politics};

struct Comment {
  std::string id;
  std::string incident_id;
  std::string text;
  Timestamp timestamp = 0;
  Platform platform = Platform::other;
  Genre genre = Genre::society;

  friend bool operator==(const Comment&, const Comment&) = default;
};

/// Binary moderation label, serialized as 0/1.
enum class Label : int { non_cyberbullying = 0, cyberbullying = 1 };

inline constexpr int to_int(Label l) noexcept { return static_cast<int>(l); }
inline constexpr Label label_from_bool(bool positive) noexcept {
  return positive ? Label::cyberbullying : Label::non_cyberbullying;
}
Label label_from_int(std::int64_t v);

enum class Method { paraphraser, cot, agent };
std::string_view to_string(Method m) noexcept;

struct Explanation {
  Method method = Method::paraphraser;
  int index = 0;  // CoT template or agent number, 1..5; 0 for the paraphraser
  std::string text;

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

/// Checks the per-method index range and non-empty text.
void validate(const Explanation& e);

struct MethodVote {
  Label label = Label::non_cyberbullying;
  std::vector<Explanation> explanations;  // 1 for para/cot, one per agent for agents
  bool fallback = false;                  // a keyword fallback or an unparseable default was used

  friend bool operator==(const MethodVote&, const MethodVote&) = default;
};

/// Which detection methods produced a PseudoLabel.
enum class LabelMethod { para, cot, agents, ensemble };
std::string_view to_string(LabelMethod m) noexcept;
std::optional<LabelMethod> parse_label_method(std::string_view s);

struct PseudoLabel {
  std::string comment_id;
  LabelMethod method = LabelMethod::ensemble;
  MethodVote para;
  MethodVote cot;
  MethodVote agents;
  std::array<Label, 5> agent_labels{};
  Label ensemble = Label::non_cyberbullying;
  int vote_count = 0;
  bool parse_fallback_used = false;

  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

struct VotingConfig {
  int num_agents = 5;
  int internal_runs = 3;
  int internal_threshold = 2;
  int external_threshold = 3;

  static VotingConfig majority() { return {}; }
  /// 3-of-3 internally and 5-of-5 externally.
  static VotingConfig unanimous() { return {5, 3, 3, 5}; }
  void validate() const;
};

enum class Rule1Denominator {
  total,       // all comments of the incident
  cumulative,  // running total up to and including the bin
  interval,    // the bin's own total
};
std::string_view to_string(Rule1Denominator d) noexcept;
std::optional<Rule1Denominator> parse_rule1_denominator(std::string_view s);

enum class VerdictPolicy { any_rule, all_rules };

struct RuleConfig {
  std::int64_t interval_seconds = 3600;
  double rule1_ratio = 0.05;
  Rule1Denominator rule1_denominator = Rule1Denominator::total;
  double rule2_interval_ratio = 0.5;
  int rule2_min_intervals = 5;
  VerdictPolicy policy = VerdictPolicy::any_rule;

  void validate() const;
};

struct ForecastConfig {
  int window = 5;
  int horizon = 1;
  double ridge_lambda = 1e-6;
  int dlinear_kernel = 3;

  void validate() const;
};

/// Validates one interchange record. Platform and genre are matched
/// case-insensitively; unknown platforms map to `other` with a warning.
Comment validate_comment(const json& raw);

json to_json(const Comment& c);
json to_json(const PseudoLabel& p);
PseudoLabel pseudo_label_from_json(const json& j);

/// Accepts integer seconds, a string of digits, or ISO-8601 with `Z` or a
/// numeric offset. Throws BadTimestamp.
Timestamp parse_timestamp(const json& v);
std::string format_iso8601(Timestamp t);

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s) noexcept;
std::string_view trim(std::string_view s) noexcept;

}  // namespace cbwatch
