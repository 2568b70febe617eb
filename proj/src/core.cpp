#include "cbwatch/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace cbwatch {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingField: return "MissingField";
    case Errc::EmptyText: return "EmptyText";
    case Errc::BadTimestamp: return "BadTimestamp";
    case Errc::UnknownEnum: return "UnknownEnum";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
    case Errc::InfeasibleProfile: return "InfeasibleProfile";
    case Errc::MissingLabel: return "MissingLabel";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Timeout: return "Timeout";
    case Errc::HttpStatus: return "HttpStatus";
    case Errc::BackendUnreachable: return "BackendUnreachable";
    case Errc::RateLimited: return "RateLimited";
    case Errc::Unparseable: return "Unparseable";
    case Errc::CorpusTooSmall: return "CorpusTooSmall";
    case Errc::AnnotatorFlagged: return "AnnotatorFlagged";
    case Errc::UnknownAnnotator: return "UnknownAnnotator";
    case Errc::DuplicateSubmission: return "DuplicateSubmission";
    case Errc::NotAssigned: return "NotAssigned";
    case Errc::NotEnoughResolved: return "NotEnoughResolved";
    case Errc::UnresolvedRemaining: return "UnresolvedRemaining";
    case Errc::CorruptLog: return "CorruptLog";
    case Errc::EmptyIncident: return "EmptyIncident";
    case Errc::UnknownIncident: return "UnknownIncident";
    case Errc::SeriesTooShort: return "SeriesTooShort";
    case Errc::EmptyTrainSet: return "EmptyTrainSet";
    case Errc::EmptyTestSet: return "EmptyTestSet";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyEvaluation: return "EmptyEvaluation";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::Empty: return "Empty";
    case Errc::RowSumMismatch: return "RowSumMismatch";
    case Errc::TooFewRaters: return "TooFewRaters";
  }
  return "Unknown";
}

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return true;
}

std::optional<Timestamp> parse_iso8601(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS[.fff](Z|+HH:MM|-HH:MM)
  int y, mo, d, h, mi, sec;
  if (!read_int(s, 0, 4, y) || s.size() < 19 || s[4] != '-' || !read_int(s, 5, 2, mo) ||
      s[7] != '-' || !read_int(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') ||
      !read_int(s, 11, 2, h) || s[13] != ':' || !read_int(s, 14, 2, mi) || s[16] != ':' ||
      !read_int(s, 17, 2, sec))
    return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  std::int64_t offset = 0;
  if (pos == s.size()) return std::nullopt;  // a zone is required
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int oh, om;
    const int sign = s[pos] == '-' ? -1 : 1;
    if (!read_int(s, pos + 1, 2, oh)) return std::nullopt;
    std::size_t mpos = pos + 3;
    if (mpos < s.size() && s[mpos] == ':') ++mpos;
    if (!read_int(s, mpos, 2, om)) return std::nullopt;
    offset = sign * (oh * 3600 + om * 60);
    pos = mpos + 2;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;
  const std::int64_t days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return days * 86400 + h * 3600 + mi * 60 + sec - offset;
}

const std::string& require_string(const json& raw, const char* field) {
  auto it = raw.find(field);
  if (it == raw.end() || it->is_null())
    throw Error(Errc::MissingField, field, fmt::format("missing field '{}'", field));
  if (!it->is_string())
    throw Error(Errc::MissingField, field, fmt::format("field '{}' must be a string", field));
  return it->get_ref<const std::string&>();
}

}  // namespace

std::string_view to_string(Platform p) noexcept {
  switch (p) {
    case Platform::douyin: return "douyin";
    case Platform::weibo: return "weibo";
    case Platform::xiaohongshu: return "xiaohongshu";
    case Platform::bilibili: return "bilibili";
    case Platform::other: return "other";
  }
  return "other";
}

std::string_view to_string(Genre g) noexcept {
  switch (g) {
    case Genre::business: return "business";
    case Genre::entertainment: return "entertainment";
    case Genre::sports: return "sports";
    case Genre::society: return "society";
    case Genre::politics: return "politics";
  }
  return "society";
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::paraphraser: return "paraphraser";
    case Method::cot: return "cot";
    case Method::agent: return "agent";
  }
  return "paraphraser";
}

std::optional<Platform> parse_platform(std::string_view s) {
  const std::string l = lower_ascii(trim(s));
  for (auto p : {Platform::douyin, Platform::weibo, Platform::xiaohongshu, Platform::bilibili,
                 Platform::other})
    if (l == to_string(p)) return p;
  return std::nullopt;
}

std::optional<Genre> parse_genre(std::string_view s) {
  const std::string l = lower_ascii(trim(s));
  for (auto g : kAllGenres)
    if (l == to_string(g)) return g;
  return std::nullopt;
}

Label label_from_int(std::int64_t v) {
  if (v == 0) return Label::non_cyberbullying;
  if (v == 1) return Label::cyberbullying;
  throw Error(Errc::InvalidArgument, "label", fmt::format("label must be 0 or 1, got {}", v));
}

std::string_view to_string(Rule1Denominator d) noexcept {
  switch (d) {
    case Rule1Denominator::total: return "total";
    case Rule1Denominator::cumulative: return "cumulative";
    case Rule1Denominator::interval: return "interval";
  }
  return "total";
}

std::optional<Rule1Denominator> parse_rule1_denominator(std::string_view s) {
  for (auto d : {Rule1Denominator::total, Rule1Denominator::cumulative, Rule1Denominator::interval})
    if (s == to_string(d)) return d;
  return std::nullopt;
}

void validate(const Explanation& e) {
  if (trim(e.text).empty()) throw Error(Errc::EmptyText, "explanation", "empty explanation text");
  const bool ok = e.method == Method::paraphraser ? e.index == 0 : (e.index >= 1 && e.index <= 5);
  if (!ok)
    throw Error(Errc::InvalidArgument, "index",
                fmt::format("index {} out of range for method {}", e.index, to_string(e.method)));
}

void VotingConfig::validate() const {
  if (num_agents < 1 || internal_runs < 1)
    throw Error(Errc::InvalidArgument, "voting", "num_agents and internal_runs must be positive");
  if (2 * internal_threshold <= internal_runs || internal_threshold > internal_runs)
    throw Error(Errc::InvalidArgument, "internal_threshold",
                "internal_threshold must be a majority of internal_runs");
  if (2 * external_threshold <= num_agents || external_threshold > num_agents)
    throw Error(Errc::InvalidArgument, "external_threshold",
                "external_threshold must be a majority of num_agents");
}

void RuleConfig::validate() const {
  if (interval_seconds <= 0) throw Error(Errc::InvalidArgument, "interval", "interval must be > 0");
  if (!(rule1_ratio > 0 && rule1_ratio < 1))
    throw Error(Errc::InvalidArgument, "rule1_ratio", "rule1_ratio must lie in (0, 1)");
  if (!(rule2_interval_ratio > 0 && rule2_interval_ratio < 1))
    throw Error(Errc::InvalidArgument, "rule2_interval_ratio",
                "rule2_interval_ratio must lie in (0, 1)");
  if (rule2_min_intervals < 1)
    throw Error(Errc::InvalidArgument, "rule2_min_intervals", "rule2_min_intervals must be >= 1");
}

void ForecastConfig::validate() const {
  if (window < 1) throw Error(Errc::InvalidArgument, "window", "window must be >= 1");
  if (horizon != 1) throw Error(Errc::InvalidArgument, "horizon", "only horizon 1 is supported");
  if (dlinear_kernel < 1 || dlinear_kernel % 2 == 0)
    throw Error(Errc::InvalidArgument, "dlinear_kernel", "dlinear_kernel must be odd and >= 1");
  if (!(ridge_lambda > 0))
    throw Error(Errc::InvalidArgument, "ridge_lambda", "ridge_lambda must be > 0");
}

Timestamp parse_timestamp(const json& v) {
  std::optional<Timestamp> t;
  if (v.is_number_integer()) {
    t = v.get<std::int64_t>();
  } else if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == static_cast<double>(static_cast<std::int64_t>(d))) t = static_cast<std::int64_t>(d);
  } else if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    std::int64_t n = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc() && p == s.data() + s.size() && !s.empty())
      t = n;
    else
      t = parse_iso8601(s);
  }
  if (!t || *t <= 0)
    throw Error(Errc::BadTimestamp, "timestamp", fmt::format("bad timestamp {}", v.dump()));
  return *t;
}

std::string format_iso8601(Timestamp t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", y, m, d, rem / 3600, rem % 3600 / 60,
                     rem % 60);
}

std::size_t utf8_length(std::string_view s) noexcept {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

std::string_view trim(std::string_view s) noexcept {
  auto ws = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!s.empty() && ws(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  // U+3000 ideographic space is common in Chinese text
  constexpr std::string_view kIdeo = "\xE3\x80\x80";
  bool changed = true;
  while (changed) {
    changed = false;
    if (s.starts_with(kIdeo)) { s.remove_prefix(3); changed = true; }
    if (s.ends_with(kIdeo)) { s.remove_suffix(3); changed = true; }
    while (!s.empty() && ws(static_cast<unsigned char>(s.front()))) { s.remove_prefix(1); changed = true; }
    while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) { s.remove_suffix(1); changed = true; }
  }
  return s;
}

Comment validate_comment(const json& raw) {
  if (!raw.is_object()) throw Error(Errc::MissingField, "record", "record is not an object");
  Comment c;
  c.id = require_string(raw, "id");
  if (trim(c.id).empty()) throw Error(Errc::MissingField, "id", "empty id");
  c.incident_id = require_string(raw, "incident_id");
  if (trim(c.incident_id).empty()) throw Error(Errc::MissingField, "incident_id", "empty incident_id");
  c.text = require_string(raw, "text");
  if (trim(c.text).empty()) throw Error(Errc::EmptyText, "text", "text is empty after trimming");

  auto ts = raw.find("timestamp");
  if (ts == raw.end() || ts->is_null())
    throw Error(Errc::MissingField, "timestamp", "missing field 'timestamp'");
  c.timestamp = parse_timestamp(*ts);

  const std::string& platform = require_string(raw, "platform");
  if (auto p = parse_platform(platform)) {
    c.platform = *p;
  } else {
    spdlog::warn("comment {}: unknown platform '{}', using 'other'", c.id, platform);
    c.platform = Platform::other;
  }
  const std::string& genre = require_string(raw, "genre");
  auto g = parse_genre(genre);
  if (!g) throw Error(Errc::UnknownEnum, "genre", fmt::format("unknown genre '{}'", genre));
  c.genre = *g;
  return c;
}

json to_json(const Comment& c) {
  return json{{"id", c.id},
              {"incident_id", c.incident_id},
              {"text", c.text},
              {"timestamp", c.timestamp},
              {"platform", to_string(c.platform)},
              {"genre", to_string(c.genre)}};
}

namespace {

json explanation_texts(const MethodVote& v) {
  json arr = json::array();
  for (const auto& e : v.explanations) arr.push_back(e.text);
  return arr;
}

}  // namespace

std::string_view to_string(LabelMethod m) noexcept {
  switch (m) {
    case LabelMethod::para: return "para";
    case LabelMethod::cot: return "cot";
    case LabelMethod::agents: return "agents";
    case LabelMethod::ensemble: return "ensemble";
  }
  return "ensemble";
}

std::optional<LabelMethod> parse_label_method(std::string_view s) {
  for (auto m : {LabelMethod::para, LabelMethod::cot, LabelMethod::agents, LabelMethod::ensemble})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

json to_json(const PseudoLabel& p) {
  json agents_labels = json::array();
  for (auto l : p.agent_labels) agents_labels.push_back(to_int(l));
  const int cot_template = p.cot.explanations.empty() ? 0 : p.cot.explanations.front().index;
  json j{
      {"comment_id", p.comment_id},
      {"method", to_string(p.method)},
      {"para",
       {{"label", to_int(p.para.label)},
        {"explanation", p.para.explanations.empty() ? "" : p.para.explanations.front().text},
        {"fallback", p.para.fallback}}},
      {"cot",
       {{"label", to_int(p.cot.label)},
        {"explanation", p.cot.explanations.empty() ? "" : p.cot.explanations.front().text},
        {"template", cot_template},
        {"fallback", p.cot.fallback}}},
      {"agents",
       {{"label", to_int(p.agents.label)},
        {"explanations", explanation_texts(p.agents)},
        {"agent_labels", agents_labels},
        {"fallback", p.agents.fallback}}},
      {"ensemble", to_int(p.ensemble)},
      {"vote_count", p.vote_count},
      {"fallback", p.parse_fallback_used},
  };
  if (p.method == LabelMethod::para || p.method == LabelMethod::agents) j.erase("cot");
  if (p.method == LabelMethod::cot || p.method == LabelMethod::agents) j.erase("para");
  if (p.method == LabelMethod::para || p.method == LabelMethod::cot) j.erase("agents");
  return j;
}

PseudoLabel pseudo_label_from_json(const json& j) {
  try {
    PseudoLabel p;
    p.comment_id = j.at("comment_id").get<std::string>();
    const auto method = parse_label_method(j.value("method", std::string("ensemble")));
    if (!method) throw Error(Errc::ParseError, "method", "unknown labeling method");
    p.method = *method;
    p.ensemble = label_from_int(j.at("ensemble").get<int>());
    p.vote_count = j.at("vote_count").get<int>();
    p.parse_fallback_used = j.value("fallback", false);
    if (j.contains("para")) {
      const auto& para = j.at("para");
      p.para.label = label_from_int(para.at("label").get<int>());
      p.para.explanations.push_back({Method::paraphraser, 0, para.at("explanation").get<std::string>()});
      p.para.fallback = para.value("fallback", false);
    }
    if (j.contains("cot")) {
      const auto& cot = j.at("cot");
      p.cot.label = label_from_int(cot.at("label").get<int>());
      p.cot.explanations.push_back(
          {Method::cot, cot.value("template", 0), cot.at("explanation").get<std::string>()});
      p.cot.fallback = cot.value("fallback", false);
    }
    if (j.contains("agents")) {
      const auto& agents = j.at("agents");
      p.agents.label = label_from_int(agents.at("label").get<int>());
      p.agents.fallback = agents.value("fallback", false);
      int idx = 1;
      for (const auto& e : agents.at("explanations"))
        p.agents.explanations.push_back({Method::agent, idx++, e.get<std::string>()});
      if (auto it = agents.find("agent_labels"); it != agents.end()) {
        std::size_t i = 0;
        for (const auto& l : *it)
          if (i < p.agent_labels.size()) p.agent_labels[i++] = label_from_int(l.get<int>());
      }
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, "pseudo_label", fmt::format("bad pseudo-label record: {}", e.what()));
  }
}

}  // namespace cbwatch
