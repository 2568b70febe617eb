#include "cbwatch/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "cbwatch/digest.hpp"
#include "cbwatch/jsonl.hpp"
#include "cbwatch/lexicon.hpp"
#include "cbwatch/random.hpp"

namespace cbwatch {

// ---------------------------------------------------------------------------
// Corpus

Corpus Corpus::from_comments(std::vector<Comment> comments) {
  Corpus c;
  std::set<std::string> seen;
  c.comments.reserve(comments.size());
  for (auto& cm : comments) {
    if (!seen.insert(cm.id).second) {
      ++c.dropped_duplicates;
      continue;
    }
    c.comments.push_back(std::move(cm));
  }
  std::stable_sort(c.comments.begin(), c.comments.end(), [](const Comment& a, const Comment& b) {
    if (a.incident_id != b.incident_id) return a.incident_id < b.incident_id;
    return a.timestamp < b.timestamp;
  });
  c.reindex();
  return c;
}

void Corpus::reindex() {
  index_.clear();
  incidents.clear();
  for (std::size_t i = 0; i < comments.size(); ++i) {
    index_.emplace(comments[i].id, i);
    incidents[comments[i].incident_id].push_back(comments[i].id);
  }
}

const Comment* Corpus::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &comments[it->second];
}

std::vector<const Comment*> Corpus::incident_comments(const std::string& incident_id) const {
  std::vector<const Comment*> out;
  auto it = incidents.find(incident_id);
  if (it == incidents.end()) return out;
  out.reserve(it->second.size());
  for (const auto& id : it->second) out.push_back(find(id));
  return out;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::vector<Comment> comments;
  read_jsonl(path, [&](const json& record, std::size_t lineno) {
    try {
      comments.push_back(validate_comment(record));
    } catch (const Error& e) {
      throw Error(Errc::ParseError, std::to_string(lineno),
                  fmt::format("{}:{}: {} ({})", path.string(), lineno, e.what(), errc_name(e.code())));
    }
  });
  return Corpus::from_comments(std::move(comments));
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::vector<json> records;
  records.reserve(corpus.size());
  for (const auto& c : corpus.comments) records.push_back(to_json(c));
  write_jsonl(path, records);
}

// ---------------------------------------------------------------------------
// Synthetic corpora

SynthProfile SynthProfile::bullying(std::uint64_t seed) {
  SynthProfile p;
  p.seed = seed;
  return p;
}

SynthProfile SynthProfile::normal(std::uint64_t seed) {
  SynthProfile p;
  p.kind = SynthKind::normal;
  p.offensive_proportion = 0.0885;
  p.peak_intensity = 0.0;
  p.peak_share = 0.0;
  p.cluster_hours = 0;
  p.seed = seed;
  return p;
}

namespace {

constexpr std::array<std::string_view, 10> kNeutralOpeners = {
    "说实话这件事", "看完视频觉得", "希望相关部门", "路过看看，", "支持一下，",
    "这个事情还是", "等官方通报吧，", "理性讨论，", "刚刷到这条，", "个人感觉",
};
constexpr std::array<std::string_view, 10> kNeutralBodies = {
    "需要更多细节才能判断", "大家都冷静一点", "真相总会水落石出的", "还是要相信法律",
    "评论区好热闹啊", "这届网友真有才", "期待后续进展", "希望当事人一切安好",
    "尽快给出调查结果", "不要被带节奏了",
};
constexpr std::array<std::string_view, 6> kNeutralMiddles = {
    "，说真的", "，就这样吧", "，拭目以待", "，先看看再说", "，理解万岁", "，不多说了",
};
constexpr std::array<std::string_view, 6> kNeutralTails = {
    "。", "！", "～", "，加油", "，点赞", "，关注了",
};
constexpr std::array<std::string_view, 6> kOffensiveLeads = {
    "看完真是气炸了，", "评论区看了一圈，", "我就直说了，", "实在忍不住了，", "说句难听的，", "不想多说，",
};
constexpr std::array<std::string_view, 6> kOffensiveOpeners = {
    "这种人就是", "真是个", "一看就是", "评论区全是", "你就是个", "说到底就是",
};
constexpr std::array<std::string_view, 6> kOffensiveEndings = {
    "，赶紧滚出网络吧", "，真让人看不下去", "，别再出来丢人了", "，活该被骂",
    "，谁给你的脸", "，离远点",
};
// Hostile without any lexicon term; the mock backend misses these.
constexpr std::array<std::string_view, 4> kImplicitOffensive = {
    "这种人就不配上网，全网封杀他吧", "建议把他家地址挂出来让大家评评理",
    "长成这样还敢出来，回家照照镜子吧", "一家子都不是好东西，等着被人肉吧",
};
constexpr double kImplicitShare = 0.05;

template <std::size_t N>
std::string_view pick(Rng& rng, const std::array<std::string_view, N>& arr) {
  return arr[rng.below(N)];
}

std::string neutral_text(Rng& rng) {
  std::string s(pick(rng, kNeutralOpeners));
  s += pick(rng, kNeutralBodies);
  s += pick(rng, kNeutralMiddles);
  s += pick(rng, kNeutralTails);
  return s;
}

std::string offensive_text(Rng& rng) {
  if (rng.uniform() < kImplicitShare) return std::string(pick(rng, kImplicitOffensive));
  std::string s(pick(rng, kOffensiveLeads));
  s += pick(rng, kOffensiveOpeners);
  s += kDefaultOffensiveLexicon[rng.below(kDefaultOffensiveLexicon.size())];
  s += pick(rng, kOffensiveEndings);
  return s;
}

/// Integer apportionment of `total` proportional to `weights` by largest
/// remainder; ties go to the lower index.
std::vector<int> apportion(int total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> out(weights.size(), 0);
  if (total <= 0 || sum <= 0) return out;
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = total * weights[i] / sum;
    out[i] = static_cast<int>(std::floor(exact));
    assigned += out[i];
    rem.emplace_back(exact - out[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (int k = 0; k < total - assigned; ++k) ++out[rem[static_cast<std::size_t>(k)].second];
  return out;
}

[[noreturn]] void infeasible(const std::string& why) {
  throw Error(Errc::InfeasibleProfile, "profile", "infeasible synthetic profile: " + why);
}

struct HourPlan {
  std::vector<int> offensive;
  std::vector<int> normal;
};

HourPlan plan_bullying(const SynthProfile& p, int n_off, int n_norm, Rng& rng) {
  const int hours = p.duration_hours;
  HourPlan plan{std::vector<int>(static_cast<std::size_t>(hours), 0),
                std::vector<int>(static_cast<std::size_t>(hours), 0)};
  const int width = std::max(p.cluster_hours, 1);
  if (width > hours) infeasible("cluster_hours exceeds duration_hours");
  int first = p.peak_hour - (width - 1) / 2;
  first = std::clamp(first, 0, hours - width);

  const int half = (width + 1) / 2;
  std::vector<double> weights;
  for (int h = first; h < first + width; ++h) weights.push_back(half + 1 - std::abs(h - p.peak_hour));
  for (auto& w : weights) w = std::max(w, 1.0);
  const double wmax = *std::max_element(weights.begin(), weights.end());
  const double wmin = *std::min_element(weights.begin(), weights.end());
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);

  const int peak_target = static_cast<int>(std::lround(p.peak_share * p.n_comments));
  int burst_total = static_cast<int>(std::lround(peak_target * wsum / wmax));
  if (p.cluster_hours == 0) burst_total = std::min(burst_total, n_off);
  if (burst_total > n_off) infeasible("burst needs more offensive comments than the proportion allows");
  const auto burst = apportion(burst_total, weights);

  int burst_normal = 0;
  for (int j = 0; j < width; ++j) {
    const auto h = static_cast<std::size_t>(first + j);
    plan.offensive[h] = burst[static_cast<std::size_t>(j)];
    if (p.cluster_hours == 0) continue;
    if (plan.offensive[h] == 0) infeasible("a cluster hour would receive no offensive comments");
    // Interval ratio ramps from just above 50% at the cluster edge to the peak intensity.
    const double edge = 0.5 + (p.peak_intensity - 0.5) / 2;
    const double ratio = wmax == wmin ? p.peak_intensity
                                      : edge + (p.peak_intensity - edge) *
                                                   (weights[static_cast<std::size_t>(j)] - wmin) /
                                                   (wmax - wmin);
    plan.normal[h] = static_cast<int>(std::floor(plan.offensive[h] * (1.0 - ratio) / ratio));
    burst_normal += plan.normal[h];
  }
  if (burst_normal > n_norm) infeasible("not enough non-offensive comments for the cluster hours");

  std::vector<std::size_t> background;
  for (int h = 0; h < hours; ++h)
    if (h < first || h >= first + width) background.push_back(static_cast<std::size_t>(h));
  int rest_off = n_off - burst_total;
  int rest_norm = n_norm - burst_normal;
  if (background.empty()) {
    if (rest_off > 0 || rest_norm > 0) infeasible("no background hours left for remaining comments");
    return plan;
  }
  if (p.cluster_hours == 0) {
    // The lone burst hour carries its share of ordinary traffic too.
    background.push_back(static_cast<std::size_t>(first));
  }
  for (int i = 0; i < rest_off; ++i) ++plan.offensive[background[rng.below(background.size())]];
  for (int i = 0; i < rest_norm; ++i) ++plan.normal[background[rng.below(background.size())]];
  return plan;
}

HourPlan plan_normal(const SynthProfile& p, int n_off, int n_norm, Rng& rng) {
  const auto hours = static_cast<std::size_t>(p.duration_hours);
  HourPlan plan{std::vector<int>(hours, 0), std::vector<int>(hours, 0)};
  for (int i = 0; i < n_off; ++i) ++plan.offensive[rng.below(hours)];
  for (int i = 0; i < n_norm; ++i) ++plan.normal[rng.below(hours)];
  return plan;
}

}  // namespace

SynthResult generate_synthetic(const SynthProfile& p) {
  if (p.n_comments < 1) infeasible("n_comments must be positive");
  if (p.duration_hours < 1) infeasible("duration_hours must be positive");
  if (!(p.offensive_proportion >= 0 && p.offensive_proportion <= 1))
    infeasible("offensive_proportion must lie in [0, 1]");
  if (p.peak_hour < 0 || p.peak_hour >= p.duration_hours)
    infeasible("peak_hour must lie in [0, duration_hours)");
  if (p.cluster_hours < 0) infeasible("cluster_hours must be >= 0");
  if (p.kind == SynthKind::normal && p.cluster_hours > 0)
    infeasible("normal events cannot have cluster hours");
  if (p.kind == SynthKind::bullying && p.cluster_hours > 0 && !(p.peak_intensity > 0.5 && p.peak_intensity <= 1))
    infeasible("cluster hours need peak_intensity in (0.5, 1]");

  const int n_off = static_cast<int>(std::lround(p.n_comments * p.offensive_proportion));
  const int n_norm = p.n_comments - n_off;
  Rng rng(p.seed ^ fnv1a64(p.incident_id));
  const HourPlan plan =
      p.kind == SynthKind::bullying ? plan_bullying(p, n_off, n_norm, rng) : plan_normal(p, n_off, n_norm, rng);

  struct Draft {
    Timestamp ts;
    bool offensive;
  };
  std::vector<Draft> drafts;
  drafts.reserve(static_cast<std::size_t>(p.n_comments));
  for (std::size_t h = 0; h < plan.offensive.size(); ++h) {
    const Timestamp base = p.start + static_cast<Timestamp>(h) * 3600;
    for (int i = 0; i < plan.offensive[h]; ++i)
      drafts.push_back({base + static_cast<Timestamp>(rng.below(3600)), true});
    for (int i = 0; i < plan.normal[h]; ++i)
      drafts.push_back({base + static_cast<Timestamp>(rng.below(3600)), false});
  }
  std::stable_sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) { return a.ts < b.ts; });

  constexpr std::array<Platform, 4> kPlatforms = {Platform::douyin, Platform::weibo,
                                                  Platform::xiaohongshu, Platform::bilibili};
  SynthResult result;
  std::vector<Comment> comments;
  comments.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    Comment c;
    c.id = fmt::format("{}-{:05}", p.incident_id, i + 1);
    c.incident_id = p.incident_id;
    c.timestamp = drafts[i].ts;
    c.platform = kPlatforms[rng.below(kPlatforms.size())];
    c.genre = p.genre;
    c.text = drafts[i].offensive ? offensive_text(rng) : neutral_text(rng);
    result.gold.emplace(c.id, label_from_bool(drafts[i].offensive));
    comments.push_back(std::move(c));
  }
  result.corpus = Corpus::from_comments(std::move(comments));
  return result;
}

// ---------------------------------------------------------------------------
// Statistics

StatReport corpus_stats(const Corpus& corpus, const std::map<std::string, Label>& labels) {
  StatReport r;
  std::size_t chars = 0;
  for (const auto& [iid, ids] : corpus.incidents) {
    IncidentStats s;
    s.incident_id = iid;
    for (const auto& id : ids) {
      auto it = labels.find(id);
      if (it == labels.end()) throw Error(Errc::MissingLabel, id, "no label for comment " + id);
      ++s.comments;
      if (it->second == Label::cyberbullying) ++s.offensive;
      chars += utf8_length(corpus.find(id)->text);
    }
    s.proportion = s.comments ? static_cast<double>(s.offensive) / static_cast<double>(s.comments) : 0.0;
    r.total_comments += s.comments;
    r.offensive_comments += s.offensive;
    r.incidents.push_back(std::move(s));
  }
  r.incident_count = r.incidents.size();
  if (r.total_comments > 0) {
    r.offensive_share = static_cast<double>(r.offensive_comments) / static_cast<double>(r.total_comments);
    r.avg_text_length = static_cast<double>(chars) / static_cast<double>(r.total_comments);
  }
  if (r.incident_count > 0)
    r.avg_comments_per_incident =
        static_cast<double>(r.total_comments) / static_cast<double>(r.incident_count);
  return r;
}

json to_json(const StatReport& r) {
  json incidents = json::array();
  for (const auto& s : r.incidents)
    incidents.push_back({{"incident_id", s.incident_id},
                         {"comments", s.comments},
                         {"offensive", s.offensive},
                         {"proportion", s.proportion}});
  return json{{"total_comments", r.total_comments},
              {"offensive_comments", r.offensive_comments},
              {"offensive_share", r.offensive_share},
              {"incident_count", r.incident_count},
              {"avg_text_length", r.avg_text_length},
              {"avg_comments_per_incident", r.avg_comments_per_incident},
              {"incidents", incidents}};
}

std::string to_tsv(const StatReport& r) {
  std::string out;
  out += fmt::format("total_comments\t{}\n", r.total_comments);
  out += fmt::format("offensive_comments\t{}\n", r.offensive_comments);
  out += fmt::format("offensive_share\t{:.4f}\n", r.offensive_share);
  out += fmt::format("incident_count\t{}\n", r.incident_count);
  out += fmt::format("avg_text_length\t{:.2f}\n", r.avg_text_length);
  out += fmt::format("avg_comments_per_incident\t{:.2f}\n", r.avg_comments_per_incident);
  out += "incident_id\tcomments\toffensive\tproportion\n";
  for (const auto& s : r.incidents)
    out += fmt::format("{}\t{}\t{}\t{:.4f}\n", s.incident_id, s.comments, s.offensive, s.proportion);
  return out;
}

}  // namespace cbwatch
