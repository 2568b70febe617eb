#include "cbwatch/labeler.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <variant>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cbwatch/digest.hpp"
#include "cbwatch/jsonl.hpp"

namespace cbwatch {

// ---------------------------------------------------------------------------
// Reply parsing

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
}

// Lowercased label line with decoration (quotes, brackets, emphasis, final
// full stop) removed and full-width colons folded.
std::string normalize_marker(std::string_view line) {
  std::string s(line);
  replace_all(s, "：", ":");
  for (std::string_view q : {"“", "”", "‘", "’", "。", "「", "」"}) replace_all(s, q, "");
  std::string out;
  for (char c : s)
    if (std::string_view("*\"'[]()`").find(c) == std::string_view::npos) out += c;
  out = lower_ascii(trim(out));
  while (!out.empty() && (out.back() == '.' || out.back() == '!')) out.pop_back();
  return std::string(trim(out));
}

std::optional<Label> marker_value(std::string_view v) {
  v = trim(v);
  if (v == "1" || v == "cyberbullying") return Label::cyberbullying;
  if (v == "0" || v == "non-cyberbullying" || v == "non cyberbullying" || v == "noncyberbullying" ||
      v == "not cyberbullying")
    return Label::non_cyberbullying;
  return std::nullopt;
}

std::optional<Label> parse_marker_line(std::string_view line) {
  const std::string s = normalize_marker(line);
  std::string_view rest = s;
  if (rest.starts_with("final ")) rest.remove_prefix(6);
  if (rest.starts_with("label")) {
    rest.remove_prefix(5);
    rest = trim(rest);
    if (!rest.starts_with(':')) return std::nullopt;
    rest.remove_prefix(1);
    return marker_value(rest);
  }
  // A bare word line; a bare digit is too weak a signal.
  if (s == "0" || s == "1") return std::nullopt;
  return marker_value(s);
}

struct Keyword {
  std::string_view text;
  Label label;
};

constexpr Keyword kKeywords[] = {
    {"label: 1", Label::cyberbullying},
    {"label:1", Label::cyberbullying},
    {"label: 0", Label::non_cyberbullying},
    {"label:0", Label::non_cyberbullying},
    {"cyberbullying", Label::cyberbullying},
    {"bullying", Label::cyberbullying},
    {"non-cyberbullying", Label::non_cyberbullying},
    {"non cyberbullying", Label::non_cyberbullying},
    {"not cyberbullying", Label::non_cyberbullying},
    {"not bullying", Label::non_cyberbullying},
    {"网络欺凌", Label::cyberbullying},
    {"网络暴力", Label::cyberbullying},
    {"不属于网络欺凌", Label::non_cyberbullying},
    {"不是网络欺凌", Label::non_cyberbullying},
    {"不构成网络欺凌", Label::non_cyberbullying},
    {"非网络欺凌", Label::non_cyberbullying},
    {"不属于网络暴力", Label::non_cyberbullying},
};

// Last `n` code points of a UTF-8 string.
std::string_view utf8_tail(std::string_view s, std::size_t n) {
  std::size_t count = 0;
  std::size_t pos = s.size();
  while (pos > 0 && count < n) {
    --pos;
    if ((static_cast<unsigned char>(s[pos]) & 0xC0) != 0x80) ++count;
  }
  return s.substr(pos);
}

std::optional<Label> keyword_scan(std::string_view reply) {
  const std::string tail = lower_ascii(utf8_tail(reply, 200));
  std::size_t best_end = 0;
  std::size_t best_len = 0;
  std::optional<Label> best;
  for (const auto& kw : kKeywords) {
    for (auto pos = tail.find(kw.text); pos != std::string::npos; pos = tail.find(kw.text, pos + 1)) {
      const std::size_t end = pos + kw.text.size();
      if (!best || end > best_end || (end == best_end && kw.text.size() > best_len)) {
        best = kw.label;
        best_end = end;
        best_len = kw.text.size();
      }
    }
  }
  return best;
}

}  // namespace

ParsedReply parse_reply(std::string_view reply) {
  const std::string_view body = trim(reply);
  if (body.empty()) throw Error(Errc::Unparseable, "reply", "empty model reply");

  const auto nl = body.rfind('\n');
  const std::string_view last_line = nl == std::string_view::npos ? body : body.substr(nl + 1);
  if (auto label = parse_marker_line(last_line)) {
    const std::string_view rest = nl == std::string_view::npos ? std::string_view{} : body.substr(0, nl);
    return {*label, std::string(trim(rest)), false};
  }
  if (auto label = keyword_scan(body)) return {*label, std::string(body), true};
  throw Error(Errc::Unparseable, "reply", "no label found in model reply");
}

// ---------------------------------------------------------------------------
// Prompts

ChatRequest paraphraser_request(const Comment& c, const PromptLibrary& lib, const LabelerConfig& cfg) {
  ChatRequest req;
  req.system = lib.paraphraser_instruction;
  if (!lib.reply_format.empty()) req.system += "\n" + lib.reply_format;
  for (const auto& shot : lib.few_shot) {
    req.messages.push_back({ChatRole::user, "Comment: " + shot.comment});
    req.messages.push_back({ChatRole::assistant, shot.reply});
  }
  req.messages.push_back({ChatRole::user, "Comment: " + c.text});
  req.temperature = cfg.temperature;
  req.max_tokens = cfg.max_tokens;
  return req;
}

ChatRequest template_request(const std::string& tmpl, const Comment& c, const PromptLibrary& lib,
                             double temperature, int max_tokens) {
  ChatRequest req;
  std::string content = tmpl + "\n\nComment: " + c.text;
  if (!lib.reply_format.empty()) content += "\n\n" + lib.reply_format;
  req.messages.push_back({ChatRole::user, std::move(content)});
  req.temperature = temperature;
  req.max_tokens = max_tokens;
  return req;
}

namespace {

constexpr std::string_view kUnparseable = "unparseable model reply";

// One chat call plus parsing; an unparseable reply is retried once.
Detection ask(ChatClient& client, const ChatRequest& req, Method method, int index) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      ParsedReply parsed = parse_reply(client.chat(req));
      std::string text = parsed.explanation.empty() ? std::string("(no explanation given)") : parsed.explanation;
      return {parsed.label, {method, index, std::move(text)}, parsed.fallback_used};
    } catch (const Error& e) {
      if (e.code() != Errc::Unparseable) throw;
    }
  }
  return {Label::non_cyberbullying, {method, index, std::string(kUnparseable)}, true};
}

int count_positive(std::span<const Label> labels) {
  return static_cast<int>(std::count(labels.begin(), labels.end(), Label::cyberbullying));
}

}  // namespace

Detection paraphrase_detect(const Comment& c, const PromptLibrary& lib, ChatClient& client,
                            const LabelerConfig& cfg) {
  return ask(client, paraphraser_request(c, lib, cfg), Method::paraphraser, 0);
}

int default_cot_template(const std::string& comment_id) {
  return static_cast<int>(fnv1a32(comment_id) % 5u) + 1;
}

Detection cot_detect(const Comment& c, int template_index, const PromptLibrary& lib, ChatClient& client,
                     const LabelerConfig& cfg) {
  if (template_index < 1 || template_index > 5)
    throw Error(Errc::InvalidArgument, "template_index",
                fmt::format("CoT template index must be 1..5, got {}", template_index));
  const auto& tmpl = lib.cot_templates[static_cast<std::size_t>(template_index - 1)];
  return ask(client, template_request(tmpl, c, lib, cfg.temperature, cfg.max_tokens), Method::cot,
             template_index);
}

Label internal_vote(std::span<const Label> run_labels, const VotingConfig& cfg) {
  if (static_cast<int>(run_labels.size()) != cfg.internal_runs)
    throw Error(Errc::InvalidArgument, "run_labels",
                fmt::format("expected {} run labels, got {}", cfg.internal_runs, run_labels.size()));
  return label_from_bool(count_positive(run_labels) >= cfg.internal_threshold);
}

Label external_vote(std::span<const Label> agent_labels, const VotingConfig& cfg) {
  if (static_cast<int>(agent_labels.size()) != cfg.num_agents)
    throw Error(Errc::InvalidArgument, "agent_labels",
                fmt::format("expected {} agent labels, got {}", cfg.num_agents, agent_labels.size()));
  return label_from_bool(count_positive(agent_labels) >= cfg.external_threshold);
}

MultiAgentResult multi_agent_detect(const Comment& c, const PromptLibrary& lib, ChatClient& client,
                                    const LabelerConfig& cfg) {
  const auto& voting = cfg.voting;
  if (voting.num_agents > static_cast<int>(lib.agent_templates.size()))
    throw Error(Errc::InvalidArgument, "num_agents", "more agents than agent templates");
  MultiAgentResult result;
  for (int agent = 1; agent <= voting.num_agents; ++agent) {
    const auto& tmpl = lib.agent_templates[static_cast<std::size_t>(agent - 1)];
    const ChatRequest req = template_request(tmpl, c, lib, cfg.agent_temperature, cfg.max_tokens);
    std::vector<Label> runs;
    std::optional<Explanation> explanation;
    int unparseable = 0;
    for (int run = 0; run < voting.internal_runs; ++run) {
      try {
        ParsedReply parsed = parse_reply(client.chat(req));
        runs.push_back(parsed.label);
        if (parsed.fallback_used) result.fallback = true;
        if (!explanation)
          explanation = Explanation{Method::agent, agent,
                                    parsed.explanation.empty() ? "(no explanation given)" : parsed.explanation};
      } catch (const Error& e) {
        if (e.code() != Errc::Unparseable) throw;
        runs.push_back(Label::non_cyberbullying);
        ++unparseable;
        result.fallback = true;
      }
    }
    const bool flagged = unparseable == voting.internal_runs;
    if (flagged) spdlog::warn("comment {}: agent {} gave no parseable reply", c.id, agent);
    result.agent_labels.push_back(flagged ? Label::non_cyberbullying : internal_vote(runs, voting));
    result.agent_flagged.push_back(flagged);
    result.explanations.push_back(explanation.value_or(Explanation{Method::agent, agent, std::string(kUnparseable)}));
  }
  result.label = external_vote(result.agent_labels, voting);
  return result;
}

Label combine_votes(Label para, Label cot, Label agents, EnsemblePolicy policy) {
  const int votes = to_int(para) + to_int(cot) + to_int(agents);
  return label_from_bool(policy == EnsemblePolicy::majority ? votes >= 2 : votes >= 1);
}

namespace {

MethodVote cot_vote(const Comment& c, const PromptLibrary& lib, ChatClient& client, const LabelerConfig& cfg) {
  if (!cfg.all_templates) {
    Detection d = cot_detect(c, default_cot_template(c.id), lib, client, cfg);
    return {d.label, {std::move(d.explanation)}, d.fallback};
  }
  std::vector<Detection> all;
  for (int t = 1; t <= 5; ++t) all.push_back(cot_detect(c, t, lib, client, cfg));
  const int positives = static_cast<int>(
      std::count_if(all.begin(), all.end(), [](const Detection& d) { return d.label == Label::cyberbullying; }));
  const Label label = label_from_bool(positives >= 3);
  const auto agreeing = std::find_if(all.begin(), all.end(), [&](const Detection& d) { return d.label == label; });
  const bool fallback = std::any_of(all.begin(), all.end(), [](const Detection& d) { return d.fallback; });
  return {label, {agreeing->explanation}, fallback};
}

}  // namespace

PseudoLabel label_comment(const Comment& c, const PromptLibrary& lib, ChatClient& client,
                          const LabelerConfig& cfg, LabelMethod method) {
  PseudoLabel p;
  p.comment_id = c.id;
  p.method = method;
  const bool all = method == LabelMethod::ensemble;
  if (all || method == LabelMethod::para) {
    Detection d = paraphrase_detect(c, lib, client, cfg);
    p.para = {d.label, {std::move(d.explanation)}, d.fallback};
  }
  if (all || method == LabelMethod::cot) p.cot = cot_vote(c, lib, client, cfg);
  if (all || method == LabelMethod::agents) {
    MultiAgentResult m = multi_agent_detect(c, lib, client, cfg);
    p.agents = {m.label, std::move(m.explanations), m.fallback};
    for (std::size_t i = 0; i < p.agent_labels.size() && i < m.agent_labels.size(); ++i)
      p.agent_labels[i] = m.agent_labels[i];
  }
  switch (method) {
    case LabelMethod::ensemble:
      p.vote_count = to_int(p.para.label) + to_int(p.cot.label) + to_int(p.agents.label);
      p.ensemble = combine_votes(p.para.label, p.cot.label, p.agents.label, cfg.policy);
      break;
    case LabelMethod::para: p.ensemble = p.para.label; break;
    case LabelMethod::cot: p.ensemble = p.cot.label; break;
    case LabelMethod::agents: p.ensemble = p.agents.label; break;
  }
  if (method != LabelMethod::ensemble) p.vote_count = to_int(p.ensemble);
  p.parse_fallback_used = p.para.fallback || p.cot.fallback || p.agents.fallback;
  return p;
}

PseudoLabel ensemble_label(const Comment& c, const PromptLibrary& lib, ChatClient& client,
                           const LabelerConfig& cfg) {
  return label_comment(c, lib, client, cfg, LabelMethod::ensemble);
}

int chat_calls_per_comment(const LabelerConfig& cfg, LabelMethod method) {
  const int para = 1;
  const int cot = cfg.all_templates ? 5 : 1;
  const int agents = cfg.voting.num_agents * cfg.voting.internal_runs;
  switch (method) {
    case LabelMethod::para: return para;
    case LabelMethod::cot: return cot;
    case LabelMethod::agents: return agents;
    case LabelMethod::ensemble: break;
  }
  return para + cot + agents;
}

// ---------------------------------------------------------------------------
// Batch labeling

namespace {

class CountingClient final : public ChatClient {
 public:
  explicit CountingClient(ChatClient& inner) : inner_(inner) {}
  std::string chat(const ChatRequest& req) override {
    ++calls_;
    return inner_.chat(req);
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  ChatClient& inner_;
  std::atomic<std::size_t> calls_{0};
};

std::map<std::string, std::string> read_journal(const std::filesystem::path& path) {
  std::map<std::string, std::string> status;
  if (path.empty() || !std::filesystem::exists(path)) return status;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      status[j.at("comment_id").get<std::string>()] = j.at("status").get<std::string>();
    } catch (const json::exception&) {
      // a torn final line from an interrupted run
      spdlog::warn("ignoring malformed journal line in {}", path.string());
    }
  }
  return status;
}

}  // namespace

LabelRunReport label_corpus(const Corpus& corpus, const PromptLibrary& lib, ChatClient& client,
                            const LabelerConfig& cfg, const LabelRunOptions& opts) {
  cfg.voting.validate();
  LabelRunReport report;
  const auto status = read_journal(opts.journal);
  std::set<std::string> done;
  for (const auto& [id, st] : status)
    if (st == "done") done.insert(id);

  // Keep only output lines the journal vouches for.
  if (!opts.output.empty() && std::filesystem::exists(opts.output)) {
    std::vector<json> kept;
    bool dropped = false;
    read_jsonl(opts.output, [&](const json& r, std::size_t) {
      if (done.count(r.value("comment_id", std::string{})))
        kept.push_back(r);
      else
        dropped = true;
    });
    if (dropped) write_jsonl(opts.output, kept);
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < corpus.comments.size(); ++i) {
    if (done.count(corpus.comments[i].id))
      ++report.resumed;
    else
      todo.push_back(i);
  }
  if (opts.limit && todo.size() > *opts.limit) todo.resize(*opts.limit);

  std::ofstream out;
  std::ofstream journal;
  if (!opts.output.empty()) {
    if (opts.output.has_parent_path()) std::filesystem::create_directories(opts.output.parent_path());
    out.open(opts.output, std::ios::app);
    if (!out) throw Error(Errc::IoError, opts.output.string(), "cannot open " + opts.output.string());
  }
  if (!opts.journal.empty()) {
    if (opts.journal.has_parent_path()) std::filesystem::create_directories(opts.journal.parent_path());
    journal.open(opts.journal, std::ios::app);
    if (!journal) throw Error(Errc::IoError, opts.journal.string(), "cannot open " + opts.journal.string());
  }

  CountingClient counting(client);
  using Outcome = std::variant<std::monostate, PseudoLabel, std::string>;
  std::vector<Outcome> slots(todo.size());
  std::vector<std::size_t> retry;
  std::mutex mu;
  std::size_t cursor = 0;
  std::atomic<std::size_t> next{0};
  const std::size_t total = todo.size();

  auto write_label = [&](const PseudoLabel& p) {
    if (out.is_open()) {
      out << to_json(p).dump() << '\n';
      out.flush();
    }
    if (journal.is_open()) {
      journal << json{{"comment_id", p.comment_id}, {"status", "done"}}.dump() << '\n';
      journal.flush();
    }
    ++report.labeled;
    if (opts.on_progress) opts.on_progress(report.labeled, total);
  };

  std::exception_ptr fatal;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next++;
      if (k >= total) return;
      Outcome outcome;
      const Comment& c = corpus.comments[todo[k]];
      try {
        outcome = label_comment(c, lib, counting, cfg, opts.method);
      } catch (const Error& e) {
        if (!e.is_gateway_error()) {
          std::lock_guard lock(mu);
          if (!fatal) fatal = std::current_exception();
          next = total;
          return;
        }
        outcome = std::string(e.what());
      }
      std::lock_guard lock(mu);
      slots[k] = std::move(outcome);
      while (cursor < total && !std::holds_alternative<std::monostate>(slots[cursor])) {
        if (auto* p = std::get_if<PseudoLabel>(&slots[cursor])) {
          write_label(*p);
        } else {
          spdlog::warn("comment {} failed, queued for retry: {}", corpus.comments[todo[cursor]].id,
                       std::get<std::string>(slots[cursor]));
          retry.push_back(todo[cursor]);
        }
        slots[cursor] = std::string{};  // release memory; cursor has moved past
        ++cursor;
      }
    }
  };

  const int n_workers = std::max(1, std::min<int>(opts.workers, static_cast<int>(std::max<std::size_t>(total, 1))));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  for (std::size_t idx : retry) {
    const Comment& c = corpus.comments[idx];
    try {
      write_label(label_comment(c, lib, counting, cfg, opts.method));
    } catch (const Error& e) {
      if (!e.is_gateway_error()) throw;
      report.failures.push_back({c.id, e.what()});
      if (journal.is_open()) {
        journal << json{{"comment_id", c.id}, {"status", "failed"}}.dump() << '\n';
        journal.flush();
      }
    }
  }
  report.chat_calls = counting.calls();
  return report;
}

std::vector<PseudoLabel> load_pseudo_labels(const std::filesystem::path& path) {
  std::vector<PseudoLabel> out;
  read_jsonl(path, [&](const json& r, std::size_t lineno) {
    try {
      out.push_back(pseudo_label_from_json(r));
    } catch (const Error& e) {
      throw Error(Errc::ParseError, std::to_string(lineno), fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  });
  return out;
}

}  // namespace cbwatch
