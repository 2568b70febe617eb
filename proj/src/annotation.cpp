#include "cbwatch/annotation.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cbwatch/digest.hpp"
#include "cbwatch/jsonl.hpp"
#include "cbwatch/random.hpp"

namespace cbwatch {

void QcConfig::validate() const {
  if (required_annotators < 3 || required_annotators % 2 == 0)
    throw Error(Errc::InvalidArgument, "required_annotators", "required_annotators must be odd and at least 3");
  if (!(gold_agreement_floor > 0 && gold_agreement_floor <= 1))
    throw Error(Errc::InvalidArgument, "gold_agreement_floor", "gold_agreement_floor must lie in (0, 1]");
  if (gold_min_sample < 1) throw Error(Errc::InvalidArgument, "gold_min_sample", "gold_min_sample must be >= 1");
  if (gold_size < 0) throw Error(Errc::InvalidArgument, "gold_size", "gold_size must be >= 0");
}

std::size_t QcConfig::effective_gold_size(std::size_t corpus_size) const {
  return std::min(static_cast<std::size_t>(gold_size), corpus_size / 10);
}

std::string_view to_string(AnnotatorRole r) noexcept {
  switch (r) {
    case AnnotatorRole::annotator: return "annotator";
    case AnnotatorRole::reserve: return "reserve";
    case AnnotatorRole::operator_: return "operator";
  }
  return "?";
}

std::optional<AnnotatorRole> parse_annotator_role(std::string_view s) {
  for (auto r : {AnnotatorRole::annotator, AnnotatorRole::reserve, AnnotatorRole::operator_})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

std::string_view to_string(AnnotatorStatus s) noexcept {
  switch (s) {
    case AnnotatorStatus::active: return "active";
    case AnnotatorStatus::standby: return "standby";
    case AnnotatorStatus::flagged: return "flagged";
    case AnnotatorStatus::replaced: return "replaced";
  }
  return "?";
}

namespace {

std::optional<AnnotatorStatus> parse_status(std::string_view s) {
  for (auto st : {AnnotatorStatus::active, AnnotatorStatus::standby, AnnotatorStatus::flagged,
                  AnnotatorStatus::replaced})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

std::uint64_t record_key(std::size_t item, std::size_t annotator) {
  return (static_cast<std::uint64_t>(item) << 20) | static_cast<std::uint64_t>(annotator);
}

}  // namespace

// ---------------------------------------------------------------------------
// Definition

json to_json(const ProjectDefinition& d) {
  json items = json::array();
  for (const auto& it : d.items) items.push_back({{"comment", to_json(it.comment)}, {"pseudo", to_json(it.pseudo)}});
  json gold = json::object();
  for (const auto& [id, l] : d.gold) gold[id] = to_int(l);
  json annotators = json::array();
  for (const auto& a : d.annotators) annotators.push_back({{"id", a.id}, {"role", to_string(a.role)}});
  return json{{"id", d.id},
              {"seed", d.seed},
              {"qc",
               {{"gold_size", d.qc.gold_size},
                {"required_annotators", d.qc.required_annotators},
                {"gold_agreement_floor", d.qc.gold_agreement_floor},
                {"gold_min_sample", d.qc.gold_min_sample}}},
              {"annotators", annotators},
              {"gold", gold},
              {"items", items}};
}

ProjectDefinition project_definition_from_json(const json& j) {
  ProjectDefinition d;
  try {
    d.id = j.at("id").get<std::string>();
    d.seed = j.at("seed").get<std::uint64_t>();
    const auto& qc = j.at("qc");
    d.qc.gold_size = qc.at("gold_size").get<int>();
    d.qc.required_annotators = qc.at("required_annotators").get<int>();
    d.qc.gold_agreement_floor = qc.at("gold_agreement_floor").get<double>();
    d.qc.gold_min_sample = qc.at("gold_min_sample").get<int>();
    for (const auto& a : j.at("annotators")) {
      auto role = parse_annotator_role(a.at("role").get<std::string>());
      if (!role) throw Error(Errc::ParseError, "role", "unknown annotator role");
      d.annotators.push_back({a.at("id").get<std::string>(), *role});
    }
    for (const auto& [id, v] : j.at("gold").items()) d.gold[id] = label_from_int(v.get<std::int64_t>());
    for (const auto& it : j.at("items"))
      d.items.push_back({validate_comment(it.at("comment")), pseudo_label_from_json(it.at("pseudo"))});
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, "project", std::string("malformed project definition: ") + e.what());
  }
  return d;
}

ProjectDefinition create_project(const std::string& id, const Corpus& corpus, const std::vector<PseudoLabel>& pseudo,
                                 const std::map<std::string, Label>& trusted,
                                 const std::vector<AnnotatorSpec>& annotators, std::uint64_t seed,
                                 const QcConfig& qc) {
  qc.validate();
  if (corpus.size() < static_cast<std::size_t>(qc.gold_min_sample) * 2)
    throw Error(Errc::CorpusTooSmall, std::to_string(corpus.size()),
                fmt::format("corpus has {} comments, at least {} are needed", corpus.size(), qc.gold_min_sample * 2));
  const auto active = std::count_if(annotators.begin(), annotators.end(),
                                    [](const AnnotatorSpec& a) { return a.role == AnnotatorRole::annotator; });
  if (active < qc.required_annotators)
    throw Error(Errc::InvalidArgument, "annotators",
                fmt::format("{} annotators given, {} are required per item", active, qc.required_annotators));
  std::set<std::string> seen;
  for (const auto& a : annotators) {
    if (a.role == AnnotatorRole::operator_)
      throw Error(Errc::InvalidArgument, a.id, "operators cannot be part of the annotator roster");
    if (!seen.insert(a.id).second) throw Error(Errc::InvalidArgument, a.id, "duplicate annotator id " + a.id);
  }

  std::map<std::string, const PseudoLabel*> by_id;
  for (const auto& p : pseudo) by_id[p.comment_id] = &p;

  ProjectDefinition d;
  d.id = id;
  d.seed = seed;
  d.qc = qc;
  d.annotators = annotators;
  for (const auto& c : corpus.comments) {
    auto it = by_id.find(c.id);
    if (it == by_id.end()) throw Error(Errc::MissingLabel, c.id, "no pseudo label for comment " + c.id);
    d.items.push_back({c, *it->second});
  }

  std::vector<std::size_t> idx(d.items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed ^ fnv1a64("gold:" + id));
  rng.shuffle(idx);
  idx.resize(qc.effective_gold_size(d.items.size()));
  for (std::size_t i : idx) {
    const auto& cid = d.items[i].comment.id;
    auto t = trusted.find(cid);
    if (t == trusted.end()) throw Error(Errc::MissingLabel, cid, "no trusted reference label for gold item " + cid);
    d.gold[cid] = t->second;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Payloads

json to_json(const Task& t) {
  json cards = json::array();
  for (const auto& e : t.explanations)
    cards.push_back({{"method", to_string(e.method)}, {"index", e.index}, {"text", e.text}});
  json j{{"comment_id", t.comment_id}, {"text", t.text}, {"explanations", cards}, {"remaining", t.remaining}};
  if (t.suggestion) j["suggestion"] = to_int(*t.suggestion);
  return j;
}

json to_json(const ReliabilityUpdate& u) {
  json j{{"annotator_id", u.annotator_id},   {"gold_seen", u.gold_seen},
         {"gold_correct", u.gold_correct},   {"gold_accuracy", u.gold_accuracy},
         {"status", to_string(u.status)},    {"flagged_now", u.flagged_now}};
  if (!u.replaced_by.empty()) j["replaced_by"] = u.replaced_by;
  return j;
}

json to_json(const Progress& p) {
  json annotators = json::array();
  for (const auto& a : p.annotators)
    annotators.push_back({{"id", a.id},
                          {"role", to_string(a.role)},
                          {"status", to_string(a.status)},
                          {"submitted", a.submitted},
                          {"remaining", a.remaining},
                          {"gold_seen", a.gold_seen},
                          {"gold_correct", a.gold_correct}});
  return json{{"total", p.total}, {"resolved", p.resolved}, {"pending", p.pending}, {"annotators", annotators}};
}

json to_json(const AuditSheet& s) {
  json items = json::array();
  for (const auto& it : s.items)
    items.push_back({{"comment_id", it.comment_id}, {"text", it.text}, {"final_label", to_int(it.final_label)}});
  return json{{"n", s.n}, {"seed", s.seed}, {"items", items}};
}

std::string AuditResult::percent() const { return fmt::format("{:.1f}%", accuracy * 100.0); }

json to_json(const AuditResult& r) {
  return json{{"n", r.n}, {"confirmed", r.confirmed}, {"accuracy", r.accuracy}, {"percent", r.percent()}};
}

AuditResult audit_score(const AuditSheet& sheet, const std::map<std::string, bool>& confirmed) {
  AuditResult r;
  r.n = sheet.items.size();
  if (r.n == 0) throw Error(Errc::InvalidArgument, "audit", "audit sheet is empty");
  for (const auto& it : sheet.items) {
    auto v = confirmed.find(it.comment_id);
    if (v == confirmed.end())
      throw Error(Errc::InvalidArgument, it.comment_id, "no verdict for audited comment " + it.comment_id);
    r.confirmed += v->second;
  }
  r.accuracy = static_cast<double>(r.confirmed) / static_cast<double>(r.n);
  return r;
}

// ---------------------------------------------------------------------------
// State machine

AnnotationProject::AnnotationProject(ProjectDefinition def) : def_(std::move(def)) {
  def_.qc.validate();
  is_gold_.assign(def_.items.size(), false);
  for (std::size_t i = 0; i < def_.items.size(); ++i) {
    const auto& cid = def_.items[i].comment.id;
    if (!items_by_id_.emplace(cid, i).second) throw Error(Errc::InvalidArgument, cid, "duplicate item " + cid);
    is_gold_[i] = def_.gold.count(cid) > 0;
  }
  for (const auto& [cid, _] : def_.gold)
    if (!items_by_id_.count(cid)) throw Error(Errc::InvalidArgument, cid, "gold item " + cid + " is not in the corpus");

  std::vector<std::size_t> active;
  for (const auto& spec : def_.annotators) {
    AnnotatorState s;
    s.id = spec.id;
    s.role = spec.role;
    s.status = spec.role == AnnotatorRole::reserve ? AnnotatorStatus::standby : AnnotatorStatus::active;
    if (s.status == AnnotatorStatus::active) active.push_back(annotators_.size());
    annotators_by_id_[s.id] = annotators_.size();
    annotators_.push_back(std::move(s));
  }
  const auto need = static_cast<std::size_t>(def_.qc.required_annotators);
  if (active.size() < need)
    throw Error(Errc::InvalidArgument, "annotators", "not enough active annotators for a consensus panel");

  // Panels: items in a seeded order take annotators round-robin from a seeded
  // rotation, so the load is even and every panel has distinct members.
  Rng rng(def_.seed ^ fnv1a64("panels:" + def_.id));
  rng.shuffle(active);
  std::vector<std::size_t> item_order(def_.items.size());
  for (std::size_t i = 0; i < item_order.size(); ++i) item_order[i] = i;
  rng.shuffle(item_order);
  panels_.assign(def_.items.size(), {});
  std::size_t slot = 0;
  for (std::size_t item : item_order)
    for (std::size_t j = 0; j < need; ++j) panels_[item].push_back(active[slot++ % active.size()]);

  orders_.assign(annotators_.size(), {});
  assigned_.assign(annotators_.size(), std::vector<bool>(def_.items.size(), false));
  cursors_.assign(annotators_.size(), 0);
  submitted_.assign(annotators_.size(), 0);
  for (std::size_t a : active) build_order(a);
}

void AnnotationProject::build_order(std::size_t a) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < def_.items.size(); ++i) {
    const auto& p = panels_[i];
    if (is_gold_[i] || std::find(p.begin(), p.end(), a) != p.end()) order.push_back(i);
  }
  Rng rng(def_.seed ^ fnv1a64("order:" + annotators_[a].id));
  rng.shuffle(order);
  assigned_[a].assign(def_.items.size(), false);
  for (std::size_t i : order) assigned_[a][i] = true;
  orders_[a] = std::move(order);
  cursors_[a] = 0;
}

std::size_t AnnotationProject::item_index(const std::string& comment_id) const {
  auto it = items_by_id_.find(comment_id);
  if (it == items_by_id_.end()) throw Error(Errc::NotAssigned, comment_id, "unknown comment " + comment_id);
  return it->second;
}

std::size_t AnnotationProject::annotator_index(const std::string& annotator_id) const {
  auto it = annotators_by_id_.find(annotator_id);
  if (it == annotators_by_id_.end())
    throw Error(Errc::UnknownAnnotator, annotator_id, "unknown annotator " + annotator_id);
  return it->second;
}

const AnnotatorState& AnnotationProject::annotator(const std::string& id) const {
  return annotators_[annotator_index(id)];
}

const AnnotationRecord* AnnotationProject::record_for(std::size_t item, std::size_t annotator) const {
  auto it = record_index_.find(record_key(item, annotator));
  return it == record_index_.end() ? nullptr : &records_[it->second];
}

std::vector<std::string> AnnotationProject::panel(const std::string& comment_id) const {
  std::vector<std::string> out;
  for (std::size_t a : panels_[item_index(comment_id)]) out.push_back(annotators_[a].id);
  return out;
}

namespace {

void ensure_can_annotate(const AnnotatorState& s) {
  if (s.status == AnnotatorStatus::flagged || s.status == AnnotatorStatus::replaced)
    throw Error(Errc::AnnotatorFlagged, s.id, "annotator " + s.id + " has been flagged by quality control");
}

}  // namespace

NextTask AnnotationProject::next_task(const std::string& annotator_id, bool hide_suggestion) const {
  const std::size_t a = annotator_index(annotator_id);
  ensure_can_annotate(annotators_[a]);
  const auto& order = orders_[a];
  for (std::size_t pos = cursors_[a]; pos < order.size(); ++pos) {
    const std::size_t item = order[pos];
    if (record_for(item, a)) continue;
    const auto& it = def_.items[item];
    Task t;
    t.comment_id = it.comment.id;
    t.text = it.comment.text;
    const auto& p = it.pseudo;
    if (!p.para.explanations.empty())
      t.explanations.push_back({Method::paraphraser, 0, p.para.explanations.front().text});
    if (!p.cot.explanations.empty()) {
      const auto& e = p.cot.explanations.front();
      t.explanations.push_back({Method::cot, e.index, e.text});
    }
    if (!p.agents.explanations.empty()) {
      // An agent that agrees with the agents' decision explains it best.
      const Explanation* pick = &p.agents.explanations.front();
      for (const auto& e : p.agents.explanations)
        if (e.index >= 1 && e.index <= 5 && p.agent_labels[static_cast<std::size_t>(e.index - 1)] == p.agents.label) {
          pick = &e;
          break;
        }
      t.explanations.push_back({Method::agent, pick->index, pick->text});
    }
    if (!hide_suggestion) t.suggestion = p.ensemble;
    t.remaining = order.size() - submitted_[a];
    return t;
  }
  return Done{submitted_[a]};
}

void AnnotationProject::check_submit(const std::string& annotator_id, const std::string& comment_id) const {
  const std::size_t a = annotator_index(annotator_id);
  ensure_can_annotate(annotators_[a]);
  auto it = items_by_id_.find(comment_id);
  if (it == items_by_id_.end() || !assigned_[a][it->second])
    throw Error(Errc::NotAssigned, comment_id, fmt::format("{} is not assigned to {}", comment_id, annotator_id));
  if (record_for(it->second, a))
    throw Error(Errc::DuplicateSubmission, comment_id,
                fmt::format("{} already submitted a label for {}", annotator_id, comment_id));
}

ReliabilityUpdate AnnotationProject::submit(const std::string& annotator_id, const std::string& comment_id,
                                            Label label, Timestamp submitted_at) {
  check_submit(annotator_id, comment_id);
  const std::size_t a = annotator_index(annotator_id);
  const std::size_t item = items_by_id_.at(comment_id);
  AnnotatorState& s = annotators_[a];

  AnnotationRecord rec{comment_id, annotator_id, label, submitted_at, is_gold_[item], false};
  record_index_[record_key(item, a)] = records_.size();
  records_.push_back(std::move(rec));
  ++submitted_[a];
  while (cursors_[a] < orders_[a].size() && record_for(orders_[a][cursors_[a]], a)) ++cursors_[a];

  ReliabilityUpdate u;
  if (is_gold_[item]) {
    ++s.gold_seen;
    if (def_.gold.at(comment_id) == label) ++s.gold_correct;
    if (s.gold_seen >= def_.qc.gold_min_sample && s.gold_accuracy() < def_.qc.gold_agreement_floor) {
      s.status = AnnotatorStatus::flagged;
      u.flagged_now = true;
      for (auto& r : records_)
        if (r.annotator_id == s.id && !r.was_gold) r.voided = true;
      spdlog::warn("annotator {} flagged: gold accuracy {}/{}", s.id, s.gold_correct, s.gold_seen);
      replace_annotator(a);
    }
  }
  const AnnotatorState& now = annotators_[a];
  u.annotator_id = now.id;
  u.gold_seen = now.gold_seen;
  u.gold_correct = now.gold_correct;
  u.gold_accuracy = now.gold_accuracy();
  u.status = now.status;
  u.replaced_by = now.replaced_by;
  return u;
}

void AnnotationProject::replace_annotator(std::size_t flagged) {
  auto reserve = std::find_if(annotators_.begin(), annotators_.end(),
                              [](const AnnotatorState& s) { return s.status == AnnotatorStatus::standby; });
  if (reserve == annotators_.end()) {
    spdlog::warn("no reserve annotator left to replace {}", annotators_[flagged].id);
    return;
  }
  const auto r = static_cast<std::size_t>(reserve - annotators_.begin());
  for (auto& p : panels_)
    for (auto& member : p)
      if (member == flagged) member = r;
  reserve->status = AnnotatorStatus::active;
  reserve->replaces = annotators_[flagged].id;
  annotators_[flagged].status = AnnotatorStatus::replaced;
  annotators_[flagged].replaced_by = reserve->id;
  build_order(r);
  spdlog::info("reserve annotator {} replaces {}", reserve->id, annotators_[flagged].id);
}

std::optional<ConsensusResult> AnnotationProject::resolve_index(std::size_t item) const {
  ConsensusResult c;
  c.comment_id = def_.items[item].comment.id;
  int positives = 0;
  for (std::size_t a : panels_[item]) {
    if (annotators_[a].status != AnnotatorStatus::active) continue;
    const AnnotationRecord* r = record_for(item, a);
    if (!r || r->voided) continue;
    c.votes.push_back({annotators_[a].id, r->label});
    positives += to_int(r->label);
  }
  const auto need = static_cast<int>(def_.qc.required_annotators);
  if (static_cast<int>(c.votes.size()) < need) return std::nullopt;
  c.final_label = label_from_bool(2 * positives > need);
  c.unanimous = positives == 0 || positives == need;
  return c;
}

std::optional<ConsensusResult> AnnotationProject::resolve(const std::string& comment_id) const {
  auto it = items_by_id_.find(comment_id);
  if (it == items_by_id_.end()) throw Error(Errc::InvalidArgument, comment_id, "unknown comment " + comment_id);
  return resolve_index(it->second);
}

Progress AnnotationProject::progress() const {
  Progress p;
  p.total = def_.items.size();
  for (std::size_t i = 0; i < def_.items.size(); ++i)
    if (resolve_index(i)) ++p.resolved;
  p.pending = p.total - p.resolved;
  for (std::size_t a = 0; a < annotators_.size(); ++a) {
    const auto& s = annotators_[a];
    p.annotators.push_back(
        {s.id, s.role, s.status, submitted_[a], orders_[a].size() - submitted_[a], s.gold_seen, s.gold_correct});
  }
  return p;
}

AuditSheet AnnotationProject::audit_sample(std::size_t n, std::uint64_t seed) const {
  std::vector<std::pair<std::size_t, Label>> resolved;
  for (std::size_t i = 0; i < def_.items.size(); ++i)
    if (auto c = resolve_index(i)) resolved.emplace_back(i, c->final_label);
  if (n == 0 || n > resolved.size())
    throw Error(Errc::NotEnoughResolved, std::to_string(n),
                fmt::format("audit of {} items requested, {} resolved", n, resolved.size()));
  Rng rng(seed);
  rng.shuffle(resolved);
  AuditSheet sheet;
  sheet.n = n;
  sheet.seed = seed;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = def_.items[resolved[k].first].comment;
    sheet.items.push_back({c.id, c.text, resolved[k].second});
  }
  return sheet;
}

std::vector<json> AnnotationProject::export_records() const {
  std::vector<json> lines;
  std::size_t pending = 0;
  std::vector<std::optional<ConsensusResult>> results;
  for (std::size_t i = 0; i < def_.items.size(); ++i) {
    results.push_back(resolve_index(i));
    if (!results.back()) ++pending;
  }
  if (pending > 0)
    throw Error(Errc::UnresolvedRemaining, std::to_string(pending), fmt::format("{} items are still pending", pending));
  for (std::size_t i = 0; i < def_.items.size(); ++i) {
    const auto& it = def_.items[i];
    const auto& c = *results[i];
    json line = to_json(it.comment);
    line["final_label"] = to_int(c.final_label);
    line["unanimous"] = c.unanimous;
    json votes = json::array();
    for (const auto& v : c.votes) votes.push_back({{"annotator_id", v.annotator_id}, {"label", to_int(v.label)}});
    line["votes"] = votes;
    const json pseudo = to_json(it.pseudo);
    json expl = json::object();
    for (const char* m : {"para", "cot", "agents"})
      if (pseudo.contains(m)) expl[m] = pseudo[m].contains("explanations") ? pseudo[m]["explanations"] : pseudo[m]["explanation"];
    line["explanations"] = expl;
    line["pseudo_label"] = to_int(it.pseudo.ensemble);
    line["vote_count"] = it.pseudo.vote_count;
    lines.push_back(std::move(line));
  }
  return lines;
}

ExportSummary AnnotationProject::export_dataset(const std::filesystem::path& path) const {
  const auto lines = export_records();
  std::string body;
  std::map<std::string, Label> finals;
  std::vector<Comment> comments;
  for (const auto& l : lines) {
    body += l.dump() + '\n';
    finals[l["id"].get<std::string>()] = label_from_int(l["final_label"].get<int>());
  }
  for (const auto& it : def_.items) comments.push_back(it.comment);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, body);
  return {lines.size(), corpus_stats(Corpus::from_comments(std::move(comments)), finals)};
}

std::map<std::string, Label> AnnotationProject::current_labels() const {
  std::map<std::string, Label> labels;
  for (std::size_t i = 0; i < def_.items.size(); ++i) {
    auto c = resolve_index(i);
    labels[def_.items[i].comment.id] = c ? c->final_label : def_.items[i].pseudo.ensemble;
  }
  return labels;
}

IncidentSeries AnnotationProject::series(const std::string& incident_id, const RuleConfig& cfg) const {
  std::vector<const Comment*> comments;
  for (const auto& it : def_.items)
    if (it.comment.incident_id == incident_id) comments.push_back(&it.comment);
  if (comments.empty()) throw Error(Errc::UnknownIncident, incident_id, "unknown incident " + incident_id);
  return build_series(comments, current_labels(), cfg);
}

json AnnotationProject::state_json() const {
  json records = json::array();
  for (const auto& r : records_)
    records.push_back({{"comment_id", r.comment_id},
                       {"annotator_id", r.annotator_id},
                       {"label", to_int(r.label)},
                       {"submitted_at", r.submitted_at},
                       {"voided", r.voided}});
  json annotators = json::array();
  for (const auto& s : annotators_)
    annotators.push_back({{"id", s.id},
                          {"status", to_string(s.status)},
                          {"gold_seen", s.gold_seen},
                          {"gold_correct", s.gold_correct},
                          {"replaced_by", s.replaced_by},
                          {"replaces", s.replaces}});
  return json{{"records", records}, {"annotators", annotators}, {"panels", panels_}, {"orders", orders_}};
}

void AnnotationProject::restore_state(const json& state) {
  try {
    const auto& ann = state.at("annotators");
    if (ann.size() != annotators_.size())
      throw Error(Errc::CorruptLog, "snapshot", "snapshot annotator roster differs from the project");
    for (std::size_t a = 0; a < annotators_.size(); ++a) {
      const auto& j = ann[a];
      auto& s = annotators_[a];
      if (j.at("id").get<std::string>() != s.id)
        throw Error(Errc::CorruptLog, "snapshot", "snapshot annotator roster differs from the project");
      auto st = parse_status(j.at("status").get<std::string>());
      if (!st) throw Error(Errc::CorruptLog, "snapshot", "bad annotator status in snapshot");
      s.status = *st;
      s.gold_seen = j.at("gold_seen").get<int>();
      s.gold_correct = j.at("gold_correct").get<int>();
      s.replaced_by = j.at("replaced_by").get<std::string>();
      s.replaces = j.at("replaces").get<std::string>();
    }
    panels_ = state.at("panels").get<std::vector<std::vector<std::size_t>>>();
    orders_ = state.at("orders").get<std::vector<std::vector<std::size_t>>>();
    if (panels_.size() != def_.items.size() || orders_.size() != annotators_.size())
      throw Error(Errc::CorruptLog, "snapshot", "snapshot does not match the project definition");
    for (std::size_t a = 0; a < annotators_.size(); ++a) {
      assigned_[a].assign(def_.items.size(), false);
      for (std::size_t i : orders_[a]) assigned_[a].at(i) = true;
    }
    records_.clear();
    record_index_.clear();
    submitted_.assign(annotators_.size(), 0);
    for (const auto& j : state.at("records")) {
      AnnotationRecord r;
      r.comment_id = j.at("comment_id").get<std::string>();
      r.annotator_id = j.at("annotator_id").get<std::string>();
      r.label = label_from_int(j.at("label").get<int>());
      r.submitted_at = j.at("submitted_at").get<Timestamp>();
      r.voided = j.at("voided").get<bool>();
      const std::size_t item = items_by_id_.at(r.comment_id);
      const std::size_t a = annotators_by_id_.at(r.annotator_id);
      r.was_gold = is_gold_[item];
      record_index_[record_key(item, a)] = records_.size();
      ++submitted_[a];
      records_.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptLog, "snapshot", std::string("malformed snapshot: ") + e.what());
  } catch (const std::out_of_range&) {
    throw Error(Errc::CorruptLog, "snapshot", "snapshot refers to unknown comments or annotators");
  }
  for (std::size_t a = 0; a < annotators_.size(); ++a) {
    cursors_[a] = 0;
    while (cursors_[a] < orders_[a].size() && record_for(orders_[a][cursors_[a]], a)) ++cursors_[a];
  }
}

}  // namespace cbwatch
