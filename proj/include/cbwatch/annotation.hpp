#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "cbwatch/core.hpp"
#include "cbwatch/incident.hpp"
#include "cbwatch/ingest.hpp"

namespace cbwatch {

struct QcConfig {
  int gold_size = 1000;  // capped at 10% of the corpus
  int required_annotators = 3;
  double gold_agreement_floor = 0.80;
  int gold_min_sample = 50;

  void validate() const;
  /// min(gold_size, corpus_size / 10)
  std::size_t effective_gold_size(std::size_t corpus_size) const;
};

enum class AnnotatorRole { annotator, reserve, operator_ };
std::string_view to_string(AnnotatorRole r) noexcept;
std::optional<AnnotatorRole> parse_annotator_role(std::string_view s);

enum class AnnotatorStatus { active, standby, flagged, replaced };
std::string_view to_string(AnnotatorStatus s) noexcept;

struct AnnotatorSpec {
  std::string id;
  AnnotatorRole role = AnnotatorRole::annotator;
};

struct ProjectItem {
  Comment comment;
  PseudoLabel pseudo;
};

/// Everything fixed at creation time; persisted as project.json.
struct ProjectDefinition {
  std::string id;
  std::uint64_t seed = 0;
  QcConfig qc;
  std::vector<ProjectItem> items;        // corpus order
  std::map<std::string, Label> gold;     // reference labels of the gold items
  std::vector<AnnotatorSpec> annotators;  // annotator and reserve roles only
};

json to_json(const ProjectDefinition& d);
ProjectDefinition project_definition_from_json(const json& j);

/// Draws the gold set (seeded) and fixes its reference labels from `trusted`.
/// Throws CorpusTooSmall, MissingLabel, InvalidArgument.
ProjectDefinition create_project(const std::string& id, const Corpus& corpus, const std::vector<PseudoLabel>& pseudo,
                                 const std::map<std::string, Label>& trusted,
                                 const std::vector<AnnotatorSpec>& annotators, std::uint64_t seed,
                                 const QcConfig& qc = {});

struct AnnotatorState {
  std::string id;
  AnnotatorRole role = AnnotatorRole::annotator;
  AnnotatorStatus status = AnnotatorStatus::active;
  int gold_seen = 0;
  int gold_correct = 0;
  std::string replaced_by;  // set once a reserve takes over
  std::string replaces;     // set on a reserve that took over

  double gold_accuracy() const { return gold_seen ? static_cast<double>(gold_correct) / gold_seen : 1.0; }
};

struct AnnotationRecord {
  std::string comment_id;
  std::string annotator_id;
  Label label = Label::non_cyberbullying;
  Timestamp submitted_at = 0;
  bool was_gold = false;
  bool voided = false;
};

struct ExplanationCard {
  Method method = Method::paraphraser;
  int index = 0;
  std::string text;
};

struct Task {
  std::string comment_id;
  std::string text;
  std::vector<ExplanationCard> explanations;  // paraphraser, CoT, agents
  std::optional<Label> suggestion;
  std::size_t remaining = 0;  // including this one
};

struct Done {
  std::size_t submitted = 0;
};

using NextTask = std::variant<Task, Done>;

/// The task payload. Deliberately has no gold marker.
json to_json(const Task& t);

struct ReliabilityUpdate {
  std::string annotator_id;
  int gold_seen = 0;
  int gold_correct = 0;
  double gold_accuracy = 1.0;
  AnnotatorStatus status = AnnotatorStatus::active;
  bool flagged_now = false;
  std::string replaced_by;
};

json to_json(const ReliabilityUpdate& u);

struct Vote {
  std::string annotator_id;
  Label label = Label::non_cyberbullying;
};

struct ConsensusResult {
  std::string comment_id;
  Label final_label = Label::non_cyberbullying;
  std::vector<Vote> votes;
  bool unanimous = false;
};

struct AnnotatorProgress {
  std::string id;
  AnnotatorRole role = AnnotatorRole::annotator;
  AnnotatorStatus status = AnnotatorStatus::active;
  std::size_t submitted = 0;
  std::size_t remaining = 0;
  int gold_seen = 0;
  int gold_correct = 0;
};

struct Progress {
  std::size_t total = 0;
  std::size_t resolved = 0;
  std::size_t pending = 0;
  std::vector<AnnotatorProgress> annotators;
};

json to_json(const Progress& p);

struct AuditItem {
  std::string comment_id;
  std::string text;
  Label final_label = Label::non_cyberbullying;
};

struct AuditSheet {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<AuditItem> items;
};

struct AuditResult {
  std::size_t n = 0;
  std::size_t confirmed = 0;
  double accuracy = 0.0;

  /// Percentage with one decimal, e.g. "93.7%".
  std::string percent() const;
};

json to_json(const AuditSheet& s);
json to_json(const AuditResult& r);

/// Scores expert verdicts (comment id -> label confirmed) against a sheet.
/// Throws InvalidArgument when a sheet item has no verdict.
AuditResult audit_score(const AuditSheet& sheet, const std::map<std::string, bool>& confirmed);

struct ExportSummary {
  std::size_t lines = 0;
  StatReport stats;
};

/// In-memory project state. Pure and deterministic: the state is a function
/// of the definition and the ordered sequence of submissions.
class AnnotationProject {
 public:
  explicit AnnotationProject(ProjectDefinition def);

  const ProjectDefinition& definition() const { return def_; }

  /// Throws UnknownAnnotator, AnnotatorFlagged.
  NextTask next_task(const std::string& annotator_id, bool hide_suggestion = false) const;

  /// Throws everything submit would, without changing state.
  void check_submit(const std::string& annotator_id, const std::string& comment_id) const;
  /// Throws UnknownAnnotator, AnnotatorFlagged, NotAssigned, DuplicateSubmission.
  ReliabilityUpdate submit(const std::string& annotator_id, const std::string& comment_id, Label label,
                           Timestamp submitted_at);

  /// Majority of the panel's valid records, nullopt while pending.
  std::optional<ConsensusResult> resolve(const std::string& comment_id) const;

  Progress progress() const;
  const AnnotatorState& annotator(const std::string& id) const;
  const std::vector<AnnotationRecord>& records() const { return records_; }
  std::size_t submissions() const { return records_.size(); }
  std::vector<std::string> panel(const std::string& comment_id) const;

  /// Throws NotEnoughResolved.
  AuditSheet audit_sample(std::size_t n, std::uint64_t seed) const;

  /// Export lines, one per item; throws UnresolvedRemaining.
  std::vector<json> export_records() const;
  /// Writes export_records; returns the line count and stats on final labels.
  ExportSummary export_dataset(const std::filesystem::path& path) const;

  /// Labels for the dashboard series: consensus where resolved, else the
  /// ensemble pseudo label.
  std::map<std::string, Label> current_labels() const;
  IncidentSeries series(const std::string& incident_id, const RuleConfig& cfg = {}) const;

  json state_json() const;
  void restore_state(const json& state);

 private:
  std::size_t item_index(const std::string& comment_id) const;
  std::size_t annotator_index(const std::string& annotator_id) const;
  void build_order(std::size_t annotator);
  void replace_annotator(std::size_t flagged);
  const AnnotationRecord* record_for(std::size_t item, std::size_t annotator) const;
  std::optional<ConsensusResult> resolve_index(std::size_t item) const;

  ProjectDefinition def_;
  std::unordered_map<std::string, std::size_t> items_by_id_;
  std::vector<bool> is_gold_;
  std::vector<AnnotatorState> annotators_;
  std::unordered_map<std::string, std::size_t> annotators_by_id_;
  std::vector<std::vector<std::size_t>> panels_;  // item -> annotator indices
  std::vector<std::vector<std::size_t>> orders_;  // annotator -> item indices
  std::vector<std::vector<bool>> assigned_;       // annotator -> item in order
  std::vector<std::size_t> cursors_;              // first possibly-open position in orders_
  std::vector<std::size_t> submitted_;            // per annotator
  std::vector<AnnotationRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> record_index_;  // (item, annotator) -> record
};

struct StoreOptions {
  std::filesystem::path data_dir;
  std::size_t snapshot_every = 100;
  std::function<Timestamp()> clock;  // defaults to the system clock
};

/// Durable, thread-safe wrapper: project.json, an append-only annotations.log
/// of submissions and a periodic snapshot.json.
class ProjectStore {
 public:
  /// Throws IoError if a project already exists in the directory.
  static std::unique_ptr<ProjectStore> create(const StoreOptions& opts, ProjectDefinition def);
  /// Loads project.json and the snapshot, then replays the log tail.
  /// Throws IoError, ParseError, CorruptLog.
  static std::unique_ptr<ProjectStore> open(const StoreOptions& opts);
  static bool exists(const std::filesystem::path& data_dir);

  ~ProjectStore();
  ProjectStore(const ProjectStore&) = delete;
  ProjectStore& operator=(const ProjectStore&) = delete;

  const std::string& id() const { return id_; }

  NextTask next_task(const std::string& annotator_id, bool hide_suggestion = false) const;
  ReliabilityUpdate submit(const std::string& annotator_id, const std::string& comment_id, Label label);
  std::optional<ConsensusResult> resolve(const std::string& comment_id) const;
  Progress progress() const;
  AuditSheet audit_sample(std::size_t n, std::uint64_t seed) const;
  ExportSummary export_dataset(const std::filesystem::path& path) const;
  IncidentSeries series(const std::string& incident_id, const RuleConfig& cfg = {}) const;
  bool has_annotator(const std::string& annotator_id) const;

  /// Atomic snapshot write.
  void snapshot();
  /// Snapshot and release the log.
  void close();

  /// Read access under the lock.
  template <typename F>
  auto with_project(F&& f) const {
    std::lock_guard lock(mu_);
    return f(project_);
  }

 private:
  ProjectStore(const StoreOptions& opts, ProjectDefinition def);
  void open_log();
  void snapshot_locked();

  StoreOptions opts_;
  std::string id_;
  mutable std::mutex mu_;
  AnnotationProject project_;
  std::FILE* log_ = nullptr;
  int lock_fd_ = -1;
  std::uint64_t seq_ = 0;
  std::size_t since_snapshot_ = 0;
};

}  // namespace cbwatch
