#include <chrono>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cbwatch/annotation.hpp"
#include "cbwatch/jsonl.hpp"

namespace cbwatch {

namespace {

constexpr const char* kProjectFile = "project.json";
constexpr const char* kLogFile = "annotations.log";
constexpr const char* kSnapshotFile = "snapshot.json";
constexpr const char* kLockFile = ".lock";

// One process per project directory.
int lock_dir(const std::filesystem::path& dir) {
  const auto path = dir / kLockFile;
  const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::IoError, path.string(), "cannot open " + path.string());
  if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd);
    throw Error(Errc::IoError, dir.string(), dir.string() + " is in use by another process");
  }
  return fd;
}

Timestamp system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

[[noreturn]] void corrupt(const std::filesystem::path& log, std::size_t lineno, std::uint64_t last_good,
                          const std::string& why) {
  throw Error(Errc::CorruptLog, std::to_string(lineno),
              fmt::format("{} line {}: {}. Last good entry is seq {}. To recover, keep a copy of the file, "
                          "truncate it to its first {} lines and restart; submissions after that point are lost.",
                          log.string(), lineno, why, last_good, lineno - 1));
}

}  // namespace

ProjectStore::ProjectStore(const StoreOptions& opts, ProjectDefinition def)
    : opts_(opts), id_(def.id), project_(std::move(def)) {
  if (!opts_.clock) opts_.clock = system_now;
  if (opts_.snapshot_every == 0) opts_.snapshot_every = 1;
}

ProjectStore::~ProjectStore() {
  try {
    close();
  } catch (const std::exception& e) {
    spdlog::error("closing project {}: {}", id_, e.what());
  }
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

bool ProjectStore::exists(const std::filesystem::path& data_dir) {
  return std::filesystem::exists(data_dir / kProjectFile);
}

std::unique_ptr<ProjectStore> ProjectStore::create(const StoreOptions& opts, ProjectDefinition def) {
  if (exists(opts.data_dir))
    throw Error(Errc::IoError, opts.data_dir.string(), "a project already exists in " + opts.data_dir.string());
  std::filesystem::create_directories(opts.data_dir);
  const int lock = lock_dir(opts.data_dir);
  const std::string body = to_json(def).dump() + '\n';
  std::unique_ptr<ProjectStore> store(new ProjectStore(opts, std::move(def)));
  store->lock_fd_ = lock;
  write_file_atomic(opts.data_dir / kProjectFile, body);
  std::filesystem::remove(opts.data_dir / kLogFile);
  std::filesystem::remove(opts.data_dir / kSnapshotFile);
  store->open_log();
  return store;
}

std::unique_ptr<ProjectStore> ProjectStore::open(const StoreOptions& opts) {
  const auto project_path = opts.data_dir / kProjectFile;
  if (!exists(opts.data_dir)) throw Error(Errc::IoError, project_path.string(), "no project in " + opts.data_dir.string());
  int lock = lock_dir(opts.data_dir);
  json def_json;
  try {
    def_json = json::parse(read_file(project_path));
  } catch (const json::parse_error& e) {
    ::close(lock);
    throw Error(Errc::ParseError, project_path.string(), fmt::format("{}: {}", project_path.string(), e.what()));
  }
  std::unique_ptr<ProjectStore> store;
  try {
    store.reset(new ProjectStore(opts, project_definition_from_json(def_json)));
  } catch (...) {
    ::close(lock);
    throw;
  }
  store->lock_fd_ = lock;

  std::uint64_t snap_seq = 0;
  const auto snap_path = opts.data_dir / kSnapshotFile;
  if (std::filesystem::exists(snap_path)) {
    json snap;
    try {
      snap = json::parse(read_file(snap_path));
      snap_seq = snap.at("seq").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw Error(Errc::CorruptLog, snap_path.string(),
                  fmt::format("{} is unreadable ({}). Delete it to rebuild the state from the log alone.",
                              snap_path.string(), e.what()));
    }
    store->project_.restore_state(snap.at("state"));
  }

  const auto log_path = opts.data_dir / kLogFile;
  std::uint64_t seq = 0;
  if (std::filesystem::exists(log_path)) {
    std::ifstream in(log_path, std::ios::binary);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) corrupt(log_path, lineno, seq, "blank line");
      json entry;
      try {
        entry = json::parse(line);
      } catch (const json::parse_error&) {
        corrupt(log_path, lineno, seq, "unparseable entry");
      }
      std::uint64_t entry_seq = 0;
      std::string annotator, comment;
      Label label{};
      Timestamp at = 0;
      try {
        entry_seq = entry.at("seq").get<std::uint64_t>();
        annotator = entry.at("annotator_id").get<std::string>();
        comment = entry.at("comment_id").get<std::string>();
        label = label_from_int(entry.at("label").get<std::int64_t>());
        at = entry.at("submitted_at").get<Timestamp>();
      } catch (const std::exception& e) {
        corrupt(log_path, lineno, seq, std::string("malformed entry: ") + e.what());
      }
      if (entry_seq != seq + 1) corrupt(log_path, lineno, seq, fmt::format("expected seq {}, found {}", seq + 1, entry_seq));
      seq = entry_seq;
      if (seq <= snap_seq) continue;
      try {
        store->project_.submit(annotator, comment, label, at);
      } catch (const Error& e) {
        corrupt(log_path, lineno, seq - 1, std::string("entry cannot be replayed: ") + e.what());
      }
    }
  }
  if (snap_seq > seq)
    throw Error(Errc::CorruptLog, snap_path.string(),
                fmt::format("snapshot is at seq {} but the log ends at seq {}. Delete {} to rebuild from the log.",
                            snap_seq, seq, snap_path.string()));
  store->seq_ = seq;
  store->open_log();
  spdlog::info("project {} loaded: {} submissions replayed up to seq {}", store->id_,
               store->project_.submissions(), seq);
  return store;
}

void ProjectStore::open_log() {
  const auto path = opts_.data_dir / kLogFile;
  log_ = std::fopen(path.c_str(), "ab");
  if (!log_) throw Error(Errc::IoError, path.string(), "cannot open " + path.string());
}

NextTask ProjectStore::next_task(const std::string& annotator_id, bool hide_suggestion) const {
  std::lock_guard lock(mu_);
  return project_.next_task(annotator_id, hide_suggestion);
}

ReliabilityUpdate ProjectStore::submit(const std::string& annotator_id, const std::string& comment_id, Label label) {
  std::lock_guard lock(mu_);
  project_.check_submit(annotator_id, comment_id);
  if (!log_) throw Error(Errc::IoError, id_, "project store is closed");
  const Timestamp at = opts_.clock();
  const json entry{{"seq", seq_ + 1},
                   {"annotator_id", annotator_id},
                   {"comment_id", comment_id},
                   {"label", to_int(label)},
                   {"submitted_at", at}};
  const std::string line = entry.dump() + '\n';
  if (std::fwrite(line.data(), 1, line.size(), log_) != line.size() || std::fflush(log_) != 0)
    throw Error(Errc::IoError, kLogFile, "failed to append to the annotation log");
  ++seq_;
  auto update = project_.submit(annotator_id, comment_id, label, at);
  if (++since_snapshot_ >= opts_.snapshot_every) snapshot_locked();
  return update;
}

std::optional<ConsensusResult> ProjectStore::resolve(const std::string& comment_id) const {
  std::lock_guard lock(mu_);
  return project_.resolve(comment_id);
}

Progress ProjectStore::progress() const {
  std::lock_guard lock(mu_);
  return project_.progress();
}

AuditSheet ProjectStore::audit_sample(std::size_t n, std::uint64_t seed) const {
  std::lock_guard lock(mu_);
  return project_.audit_sample(n, seed);
}

ExportSummary ProjectStore::export_dataset(const std::filesystem::path& path) const {
  std::lock_guard lock(mu_);
  return project_.export_dataset(path);
}

IncidentSeries ProjectStore::series(const std::string& incident_id, const RuleConfig& cfg) const {
  std::lock_guard lock(mu_);
  return project_.series(incident_id, cfg);
}

bool ProjectStore::has_annotator(const std::string& annotator_id) const {
  std::lock_guard lock(mu_);
  try {
    project_.annotator(annotator_id);
    return true;
  } catch (const Error&) {
    return false;
  }
}

void ProjectStore::snapshot() {
  std::lock_guard lock(mu_);
  snapshot_locked();
}

void ProjectStore::snapshot_locked() {
  const json snap{{"seq", seq_}, {"state", project_.state_json()}};
  write_file_atomic(opts_.data_dir / kSnapshotFile, snap.dump() + '\n');
  since_snapshot_ = 0;
}

void ProjectStore::close() {
  std::lock_guard lock(mu_);
  if (!log_) return;
  snapshot_locked();
  std::fclose(log_);
  log_ = nullptr;
}

}  // namespace cbwatch
