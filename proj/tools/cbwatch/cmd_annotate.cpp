#include <csignal>
#include <set>
#include <iostream>
#include <thread>

#include <pthread.h>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "cbwatch/annotation.hpp"
#include "cbwatch/digest.hpp"
#include "cbwatch/jsonl.hpp"
#include "cbwatch/labeler.hpp"
#include "cbwatch/random.hpp"
#include "cbwatch/service.hpp"
#include "common.hpp"

namespace cbwatch::cli {

namespace fs = std::filesystem;

namespace {

struct InitOpts {
  fs::path corpus, labels, gold;
  std::string project;
  std::uint64_t seed = 7;
  QcConfig qc;
};

void add_init_flags(CLI::App* sub, InitOpts& o) {
  sub->add_option("--corpus", o.corpus, "Corpus to annotate");
  sub->add_option("--labels", o.labels, "Pseudo labels covering the corpus");
  sub->add_option("--gold", o.gold, "Trusted labels for the hidden gold items");
  sub->add_option("--seed", o.seed, "Seed for gold selection, panels and task order")->capture_default_str();
  sub->add_option("--gold-size", o.qc.gold_size)->capture_default_str();
  sub->add_option("--gold-floor", o.qc.gold_agreement_floor, "Minimum gold accuracy")->capture_default_str();
  sub->add_option("--gold-min-sample", o.qc.gold_min_sample, "Gold answers before an annotator can be flagged")
      ->capture_default_str();
}

void create_store(const fs::path& data_dir, const InitOpts& o, const std::vector<TokenEntry>& tokens) {
  if (o.project.empty() || o.corpus.empty() || o.labels.empty() || o.gold.empty())
    throw UsageError("creating a project needs --project, --corpus, --labels and --gold");
  const Corpus corpus = load_corpus(o.corpus);
  const auto pseudo = load_pseudo_labels(o.labels);
  const auto gold = load_labels(o.gold);
  ProjectDefinition def = create_project(o.project, corpus, pseudo, gold, roster(tokens), o.seed, o.qc);
  spdlog::info("project {}: {} items, {} gold", def.id, def.items.size(), def.gold.size());
  StoreOptions so;
  so.data_dir = data_dir;
  ProjectStore::create(so, std::move(def))->close();
  Manifest("init")
      .config("project", o.project)
      .config("seed", o.seed)
      .config("gold_size", o.qc.gold_size)
      .config("gold_floor", o.qc.gold_agreement_floor)
      .config("gold_min_sample", o.qc.gold_min_sample)
      .input(o.corpus)
      .input(o.labels)
      .input(o.gold)
      .output(data_dir / "project.json")
      .write(data_dir / "manifest.init.json");
}

}  // namespace

// ---------------------------------------------------------------------------
// serve

void add_serve(CLI::App& app) {
  struct Opts {
    fs::path data_dir, annotators, ui;
    std::string host = "127.0.0.1";
    int port = 8080;
    bool hide_suggestion = false;
    std::size_t snapshot_every = 100;
    InitOpts init;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("serve", "Run the annotation service (creates the project on first start)");
  sub->add_option("--data-dir", o->data_dir, "Project directory (default: $CBWATCH_DATA_DIR)");
  sub->add_option("--project", o->init.project, "Project id");
  sub->add_option("--annotators", o->annotators, "Token file: `id token [role]` per line")->required();
  sub->add_option("--host", o->host)->capture_default_str();
  sub->add_option("--port", o->port, "0 picks a free port")->check(CLI::Range(0, 65535))->capture_default_str();
  sub->add_option("--ui", o->ui, "Directory with the UI bundle, served at /");
  sub->add_flag("--hide-suggestion", o->hide_suggestion, "Leave the machine suggestion out of task payloads");
  sub->add_option("--snapshot-every", o->snapshot_every, "Submissions between snapshots")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_init_flags(sub, o->init);

  sub->callback([o] {
    const fs::path dir = o->data_dir.empty() ? default_data_dir() : o->data_dir;
    const auto tokens = load_tokens(o->annotators);
    if (!ProjectStore::exists(dir)) create_store(dir, o->init, tokens);
    StoreOptions so;
    so.data_dir = dir;
    so.snapshot_every = o->snapshot_every;
    auto store = ProjectStore::open(so);
    if (!o->init.project.empty() && o->init.project != store->id())
      throw UsageError(fmt::format("{} holds project {}, not {}", dir.string(), store->id(), o->init.project));

    // Signals are taken by a dedicated thread so shutdown can flush the store.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    sigaddset(&set, SIGUSR1);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    ServiceOptions svc;
    svc.hide_suggestion = o->hide_suggestion;
    svc.static_dir = o->ui;
    AnnotationServer server(*store, tokens, svc);
    int port = o->port;
    if (port == 0) {
      port = server.bind_any(o->host);
      if (port < 0) throw Error(Errc::IoError, o->host, "cannot bind any port on " + o->host);
    } else if (!server.bind(o->host, port)) {
      throw Error(Errc::IoError, std::to_string(port), fmt::format("cannot bind {}:{} (port in use?)", o->host, port));
    }
    std::thread waiter([&] {
      int sig = 0;
      sigwait(&set, &sig);
      if (sig != SIGUSR1) spdlog::info("signal {} received, shutting down", sig);
      server.stop();
    });
    std::cout << fmt::format("listening on http://{}:{}/ project {}", o->host, port, store->id()) << std::endl;
    server.run();
    pthread_kill(waiter.native_handle(), SIGUSR1);
    waiter.join();
    store->close();
    spdlog::info("project {} closed", store->id());
  });
}

void add_init(CLI::App& app) {
  struct Opts {
    fs::path data_dir, annotators;
    InitOpts init;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("init", "Create an annotation project without serving it");
  sub->add_option("--data-dir", o->data_dir, "Project directory (default: $CBWATCH_DATA_DIR)");
  sub->add_option("--project", o->init.project, "Project id")->required();
  sub->add_option("--annotators", o->annotators, "Token file: `id token [role]` per line")->required();
  add_init_flags(sub, o->init);
  sub->callback([o] {
    const fs::path dir = o->data_dir.empty() ? default_data_dir() : o->data_dir;
    if (ProjectStore::exists(dir)) throw Error(Errc::IoError, dir.string(), "a project already exists in " + dir.string());
    create_store(dir, o->init, load_tokens(o->annotators));
    std::cout << fmt::format("created project {} in {}\n", o->init.project, dir.string());
  });
}

// ---------------------------------------------------------------------------
// annotate: scripted annotators, in process or against a running service

namespace {

class Annotators {
 public:
  virtual ~Annotators() = default;
  /// Next comment id for the annotator, or empty when it has nothing to do.
  /// Sets `flagged` when the annotator is locked out.
  virtual std::string next(const TokenEntry& who, bool& flagged) = 0;
  virtual void submit(const TokenEntry& who, const std::string& comment_id, Label label) = 0;
};

class LocalAnnotators final : public Annotators {
 public:
  explicit LocalAnnotators(ProjectStore& store) : store_(store) {}
  std::string next(const TokenEntry& who, bool& flagged) override {
    try {
      const NextTask t = store_.next_task(who.id);
      if (const auto* task = std::get_if<Task>(&t)) return task->comment_id;
      return {};
    } catch (const Error& e) {
      if (e.code() != Errc::AnnotatorFlagged) throw;
      flagged = true;
      return {};
    }
  }
  void submit(const TokenEntry& who, const std::string& comment_id, Label label) override {
    store_.submit(who.id, comment_id, label);
  }

 private:
  ProjectStore& store_;
};

class RemoteAnnotators final : public Annotators {
 public:
  RemoteAnnotators(const std::string& url, std::string project) : client_(url), project_(std::move(project)) {
    client_.set_read_timeout(30, 0);
  }
  std::string next(const TokenEntry& who, bool& flagged) override {
    auto res = client_.Get(fmt::format("/api/projects/{}/tasks/next", project_), auth(who));
    if (!res) throw Error(Errc::BackendUnreachable, "cannot reach the annotation service");
    if (res->status == 403) {
      flagged = true;
      return {};
    }
    if (res->status != 200) throw Error(Errc::HttpStatus, std::to_string(res->status), res->body);
    const json body = json::parse(res->body);
    return body.value("done", false) ? std::string{} : body.at("comment_id").get<std::string>();
  }
  void submit(const TokenEntry& who, const std::string& comment_id, Label label) override {
    const json body{{"comment_id", comment_id}, {"label", to_int(label)}};
    auto res = client_.Post(fmt::format("/api/projects/{}/annotations", project_), auth(who), body.dump(),
                            "application/json");
    if (!res) throw Error(Errc::BackendUnreachable, "cannot reach the annotation service");
    if (res->status != 200) throw Error(Errc::HttpStatus, std::to_string(res->status), res->body);
  }

 private:
  static httplib::Headers auth(const TokenEntry& who) { return {{"Authorization", "Bearer " + who.token}}; }
  httplib::Client client_;
  std::string project_;
};

}  // namespace

void add_annotate(CLI::App& app) {
  struct Opts {
    fs::path data_dir, tokens, gold;
    std::string url, project;
    std::uint64_t seed = 7;
    double error_rate = 0.03;
    std::vector<std::string> bad;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("annotate", "Scripted annotators answering from reference labels with noise");
  sub->add_option("--data-dir", o->data_dir, "Project directory, for in-process annotation");
  sub->add_option("--url", o->url, "Base URL of a running service instead of --data-dir");
  sub->add_option("--project", o->project, "Project id (with --url)");
  sub->add_option("--annotators", o->tokens, "Token file")->required();
  sub->add_option("--gold", o->gold, "Reference labels the scripted annotators answer from")->required();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--error-rate", o->error_rate, "Chance of a flipped answer")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--bad", o->bad, "id:rate, a per-annotator error rate override (repeatable)");

  sub->callback([o] {
    const auto tokens = load_tokens(o->tokens);
    const auto truth = load_labels(o->gold);
    std::map<std::string, double> rates;
    for (const auto& b : o->bad) {
      const auto colon = b.find(':');
      if (colon == std::string::npos) throw UsageError("--bad expects id:rate, got " + b);
      rates[b.substr(0, colon)] = std::stod(b.substr(colon + 1));
    }

    std::unique_ptr<ProjectStore> store;
    std::unique_ptr<Annotators> backend;
    if (!o->url.empty()) {
      if (o->project.empty()) throw UsageError("--url needs --project");
      backend = std::make_unique<RemoteAnnotators>(o->url, o->project);
    } else {
      StoreOptions so;
      so.data_dir = o->data_dir.empty() ? default_data_dir() : o->data_dir;
      store = ProjectStore::open(so);
      backend = std::make_unique<LocalAnnotators>(*store);
    }

    std::vector<const TokenEntry*> crew;
    for (const auto& t : tokens)
      if (t.role != AnnotatorRole::operator_) crew.push_back(&t);
    std::set<std::string> locked;
    std::size_t submitted = 0;
    for (bool progress = true; progress;) {
      progress = false;
      for (const TokenEntry* who : crew) {
        if (locked.count(who->id)) continue;
        bool flagged = false;
        const std::string cid = backend->next(*who, flagged);
        if (flagged) {
          spdlog::info("annotator {} is locked out", who->id);
          locked.insert(who->id);
          continue;
        }
        if (cid.empty()) continue;
        auto it = truth.find(cid);
        if (it == truth.end()) throw Error(Errc::MissingLabel, cid, "no reference label for " + cid);
        const double rate = rates.count(who->id) ? rates[who->id] : o->error_rate;
        Rng rng(o->seed ^ fnv1a64(who->id + "/" + cid));
        const bool flip = rng.uniform() < rate;
        backend->submit(*who, cid, flip ? label_from_bool(it->second == Label::non_cyberbullying) : it->second);
        ++submitted;
        progress = true;
      }
    }
    if (store) store->close();
    std::cout << fmt::format("submitted {} annotations; {} annotators locked out\n", submitted, locked.size());
  });
}

// ---------------------------------------------------------------------------
// export

void add_export(CLI::App& app) {
  struct Opts {
    fs::path data_dir, out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("export", "Write the resolved dataset");
  sub->add_option("--data-dir", o->data_dir, "Project directory (default: $CBWATCH_DATA_DIR)");
  sub->add_option("--out", o->out, "Dataset file")->required();
  sub->callback([o] {
    StoreOptions so;
    so.data_dir = o->data_dir.empty() ? default_data_dir() : o->data_dir;
    auto store = ProjectStore::open(so);
    const ExportSummary s = store->export_dataset(o->out);
    store->close();
    Manifest("export").config("project", store->id()).input(so.data_dir / "project.json").output(o->out).write(
        o->out.string() + ".manifest.json");
    std::cout << fmt::format("exported {} items\n", s.lines) << to_json(s.stats).dump(2) << "\n";
  });
}

}  // namespace cbwatch::cli
