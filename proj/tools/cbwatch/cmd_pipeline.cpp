#include <fstream>
#include <iostream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cbwatch/digest.hpp"
#include "cbwatch/forecast.hpp"
#include "cbwatch/gateway.hpp"
#include "cbwatch/incident.hpp"
#include "cbwatch/jsonl.hpp"
#include "cbwatch/labeler.hpp"
#include "cbwatch/metrics.hpp"
#include "cbwatch/prompts.hpp"
#include "cbwatch/random.hpp"
#include "common.hpp"

namespace cbwatch::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// synth

void add_synth(CLI::App& app) {
  struct Opts {
    std::string kind = "mixed";
    int events = 1;
    std::uint64_t seed = 7;
    fs::path out;
    int comments = 2425;
    int hours = 48;
    double bullying_proportion = 0.2576;
    double normal_proportion = 0.0885;
    double peak_intensity = 0.7;
    double peak_share = 0.07;
    int cluster_hours = 5;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("synth", "Generate synthetic incident corpora with ground-truth labels");
  sub->add_option("--kind", o->kind, "bullying, normal, or mixed (alternating, starting with bullying)")
      ->check(CLI::IsMember({"bullying", "normal", "mixed"}))
      ->capture_default_str();
  sub->add_option("--events", o->events, "Number of incidents")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_option("--comments", o->comments, "Comments per incident")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--hours", o->hours, "Hours per incident")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--bullying-proportion", o->bullying_proportion)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--normal-proportion", o->normal_proportion)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--peak-intensity", o->peak_intensity, "Offensive ratio inside the peak hour")->capture_default_str();
  sub->add_option("--peak-share", o->peak_share, "Peak-hour offensive comments over all comments")->capture_default_str();
  sub->add_option("--cluster-hours", o->cluster_hours, "Hours above 50% offensive")->capture_default_str();

  sub->callback([o] {
    fs::create_directories(o->out);
    std::vector<Comment> all;
    std::vector<json> gold_lines, incident_lines;
    for (int i = 1; i <= o->events; ++i) {
      const bool bullying = o->kind == "bullying" || (o->kind == "mixed" && i % 2 == 1);
      SynthProfile p = bullying ? SynthProfile::bullying(o->seed) : SynthProfile::normal(o->seed);
      p.incident_id = fmt::format("ev{:02}", i);
      p.genre = kAllGenres[static_cast<std::size_t>(i - 1) % kAllGenres.size()];
      p.n_comments = o->comments;
      p.duration_hours = o->hours;
      p.start = 1699999200 + static_cast<Timestamp>(i - 1) * 86400 * 3;
      if (bullying) {
        p.offensive_proportion = o->bullying_proportion;
        p.peak_intensity = o->peak_intensity;
        p.peak_share = o->peak_share;
        p.cluster_hours = o->cluster_hours;
      } else {
        p.offensive_proportion = o->normal_proportion;
      }
      Rng rng(o->seed ^ fnv1a64("peak:" + p.incident_id));
      p.peak_hour = o->hours >= 24 ? 6 + static_cast<int>(rng.below(static_cast<std::uint64_t>(o->hours - 12)))
                                   : o->hours / 2;
      SynthResult r = generate_synthetic(p);
      std::size_t offensive = 0;
      for (const auto& c : r.corpus.comments) {
        const Label l = r.gold.at(c.id);
        offensive += l == Label::cyberbullying;
        gold_lines.push_back({{"comment_id", c.id}, {"label", to_int(l)}});
        all.push_back(c);
      }
      incident_lines.push_back({{"incident_id", p.incident_id},
                                {"kind", bullying ? "bullying" : "normal"},
                                {"genre", to_string(p.genre)},
                                {"comments", r.corpus.size()},
                                {"offensive", offensive},
                                {"peak_hour", p.peak_hour},
                                {"start", p.start}});
      spdlog::info("{}: {} comments, {} offensive ({})", p.incident_id, r.corpus.size(), offensive,
                   bullying ? "bullying" : "normal");
    }
    const Corpus corpus = Corpus::from_comments(std::move(all));
    save_corpus(o->out / "corpus.jsonl", corpus);
    write_jsonl(o->out / "gold.jsonl", gold_lines);
    write_jsonl(o->out / "incidents.jsonl", incident_lines);
    Manifest("synth")
        .config("kind", o->kind)
        .config("events", o->events)
        .config("seed", o->seed)
        .config("comments", o->comments)
        .config("hours", o->hours)
        .config("bullying_proportion", o->bullying_proportion)
        .config("normal_proportion", o->normal_proportion)
        .config("peak_intensity", o->peak_intensity)
        .config("peak_share", o->peak_share)
        .config("cluster_hours", o->cluster_hours)
        .output(o->out / "corpus.jsonl")
        .output(o->out / "gold.jsonl")
        .output(o->out / "incidents.jsonl")
        .write(o->out / "manifest.synth.json");
    std::cout << fmt::format("wrote {} comments in {} incidents to {}\n", corpus.size(), o->events, o->out.string());
  });
}

// ---------------------------------------------------------------------------
// stats

void add_stats(CLI::App& app) {
  struct Opts {
    fs::path dataset, corpus, labels;
    std::string format = "json";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("stats", "Corpus statistics: share offensive, lengths, per-incident proportions");
  sub->add_option("--dataset", o->dataset, "Exported dataset (uses final_label)");
  sub->add_option("--corpus", o->corpus);
  sub->add_option("--labels", o->labels, "Label file: gold, pseudo labels or export");
  sub->add_option("--format", o->format)->check(CLI::IsMember({"json", "tsv"}))->capture_default_str();
  sub->callback([o] {
    const auto lc = load_labeled(o->dataset, o->corpus, o->labels);
    const StatReport r = corpus_stats(lc.corpus, lc.labels);
    std::cout << (o->format == "json" ? to_json(r).dump(2) + "\n" : to_tsv(r));
  });
}

// ---------------------------------------------------------------------------
// label

void add_label(CLI::App& app) {
  struct Opts {
    fs::path corpus, out, journal, prompts;
    bool resume = false;
    std::string backend = "mock", base_url, model = "llama3-chinese-8b", method = "ensemble";
    std::string voting = "majority", policy = "majority";
    int workers = 4;
    std::size_t limit = 0;
    bool all_templates = false;
    double temperature = 0.0, agent_temperature = 0.7;
    int max_tokens = 512, max_retries = 2, max_parallel = 4;
    double timeout = 60.0;
    std::optional<int> internal_threshold, external_threshold;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("label", "Pseudo-label a corpus with the explanation-based detectors");
  sub->add_option("--corpus", o->corpus)->required();
  sub->add_option("--out", o->out, "Pseudo-label output")->required();
  sub->add_option("--journal", o->journal, "Progress journal (default: <out>.journal)");
  sub->add_flag("--resume", o->resume, "Continue from the journal instead of starting over");
  sub->add_option("--backend", o->backend)->check(CLI::IsMember({"mock", "http"}))->capture_default_str();
  sub->add_option("--base-url", o->base_url, "Chat endpoint base, e.g. http://127.0.0.1:8000/v1");
  sub->add_option("--model", o->model)->capture_default_str();
  sub->add_option("--method", o->method)->check(CLI::IsMember({"para", "cot", "agents", "ensemble"}))->capture_default_str();
  sub->add_option("--prompts", o->prompts, "Prompt file (default: built-in prompt set)");
  sub->add_option("--voting", o->voting, "majority (2/3, 3/5) or unanimous (3/3, 5/5)")
      ->check(CLI::IsMember({"majority", "unanimous"}))
      ->capture_default_str();
  sub->add_option("--internal-threshold", o->internal_threshold, "Override the per-agent vote threshold");
  sub->add_option("--external-threshold", o->external_threshold, "Override the cross-agent vote threshold");
  sub->add_option("--policy", o->policy, "Ensemble rule: majority or any")
      ->check(CLI::IsMember({"majority", "any"}))
      ->capture_default_str();
  sub->add_flag("--all-templates", o->all_templates, "Run all five CoT templates and vote");
  sub->add_option("--temperature", o->temperature)->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--agent-temperature", o->agent_temperature)->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--max-tokens", o->max_tokens)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--workers", o->workers)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--limit", o->limit, "Label at most this many new comments");
  sub->add_option("--timeout", o->timeout, "Seconds per request")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--max-retries", o->max_retries)->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--max-parallel", o->max_parallel)->check(CLI::PositiveNumber)->capture_default_str();

  sub->callback([o] {
    BackendConfig backend;
    backend.kind = o->backend == "http" ? BackendKind::http : BackendKind::mock;
    backend.base_url = o->base_url;
    backend.model_name = o->model;
    backend.timeout = std::chrono::milliseconds(static_cast<long>(o->timeout * 1000));
    backend.max_retries = o->max_retries;
    backend.max_parallel = o->max_parallel;
    apply_env_overrides(backend);
    LabelerConfig cfg;
    cfg.voting = o->voting == "unanimous" ? VotingConfig::unanimous() : VotingConfig::majority();
    if (o->internal_threshold) cfg.voting.internal_threshold = *o->internal_threshold;
    if (o->external_threshold) cfg.voting.external_threshold = *o->external_threshold;
    cfg.policy = o->policy == "any" ? EnsemblePolicy::any_positive : EnsemblePolicy::majority;
    cfg.temperature = o->temperature;
    cfg.agent_temperature = o->agent_temperature;
    cfg.max_tokens = o->max_tokens;
    cfg.all_templates = o->all_templates;
    try {
      backend.validate();
      cfg.voting.validate();
    } catch (const Error& e) {
      throw UsageError(std::string("configuration: ") + e.what());
    }
    const PromptLibrary lib = o->prompts.empty() ? PromptLibrary::builtin() : PromptLibrary::load(o->prompts);
    const Corpus corpus = load_corpus(o->corpus);
    const fs::path journal = o->journal.empty() ? fs::path(o->out.string() + ".journal") : o->journal;
    if (!o->resume) {
      fs::remove(o->out);
      fs::remove(journal);
    }
    LabelRunOptions run;
    run.output = o->out;
    run.journal = journal;
    run.method = *parse_label_method(o->method);
    run.workers = o->workers;
    if (o->limit > 0) run.limit = o->limit;
    run.on_progress = [](std::size_t done, std::size_t total) {
      if (done % 500 == 0 || done == total) spdlog::info("labeled {}/{}", done, total);
    };
    auto client = make_chat_client(backend);
    spdlog::info("{} chat calls per comment", chat_calls_per_comment(cfg, run.method));
    const LabelRunReport report = label_corpus(corpus, lib, *client, cfg, run);
    for (const auto& f : report.failures) std::cerr << fmt::format("failed: {}: {}\n", f.comment_id, f.message);
    std::cout << fmt::format("labeled {} new, {} resumed, {} failed, {} chat calls\n", report.labeled, report.resumed,
                             report.failures.size(), report.chat_calls);

    Manifest m("label");
    m.config("backend", o->backend)
        .config("base_url", o->base_url)
        .config("model", o->model)
        .config("method", o->method)
        .config("voting",
                {cfg.voting.num_agents, cfg.voting.internal_runs, cfg.voting.internal_threshold,
                 cfg.voting.external_threshold})
        .config("policy", o->policy)
        .config("all_templates", o->all_templates)
        .config("temperature", o->temperature)
        .config("agent_temperature", o->agent_temperature)
        .config("max_tokens", o->max_tokens)
        .config("prompts", lib.to_json())
        .input(o->corpus);
    if (fs::exists(o->out)) m.output(o->out);
    m.write(o->out.string() + ".manifest.json");
    if (!report.failures.empty()) g_status = 1;
  });
}

// ---------------------------------------------------------------------------
// detect

namespace {

void add_rule_flags(CLI::App* sub, RuleConfig& r, std::string& denominator, std::string& policy) {
  sub->add_option("--interval-seconds", r.interval_seconds)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--rule1-ratio", r.rule1_ratio, "Peak rule threshold")->capture_default_str();
  sub->add_option("--rule1-denominator", denominator, "total, cumulative or interval")
      ->check(CLI::IsMember({"total", "cumulative", "interval"}))
      ->capture_default_str();
  sub->add_option("--rule2-ratio", r.rule2_interval_ratio, "Per-interval offensive ratio for the cluster rule")
      ->capture_default_str();
  sub->add_option("--rule2-min-intervals", r.rule2_min_intervals)->capture_default_str();
  sub->add_option("--policy", policy, "any (either rule) or all (both rules)")
      ->check(CLI::IsMember({"any", "all"}))
      ->capture_default_str();
}

RuleConfig finish_rules(RuleConfig r, const std::string& denominator, const std::string& policy) {
  r.rule1_denominator = *parse_rule1_denominator(denominator);
  r.policy = policy == "all" ? VerdictPolicy::all_rules : VerdictPolicy::any_rule;
  try {
    r.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return r;
}

json rules_json(const RuleConfig& r) {
  return json{{"interval_seconds", r.interval_seconds},
              {"rule1_ratio", r.rule1_ratio},
              {"rule1_denominator", to_string(r.rule1_denominator)},
              {"rule2_interval_ratio", r.rule2_interval_ratio},
              {"rule2_min_intervals", r.rule2_min_intervals},
              {"policy", r.policy == VerdictPolicy::all_rules ? "all" : "any"}};
}

}  // namespace

void add_detect(CLI::App& app) {
  struct Opts {
    fs::path dataset, corpus, labels, out;
    RuleConfig rules;
    std::string denominator = "total", policy = "any";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("detect", "Classify incidents with the peak and cluster rules");
  sub->add_option("--dataset", o->dataset, "Exported dataset");
  sub->add_option("--corpus", o->corpus);
  sub->add_option("--labels", o->labels);
  sub->add_option("--out", o->out, "Output directory for verdicts and trend tables")->required();
  add_rule_flags(sub, o->rules, o->denominator, o->policy);
  sub->callback([o] {
    const RuleConfig rules = finish_rules(o->rules, o->denominator, o->policy);
    const auto lc = load_labeled(o->dataset, o->corpus, o->labels);
    const auto series = build_all_series(lc.corpus, lc.labels, rules);
    std::vector<json> verdicts;
    fs::create_directories(o->out / "trends");
    Manifest m("detect");
    m.config("rules", rules_json(rules));
    for (const auto& p : {o->dataset, o->corpus, o->labels})
      if (!p.empty()) m.input(p);
    for (const auto& s : series) {
      const IncidentVerdict v = classify(s, rules);
      verdicts.push_back(to_json(v));
      const fs::path trend = o->out / "trends" / (s.incident_id + ".csv");
      write_file_atomic(trend, trend_export(s));
      m.output(trend);
      std::cout << fmt::format("{}\tverdict={}\trule1_hits={}\trule2_count={}\n", s.incident_id, v.verdict ? 1 : 0,
                               v.rule1_hits.size(), v.rule2_count);
    }
    write_jsonl(o->out / "verdicts.jsonl", verdicts);
    m.output(o->out / "verdicts.jsonl").write(o->out / "manifest.detect.json");
  });
}

// ---------------------------------------------------------------------------
// forecast

void add_forecast(CLI::App& app) {
  struct Opts {
    fs::path dataset, corpus, labels, incidents, out;
    std::string train, kinds = "nlinear,dlinear,persistence,moving_average", seeds = "1,2,3";
    ForecastConfig cfg;
    bool per_event = false, gradient = false;
    FitOptions fit;
    std::int64_t interval_seconds = 3600;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("forecast", "Sliding-window forecasting of hourly offensive counts");
  sub->add_option("--dataset", o->dataset, "Exported dataset");
  sub->add_option("--corpus", o->corpus);
  sub->add_option("--labels", o->labels);
  sub->add_option("--train-incidents", o->train, "Comma-separated training incident ids");
  sub->add_option("--incidents", o->incidents,
                  "incidents.jsonl from synth; picks 3 bullying and 2 normal training incidents when "
                  "--train-incidents is absent");
  sub->add_option("--kinds", o->kinds)->capture_default_str();
  sub->add_option("--window", o->cfg.window)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--kernel", o->cfg.dlinear_kernel, "DLinear moving-average kernel (odd)")->capture_default_str();
  sub->add_option("--lambda", o->cfg.ridge_lambda, "Ridge penalty")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--seeds", o->seeds)->capture_default_str();
  sub->add_option("--interval-seconds", o->interval_seconds)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_flag("--per-event", o->per_event, "One model per training incident, predictions averaged");
  sub->add_flag("--gradient", o->gradient, "Mini-batch Adam instead of the closed-form fit");
  sub->add_option("--epochs", o->fit.epochs, "Epochs per training incident (gradient mode)")->capture_default_str();
  sub->add_option("--lr", o->fit.learning_rate)->capture_default_str();
  sub->add_option("--batch-size", o->fit.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--out", o->out, "Directory for report.csv and report.json");
  sub->callback([o] {
    try {
      o->cfg.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    ExperimentOptions eo;
    eo.kinds.clear();
    for (const auto& k : split_list(o->kinds)) {
      auto kind = parse_forecast_kind(k);
      if (!kind) throw UsageError("unknown forecast kind " + k);
      eo.kinds.push_back(*kind);
    }
    eo.seeds.clear();
    for (const auto& s : split_list(o->seeds)) eo.seeds.push_back(std::stoull(s));
    eo.per_event = o->per_event;
    eo.fit = o->fit;
    eo.fit.mode = o->gradient ? FitMode::gradient : FitMode::closed_form;
    eo.train_incidents = split_list(o->train);
    if (eo.train_incidents.empty()) {
      if (o->incidents.empty()) throw UsageError("need --train-incidents or --incidents");
      std::vector<std::string> bullying, normal;
      read_jsonl(o->incidents, [&](const json& r, std::size_t) {
        (r.at("kind") == "bullying" ? bullying : normal).push_back(r.at("incident_id").get<std::string>());
      });
      for (std::size_t i = 0; i < 3 && i < bullying.size(); ++i) eo.train_incidents.push_back(bullying[i]);
      for (std::size_t i = 0; i < 2 && i < normal.size(); ++i) eo.train_incidents.push_back(normal[i]);
    }
    if (eo.train_incidents.size() != 5)
      spdlog::warn("{} training incidents given; the reference setup uses 5", eo.train_incidents.size());

    const auto lc = load_labeled(o->dataset, o->corpus, o->labels);
    RuleConfig rc;
    rc.interval_seconds = o->interval_seconds;
    const auto series = build_all_series(lc.corpus, lc.labels, rc);
    const ExperimentReport report = experiment(series, o->cfg, eo);
    std::cout << fmt::format("train: {} ({} windows)   test: {} incidents ({} windows)\n",
                             fmt::join(report.train_incidents, ","), report.train_pairs, report.test_incidents.size(),
                             report.test_pairs)
              << to_table(report);
    if (!o->out.empty()) {
      fs::create_directories(o->out);
      write_file_atomic(o->out / "report.csv", to_csv(report));
      write_file_atomic(o->out / "report.json", to_json(report).dump(2) + '\n');
      Manifest m("forecast");
      m.config("window", o->cfg.window)
          .config("kernel", o->cfg.dlinear_kernel)
          .config("lambda", o->cfg.ridge_lambda)
          .config("kinds", o->kinds)
          .config("seeds", eo.seeds)
          .config("train_incidents", eo.train_incidents)
          .config("per_event", o->per_event)
          .config("gradient", o->gradient)
          .config("epochs", o->fit.epochs)
          .config("lr", o->fit.learning_rate)
          .config("batch_size", o->fit.batch_size)
          .config("interval_seconds", o->interval_seconds);
      for (const auto& p : {o->dataset, o->corpus, o->labels, o->incidents})
        if (!p.empty()) m.input(p);
      m.output(o->out / "report.csv").output(o->out / "report.json").write(o->out / "manifest.forecast.json");
    }
  });
}

// ---------------------------------------------------------------------------
// eval

namespace {

// Comment-level label files, exports, or incident-level lines
// ({incident_id, verdict} from detect, {incident_id, kind} from synth).
std::map<std::string, Label> load_any_labels(const fs::path& path) {
  std::ifstream in(path);
  std::string first;
  if (!in || !std::getline(in, first)) return load_labels(path);
  const json probe = json::parse(first, nullptr, false);
  if (!probe.is_object() || !probe.contains("incident_id") || probe.contains("comment_id") || probe.contains("id"))
    return load_labels(path);
  std::map<std::string, Label> out;
  read_jsonl(path, [&](const json& r, std::size_t lineno) {
    bool positive = false;
    if (r.contains("verdict"))
      positive = r.at("verdict").get<bool>();
    else if (r.contains("kind"))
      positive = r.at("kind").get<std::string>() == "bullying";
    else
      throw Error(Errc::ParseError, std::to_string(lineno), "incident line has neither verdict nor kind");
    out[r.at("incident_id").get<std::string>()] = label_from_bool(positive);
  });
  return out;
}

}  // namespace

void add_eval(CLI::App& app) {
  auto* sub = app.add_subcommand("eval", "Detection scores and annotator agreement");
  sub->require_subcommand(1);

  struct DetOpts {
    fs::path pred, gold;
  };
  auto d = std::make_shared<DetOpts>();
  auto* det = sub->add_subcommand("detection", "Acc / precision / recall / F1 of predictions against gold");
  det->add_option("--pred", d->pred, "Predicted labels (pseudo labels, labels or export)")->required();
  det->add_option("--gold", d->gold, "Gold labels")->required();
  det->callback([d] {
    const auto pred = load_any_labels(d->pred);
    const auto gold = load_any_labels(d->gold);
    std::vector<Label> p, g;
    for (const auto& [id, label] : gold) {
      auto it = pred.find(id);
      if (it == pred.end()) throw Error(Errc::MissingLabel, id, "no prediction for " + id);
      p.push_back(it->second);
      g.push_back(label);
    }
    const ConfusionCounts c = confusion(p, g);
    std::cout << to_json(accuracy_f1(c), c).dump(2) << "\n";
  });

  struct AgrOpts {
    fs::path dataset;
    bool as_json = false;
  };
  auto a = std::make_shared<AgrOpts>();
  auto* agr = sub->add_subcommand("agreement", "Pairwise Cohen's kappa and Fleiss's kappa from exported votes");
  agr->add_option("--dataset", a->dataset, "Exported dataset or any file of {id, votes[]} lines")->required();
  agr->add_flag("--json", a->as_json);
  agr->callback([a] {
    // rater -> item -> label
    std::map<std::string, std::map<std::string, Label>> by_rater;
    std::vector<std::vector<int>> rows;
    std::map<std::size_t, std::size_t> votes_per_item;
    std::vector<std::vector<int>> all_rows;
    read_jsonl(a->dataset, [&](const json& r, std::size_t lineno) {
      const auto id = r.contains("id") ? r.at("id").get<std::string>() : r.at("comment_id").get<std::string>();
      if (!r.contains("votes")) throw Error(Errc::ParseError, std::to_string(lineno), "line has no votes");
      std::vector<int> row(2, 0);
      for (const auto& v : r.at("votes")) {
        const Label l = label_from_int(v.at("label").get<int>());
        by_rater[v.at("annotator_id").get<std::string>()][id] = l;
        ++row[static_cast<std::size_t>(to_int(l))];
      }
      ++votes_per_item[r.at("votes").size()];
      all_rows.push_back(row);
    });
    if (by_rater.size() < 2) throw Error(Errc::TooFewRaters, "agreement needs at least 2 raters");
    // Fleiss over the items carrying the most common number of votes.
    std::size_t n = 0, best = 0;
    for (const auto& [k, count] : votes_per_item)
      if (count > best) best = count, n = k;
    for (const auto& row : all_rows)
      if (static_cast<std::size_t>(row[0] + row[1]) == n) rows.push_back(row);

    AgreementReport report;
    for (const auto& [r, _] : by_rater) report.raters.push_back(r);
    for (auto i = by_rater.begin(); i != by_rater.end(); ++i)
      for (auto j = std::next(i); j != by_rater.end(); ++j) {
        std::vector<Label> x, y;
        for (const auto& [item, label] : i->second)
          if (auto it = j->second.find(item); it != j->second.end()) {
            x.push_back(label);
            y.push_back(it->second);
          }
        if (!x.empty()) report.pairwise[{i->first, j->first}] = cohen_kappa(x, y);
      }
    report.fleiss = fleiss_kappa(rows, static_cast<int>(n));
    std::cout << (a->as_json ? to_json(report).dump(2) + "\n" : to_table(report));
  });
}

// ---------------------------------------------------------------------------
// prompts

void add_prompts(CLI::App& app) {
  auto out = std::make_shared<fs::path>();
  auto* sub = app.add_subcommand("prompts", "Print the built-in prompt set as a prompt file");
  sub->add_option("--out", *out, "Write to a file instead of stdout");
  sub->callback([out] {
    const std::string body = PromptLibrary::builtin().to_json().dump(2) + '\n';
    if (out->empty())
      std::cout << body;
    else
      write_file_atomic(*out, body);
  });
}

}  // namespace cbwatch::cli
