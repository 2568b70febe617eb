#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbwatch/core.hpp"
#include "cbwatch/gateway.hpp"
#include "cbwatch/ingest.hpp"
#include "cbwatch/prompts.hpp"

namespace cbwatch {

struct ParsedReply {
  Label label = Label::non_cyberbullying;
  std::string explanation;
  bool fallback_used = false;
};

/// Reads the label off a model reply. A trailing "Label: 0|1" line (or a
/// trailing Cyberbullying / Non-Cyberbullying line) wins; otherwise the last
/// 200 characters are scanned for label keywords. Throws Unparseable.
ParsedReply parse_reply(std::string_view reply);

enum class EnsemblePolicy { majority, any_positive };

struct LabelerConfig {
  VotingConfig voting;
  EnsemblePolicy policy = EnsemblePolicy::majority;
  double temperature = 0.0;        // paraphraser and CoT
  double agent_temperature = 0.7;  // repeated agent runs
  int max_tokens = 512;
  bool all_templates = false;      // run all five CoT templates and majority-vote
};

struct Detection {
  Label label = Label::non_cyberbullying;
  Explanation explanation;
  bool fallback = false;
};

/// 5-shot conversational prompt: instruction, five worked exchanges, target.
ChatRequest paraphraser_request(const Comment& c, const PromptLibrary& lib, const LabelerConfig& cfg);
ChatRequest template_request(const std::string& tmpl, const Comment& c, const PromptLibrary& lib,
                             double temperature, int max_tokens);

Detection paraphrase_detect(const Comment& c, const PromptLibrary& lib, ChatClient& client,
                            const LabelerConfig& cfg = {});

/// CoT template for a comment when none is forced: FNV-1a of the id mod 5, plus 1.
int default_cot_template(const std::string& comment_id);

/// `template_index` in 1..5; throws InvalidArgument otherwise.
Detection cot_detect(const Comment& c, int template_index, const PromptLibrary& lib, ChatClient& client,
                     const LabelerConfig& cfg = {});

/// Cyberbullying iff at least internal_threshold of the runs say so.
/// Throws InvalidArgument unless exactly internal_runs labels are given.
Label internal_vote(std::span<const Label> run_labels, const VotingConfig& cfg);
/// Cyberbullying iff at least external_threshold agents say so.
Label external_vote(std::span<const Label> agent_labels, const VotingConfig& cfg);

struct MultiAgentResult {
  Label label = Label::non_cyberbullying;
  std::vector<Label> agent_labels;
  std::vector<Explanation> explanations;  // one per agent
  std::vector<bool> agent_flagged;        // every run unparseable
  bool fallback = false;
};

MultiAgentResult multi_agent_detect(const Comment& c, const PromptLibrary& lib, ChatClient& client,
                                    const LabelerConfig& cfg = {});

/// Combines three method votes with weight 1 each.
Label combine_votes(Label para, Label cot, Label agents, EnsemblePolicy policy = EnsemblePolicy::majority);

/// Runs `method` (all three for `ensemble`). Gateway errors propagate.
PseudoLabel label_comment(const Comment& c, const PromptLibrary& lib, ChatClient& client,
                          const LabelerConfig& cfg = {}, LabelMethod method = LabelMethod::ensemble);

PseudoLabel ensemble_label(const Comment& c, const PromptLibrary& lib, ChatClient& client,
                           const LabelerConfig& cfg = {});

/// Chat calls per comment: 1 paraphraser + 1 (or 5) CoT + agents x runs.
int chat_calls_per_comment(const LabelerConfig& cfg, LabelMethod method = LabelMethod::ensemble);

struct LabelRunOptions {
  std::filesystem::path output;   // PseudoLabel lines, in corpus order
  std::filesystem::path journal;  // {comment_id, status} lines
  LabelMethod method = LabelMethod::ensemble;
  int workers = 1;
  std::optional<std::size_t> limit;  // stop after this many newly labeled comments
  std::function<void(std::size_t done, std::size_t total)> on_progress;
};

struct LabelFailure {
  std::string comment_id;
  std::string message;
};

struct LabelRunReport {
  std::size_t labeled = 0;   // newly labeled in this run
  std::size_t resumed = 0;   // already done according to the journal
  std::size_t chat_calls = 0;
  std::vector<LabelFailure> failures;
};

/// Labels every comment not yet marked done in the journal. Output and journal
/// lines are committed in corpus order after each comment; a failed comment is
/// retried once at the end and then reported without stopping the batch.
LabelRunReport label_corpus(const Corpus& corpus, const PromptLibrary& lib, ChatClient& client,
                            const LabelerConfig& cfg, const LabelRunOptions& opts);

std::vector<PseudoLabel> load_pseudo_labels(const std::filesystem::path& path);

}  // namespace cbwatch
