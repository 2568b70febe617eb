#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbwatch/core.hpp"
#include "cbwatch/ingest.hpp"

namespace cbwatch::cli {

/// Bad flags or configuration; exits with status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Exit status of the subcommand that ran.
inline int g_status = 0;

/// Records what a stage consumed and produced: the effective configuration
/// plus SHA-256 digests of every input and output file.
class Manifest {
 public:
  explicit Manifest(std::string stage);
  Manifest& config(const std::string& key, json value);
  Manifest& input(const std::filesystem::path& p);
  Manifest& output(const std::filesystem::path& p);
  /// Writes to `path`, replacing it.
  void write(const std::filesystem::path& path) const;

 private:
  json doc_;
};

std::filesystem::path default_data_dir();

/// Corpus and labels from either an exported dataset or a corpus plus a label file.
struct LabeledCorpus {
  Corpus corpus;
  std::map<std::string, Label> labels;
};
LabeledCorpus load_labeled(const std::filesystem::path& dataset, const std::filesystem::path& corpus,
                           const std::filesystem::path& labels);

std::vector<std::string> split_list(const std::string& s);

void add_synth(CLI::App& app);
void add_stats(CLI::App& app);
void add_label(CLI::App& app);
void add_serve(CLI::App& app);
void add_annotate(CLI::App& app);
void add_export(CLI::App& app);
void add_detect(CLI::App& app);
void add_forecast(CLI::App& app);
void add_eval(CLI::App& app);
void add_prompts(CLI::App& app);
void add_init(CLI::App& app);

}  // namespace cbwatch::cli
