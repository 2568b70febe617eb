#include "common.hpp"

#include <cstdlib>

#include "cbwatch/digest.hpp"
#include "cbwatch/jsonl.hpp"

namespace cbwatch::cli {

Manifest::Manifest(std::string stage) {
  doc_ = json{{"stage", std::move(stage)},
              {"tool", "cbwatch"},
              {"config", json::object()},
              {"inputs", json::array()},
              {"outputs", json::array()}};
}

Manifest& Manifest::config(const std::string& key, json value) {
  doc_["config"][key] = std::move(value);
  return *this;
}

Manifest& Manifest::input(const std::filesystem::path& p) {
  doc_["inputs"].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  return *this;
}

Manifest& Manifest::output(const std::filesystem::path& p) {
  doc_["outputs"].push_back({{"path", p.filename().string()}, {"sha256", sha256_file(p)}});
  return *this;
}

void Manifest::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, doc_.dump(2) + '\n');
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("CBWATCH_DATA_DIR"); env && *env) return env;
  return "cbwatch-data";
}

LabeledCorpus load_labeled(const std::filesystem::path& dataset, const std::filesystem::path& corpus,
                           const std::filesystem::path& labels) {
  LabeledCorpus out;
  if (!dataset.empty()) {
    if (!corpus.empty() || !labels.empty()) throw UsageError("give either --dataset or --corpus with --labels");
    out.corpus = load_corpus(dataset);
    out.labels = load_labels(dataset);
    return out;
  }
  if (corpus.empty() || labels.empty()) throw UsageError("need --dataset, or --corpus together with --labels");
  out.corpus = load_corpus(corpus);
  out.labels = load_labels(labels);
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(',', start);
    const auto piece = trim(std::string_view(s).substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace cbwatch::cli
