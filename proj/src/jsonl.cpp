#include "cbwatch/jsonl.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace cbwatch {

void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, path.string(), "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(Errc::ParseError, std::to_string(lineno),
                  fmt::format("{}:{}: malformed record: {}", path.string(), lineno, e.what()));
    }
    fn(record, lineno);
  }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, tmp.string(), "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error(Errc::IoError, tmp.string(), "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, path.string(), "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, Label> load_labels(const std::filesystem::path& path) {
  std::map<std::string, Label> labels;
  read_jsonl(path, [&](const json& r, std::size_t lineno) {
    try {
      std::string id;
      int value;
      if (r.contains("final_label")) {
        id = r.at("id").get<std::string>();
        value = r.at("final_label").get<int>();
      } else if (r.contains("ensemble")) {
        id = r.at("comment_id").get<std::string>();
        value = r.at("ensemble").get<int>();
      } else {
        id = r.at("comment_id").get<std::string>();
        value = r.at("label").get<int>();
      }
      labels.emplace(id, label_from_int(value));
    } catch (const json::exception& e) {
      throw Error(Errc::ParseError, std::to_string(lineno),
                  fmt::format("{}:{}: bad label record: {}", path.string(), lineno, e.what()));
    } catch (const Error& e) {
      throw Error(Errc::ParseError, std::to_string(lineno),
                  fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  });
  return labels;
}

void save_labels(const std::filesystem::path& path, const std::map<std::string, Label>& labels) {
  std::vector<json> records;
  records.reserve(labels.size());
  for (const auto& [id, l] : labels) records.push_back({{"comment_id", id}, {"label", to_int(l)}});
  write_jsonl(path, records);
}

}  // namespace cbwatch
