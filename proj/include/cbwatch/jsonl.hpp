#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cbwatch/core.hpp"

namespace cbwatch {

/// Calls `fn(record, line_number)` for every non-blank line. Lines are
/// numbered from 1. Throws IoError or ParseError(line).
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const json&, std::size_t)>& fn);

/// Writes one compact record per line, replacing the file.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

/// {comment_id, label} records. Accepts plain label files, pseudo-label
/// files (uses `ensemble`) and exported datasets (uses `final_label`).
std::map<std::string, Label> load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const std::map<std::string, Label>& labels);

}  // namespace cbwatch
