#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "cbwatch/core.hpp"

namespace cbwatch {

struct FewShotExample {
  std::string comment;
  std::string reply;
};

/// Prompt texts for the three detection methods. The CoT and agent templates
/// are kept word for word; the few-shot pairs are hand-written examples.
struct PromptLibrary {
  std::string version;
  std::string paraphraser_instruction;
  std::string reply_format;  // appended so replies end with a parseable label line
  std::array<FewShotExample, 5> few_shot;
  std::array<std::string, 5> cot_templates;
  std::array<std::string, 5> agent_templates;

  static PromptLibrary builtin();
  /// Throws IoError / ParseError.
  static PromptLibrary load(const std::filesystem::path& path);

  json to_json() const;
  void validate() const;
};

}  // namespace cbwatch
