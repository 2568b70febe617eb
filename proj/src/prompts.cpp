#include "cbwatch/prompts.hpp"

#include <fmt/format.h>

#include "cbwatch/jsonl.hpp"

namespace cbwatch {

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  lib.version = "1";
  lib.paraphraser_instruction =
      "Please provide an explanation of the text and predict whether it is cyberbullying.";
  lib.reply_format =
      "Finish your answer with a final line of the form \"Label: 1\" for cyberbullying or "
      "\"Label: 0\" for non-cyberbullying.";
  lib.few_shot = {{
      {"这种人就是个废物，赶紧滚出网络吧",
       "评论用“废物”辱骂他人，并要求对方离开网络，是针对个人的侮辱和排斥。\nLabel: 1"},
      {"希望官方尽快公布调查结果，大家理性讨论",
       "评论呼吁理性讨论、等待官方调查结果，没有攻击任何人。\nLabel: 0"},
      {"长得这么丑还好意思出来直播，丢人现眼",
       "评论嘲讽他人外貌并进行羞辱，属于人身攻击。\nLabel: 1"},
      {"这个判决结果我不太认同，但还是尊重法律",
       "评论表达了不同意见，但语气克制，没有针对个人的攻击。\nLabel: 0"},
      {"评论区一群傻子，什么都不懂就跟着骂",
       "评论用“傻子”贬低一群网友，带有侮辱性，属于网络欺凌。\nLabel: 1"},
  }};
  lib.cot_templates = {
      "Please analyze the following comment step-by-step. First, identify if there are any offensive "
      "or harmful words. Second, determine if the comment targets an individual or group. Finally, "
      "decide if it constitutes cyberbullying.",
      "Evaluate the following online comment. Start by examining the tone and wording. Then, assess "
      "the intent and potential emotional impact on the recipient. Conclude whether the comment is "
      "cyberbullying.",
      "This comment was posted in the context of a trending event. Please break down the statement, "
      "identify any signs of aggression or personal attack, and make a final judgment on whether it's "
      "cyberbullying.",
      "Given the text below, follow these steps: (1) Look for negative or abusive language (2) "
      "Determine if there is a target (3) Assess the severity and impact (4) Provide a decision on "
      "cyberbullying.",
      "Analyze the user's comment carefully. Begin by detecting any offensive language. Then check "
      "whether it's directed at someone. Explain your reasoning before classifying the comment as "
      "bullying or not.",
  };
  lib.agent_templates = {
      "Read the following comment and determine whether it contains any form of cyberbullying. "
      "Provide your reasoning and output a final label: \"Cyberbullying\" or \"Non-Cyberbullying\".",
      "Analyze the text below and decide if it exhibits cyberbullying behavior. Explain your "
      "reasoning and give a label (\"1\" for cyberbullying, \"0\" for non-cyberbullying).",
      "You are an expert in online safety. Review the comment and judge whether it should be "
      "classified as cyberbullying. Justify your answer and output the classification result.",
      "Evaluate the given comment and assess whether it constitutes cyberbullying. Include your "
      "reasoning process and conclude with a label: cyberbullying or not.",
      "Determine if the following comment is an instance of cyberbullying. Write a brief explanation "
      "and assign a label (Cyberbullying/Non-Cyberbullying).",
  };
  return lib;
}

json PromptLibrary::to_json() const {
  json shots = json::array();
  for (const auto& s : few_shot) shots.push_back({{"comment", s.comment}, {"reply", s.reply}});
  return json{{"version", version},
              {"paraphraser_instruction", paraphraser_instruction},
              {"reply_format", reply_format},
              {"few_shot", shots},
              {"few_shot_note", "hand-written examples, not taken from any published source"},
              {"cot_templates", cot_templates},
              {"agent_templates", agent_templates}};
}

void PromptLibrary::validate() const {
  if (paraphraser_instruction.empty())
    throw Error(Errc::InvalidArgument, "paraphraser_instruction", "empty paraphraser instruction");
  for (const auto& s : few_shot)
    if (s.comment.empty() || s.reply.empty())
      throw Error(Errc::InvalidArgument, "few_shot", "few-shot pairs need a comment and a reply");
  for (const auto& t : cot_templates)
    if (t.empty()) throw Error(Errc::InvalidArgument, "cot_templates", "empty CoT template");
  for (const auto& t : agent_templates)
    if (t.empty()) throw Error(Errc::InvalidArgument, "agent_templates", "empty agent template");
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, path.string(), fmt::format("{}: {}", path.string(), e.what()));
  }
  PromptLibrary lib;
  try {
    lib.version = j.at("version").get<std::string>();
    lib.paraphraser_instruction = j.at("paraphraser_instruction").get<std::string>();
    lib.reply_format = j.value("reply_format", std::string{});
    const auto& shots = j.at("few_shot");
    const auto& cot = j.at("cot_templates");
    const auto& agents = j.at("agent_templates");
    if (shots.size() != 5 || cot.size() != 5 || agents.size() != 5)
      throw Error(Errc::ParseError, path.string(),
                  "prompt file needs exactly 5 few-shot pairs, 5 CoT templates and 5 agent templates");
    for (std::size_t i = 0; i < 5; ++i) {
      lib.few_shot[i] = {shots[i].at("comment").get<std::string>(), shots[i].at("reply").get<std::string>()};
      lib.cot_templates[i] = cot[i].get<std::string>();
      lib.agent_templates[i] = agents[i].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string(), fmt::format("{}: {}", path.string(), e.what()));
  }
  lib.validate();
  return lib;
}

}  // namespace cbwatch
