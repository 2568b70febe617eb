#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "cbwatch/core.hpp"
#include "cbwatch/gateway.hpp"
#include "cbwatch/ingest.hpp"
#include "cbwatch/prompts.hpp"

namespace cbwatch::testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cbwatch-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Answers every request through a callback; counts calls.
class FakeClient final : public ChatClient {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  explicit FakeClient(Fn fn) : fn_(std::move(fn)) {}
  std::string chat(const ChatRequest& req) override {
    ++calls;
    return fn_(req);
  }
  std::atomic<int> calls{0};

 private:
  Fn fn_;
};

inline std::string reply_for(Label l) { return l == Label::cyberbullying ? "x\nLabel: 1" : "x\nLabel: 0"; }

/// Which agent (1..5) a request belongs to, or 0 for the paraphraser and CoT.
inline int agent_of(const ChatRequest& req, const PromptLibrary& lib) {
  if (req.messages.size() != 1) return 0;
  const std::string& content = req.messages.front().content;
  for (std::size_t i = 0; i < lib.agent_templates.size(); ++i)
    if (content.rfind(lib.agent_templates[i], 0) == 0) return static_cast<int>(i) + 1;
  return 0;
}

inline Comment make_comment(const std::string& id, const std::string& text, Timestamp ts = 1700000000,
                            const std::string& incident = "e1") {
  Comment c;
  c.id = id;
  c.incident_id = incident;
  c.text = text;
  c.timestamp = ts;
  c.platform = Platform::weibo;
  c.genre = Genre::society;
  return c;
}

/// A pseudo label whose three methods all vote `l`, with explanations.
inline PseudoLabel pseudo_for(const std::string& id, Label l) {
  PseudoLabel p;
  p.comment_id = id;
  p.para = {l, {{Method::paraphraser, 0, "para " + id}}, false};
  p.cot = {l, {{Method::cot, 1, "cot " + id}}, false};
  std::vector<Explanation> agents;
  for (int i = 1; i <= 5; ++i) agents.push_back({Method::agent, i, "agent " + std::to_string(i) + " " + id});
  p.agents = {l, agents, false};
  p.agent_labels.fill(l);
  p.ensemble = l;
  p.vote_count = 3 * to_int(l);
  return p;
}

}  // namespace cbwatch::testing

namespace tst = cbwatch::testing;
