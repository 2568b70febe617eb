#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "cbwatch/core.hpp"

namespace cbwatch {

enum class ChatRole { user, assistant };

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;
};

struct ChatRequest {
  std::string system;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 512;

  /// At least one user message and a non-negative temperature.
  void validate() const;
  /// Content of the final user message.
  const std::string& last_user_content() const;
};

enum class BackendKind { http, mock };

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1
  std::string api_key;
  std::string model_name = "llama3-chinese-8b";
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 2;
  int max_parallel = 4;
  std::chrono::milliseconds backoff_base{250};
  std::vector<std::string> lexicon;  // mock only; empty means the default list

  void validate() const;
};

/// Applies the CBWATCH_API_KEY environment override.
void apply_env_overrides(BackendConfig& cfg);

/// OpenAI-style chat-completion bodies.
json chat_request_body(const std::string& model, const ChatRequest& req);
/// Returns choices[0].message.content; throws ParseError.
std::string chat_response_content(const std::string& body);

struct HttpResponse {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// One POST. Implementations throw Error(Timeout) or Error(BackendUnreachable)
/// on transport failure and return any HTTP status as a response.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body, const Headers& headers,
                            std::chrono::milliseconds timeout) = 0;
};

std::shared_ptr<HttpTransport> make_httplib_transport();

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the assistant text. Safe to call concurrently.
  virtual std::string chat(const ChatRequest& req) = 0;
};

/// Keyword-lexicon classifier. The reply is a one-sentence explanation
/// followed by a final "Label: 0|1" line, computed from the last user message
/// only, so identical requests always give identical replies.
class MockChatClient final : public ChatClient {
 public:
  explicit MockChatClient(std::vector<std::string> lexicon = {});
  std::string chat(const ChatRequest& req) override;

  /// Earliest lexicon hit in `text`, or empty.
  std::string match(std::string_view text) const;

 private:
  std::vector<std::string> lexicon_;
};

class HttpChatClient final : public ChatClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpChatClient(BackendConfig cfg, std::shared_ptr<HttpTransport> transport, Sleeper sleeper = {});
  std::string chat(const ChatRequest& req) override;

  const BackendConfig& config() const { return cfg_; }

 private:
  std::string attempt(const std::string& url, const std::string& body, const Headers& headers);

  BackendConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  std::counting_semaphore<1024> slots_;
};

std::unique_ptr<ChatClient> make_chat_client(const BackendConfig& cfg);

/// One-shot convenience; the parallelism bound only applies within a client.
std::string chat(const BackendConfig& cfg, const ChatRequest& req);

}  // namespace cbwatch
