#include "cbwatch/gateway.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "cbwatch/lexicon.hpp"

namespace cbwatch {

void ChatRequest::validate() const {
  const bool has_user = std::any_of(messages.begin(), messages.end(),
                                    [](const ChatMessage& m) { return m.role == ChatRole::user; });
  if (!has_user) throw Error(Errc::InvalidArgument, "messages", "chat request needs a user message");
  if (temperature < 0) throw Error(Errc::InvalidArgument, "temperature", "temperature must be >= 0");
}

const std::string& ChatRequest::last_user_content() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it)
    if (it->role == ChatRole::user) return it->content;
  throw Error(Errc::InvalidArgument, "messages", "chat request needs a user message");
}

void BackendConfig::validate() const {
  if (kind == BackendKind::http && base_url.empty())
    throw Error(Errc::InvalidArgument, "base_url", "http backend requires a base URL");
  if (max_parallel < 1) throw Error(Errc::InvalidArgument, "max_parallel", "max_parallel must be >= 1");
  if (max_parallel > 1024) throw Error(Errc::InvalidArgument, "max_parallel", "max_parallel must be <= 1024");
  if (max_retries < 0) throw Error(Errc::InvalidArgument, "max_retries", "max_retries must be >= 0");
}

void apply_env_overrides(BackendConfig& cfg) {
  if (const char* key = std::getenv("CBWATCH_API_KEY"); key && *key) cfg.api_key = key;
}

json chat_request_body(const std::string& model, const ChatRequest& req) {
  json messages = json::array();
  if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
  for (const auto& m : req.messages)
    messages.push_back({{"role", m.role == ChatRole::user ? "user" : "assistant"}, {"content", m.content}});
  return json{{"model", model},
              {"messages", messages},
              {"temperature", req.temperature},
              {"max_tokens", req.max_tokens},
              {"stream", false}};
}

std::string chat_response_content(const std::string& body) {
  try {
    const json j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, "response", fmt::format("unexpected chat response: {}", e.what()));
  }
}

// ---------------------------------------------------------------------------

MockChatClient::MockChatClient(std::vector<std::string> lexicon) : lexicon_(std::move(lexicon)) {
  if (lexicon_.empty())
    for (auto term : kDefaultOffensiveLexicon) lexicon_.emplace_back(term);
}

std::string MockChatClient::match(std::string_view text) const {
  std::size_t best_pos = std::string_view::npos;
  std::string best;
  for (const auto& term : lexicon_) {
    if (term.empty()) continue;
    const auto pos = text.find(term);
    if (pos == std::string_view::npos) continue;
    if (pos < best_pos || (pos == best_pos && term.size() > best.size())) {
      best_pos = pos;
      best = term;
    }
  }
  return best;
}

std::string MockChatClient::chat(const ChatRequest& req) {
  req.validate();
  const std::string hit = match(req.last_user_content());
  if (!hit.empty())
    return fmt::format("该评论包含侮辱性词语“{}”，带有明显的人身攻击意味，属于网络欺凌。\nLabel: 1", hit);
  return "该评论语气平和，未发现侮辱性或攻击性表达，不属于网络欺凌。\nLabel: 0";
}

// ---------------------------------------------------------------------------

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const std::string& body, const Headers& headers,
                    std::chrono::milliseconds timeout) override {
    // split "scheme://host[:port]" from the path
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    if (!client.is_valid()) throw Error(Errc::BackendUnreachable, url, "invalid backend URL " + url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
        throw Error(Errc::Timeout, url, fmt::format("request to {} timed out", url));
      throw Error(Errc::BackendUnreachable, url,
                  fmt::format("cannot reach {}: {}", url, httplib::to_string(err)));
    }
    return {res->status, res->body};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_httplib_transport() { return std::make_shared<HttplibTransport>(); }

HttpChatClient::HttpChatClient(BackendConfig cfg, std::shared_ptr<HttpTransport> transport, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      slots_(std::clamp(cfg_.max_parallel, 1, 1024)) {
  cfg_.validate();
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpChatClient::attempt(const std::string& url, const std::string& body, const Headers& headers) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};
  const HttpResponse res = transport_->post(url, body, headers, cfg_.timeout);
  if (res.status == 429) throw Error(Errc::RateLimited, "429", "backend rate limited the request");
  if (res.status < 200 || res.status >= 300)
    throw Error(Errc::HttpStatus, std::to_string(res.status),
                fmt::format("backend returned HTTP {}", res.status));
  return chat_response_content(res.body);
}

std::string HttpChatClient::chat(const ChatRequest& req) {
  req.validate();
  std::string url = cfg_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";
  const std::string body = chat_request_body(cfg_.model_name, req).dump();
  Headers headers{{"Accept", "application/json"}};
  if (!cfg_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + cfg_.api_key);
  spdlog::debug("POST {} (auth: {}) body={}", url, cfg_.api_key.empty() ? "none" : "Bearer ***", body);

  for (int attempt_no = 0;; ++attempt_no) {
    try {
      return attempt(url, body, headers);
    } catch (const Error& e) {
      const bool retriable = e.code() == Errc::Timeout || e.code() == Errc::BackendUnreachable ||
                             e.code() == Errc::RateLimited ||
                             (e.code() == Errc::HttpStatus && e.subject().starts_with('5'));
      if (!retriable || attempt_no >= cfg_.max_retries) throw;
      const auto delay = cfg_.backoff_base * (1 << attempt_no);
      spdlog::debug("attempt {} failed ({}), retrying in {} ms", attempt_no + 1, e.what(), delay.count());
      sleeper_(delay);
    }
  }
}

std::unique_ptr<ChatClient> make_chat_client(const BackendConfig& cfg) {
  cfg.validate();
  if (cfg.kind == BackendKind::mock) return std::make_unique<MockChatClient>(cfg.lexicon);
  return std::make_unique<HttpChatClient>(cfg, make_httplib_transport());
}

std::string chat(const BackendConfig& cfg, const ChatRequest& req) { return make_chat_client(cfg)->chat(req); }

}  // namespace cbwatch
