#include "cbwatch/service.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

namespace cbwatch {

std::vector<TokenEntry> load_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, path.string(), "cannot open " + path.string());
  std::vector<TokenEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream fields{std::string(t)};
    TokenEntry e;
    std::string role, extra;
    fields >> e.id >> e.token >> role >> extra;
    if (e.token.empty() || !extra.empty())
      throw Error(Errc::ParseError, std::to_string(lineno),
                  fmt::format("{}:{}: expected `id token [role]`", path.string(), lineno));
    if (!role.empty()) {
      auto r = parse_annotator_role(role);
      if (!r)
        throw Error(Errc::ParseError, std::to_string(lineno),
                    fmt::format("{}:{}: unknown role {}", path.string(), lineno, role));
      e.role = *r;
    }
    for (const auto& prev : out)
      if (prev.token == e.token || prev.id == e.id)
        throw Error(Errc::ParseError, std::to_string(lineno),
                    fmt::format("{}:{}: duplicate id or token", path.string(), lineno));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<AnnotatorSpec> roster(const std::vector<TokenEntry>& tokens) {
  std::vector<AnnotatorSpec> out;
  for (const auto& t : tokens)
    if (t.role != AnnotatorRole::operator_) out.push_back({t.id, t.role});
  return out;
}

namespace {

int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownAnnotator: return 401;
    case Errc::AnnotatorFlagged:
    case Errc::NotAssigned: return 403;
    case Errc::UnknownIncident: return 404;
    case Errc::DuplicateSubmission:
    case Errc::NotEnoughResolved:
    case Errc::UnresolvedRemaining: return 409;
    case Errc::InvalidArgument:
    case Errc::ParseError: return 400;
    default: return 500;
  }
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send(res, status, json{{"error", code}, {"message", message}});
}

}  // namespace

struct AnnotationServer::Impl {
  ProjectStore& store;
  std::map<std::string, TokenEntry> by_token;
  ServiceOptions opts;
  httplib::Server http;

  Impl(ProjectStore& s, std::vector<TokenEntry> tokens, ServiceOptions o) : store(s), opts(std::move(o)) {
    for (auto& t : tokens) {
      if (t.role != AnnotatorRole::operator_ && !store.has_annotator(t.id)) {
        spdlog::warn("token for {} ignored: not in the project roster", t.id);
        continue;
      }
      by_token[t.token] = std::move(t);
    }
    // SO_REUSEPORT (the library default) would let a second server share a busy port.
    http.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    routes();
  }

  const TokenEntry* authenticate(const httplib::Request& req, httplib::Response& res) const {
    const std::string header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.size() > prefix.size() && header.compare(0, prefix.size(), prefix) == 0) {
      auto it = by_token.find(header.substr(prefix.size()));
      if (it != by_token.end()) return &it->second;
    }
    send_error(res, 401, "Unauthorized", "missing or unknown bearer token");
    return nullptr;
  }

  bool project_matches(const httplib::Request& req, httplib::Response& res) const {
    if (req.matches[1] == store.id()) return true;
    send_error(res, 404, "UnknownProject", "no project " + std::string(req.matches[1]));
    return false;
  }

  // Runs `fn` with domain errors mapped onto HTTP statuses.
  template <typename F>
  void guarded(httplib::Response& res, F&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), errc_name(e.code()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "BadRequest", e.what());
    }
  }

  void routes() {
    http.Get("/api/health", [](const httplib::Request&, httplib::Response& res) { send(res, 200, {{"ok", true}}); });

    http.Get(R"(/api/projects/([^/]+)/tasks/next)", [this](const httplib::Request& req, httplib::Response& res) {
      const TokenEntry* who = authenticate(req, res);
      if (!who || !project_matches(req, res)) return;
      if (who->role == AnnotatorRole::operator_) return send_error(res, 403, "Forbidden", "operators do not annotate");
      guarded(res, [&] {
        const NextTask next = store.next_task(who->id, opts.hide_suggestion);
        if (const auto* t = std::get_if<Task>(&next))
          send(res, 200, to_json(*t));
        else
          send(res, 200, json{{"done", true}, {"submitted", std::get<Done>(next).submitted}});
      });
    });

    http.Post(R"(/api/projects/([^/]+)/annotations)", [this](const httplib::Request& req, httplib::Response& res) {
      const TokenEntry* who = authenticate(req, res);
      if (!who || !project_matches(req, res)) return;
      if (who->role == AnnotatorRole::operator_) return send_error(res, 403, "Forbidden", "operators do not annotate");
      guarded(res, [&] {
        const json body = json::parse(req.body);
        const auto comment_id = body.at("comment_id").get<std::string>();
        const auto label = label_from_int(body.at("label").get<std::int64_t>());
        send(res, 200, to_json(store.submit(who->id, comment_id, label)));
      });
    });

    http.Get(R"(/api/projects/([^/]+)/progress)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authenticate(req, res) || !project_matches(req, res)) return;
      guarded(res, [&] { send(res, 200, to_json(store.progress())); });
    });

    http.Get(R"(/api/projects/([^/]+)/incidents/([^/]+)/series)",
             [this](const httplib::Request& req, httplib::Response& res) {
               if (!authenticate(req, res) || !project_matches(req, res)) return;
               guarded(res, [&] {
                 const IncidentSeries s = store.series(req.matches[2], opts.rules);
                 json body = to_json(s);
                 body["verdict"] = to_json(classify(s, opts.rules));
                 body["trend"] = trend_export(s);
                 send(res, 200, body);
               });
             });

    http.Post(R"(/api/projects/([^/]+)/audit)", [this](const httplib::Request& req, httplib::Response& res) {
      const TokenEntry* who = authenticate(req, res);
      if (!who || !project_matches(req, res)) return;
      if (who->role != AnnotatorRole::operator_) return send_error(res, 403, "Forbidden", "audit needs an operator token");
      guarded(res, [&] {
        const json body = json::parse(req.body);
        const auto n = body.at("n").get<std::size_t>();
        const auto seed = body.value("seed", std::uint64_t{0});
        const AuditSheet sheet = store.audit_sample(n, seed);
        if (!body.contains("verdicts")) return send(res, 200, to_json(sheet));
        std::map<std::string, bool> verdicts;
        for (const auto& [id, ok] : body.at("verdicts").items()) verdicts[id] = ok.get<bool>();
        json out = to_json(audit_score(sheet, verdicts));
        send(res, 200, out);
      });
    });

    if (!opts.static_dir.empty()) {
      if (!http.set_mount_point("/", opts.static_dir.string()))
        spdlog::warn("UI directory {} not found; static files disabled", opts.static_dir.string());
    }

    http.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });
  }
};

AnnotationServer::AnnotationServer(ProjectStore& store, std::vector<TokenEntry> tokens, ServiceOptions opts)
    : impl_(std::make_unique<Impl>(store, std::move(tokens), std::move(opts))) {}

AnnotationServer::~AnnotationServer() { stop(); }

bool AnnotationServer::bind(const std::string& host, int port) { return impl_->http.bind_to_port(host, port); }

int AnnotationServer::bind_any(const std::string& host) { return impl_->http.bind_to_any_port(host); }

void AnnotationServer::run() { impl_->http.listen_after_bind(); }

void AnnotationServer::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

void AnnotationServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace cbwatch
