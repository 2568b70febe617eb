#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cbwatch/annotation.hpp"

namespace cbwatch {

struct TokenEntry {
  std::string id;
  std::string token;
  AnnotatorRole role = AnnotatorRole::annotator;
};

/// One entry per line: `id token [role]`, role one of annotator, reserve,
/// operator. Blank lines and lines starting with '#' are skipped.
/// Throws IoError, ParseError.
std::vector<TokenEntry> load_tokens(const std::filesystem::path& path);

/// Annotator and reserve entries in file order, for create_project.
std::vector<AnnotatorSpec> roster(const std::vector<TokenEntry>& tokens);

struct ServiceOptions {
  bool hide_suggestion = false;
  std::filesystem::path static_dir;  // UI bundle, served at /
  RuleConfig rules;
};

/// HTTP front end of one project store.
///
///   GET  /api/health
///   GET  /api/projects/{id}/tasks/next
///   POST /api/projects/{id}/annotations          {comment_id, label}
///   GET  /api/projects/{id}/progress
///   GET  /api/projects/{id}/incidents/{iid}/series
///   POST /api/projects/{id}/audit                 {n, seed[, verdicts]}   (operator)
///
/// Requests other than health carry `Authorization: Bearer <token>`.
class AnnotationServer {
 public:
  AnnotationServer(ProjectStore& store, std::vector<TokenEntry> tokens, ServiceOptions opts = {});
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Returns false when the port cannot be bound.
  bool bind(const std::string& host, int port);
  /// Binds an ephemeral port and returns it, or -1.
  int bind_any(const std::string& host);
  /// Serves until stop(); call after bind.
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cbwatch
