#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cbwatch {

enum class Errc {
  MissingField,
  EmptyText,
  BadTimestamp,
  UnknownEnum,
  IoError,
  ParseError,
  InfeasibleProfile,
  MissingLabel,
  InvalidArgument,
  // gateway
  Timeout,
  HttpStatus,
  BackendUnreachable,
  RateLimited,
  // labeler
  Unparseable,
  // annotation
  CorpusTooSmall,
  AnnotatorFlagged,
  UnknownAnnotator,
  DuplicateSubmission,
  NotAssigned,
  NotEnoughResolved,
  UnresolvedRemaining,
  CorruptLog,
  // incidents / forecasting
  EmptyIncident,
  UnknownIncident,
  SeriesTooShort,
  EmptyTrainSet,
  EmptyTestSet,
  DimensionMismatch,
  // metrics
  EmptyEvaluation,
  LengthMismatch,
  Empty,
  RowSumMismatch,
  TooFewRaters,
};

std::string_view errc_name(Errc code) noexcept;

/// Domain error. `subject` names the offending field, line, id or status code
/// depending on the error kind; it is empty when nothing more specific applies.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string subject, const std::string& message)
      : std::runtime_error(message), code_(code), subject_(std::move(subject)) {}
  Error(Errc code, const std::string& message) : Error(code, {}, message) {}

  Errc code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

  // Transport-level failures that leave the comment eligible for a retry.
  bool is_gateway_error() const noexcept {
    return code_ == Errc::Timeout || code_ == Errc::HttpStatus ||
           code_ == Errc::BackendUnreachable || code_ == Errc::RateLimited;
  }

 private:
  Errc code_;
  std::string subject_;
};

}  // namespace cbwatch
