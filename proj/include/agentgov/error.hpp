#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agentgov {

enum class ErrorCode {
  ParseError,
  SchemaError,
  TypeMismatch,
  InvalidArgument,
  PreconditionViolation,
  NotFound,
  AlreadyResolved,
  Unauthorized,
  MissingRuleCitation,
  DeliberatorFailure,
  Timeout,
  TransportError,
  ParseFailure,
  StorageFailure,
};

/// Wire name of an error code, e.g. "SCHEMA_ERROR".
std::string_view to_string(ErrorCode code) noexcept;

/// The single exception type thrown across the library. `subject` carries the
/// offending entity (a rule id, an escalation id, a raw model reply).
class GovernanceError : public std::runtime_error {
 public:
  GovernanceError(ErrorCode code, const std::string& message, std::string subject = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string subject_;
  std::string detail_;
};

}  // namespace agentgov
