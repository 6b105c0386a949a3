#include "agentgov/error.hpp"

namespace agentgov {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::SchemaError: return "SCHEMA_ERROR";
    case ErrorCode::TypeMismatch: return "TYPE_MISMATCH";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::PreconditionViolation: return "PRECONDITION_VIOLATION";
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::AlreadyResolved: return "ALREADY_RESOLVED";
    case ErrorCode::Unauthorized: return "UNAUTHORIZED";
    case ErrorCode::MissingRuleCitation: return "MISSING_RULE_CITATION";
    case ErrorCode::DeliberatorFailure: return "DELIBERATOR_FAILURE";
    case ErrorCode::Timeout: return "TIMEOUT";
    case ErrorCode::TransportError: return "TRANSPORT_ERROR";
    case ErrorCode::ParseFailure: return "PARSE_FAILURE";
    case ErrorCode::StorageFailure: return "STORAGE_FAILURE";
  }
  return "UNKNOWN";
}

GovernanceError::GovernanceError(ErrorCode code, const std::string& message, std::string subject)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      subject_(std::move(subject)),
      detail_(message) {}

}  // namespace agentgov
