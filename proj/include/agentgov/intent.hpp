#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentgov/value.hpp"

namespace agentgov {

enum class Outcome { Proceed, SelfCorrect, Escalate };

/// "PROCEED" | "SELF_CORRECT" | "ESCALATE"
std::string_view to_string(Outcome outcome) noexcept;
/// Case-insensitive; '-' and ' ' are accepted in place of '_'.
std::optional<Outcome> parse_outcome(std::string_view text) noexcept;

/// Human confirmation minted by an approved escalation for one rule.
struct ApprovalCredential {
  std::string rule_id;
  std::string token;
  bool operator==(const ApprovalCredential&) const = default;
};

/// A candidate action, submitted before it is executed.
struct IntentDescriptor {
  std::string intent_id;
  std::string agent_id;
  std::string workflow_id;
  std::string action_class;  // dotted taxonomy, e.g. "purchase_order.submit"
  std::string description;
  ParameterMap parameters;
  bool irreversible = false;
  std::vector<ParameterMap> alternatives;  // ordered candidate substitutions
  std::vector<ApprovalCredential> approvals;
  bool operator==(const IntentDescriptor&) const = default;
};

/// Throws INVALID_ARGUMENT when ids, action class or description are empty,
/// or when an alternative repeats the primary parameters.
void validate_intent(const IntentDescriptor& intent);

json to_json(const IntentDescriptor& intent);
/// Throws PARSE_ERROR.
IntentDescriptor intent_from_json(const json& j);
/// to_json with every presented approval token replaced by "<redacted>";
/// the form written to the audit log.
json redacted_json(const IntentDescriptor& intent);

/// SHA-256 over the canonical form of (agent, workflow, action class,
/// parameters). Description, alternatives and approvals are excluded so a
/// rephrased re-submission of the same action keeps its fingerprint.
std::string intent_fingerprint(const IntentDescriptor& intent);

enum class Confidence { Unambiguous, Uncertain };
std::string_view to_string(Confidence c) noexcept;

enum class TriggerKind { Prohibited, Irreversible, Uncertain };
std::string_view to_string(TriggerKind k) noexcept;
std::optional<TriggerKind> parse_trigger_kind(std::string_view text) noexcept;

/// What one deliberation round concluded.
struct DeliberationVerdict {
  Outcome outcome = Outcome::Escalate;
  std::string reasoning;
  std::vector<std::string> rules_cited;
  std::optional<ParameterMap> proposed_parameters;  // iff SELF_CORRECT
  Confidence confidence = Confidence::Unambiguous;
  bool operator==(const DeliberationVerdict&) const = default;
};

json to_json(const DeliberationVerdict& verdict);

inline constexpr std::string_view kUncertaintyRuleId = "UNCERTAINTY";

struct EscalationMessage {
  std::string intent_summary;
  std::vector<std::string> triggering_rule_ids;
  std::string reasoning;
  TriggerKind trigger_kind = TriggerKind::Uncertain;
  bool operator==(const EscalationMessage&) const = default;
};

json to_json(const EscalationMessage& message);
EscalationMessage escalation_message_from_json(const json& j);

struct RoundSummary {
  int round_index = 1;
  std::string intent_id;
  Outcome outcome = Outcome::Escalate;
  std::vector<std::string> rules_retrieved;
  std::vector<std::string> rules_cited;
  std::optional<IntentDescriptor> revised_intent;  // iff outcome == SELF_CORRECT
  std::string trace_id;
};

/// Final routing for one governance run.
struct ComplianceDecision {
  Outcome outcome = Outcome::Escalate;
  std::string reasoning;
  /// Union of citations across rounds, in first-cited order.
  std::vector<std::string> rules_cited;
  std::optional<EscalationMessage> escalation;  // iff ESCALATE
  /// The intent the decision applies to: the revised one after self-correction.
  IntentDescriptor effective_intent;
  int deliberation_rounds = 0;
  std::vector<RoundSummary> rounds;
  std::string run_id;
  std::int64_t ruleset_version = 0;
  std::string context_snapshot_id;
  std::string escalation_id;  // set when the escalation was enqueued
  bool audit_failed = false;
};

json to_json(const ComplianceDecision& decision);

}  // namespace agentgov
