#include "agentgov/intent.hpp"

#include <algorithm>
#include <cctype>

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

std::string string_field(const json& j, const char* field, bool required = true) {
  const auto it = j.find(field);
  if (it == j.end() || it->is_null()) {
    if (required) throw GovernanceError(ErrorCode::ParseError, std::string("intent: missing field '") + field + "'");
    return {};
  }
  if (!it->is_string()) throw GovernanceError(ErrorCode::ParseError, std::string("intent: '") + field + "' must be a string");
  return it->get<std::string>();
}

json string_list(const std::vector<std::string>& v) { return json(v); }

}  // namespace

std::string_view to_string(Outcome outcome) noexcept {
  switch (outcome) {
    case Outcome::Proceed: return "PROCEED";
    case Outcome::SelfCorrect: return "SELF_CORRECT";
    case Outcome::Escalate: return "ESCALATE";
  }
  return "UNKNOWN";
}

std::optional<Outcome> parse_outcome(std::string_view text) noexcept {
  std::string norm;
  for (const char c : text) {
    if (c == '-' || c == ' ') norm.push_back('_');
    else norm.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  for (const auto o : {Outcome::Proceed, Outcome::SelfCorrect, Outcome::Escalate}) {
    if (to_string(o) == norm) return o;
  }
  return std::nullopt;
}

std::string_view to_string(Confidence c) noexcept {
  return c == Confidence::Unambiguous ? "UNAMBIGUOUS" : "UNCERTAIN";
}

std::string_view to_string(TriggerKind k) noexcept {
  switch (k) {
    case TriggerKind::Prohibited: return "PROHIBITED";
    case TriggerKind::Irreversible: return "IRREVERSIBLE";
    case TriggerKind::Uncertain: return "UNCERTAIN";
  }
  return "UNKNOWN";
}

std::optional<TriggerKind> parse_trigger_kind(std::string_view text) noexcept {
  for (const auto k : {TriggerKind::Prohibited, TriggerKind::Irreversible, TriggerKind::Uncertain}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

void validate_intent(const IntentDescriptor& intent) {
  const auto require = [](const std::string& v, const char* name) {
    if (v.empty()) throw GovernanceError(ErrorCode::InvalidArgument, std::string("intent ") + name + " must be non-empty");
  };
  require(intent.intent_id, "intent_id");
  require(intent.agent_id, "agent_id");
  require(intent.workflow_id, "workflow_id");
  require(intent.action_class, "action_class");
  require(intent.description, "description");
  if (std::find(intent.alternatives.begin(), intent.alternatives.end(), intent.parameters) != intent.alternatives.end()) {
    throw GovernanceError(ErrorCode::InvalidArgument, "intent alternatives must not repeat the primary parameters",
                          intent.intent_id);
  }
}

json to_json(const IntentDescriptor& intent) {
  json alternatives = json::array();
  for (const auto& alt : intent.alternatives) alternatives.push_back(to_json(alt));
  json approvals = json::array();
  for (const auto& a : intent.approvals) approvals.push_back({{"rule_id", a.rule_id}, {"token", a.token}});
  return {{"intent_id", intent.intent_id},
          {"agent_id", intent.agent_id},
          {"workflow_id", intent.workflow_id},
          {"action_class", intent.action_class},
          {"description", intent.description},
          {"parameters", to_json(intent.parameters)},
          {"irreversible", intent.irreversible},
          {"alternatives", alternatives},
          {"approvals", approvals}};
}

json redacted_json(const IntentDescriptor& intent) {
  json j = to_json(intent);
  for (auto& a : j["approvals"]) a["token"] = "<redacted>";
  return j;
}

IntentDescriptor intent_from_json(const json& j) {
  if (!j.is_object()) throw GovernanceError(ErrorCode::ParseError, "intent must be an object");
  IntentDescriptor intent;
  intent.intent_id = string_field(j, "intent_id");
  intent.agent_id = string_field(j, "agent_id");
  intent.workflow_id = string_field(j, "workflow_id");
  intent.action_class = string_field(j, "action_class");
  intent.description = string_field(j, "description");
  if (const auto it = j.find("parameters"); it != j.end()) intent.parameters = parameters_from_json(*it);
  if (const auto it = j.find("irreversible"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw GovernanceError(ErrorCode::ParseError, "intent: 'irreversible' must be boolean");
    intent.irreversible = it->get<bool>();
  }
  if (const auto it = j.find("alternatives"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw GovernanceError(ErrorCode::ParseError, "intent: 'alternatives' must be an array");
    for (const auto& alt : *it) intent.alternatives.push_back(parameters_from_json(alt));
  }
  if (const auto it = j.find("approvals"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw GovernanceError(ErrorCode::ParseError, "intent: 'approvals' must be an array");
    for (const auto& a : *it) {
      if (!a.is_object()) throw GovernanceError(ErrorCode::ParseError, "intent: approvals must be objects");
      intent.approvals.push_back({string_field(a, "rule_id"), string_field(a, "token")});
    }
  }
  return intent;
}

std::string intent_fingerprint(const IntentDescriptor& intent) {
  const json basis = {{"agent_id", intent.agent_id},
                      {"workflow_id", intent.workflow_id},
                      {"action_class", intent.action_class},
                      {"parameters", to_json(intent.parameters)}};
  return sha256_hex(canonical_dump(basis));
}

json to_json(const DeliberationVerdict& verdict) {
  json out = {{"outcome", to_string(verdict.outcome)},
              {"reasoning", verdict.reasoning},
              {"rules_cited", string_list(verdict.rules_cited)},
              {"confidence", to_string(verdict.confidence)}};
  if (verdict.proposed_parameters) out["proposed_parameters"] = to_json(*verdict.proposed_parameters);
  return out;
}

json to_json(const EscalationMessage& message) {
  return {{"intent_summary", message.intent_summary},
          {"triggering_rule_ids", string_list(message.triggering_rule_ids)},
          {"reasoning", message.reasoning},
          {"trigger_kind", to_string(message.trigger_kind)}};
}

EscalationMessage escalation_message_from_json(const json& j) {
  EscalationMessage m;
  m.intent_summary = j.at("intent_summary").get<std::string>();
  m.triggering_rule_ids = j.at("triggering_rule_ids").get<std::vector<std::string>>();
  m.reasoning = j.at("reasoning").get<std::string>();
  const auto kind = parse_trigger_kind(j.at("trigger_kind").get<std::string>());
  if (!kind) throw GovernanceError(ErrorCode::ParseError, "unknown trigger kind");
  m.trigger_kind = *kind;
  return m;
}

json to_json(const ComplianceDecision& decision) {
  json rounds = json::array();
  for (const auto& r : decision.rounds) {
    json round = {{"round_index", r.round_index},
                  {"intent_id", r.intent_id},
                  {"outcome", to_string(r.outcome)},
                  {"rules_retrieved", string_list(r.rules_retrieved)},
                  {"rules_cited", string_list(r.rules_cited)},
                  {"trace_id", r.trace_id}};
    if (r.revised_intent) round["revised_intent"] = to_json(*r.revised_intent);
    rounds.push_back(std::move(round));
  }
  json out = {{"outcome", to_string(decision.outcome)},
              {"reasoning", decision.reasoning},
              {"rules_cited", string_list(decision.rules_cited)},
              {"effective_intent", to_json(decision.effective_intent)},
              {"deliberation_rounds", decision.deliberation_rounds},
              {"rounds", rounds},
              {"run_id", decision.run_id},
              {"ruleset_version", decision.ruleset_version},
              {"context_snapshot_id", decision.context_snapshot_id},
              {"audit_failed", decision.audit_failed}};
  if (decision.escalation) out["escalation"] = to_json(*decision.escalation);
  if (!decision.escalation_id.empty()) out["escalation_id"] = decision.escalation_id;
  return out;
}

}  // namespace agentgov
