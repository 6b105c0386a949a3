#include "agentgov/deliberator.hpp"

#include <algorithm>
#include <sstream>

namespace agentgov {

namespace {

enum class Disposition { NotCheckable, NotEngaged, Allowed, ReadSatisfied, Forbidden, NeedsApproval, Approved };

struct RuleFinding {
  const Rule* rule;
  Disposition disposition;
};

struct Assessment {
  std::vector<RuleFinding> findings;
  std::vector<std::string> forbidden;
  std::vector<std::string> needs_approval;

  bool clear() const { return forbidden.empty() && needs_approval.empty(); }
};

std::string describe(Disposition d) {
  switch (d) {
    case Disposition::NotCheckable: return "not machine-checkable; left to natural-language review";
    case Disposition::NotEngaged: return "does not apply to this action";
    case Disposition::Allowed: return "explicitly permits this action";
    case Disposition::ReadSatisfied: return "read-only constraint satisfied by a read action";
    case Disposition::Forbidden: return "VIOLATED: action is forbidden";
    case Disposition::NeedsApproval: return "VIOLATED: human approval required and none presented";
    case Disposition::Approved: return "human approval presented and verified";
  }
  return "";
}

std::string render_params(const ParameterMap& params) {
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : params) {
    if (!first) out += ", ";
    first = false;
    out += k + ": " + display(v);
  }
  return out + "}";
}

std::string join(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? ", " : "") + ids[i];
  return out;
}

}  // namespace

std::string_view to_string(BackendHealth h) noexcept { return h == BackendHealth::Ok ? "OK" : "DEGRADED"; }

bool constraint_engaged(const MachineConstraint& constraint, const IntentDescriptor& intent,
                        const ParameterMap& parameters, const RuntimeContext& ctx) {
  if (!action_class_matches(constraint.action_classes, intent.action_class)) return false;
  if (constraint.condition.empty()) return true;
  const Scalar irreversible = intent.irreversible;
  const Scalar action_class = intent.action_class;
  const Scalar agent_id = intent.agent_id;
  const Scalar workflow_id = intent.workflow_id;
  const ValueSource source{
      [&](std::string_view key) -> const Scalar* {
        if (key == "$irreversible") return &irreversible;
        if (key == "$action_class") return &action_class;
        if (key == "$agent_id") return &agent_id;
        if (key == "$workflow_id") return &workflow_id;
        const auto it = parameters.find(std::string(key));
        return it == parameters.end() ? nullptr : &it->second;
      },
      [&](std::string_view name) { return ctx.registry(name); }};
  return evaluate_all(constraint.condition, source);
}

bool is_irreversibility_rule(const Rule& rule) {
  if (!rule.constraint) return false;
  return std::any_of(rule.constraint->condition.begin(), rule.constraint->condition.end(),
                     [](const Comparison& c) { return c.key == "$irreversible"; });
}

ReferenceDeliberator::ReferenceDeliberator(ApprovalVerifier verifier, ReferenceDeliberatorOptions options)
    : verifier_(std::move(verifier)), options_(std::move(options)) {}

bool ReferenceDeliberator::is_read_action(std::string_view action_class) const {
  const auto dot = action_class.rfind('.');
  const auto verb = dot == std::string_view::npos ? action_class : action_class.substr(dot + 1);
  return options_.read_verbs.contains(std::string(verb));
}

DeliberationVerdict ReferenceDeliberator::deliberate(const IntentDescriptor& intent, std::span<const Rule> rules,
                                                     const RuntimeContext& ctx) const {
  const auto approved = [&](const std::string& rule_id, const IntentDescriptor& subject) {
    if (!verifier_) return false;
    return std::any_of(subject.approvals.begin(), subject.approvals.end(), [&](const ApprovalCredential& a) {
      return a.rule_id == rule_id && verifier_(a, subject);
    });
  };

  const auto assess = [&](const IntentDescriptor& subject) {
    Assessment a;
    for (const auto& rule : rules) {
      Disposition d = Disposition::NotCheckable;
      if (rule.constraint) {
        const auto& c = *rule.constraint;
        if (!constraint_engaged(c, subject, subject.parameters, ctx)) {
          d = Disposition::NotEngaged;
        } else {
          switch (c.modality) {
            case Modality::Allow: d = Disposition::Allowed; break;
            case Modality::Forbid: d = Disposition::Forbidden; break;
            case Modality::ReadOnly:
              if (is_read_action(subject.action_class)) {
                d = Disposition::ReadSatisfied;
                break;
              }
              [[fallthrough]];
            case Modality::RequireApproval:
              d = approved(rule.id, subject) ? Disposition::Approved : Disposition::NeedsApproval;
              break;
          }
        }
      }
      if (d == Disposition::Forbidden) a.forbidden.push_back(rule.id);
      if (d == Disposition::NeedsApproval) a.needs_approval.push_back(rule.id);
      a.findings.push_back({&rule, d});
    }
    return a;
  };

  const Assessment primary = assess(intent);

  std::ostringstream reasoning;
  reasoning << "Intent " << intent.intent_id << " (" << intent.action_class << " by " << intent.agent_id << " in "
            << intent.workflow_id << (intent.irreversible ? ", irreversible" : "") << ") with parameters "
            << render_params(intent.parameters) << " checked against " << rules.size() << " rule(s).";
  for (const auto& f : primary.findings) {
    reasoning << "\n- " << f.rule->id << " [" << to_string(f.rule->layer);
    if (f.rule->constraint) reasoning << ", " << to_string(f.rule->constraint->modality);
    reasoning << "]: " << describe(f.disposition) << ".";
  }

  DeliberationVerdict verdict;
  verdict.confidence = Confidence::Unambiguous;

  if (!primary.forbidden.empty()) {
    for (std::size_t i = 0; i < intent.alternatives.size(); ++i) {
      IntentDescriptor candidate = intent;
      candidate.parameters = intent.alternatives[i];
      if (!assess(candidate).clear()) continue;
      verdict.outcome = Outcome::SelfCorrect;
      verdict.rules_cited = primary.forbidden;
      verdict.proposed_parameters = intent.alternatives[i];
      reasoning << "\nForbidden by " << join(primary.forbidden) << "; alternative " << (i + 1) << " "
                << render_params(intent.alternatives[i]) << " clears every constraint. Decision: SELF_CORRECT.";
      verdict.reasoning = reasoning.str();
      return verdict;
    }
    verdict.outcome = Outcome::Escalate;
    // Cite in precedence order, which is the order `rules` arrives in.
    for (const auto& f : primary.findings) {
      if (f.disposition == Disposition::Forbidden || f.disposition == Disposition::NeedsApproval) {
        verdict.rules_cited.push_back(f.rule->id);
      }
    }
    reasoning << "\nForbidden by " << join(primary.forbidden) << " and no alternative ("
              << intent.alternatives.size() << " offered) clears every constraint. Decision: ESCALATE citing "
              << join(verdict.rules_cited) << ".";
    verdict.reasoning = reasoning.str();
    return verdict;
  }

  if (!primary.needs_approval.empty()) {
    verdict.outcome = Outcome::Escalate;
    verdict.rules_cited = primary.needs_approval;
    reasoning << "\nHuman approval required by " << join(primary.needs_approval)
              << ". Decision: ESCALATE citing " << join(primary.needs_approval) << ".";
    verdict.reasoning = reasoning.str();
    return verdict;
  }

  verdict.outcome = Outcome::Proceed;
  reasoning << "\nNo machine-checkable constraint is violated. Decision: PROCEED.";
  verdict.reasoning = reasoning.str();
  return verdict;
}

}  // namespace agentgov
