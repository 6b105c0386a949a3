#include "agentgov/engine.hpp"

#include <algorithm>
#include <sstream>

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

std::vector<std::string> ids_of(const std::vector<Rule>& rules) {
  std::vector<std::string> out;
  out.reserve(rules.size());
  for (const auto& r : rules) out.push_back(r.id);
  return out;
}

std::string summarize(const IntentDescriptor& intent) {
  std::ostringstream out;
  out << intent.description << " [" << intent.action_class << " by " << intent.agent_id << " in "
      << intent.workflow_id << "; parameters {";
  bool first = true;
  for (const auto& [k, v] : intent.parameters) {
    out << (first ? "" : ", ") << k << ": " << display(v);
    first = false;
  }
  out << "}" << (intent.irreversible ? "; irreversible" : "") << "]";
  return out.str();
}

DeliberationVerdict uncertain(std::string reasoning, std::vector<std::string> cited = {}) {
  DeliberationVerdict v;
  v.outcome = Outcome::Escalate;
  v.confidence = Confidence::Uncertain;
  v.reasoning = std::move(reasoning);
  v.rules_cited = std::move(cited);
  return v;
}

}  // namespace

std::string_view to_string(DefaultAction a) noexcept { return a == DefaultAction::Proceed ? "PROCEED" : "ESCALATE"; }

TriggerKind classify_trigger(const DeliberationVerdict& verdict, std::span<const Rule> rules) {
  if (verdict.confidence == Confidence::Uncertain || verdict.rules_cited.empty()) return TriggerKind::Uncertain;
  const bool all_irreversible = std::all_of(verdict.rules_cited.begin(), verdict.rules_cited.end(), [&](const std::string& id) {
    const auto it = std::find_if(rules.begin(), rules.end(), [&](const Rule& r) { return r.id == id; });
    return it != rules.end() && is_irreversibility_rule(*it);
  });
  return all_irreversible ? TriggerKind::Irreversible : TriggerKind::Prohibited;
}

EscalationMessage build_escalation(const IntentDescriptor& intent, const DeliberationVerdict& verdict, TriggerKind kind) {
  EscalationMessage m;
  m.intent_summary = summarize(intent);
  m.triggering_rule_ids = verdict.rules_cited;
  if (m.triggering_rule_ids.empty()) {
    if (kind != TriggerKind::Uncertain) {
      throw GovernanceError(ErrorCode::MissingRuleCitation,
                            "a " + std::string(to_string(kind)) + " escalation must cite the rule that triggered it",
                            intent.intent_id);
    }
    m.triggering_rule_ids.emplace_back(kUncertaintyRuleId);
  }
  m.reasoning = verdict.reasoning.empty() ? "no reasoning supplied" : verdict.reasoning;
  m.trigger_kind = kind;
  return m;
}

GovernanceEngine::GovernanceEngine(EngineConfig config, std::shared_ptr<AuditLog> log,
                                   std::shared_ptr<EscalationQueue> queue, ClockPtr clock)
    : config_(std::move(config)), log_(std::move(log)), queue_(std::move(queue)), clock_(std::move(clock)) {
  if (config_.max_self_correct < 0) {
    throw GovernanceError(ErrorCode::InvalidArgument, "max_self_correct must be >= 0");
  }
}

RunResult GovernanceEngine::run(const IntentDescriptor& submitted, const ContextSnapshot& ctx, const RuleSetPtr& doc,
                                const Deliberator& deliberator) {
  validate_intent(submitted);
  if (!ctx || !doc) throw GovernanceError(ErrorCode::InvalidArgument, "context snapshot and rule set are required");

  const std::int64_t started = clock_->monotonic_ns();
  RunResult result;
  ComplianceDecision& decision = result.decision;
  decision.ruleset_version = doc->version;
  decision.context_snapshot_id = ctx->snapshot_id;

  IntentDescriptor current = submitted;
  if (config_.irreversible_action_classes.contains(current.action_class)) current.irreversible = true;
  decision.effective_intent = current;

  const auto finish = [&]() -> RunResult& {
    result.timing.total_ns = clock_->monotonic_ns() - started;
    return result;
  };

  if (halted_) {
    decision.outcome = Outcome::Escalate;
    decision.audit_failed = true;
    decision.reasoning = "governance engine halted: the audit log is unavailable, so no action may proceed";
    decision.escalation = build_escalation(current, uncertain(decision.reasoning), TriggerKind::Uncertain);
    return finish();
  }

  decision.run_id = "run-" + sha256_hex(submitted.intent_id + '\x1f' + log_->head_hash() + '\x1f' +
                                        std::to_string(runs_.fetch_add(1)))
                                 .substr(0, 16);

  std::vector<std::string> seen_parameters{canonical_dump(to_json(current.parameters))};

  for (int round = 1;; ++round) {
    std::vector<Rule> rules;
    DeliberationVerdict verdict;
    std::string deliberator_name = deliberator.name();
    std::string note;
    bool failed = false;

    try {
      rules = applicable_rules(*doc, current.agent_id, current.workflow_id, *ctx);
    } catch (const std::exception& e) {
      failed = true;
      verdict = uncertain(std::string("Rule retrieval failed (") + e.what() + "); escalating fail-closed.");
    }

    if (!failed && rules.empty()) {
      deliberator_name = "default_action";
      verdict.outcome = config_.default_action == DefaultAction::Proceed ? Outcome::Proceed : Outcome::Escalate;
      verdict.confidence = config_.default_action == DefaultAction::Proceed ? Confidence::Unambiguous : Confidence::Uncertain;
      verdict.reasoning = "No governance rule applies to this intent; default action is " +
                          std::string(to_string(config_.default_action)) + ".";
    } else if (!failed) {
      const std::int64_t t0 = clock_->monotonic_ns();
      try {
        verdict = deliberator.deliberate(current, rules, *ctx);
      } catch (const GovernanceError& e) {
        failed = true;
        verdict = uncertain("Deliberation failed (" + std::string(to_string(e.code())) + ": " + e.detail() +
                            "); escalating fail-closed.");
      } catch (const std::exception& e) {
        failed = true;
        verdict = uncertain(std::string("Deliberation failed (DELIBERATOR_FAILURE: ") + e.what() +
                            "); escalating fail-closed.");
      } catch (...) {
        failed = true;
        verdict = uncertain("Deliberation failed (DELIBERATOR_FAILURE: non-standard exception); escalating fail-closed.");
      }
      const std::int64_t elapsed = clock_->monotonic_ns() - t0;
      result.timing.deliberation_ns += elapsed;

      const auto budget = std::chrono::duration_cast<std::chrono::nanoseconds>(deliberator.timeout()).count();
      if (!failed && elapsed > budget) {
        failed = true;
        verdict = uncertain("Deliberation exceeded its " + std::to_string(deliberator.timeout().count()) +
                            " ms budget (TIMEOUT); late verdict discarded, escalating fail-closed.");
      }
    }

    if (!failed) {
      const auto retrieved = ids_of(rules);
      for (const auto& id : verdict.rules_cited) {
        if (std::find(retrieved.begin(), retrieved.end(), id) == retrieved.end()) {
          failed = true;
          verdict = uncertain("Deliberator cited rule '" + id +
                              "' which was not retrieved for this intent (DELIBERATOR_FAILURE); escalating fail-closed.");
          break;
        }
      }
    }
    if (!failed && verdict.outcome == Outcome::SelfCorrect && !verdict.proposed_parameters) {
      verdict = uncertain("Self-correction proposed no revised parameters (DELIBERATOR_FAILURE); escalating fail-closed.",
                          verdict.rules_cited);
    }
    if (verdict.confidence == Confidence::Uncertain && verdict.outcome != Outcome::Escalate) {
      verdict.outcome = Outcome::Escalate;
      note = "Deliberator was uncertain; ambiguity is escalated, not resolved autonomously.";
    }

    // Stage 4 routing.
    std::optional<IntentDescriptor> revised;
    if (verdict.outcome == Outcome::SelfCorrect) {
      const auto key = canonical_dump(to_json(*verdict.proposed_parameters));
      if (std::find(seen_parameters.begin(), seen_parameters.end(), key) != seen_parameters.end()) {
        note = "Revision repeats an intent already considered in this run; escalating as UNCERTAIN.";
        verdict.outcome = Outcome::Escalate;
        verdict.confidence = Confidence::Uncertain;
      } else if (round > config_.max_self_correct) {
        note = "Self-correction bound of " + std::to_string(config_.max_self_correct) +
               " revision(s) exhausted; escalating as UNCERTAIN.";
        verdict.outcome = Outcome::Escalate;
        verdict.confidence = Confidence::Uncertain;
      } else {
        seen_parameters.push_back(key);
        IntentDescriptor next = current;
        next.intent_id = submitted.intent_id + "/rev" + std::to_string(round);
        next.parameters = *verdict.proposed_parameters;
        std::erase(next.alternatives, next.parameters);
        revised = std::move(next);
      }
    }

    for (const auto& id : verdict.rules_cited) {
      if (std::find(decision.rules_cited.begin(), decision.rules_cited.end(), id) == decision.rules_cited.end()) {
        decision.rules_cited.push_back(id);
      }
    }

    std::string reasoning = verdict.reasoning;
    if (!note.empty()) reasoning += "\n[engine] " + note;

    TraceDraft draft;
    draft.kind = RecordKind::Deliberation;
    draft.agent_id = current.agent_id;
    draft.workflow_id = current.workflow_id;
    draft.intent = redacted_json(current);
    draft.ruleset_version = doc->version;
    draft.rules_retrieved = ids_of(rules);
    draft.rules_cited = verdict.rules_cited;
    draft.reasoning = reasoning;
    draft.decision = std::string(to_string(verdict.outcome));
    draft.round_index = round;
    draft.run_id = decision.run_id;
    draft.deliberator_name = deliberator_name;
    draft.prompt_template_version = deliberator.prompt_template_version();

    RoundSummary summary{round, current.intent_id, verdict.outcome, draft.rules_retrieved, verdict.rules_cited, revised, {}};
    decision.deliberation_rounds = round;

    try {
      result.traces.push_back(log_->append(std::move(draft)));
      summary.trace_id = result.traces.back().trace_id;
    } catch (const std::exception& e) {
      halted_ = true;
      decision.rounds.push_back(std::move(summary));
      decision.outcome = Outcome::Escalate;
      decision.audit_failed = true;
      decision.reasoning = std::string("Audit log append failed (") + e.what() + "); engine halted.";
      decision.escalation = build_escalation(current, uncertain(decision.reasoning), TriggerKind::Uncertain);
      return finish();
    }
    decision.rounds.push_back(std::move(summary));

    if (revised) {
      current = std::move(*revised);
      decision.effective_intent = current;
      continue;
    }

    decision.outcome = verdict.outcome;
    decision.reasoning = reasoning;
    if (verdict.outcome == Outcome::Escalate) {
      decision.escalation = build_escalation(current, {verdict.outcome, reasoning, verdict.rules_cited, std::nullopt,
                                                       verdict.confidence},
                                             classify_trigger(verdict, rules));
      if (queue_) {
        try {
          decision.escalation_id = queue_->enqueue(decision, *ctx).escalation_id;
        } catch (const std::exception&) {
          halted_ = true;
          decision.audit_failed = true;
        }
      }
    }
    return finish();
  }
}

}  // namespace agentgov
