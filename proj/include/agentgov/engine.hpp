#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "agentgov/audit_log.hpp"
#include "agentgov/clock.hpp"
#include "agentgov/context.hpp"
#include "agentgov/deliberator.hpp"
#include "agentgov/escalation_queue.hpp"
#include "agentgov/intent.hpp"
#include "agentgov/rule_store.hpp"

namespace agentgov {

enum class DefaultAction { Proceed, Escalate };
std::string_view to_string(DefaultAction a) noexcept;

struct EngineConfig {
  /// Self-corrections allowed before the run escalates; a run has at most
  /// max_self_correct + 1 deliberation rounds.
  int max_self_correct = 3;
  /// Routing when no rule applies to an intent.
  DefaultAction default_action = DefaultAction::Proceed;
  /// Action classes treated as irreversible whatever the intent declares.
  std::set<std::string> irreversible_action_classes;
};

struct RunTiming {
  std::int64_t total_ns = 0;
  std::int64_t deliberation_ns = 0;
  std::int64_t overhead_ns() const { return total_ns - deliberation_ns; }
};

struct RunResult {
  ComplianceDecision decision;
  std::vector<TraceRecord> traces;  // one per deliberation round
  RunTiming timing;
};

/// Classifies an escalation: UNCERTAIN for uncertain verdicts or verdicts
/// with no citation, IRREVERSIBLE when every cited rule is an
/// irreversibility gate, PROHIBITED otherwise.
TriggerKind classify_trigger(const DeliberationVerdict& verdict, std::span<const Rule> rules);

/// Assembles the three-part escalation message. Throws
/// MISSING_RULE_CITATION when the verdict cites nothing and `kind` is not
/// UNCERTAIN; an uncertain escalation without citations names the synthetic
/// rule id "UNCERTAINTY".
EscalationMessage build_escalation(const IntentDescriptor& intent, const DeliberationVerdict& verdict, TriggerKind kind);

/// Runs the pre-action loop for one intent: retrieve applicable rules,
/// deliberate, route, and re-enter on self-correction. Every round is traced
/// before the next begins. Deliberation failures, late verdicts, unsound
/// citations and retrieval errors all escalate as UNCERTAIN; nothing but a
/// clean verdict can PROCEED.
///
/// A storage failure while tracing halts the engine: that run and every
/// later one return ESCALATE with `audit_failed` set.
class GovernanceEngine {
 public:
  GovernanceEngine(EngineConfig config, std::shared_ptr<AuditLog> log, std::shared_ptr<EscalationQueue> queue,
                   ClockPtr clock = system_clock());

  /// Throws INVALID_ARGUMENT for a malformed intent (nothing is traced).
  RunResult run(const IntentDescriptor& intent, const ContextSnapshot& ctx, const RuleSetPtr& rules,
                const Deliberator& deliberator);

  bool halted() const noexcept { return halted_.load(); }
  const EngineConfig& config() const noexcept { return config_; }

 private:
  EngineConfig config_;
  std::shared_ptr<AuditLog> log_;
  std::shared_ptr<EscalationQueue> queue_;
  ClockPtr clock_;
  std::atomic<bool> halted_{false};
  std::atomic<std::uint64_t> runs_{0};
};

}  // namespace agentgov
