#pragma once

#include <chrono>
#include <functional>
#include <set>
#include <span>
#include <string>

#include "agentgov/context.hpp"
#include "agentgov/intent.hpp"
#include "agentgov/rules.hpp"

namespace agentgov {

/// Checks a presented approval credential against the minting authority.
using ApprovalVerifier = std::function<bool(const ApprovalCredential&, const IntentDescriptor&)>;

enum class BackendHealth { Ok, Degraded };
std::string_view to_string(BackendHealth h) noexcept;

/// Permissibility reasoning for one round. Implementations must not mutate
/// their inputs and either return a verdict or throw GovernanceError
/// (DELIBERATOR_FAILURE, TIMEOUT, TRANSPORT_ERROR, PARSE_FAILURE); the engine
/// turns every failure into an escalation.
class Deliberator {
 public:
  virtual ~Deliberator() = default;

  virtual std::string name() const = 0;
  virtual std::chrono::milliseconds timeout() const { return std::chrono::seconds(30); }
  virtual std::string prompt_template_version() const { return "none"; }
  virtual BackendHealth health() const { return BackendHealth::Ok; }

  virtual DeliberationVerdict deliberate(const IntentDescriptor& intent, std::span<const Rule> rules,
                                         const RuntimeContext& ctx) const = 0;
};

struct ReferenceDeliberatorOptions {
  /// Last dotted segment of an action class that counts as a read.
  std::set<std::string> read_verbs{"read", "list", "get", "query", "search", "fetch", "view"};
};

/// Deterministic deliberation over rules' machine constraints. Rules without
/// a constraint are listed as not machine-checkable and never block.
///
/// - an engaged FORBID yields SELF_CORRECT to the first alternative that
///   clears every constraint, or ESCALATE when none does;
/// - an engaged REQUIRE_APPROVAL (or READ_ONLY hit by a non-read action)
///   yields ESCALATE unless a verified approval for that rule is presented;
/// - otherwise PROCEED.
///
/// Reasoning text is bit-stable for identical inputs.
class ReferenceDeliberator final : public Deliberator {
 public:
  explicit ReferenceDeliberator(ApprovalVerifier verifier = {}, ReferenceDeliberatorOptions options = {});

  std::string name() const override { return "reference"; }
  DeliberationVerdict deliberate(const IntentDescriptor& intent, std::span<const Rule> rules,
                                 const RuntimeContext& ctx) const override;

  bool is_read_action(std::string_view action_class) const;

 private:
  ApprovalVerifier verifier_;
  ReferenceDeliberatorOptions options_;
};

/// Resolves constraint condition keys: intent parameters, plus the reserved
/// keys `$irreversible`, `$action_class`, `$agent_id` and `$workflow_id`.
bool constraint_engaged(const MachineConstraint& constraint, const IntentDescriptor& intent,
                        const ParameterMap& parameters, const RuntimeContext& ctx);

/// True when the rule's condition refers to `$irreversible`, i.e. the rule
/// gates irreversibility rather than a categorical prohibition.
bool is_irreversibility_rule(const Rule& rule);

}  // namespace agentgov
