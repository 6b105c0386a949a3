#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "agentgov/context.hpp"
#include "agentgov/value.hpp"

namespace agentgov {

/// Lower rank means higher precedence.
enum class GovernanceLayer : int { Global = 1, Workflow = 2, Agent = 3, Situational = 4 };

constexpr int rank(GovernanceLayer layer) noexcept { return static_cast<int>(layer); }
std::string_view to_string(GovernanceLayer layer) noexcept;
std::optional<GovernanceLayer> parse_layer(std::string_view text) noexcept;
inline constexpr GovernanceLayer kAllLayers[] = {GovernanceLayer::Global, GovernanceLayer::Workflow,
                                                 GovernanceLayer::Agent, GovernanceLayer::Situational};

enum class CompareOp { Eq, Ne, Gt, Gte, Lt, Lte, In, NotIn };

std::string_view to_string(CompareOp op) noexcept;
std::optional<CompareOp> parse_compare_op(std::string_view text) noexcept;

/// "registry:<name>", resolved against RuntimeContext::registries.
struct RegistryRef {
  std::string name;
  bool operator==(const RegistryRef&) const = default;
};

using Operand = std::variant<Scalar, std::vector<Scalar>, RegistryRef>;

struct Comparison {
  std::string key;
  CompareOp op = CompareOp::Eq;
  Operand value;
  bool operator==(const Comparison&) const = default;
};

struct ActivationPredicate {
  std::vector<Comparison> conjuncts;
  bool operator==(const ActivationPredicate&) const = default;
};

enum class Modality { Forbid, RequireApproval, ReadOnly, Allow };

std::string_view to_string(Modality m) noexcept;
std::optional<Modality> parse_modality(std::string_view text) noexcept;

/// Structured twin of a rule's natural-language text. An empty
/// `action_classes` set governs every action; entries ending in ".*" match a
/// dotted prefix. An empty `condition` means the constraint always engages.
struct MachineConstraint {
  std::set<std::string> action_classes;
  Modality modality = Modality::Forbid;
  std::vector<Comparison> condition;
  bool operator==(const MachineConstraint&) const = default;
};

/// Empty sets mean "all".
struct Scope {
  std::set<std::string> workflow_ids;
  std::set<std::string> agent_ids;

  bool matches(std::string_view agent_id, std::string_view workflow_id) const;
  bool overlaps(const Scope& other) const;
  bool operator==(const Scope&) const = default;
};

struct Rule {
  std::string id;
  GovernanceLayer layer = GovernanceLayer::Global;
  Scope scope;
  std::string text;
  std::string rationale;
  std::optional<MachineConstraint> constraint;
  std::optional<ActivationPredicate> predicate;
  bool enabled = true;
  bool operator==(const Rule&) const = default;
};

struct RuleSetMetadata {
  std::string author;
  std::string timestamp;
  bool operator==(const RuleSetMetadata&) const = default;
};

struct RuleSetDocument {
  std::int64_t version = 1;
  RuleSetMetadata metadata;
  std::vector<Rule> rules;

  const Rule* find(std::string_view id) const;
};

// ── Condition evaluation ─────────────────────────────────────────────────────

/// Where comparison keys and registry names resolve. Missing values are
/// nullptr.
struct ValueSource {
  std::function<const Scalar*(std::string_view)> value;
  std::function<const std::set<std::string>*(std::string_view)> registry;
};

/// Missing key is false, never an error. Ordered operators on mismatched
/// kinds (or on booleans) throw TYPE_MISMATCH.
bool evaluate_comparison(const Comparison& cmp, const ValueSource& source);
bool evaluate_all(std::span<const Comparison> conjuncts, const ValueSource& source);
bool evaluate_predicate(const ActivationPredicate& predicate, const RuntimeContext& ctx);

// ── Documents ────────────────────────────────────────────────────────────────

json to_json(const Comparison& c);
json to_json(const Rule& rule);
json to_json(const RuleSetDocument& doc);
Rule rule_from_json(const json& j);

/// Structural decoding only; throws PARSE_ERROR on malformed input.
RuleSetDocument ruleset_from_json(const json& j);

/// Parses, decodes and validates. Throws PARSE_ERROR or SCHEMA_ERROR (the
/// latter names the first offending rule id as the error subject).
RuleSetDocument load_ruleset(std::string_view source);
RuleSetDocument load_ruleset_file(const std::string& path);

enum class ViolationCode {
  DuplicateId,
  EmptyId,
  EmptyText,
  MissingPredicate,
  UnexpectedPredicate,
  EmptyPredicate,
  ScopedGlobalRule,
  EmptyWorkflowScope,
  EmptyAgentScope,
  InvalidOperand,
  InvalidVersion,
};

std::string_view to_string(ViolationCode code) noexcept;

struct Violation {
  ViolationCode code;
  std::string rule_id;
  std::string message;
  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate_ruleset(const RuleSetDocument& doc);
json to_json(const Violation& v);

// ── Lint ─────────────────────────────────────────────────────────────────────

enum class LintCode { MissingRationale, NegativeOnlyFraming, OverbroadScope };

std::string_view to_string(LintCode code) noexcept;

struct LintWarning {
  LintCode code;
  std::string rule_id;
  std::string message;
  bool operator==(const LintWarning&) const = default;
};

/// Phrase lists are matched case-insensitively as substrings of the rule text.
struct LintConfig {
  std::vector<std::string> prohibition_phrases;
  std::vector<std::string> alternative_phrases;

  static LintConfig defaults();
  static LintConfig from_json(const json& j);
};

json to_json(const LintConfig& config);
json to_json(const LintWarning& w);

std::vector<LintWarning> lint_rule(const Rule& rule, const LintConfig& config = LintConfig::defaults());
std::vector<LintWarning> lint_ruleset(const RuleSetDocument& doc, const LintConfig& config = LintConfig::defaults());

// ── Conflicts ────────────────────────────────────────────────────────────────

struct ConflictReport {
  std::string winner_id;
  std::string loser_id;
  Modality winner_modality;
  Modality loser_modality;
  std::set<std::string> shared_action_classes;  // empty means "all actions"
  bool operator==(const ConflictReport&) const = default;
};

/// Reports every pair of machine-constrained rules whose scopes and action
/// classes overlap and whose modalities contradict (ALLOW vs FORBID, ALLOW vs
/// REQUIRE_APPROVAL). Sorted by (winner_id, loser_id).
std::vector<ConflictReport> detect_conflicts(const RuleSetDocument& doc);
json to_json(const ConflictReport& c);

/// True when an action-class pattern set matches `action_class`.
bool action_class_matches(const std::set<std::string>& patterns, std::string_view action_class);

// ── Retrieval ────────────────────────────────────────────────────────────────

/// Enabled rules whose scope matches and, for situational rules, whose
/// predicate holds on `ctx`. Sorted by (layer rank, id).
std::vector<Rule> applicable_rules(const RuleSetDocument& doc, std::string_view agent_id,
                                   std::string_view workflow_id, const RuntimeContext& ctx);

}  // namespace agentgov
