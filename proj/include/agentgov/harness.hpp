#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agentgov/service.hpp"

namespace agentgov {

/// Expected end state of one scenario run. `outcome` is "PROCEED",
/// "SELF_CORRECT->PROCEED" or "ESCALATE".
struct ScenarioExpectation {
  std::string outcome;
  std::optional<std::vector<std::string>> rules_retrieved;  // first round, in order
  std::optional<std::vector<std::string>> rules_cited;      // compared as a set
  std::optional<int> rounds;
  std::optional<TriggerKind> trigger_kind;
};

/// One stub agent script. Repetition i submits `intent` with description
/// phrasings[i % n] and its parameters serialized in an order rotated by i.
struct ScenarioSpec {
  std::string id;
  std::string title;
  int repetitions = 10;
  RuntimeContext context_overrides;  // signals and registries applied for the scenario, then restored
  IntentDescriptor intent;
  std::vector<std::string> phrasings;
  ScenarioExpectation expected;
};

struct ScenarioSuite {
  std::string workflow_id;
  std::vector<ScenarioSpec> scenarios;
};

/// Throws SCHEMA_ERROR for an unusable spec (unknown outcome, no phrasings,
/// repetitions < 1).
ScenarioSuite scenario_suite_from_json(const json& j);
ScenarioSuite load_scenario_suite(const std::string& path);

/// The intent submitted for repetition `rep`, as the JSON text the stub agent
/// sends.
std::string stub_intent_text(const ScenarioSpec& spec, const std::string& workflow_id, int rep);

struct RunFailure {
  int repetition = 0;
  std::string problem;
};

struct ScenarioMetrics {
  std::string id;
  std::string title;
  std::string expected_outcome;
  int runs = 0;
  int correct = 0;
  int escalations = 0;
  int true_escalations = 0;
  int complete_traces = 0;
  std::int64_t total_ns = 0;
  std::int64_t deliberation_ns = 0;
  std::int64_t bypass_ns = 0;
  std::vector<RunFailure> failures;
};

struct MetricsReport {
  std::string backend;
  std::string prompt_template_version;
  std::int64_t ruleset_version = 0;
  std::vector<ScenarioMetrics> scenarios;
  bool chain_ok = false;

  int runs() const;
  int correct() const;
  int escalations() const;
  int true_escalations() const;
  int complete_traces() const;
  double accuracy() const;
  /// True escalations over all escalations; 1 when nothing escalated.
  double escalation_precision() const;
  double trace_completeness() const;
  double mean_total_ms() const;
  double mean_deliberation_ms() const;
  /// Retrieval, routing and trace append: total minus deliberation.
  double mean_overhead_ms() const;
  /// The stub agent's own dispatch with governance bypassed.
  double mean_bypass_ms() const;
  bool all_correct() const { return correct() == runs(); }
};

json to_json(const MetricsReport& report);
std::string render_table(const MetricsReport& report);

struct HarnessOptions {
  bool parallel = false;  // repetitions of one scenario run concurrently
  std::string actor = "scenario-harness";
};

/// Runs every scenario against `service` (which must hold the Flowr rules).
/// Mismatches are reported as data, never thrown.
MetricsReport run_scenarios(const ScenarioSuite& suite, GovernanceService& service, const HarnessOptions& options = {});

}  // namespace agentgov
