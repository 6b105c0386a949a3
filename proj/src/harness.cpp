#include "agentgov/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

using ordered_json = nlohmann::ordered_json;

const std::set<std::string> kOutcomes{"PROCEED", "SELF_CORRECT->PROCEED", "ESCALATE"};

std::optional<std::vector<std::string>> string_list(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::vector<std::string>>();
}

double mean_ms(std::int64_t total_ns, int runs) {
  return runs == 0 ? 0.0 : static_cast<double>(total_ns) / runs / 1e6;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string ratio(int num, int den) { return std::to_string(num) + "/" + std::to_string(den); }

std::string joined(const std::vector<std::string>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out + "]";
}

struct RunOutcome {
  bool correct = false;
  bool escalated = false;
  bool complete = false;
  std::int64_t total_ns = 0;
  std::int64_t deliberation_ns = 0;
  std::int64_t bypass_ns = 0;
  std::string problem;
};

RunOutcome run_once(const ScenarioSpec& spec, const std::string& workflow_id, int rep, GovernanceService& service) {
  RunOutcome out;
  const auto clock = service.clock();

  // Bypass baseline: the stub agent builds and dispatches its intent without a governance call.
  const std::int64_t b0 = clock->monotonic_ns();
  const auto text = stub_intent_text(spec, workflow_id, rep);
  const auto intent = intent_from_json(json::parse(text));
  out.bypass_ns = clock->monotonic_ns() - b0;

  RunResult result;
  try {
    result = service.evaluate(intent);
  } catch (const std::exception& e) {
    out.problem = std::string("evaluation threw: ") + e.what();
    return out;
  }
  const auto& d = result.decision;
  out.total_ns = result.timing.total_ns;
  out.deliberation_ns = result.timing.deliberation_ns;
  out.escalated = d.outcome == Outcome::Escalate;

  out.complete = !d.audit_failed && static_cast<int>(result.traces.size()) == d.deliberation_rounds &&
                 std::all_of(result.traces.begin(), result.traces.end(),
                             [](const TraceRecord& r) { return validate_trace_fields(r); }) &&
                 (!out.escalated || !d.escalation_id.empty());

  std::vector<std::string> problems;
  const auto& ex = spec.expected;
  if (ex.outcome == "SELF_CORRECT->PROCEED") {
    if (d.rounds.size() < 2 || d.rounds.front().outcome != Outcome::SelfCorrect || d.outcome != Outcome::Proceed) {
      std::string path;
      for (const auto& r : d.rounds) path += (path.empty() ? "" : "->") + std::string(to_string(r.outcome));
      problems.push_back("outcome path " + path + ", expected SELF_CORRECT->PROCEED");
    }
  } else if (to_string(d.outcome) != ex.outcome) {
    problems.push_back("outcome " + std::string(to_string(d.outcome)) + ", expected " + ex.outcome);
  }
  if (ex.rules_retrieved && !d.rounds.empty() && d.rounds.front().rules_retrieved != *ex.rules_retrieved) {
    problems.push_back("retrieved " + joined(d.rounds.front().rules_retrieved) + ", expected " + joined(*ex.rules_retrieved));
  }
  if (ex.rules_cited) {
    const std::set<std::string> got(d.rules_cited.begin(), d.rules_cited.end());
    const std::set<std::string> want(ex.rules_cited->begin(), ex.rules_cited->end());
    if (got != want) problems.push_back("cited " + joined(d.rules_cited) + ", expected " + joined(*ex.rules_cited));
  }
  if (ex.rounds && d.deliberation_rounds != *ex.rounds) {
    problems.push_back("rounds " + std::to_string(d.deliberation_rounds) + ", expected " + std::to_string(*ex.rounds));
  }
  if (ex.trigger_kind && (!d.escalation || d.escalation->trigger_kind != *ex.trigger_kind)) {
    problems.push_back("trigger kind " + std::string(d.escalation ? to_string(d.escalation->trigger_kind) : "none") +
                       ", expected " + std::string(to_string(*ex.trigger_kind)));
  }
  if (!out.complete) problems.push_back("incomplete trace");

  out.correct = problems.empty() || (problems.size() == 1 && problems.front() == "incomplete trace");
  for (std::size_t i = 0; i < problems.size(); ++i) out.problem += (i ? "; " : "") + problems[i];
  return out;
}

}  // namespace

ScenarioSuite scenario_suite_from_json(const json& j) {
  ScenarioSuite suite;
  try {
    suite.workflow_id = j.at("workflow_id").get<std::string>();
    for (const auto& s : j.at("scenarios")) {
      ScenarioSpec spec;
      spec.id = s.at("id").get<std::string>();
      spec.title = s.value("title", spec.id);
      spec.repetitions = s.value("repetitions", 10);
      if (const auto c = s.find("context"); c != s.end()) spec.context_overrides = context_from_json(*c);
      const auto& in = s.at("intent");
      spec.intent.agent_id = in.at("agent_id").get<std::string>();
      spec.intent.action_class = in.at("action_class").get<std::string>();
      spec.intent.irreversible = in.value("irreversible", false);
      if (const auto p = in.find("parameters"); p != in.end()) spec.intent.parameters = parameters_from_json(*p);
      if (const auto a = in.find("alternatives"); a != in.end()) {
        for (const auto& alt : *a) spec.intent.alternatives.push_back(parameters_from_json(alt));
      }
      spec.phrasings = s.at("phrasings").get<std::vector<std::string>>();
      const auto& e = s.at("expected");
      spec.expected.outcome = e.at("outcome").get<std::string>();
      spec.expected.rules_retrieved = string_list(e, "rules_retrieved");
      spec.expected.rules_cited = string_list(e, "rules_cited");
      if (const auto r = e.find("rounds"); r != e.end()) spec.expected.rounds = r->get<int>();
      if (const auto t = e.find("trigger_kind"); t != e.end()) {
        spec.expected.trigger_kind = parse_trigger_kind(t->get<std::string>());
        if (!spec.expected.trigger_kind) throw GovernanceError(ErrorCode::SchemaError, "unknown trigger kind", spec.id);
      }
      if (!kOutcomes.contains(spec.expected.outcome)) {
        throw GovernanceError(ErrorCode::SchemaError, "expected outcome must be PROCEED, SELF_CORRECT->PROCEED or ESCALATE",
                              spec.id);
      }
      if (spec.phrasings.empty() || spec.repetitions < 1) {
        throw GovernanceError(ErrorCode::SchemaError, "scenario needs phrasings and repetitions >= 1", spec.id);
      }
      suite.scenarios.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw GovernanceError(ErrorCode::SchemaError, std::string("scenario suite: ") + e.what());
  }
  return suite;
}

ScenarioSuite load_scenario_suite(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GovernanceError(ErrorCode::ParseError, "cannot open scenario suite", path);
  const auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw GovernanceError(ErrorCode::ParseError, "scenario suite is not valid JSON", path);
  return scenario_suite_from_json(j);
}

std::string stub_intent_text(const ScenarioSpec& spec, const std::string& workflow_id, int rep) {
  const auto rotated = [rep](const ParameterMap& params) {
    std::vector<std::pair<std::string, Scalar>> items(params.begin(), params.end());
    if (!items.empty()) std::rotate(items.begin(), items.begin() + (rep % static_cast<int>(items.size())), items.end());
    ordered_json out = ordered_json::object();
    for (const auto& [k, v] : items) out[k] = ordered_json::parse(to_json(v).dump());
    return out;
  };
  ordered_json j;
  j["intent_id"] = spec.id + "-" + std::to_string(rep + 1);
  j["agent_id"] = spec.intent.agent_id;
  j["workflow_id"] = workflow_id;
  j["action_class"] = spec.intent.action_class;
  j["description"] = spec.phrasings[static_cast<std::size_t>(rep) % spec.phrasings.size()];
  j["parameters"] = rotated(spec.intent.parameters);
  j["irreversible"] = spec.intent.irreversible;
  j["alternatives"] = ordered_json::array();
  for (const auto& alt : spec.intent.alternatives) j["alternatives"].push_back(rotated(alt));
  return j.dump();
}

MetricsReport run_scenarios(const ScenarioSuite& suite, GovernanceService& service, const HarnessOptions& options) {
  MetricsReport report;
  report.backend = service.deliberator().name();
  report.prompt_template_version = service.deliberator().prompt_template_version();
  report.ruleset_version = service.rules().active()->version;

  for (const auto& spec : suite.scenarios) {
    // Apply the scenario's context, remembering what to restore.
    auto& ctx = service.context();
    const auto before = ctx.snapshot();
    for (const auto& [key, value] : spec.context_overrides.signals) ctx.set_signal(options.actor, key, value);
    for (const auto& [name, members] : spec.context_overrides.registries) ctx.update_registry(options.actor, name, members);

    std::vector<RunOutcome> outcomes(static_cast<std::size_t>(spec.repetitions));
    if (options.parallel) {
      std::vector<std::future<RunOutcome>> futures;
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        futures.push_back(std::async(std::launch::async, run_once, std::cref(spec), std::cref(suite.workflow_id), rep,
                                     std::ref(service)));
      }
      for (std::size_t i = 0; i < futures.size(); ++i) outcomes[i] = futures[i].get();
    } else {
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        outcomes[static_cast<std::size_t>(rep)] = run_once(spec, suite.workflow_id, rep, service);
      }
    }

    for (const auto& [key, value] : spec.context_overrides.signals) {
      if (const auto* old = before->signal(key)) {
        ctx.set_signal(options.actor, key, *old);
      } else {
        ctx.clear_signal(options.actor, key);
      }
    }
    for (const auto& [name, members] : spec.context_overrides.registries) {
      const auto* old = before->registry(name);
      ctx.update_registry(options.actor, name, old ? *old : std::set<std::string>{});
    }

    ScenarioMetrics m;
    m.id = spec.id;
    m.title = spec.title;
    m.expected_outcome = spec.expected.outcome;
    const bool escalation_expected = spec.expected.outcome == "ESCALATE";
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& o = outcomes[i];
      ++m.runs;
      m.correct += o.correct ? 1 : 0;
      m.escalations += o.escalated ? 1 : 0;
      m.true_escalations += (o.escalated && escalation_expected) ? 1 : 0;
      m.complete_traces += o.complete ? 1 : 0;
      m.total_ns += o.total_ns;
      m.deliberation_ns += o.deliberation_ns;
      m.bypass_ns += o.bypass_ns;
      if (!o.problem.empty()) m.failures.push_back({static_cast<int>(i) + 1, o.problem});
    }
    report.scenarios.push_back(std::move(m));
  }
  report.chain_ok = service.log().verify_chain().ok;
  return report;
}

// ── Report ───────────────────────────────────────────────────────────────────

namespace {
template <typename F>
std::int64_t sum(const std::vector<ScenarioMetrics>& v, F f) {
  std::int64_t total = 0;
  for (const auto& m : v) total += f(m);
  return total;
}
}  // namespace

int MetricsReport::runs() const { return static_cast<int>(sum(scenarios, [](const auto& m) { return m.runs; })); }
int MetricsReport::correct() const { return static_cast<int>(sum(scenarios, [](const auto& m) { return m.correct; })); }
int MetricsReport::escalations() const {
  return static_cast<int>(sum(scenarios, [](const auto& m) { return m.escalations; }));
}
int MetricsReport::true_escalations() const {
  return static_cast<int>(sum(scenarios, [](const auto& m) { return m.true_escalations; }));
}
int MetricsReport::complete_traces() const {
  return static_cast<int>(sum(scenarios, [](const auto& m) { return m.complete_traces; }));
}
double MetricsReport::accuracy() const { return runs() == 0 ? 0.0 : static_cast<double>(correct()) / runs(); }
double MetricsReport::escalation_precision() const {
  return escalations() == 0 ? 1.0 : static_cast<double>(true_escalations()) / escalations();
}
double MetricsReport::trace_completeness() const {
  return runs() == 0 ? 0.0 : static_cast<double>(complete_traces()) / runs();
}
double MetricsReport::mean_total_ms() const { return mean_ms(sum(scenarios, [](const auto& m) { return m.total_ns; }), runs()); }
double MetricsReport::mean_deliberation_ms() const {
  return mean_ms(sum(scenarios, [](const auto& m) { return m.deliberation_ns; }), runs());
}
double MetricsReport::mean_overhead_ms() const { return mean_total_ms() - mean_deliberation_ms(); }
double MetricsReport::mean_bypass_ms() const {
  return mean_ms(sum(scenarios, [](const auto& m) { return m.bypass_ns; }), runs());
}

json to_json(const MetricsReport& r) {
  json scenarios = json::array();
  for (const auto& m : r.scenarios) {
    json failures = json::array();
    for (const auto& f : m.failures) failures.push_back({{"repetition", f.repetition}, {"problem", f.problem}});
    scenarios.push_back({{"id", m.id},
                         {"title", m.title},
                         {"expected_outcome", m.expected_outcome},
                         {"runs", m.runs},
                         {"correct", m.correct},
                         {"escalations", m.escalations},
                         {"true_escalations", m.true_escalations},
                         {"complete_traces", m.complete_traces},
                         {"mean_total_ms", mean_ms(m.total_ns, m.runs)},
                         {"mean_deliberation_ms", mean_ms(m.deliberation_ns, m.runs)},
                         {"mean_overhead_ms", mean_ms(m.total_ns - m.deliberation_ns, m.runs)},
                         {"failures", failures}});
  }
  return {{"backend", r.backend},
          {"deterministic", r.backend == "reference"},
          {"prompt_template_version", r.prompt_template_version},
          {"ruleset_version", r.ruleset_version},
          {"scenarios", scenarios},
          {"totals",
           {{"runs", r.runs()},
            {"correct", r.correct()},
            {"accuracy", r.accuracy()},
            {"escalations", r.escalations()},
            {"true_escalations", r.true_escalations()},
            {"escalation_precision", r.escalation_precision()},
            {"complete_traces", r.complete_traces()},
            {"trace_completeness", r.trace_completeness()},
            {"mean_total_ms", r.mean_total_ms()},
            {"mean_deliberation_ms", r.mean_deliberation_ms()},
            {"mean_overhead_ms", r.mean_overhead_ms()},
            {"mean_bypass_ms", r.mean_bypass_ms()},
            {"mean_added_latency_ms", r.mean_total_ms()}}},
          {"chain_ok", r.chain_ok}};
}

std::string render_table(const MetricsReport& r) {
  std::ostringstream out;
  out << "backend: " << r.backend << (r.backend == "reference" ? " (deterministic ceiling)" : " (stochastic)")
      << "   rule set v" << r.ruleset_version << "\n\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-4s %-34s %-22s %-8s %-11s %-8s %-13s %-13s\n", "id", "scenario", "expected",
                "correct", "escalated", "traces", "overhead ms", "deliberate ms");
  out << line;
  for (const auto& m : r.scenarios) {
    std::snprintf(line, sizeof line, "%-4s %-34s %-22s %-8s %-11s %-8s %-13s %-13s\n", m.id.c_str(),
                  m.title.substr(0, 34).c_str(), m.expected_outcome.c_str(), ratio(m.correct, m.runs).c_str(),
                  ratio(m.true_escalations, m.escalations).c_str(), ratio(m.complete_traces, m.runs).c_str(),
                  fixed(mean_ms(m.total_ns - m.deliberation_ns, m.runs), 3).c_str(),
                  fixed(mean_ms(m.deliberation_ns, m.runs), 3).c_str());
    out << line;
  }
  out << "\naccuracy             " << ratio(r.correct(), r.runs()) << " (" << fixed(100.0 * r.accuracy(), 1) << "%)\n";
  out << "escalation precision " << ratio(r.true_escalations(), r.escalations()) << " ("
      << fixed(100.0 * r.escalation_precision(), 1) << "%)\n";
  out << "trace completeness   " << ratio(r.complete_traces(), r.runs()) << " ("
      << fixed(100.0 * r.trace_completeness(), 1) << "%), chain " << (r.chain_ok ? "OK" : "BROKEN") << "\n";
  out << "latency (mean)       governed " << fixed(r.mean_total_ms(), 3) << " ms = engine " << fixed(r.mean_overhead_ms(), 3)
      << " ms + deliberation " << fixed(r.mean_deliberation_ms(), 3) << " ms; bypass " << fixed(r.mean_bypass_ms(), 3)
      << " ms\n";
  for (const auto& m : r.scenarios) {
    for (const auto& f : m.failures) out << "  " << m.id << " #" << f.repetition << ": " << f.problem << "\n";
  }
  return out.str();
}

}  // namespace agentgov
