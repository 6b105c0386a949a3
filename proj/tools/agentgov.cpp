// Command-line front end: serve, validate, lint, scenarios, traces, escalations.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <httplib.h>

#include "agentgov/error.hpp"
#include "agentgov/harness.hpp"
#include "agentgov/http_server.hpp"
#include "agentgov/service.hpp"

using namespace agentgov;

namespace {

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int fail(const std::exception& e) {
  std::cerr << e.what() << "\n";
  return 2;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GovernanceError(ErrorCode::ParseError, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cmd_serve(const std::string& config_path, bool stdio, const std::string& listen) {
  try {
    auto config = ServiceConfig::load(config_path);
    if (!listen.empty()) config.listen = listen;
    config.resolve_secrets();
    GovernanceService service(config);

    if (stdio) {
      const char* token = std::getenv("AGENTGOV_STDIO_TOKEN");
      std::string line;
      while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        const auto reply = service.handle_jsonrpc_text(line, token ? token : "");
        if (!reply.empty()) std::cout << reply << "\n" << std::flush;
      }
      return 0;
    }

    HttpServer server(service);
    server.bind(config.host(), config.port());
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const auto health = service.health();
    std::cerr << "agentgov listening on " << config.host() << ":" << server.port() << " (rule set v"
              << health["ruleset_version"] << ", " << health["rule_count"] << " rules, deliberator "
              << health["deliberator"]["name"].get<std::string>() << " " << health["deliberator"]["status"].get<std::string>()
              << ")\n";
    server.run();
    g_server = nullptr;
    return 0;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

int cmd_validate(const std::string& path) {
  RuleSetDocument doc;
  try {
    const auto text = read_text(path);
    const auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw GovernanceError(ErrorCode::ParseError, "rule set is not valid JSON", path);
    doc = ruleset_from_json(j);
  } catch (const std::exception& e) {
    return fail(e);
  }
  const auto violations = validate_ruleset(doc);
  for (const auto& v : violations) {
    std::cout << "SCHEMA_ERROR " << to_string(v.code) << " " << (v.rule_id.empty() ? "-" : v.rule_id) << ": " << v.message
              << "\n";
  }
  if (!violations.empty()) return 1;
  std::map<GovernanceLayer, int> counts;
  for (const auto& r : doc.rules) ++counts[r.layer];
  std::cout << "OK version " << doc.version << ", " << doc.rules.size() << " rule(s):";
  for (const auto layer : kAllLayers) std::cout << " " << to_string(layer) << "=" << counts[layer];
  std::cout << "\n";
  return 0;
}

int cmd_lint(const std::string& path, const std::string& lint_config, bool as_json) {
  try {
    const auto doc = load_ruleset_file(path);
    const auto config = lint_config.empty() ? LintConfig::defaults() : LintConfig::from_json(json::parse(read_text(lint_config)));
    const auto warnings = lint_ruleset(doc, config);
    const auto conflicts = detect_conflicts(doc);
    if (as_json) {
      json out = {{"warnings", json::array()}, {"conflicts", json::array()}};
      for (const auto& w : warnings) out["warnings"].push_back(to_json(w));
      for (const auto& c : conflicts) out["conflicts"].push_back(to_json(c));
      std::cout << out.dump(2) << "\n";
    } else {
      for (const auto& w : warnings) std::cout << "warning " << to_string(w.code) << " " << w.rule_id << ": " << w.message << "\n";
      for (const auto& c : conflicts) {
        std::cout << "conflict " << c.winner_id << " (" << to_string(c.winner_modality) << ") overrides " << c.loser_id << " ("
                  << to_string(c.loser_modality) << ")\n";
      }
      std::cout << warnings.size() << " warning(s), " << conflicts.size() << " conflict(s)\n";
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

struct ScenarioArgs {
  std::string config;
  std::string rules = "rules/flowr.json";
  std::string context = "context/flowr.json";
  std::string suite = "scenarios/flowr.json";
  std::string json_out;
  bool fixed_clock = false;
  bool parallel = false;
};

int cmd_scenarios(const ScenarioArgs& a) {
  try {
    ServiceConfig config;
    if (!a.config.empty()) {
      config = ServiceConfig::load(a.config);
    } else {
      config.rules_path = a.rules;
      config.context_seed_path = a.context;
    }
    config.log_path.clear();  // scenario runs never touch a deployment log
    config.auth_enabled = false;
    ServiceOverrides overrides;
    if (a.fixed_clock) overrides.clock = std::make_shared<ManualClock>();
    GovernanceService service(config, overrides);
    const auto report = run_scenarios(load_scenario_suite(a.suite), service, {.parallel = a.parallel});
    std::cout << render_table(report);
    if (!a.json_out.empty()) {
      std::ofstream out(a.json_out);
      out << to_json(report).dump(2) << "\n";
    }
    return report.all_correct() && report.chain_ok ? 0 : 1;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

AuditLog open_log(const std::string& path) { return AuditLog(std::make_shared<FileTraceStorage>(path, false), system_clock()); }

int cmd_traces_query(const std::string& log_path, const TraceFilter& filter) {
  try {
    const auto log = open_log(log_path);
    const auto page = log.query(filter);
    for (const auto& r : page.records) std::cout << canonical_dump(to_json(r)) << "\n";
    if (page.next_cursor) std::cerr << "next cursor: " << *page.next_cursor << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

int cmd_traces_verify(const std::string& log_path) {
  try {
    const auto lines = FileTraceStorage(log_path, false).read_all();
    const auto report = verify_lines(lines);
    std::cout << to_json(report).dump(2) << "\n";
    return report.ok ? 0 : 1;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

int http_call(const std::string& url, const std::string& token, const std::string& method, const std::string& path,
              const json& body) {
  httplib::Client client(url);
  client.set_read_timeout(30, 0);
  if (!token.empty()) client.set_bearer_token_auth(token);
  const auto res = method == "GET" ? client.Get(path) : client.Post(path, body.dump(), "application/json");
  if (!res) {
    std::cerr << "TRANSPORT_ERROR: " << httplib::to_string(res.error()) << "\n";
    return 2;
  }
  const auto j = json::parse(res->body, nullptr, false);
  std::cout << (j.is_discarded() ? res->body : j.dump(2)) << "\n";
  return res->status == 200 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agentgov: pre-action governance server and tools"};
  app.require_subcommand(1);

  std::string config_path = "config/service.json";
  bool stdio = false;
  std::string listen;
  auto* serve = app.add_subcommand("serve", "Run the governance server (HTTP, or JSON-RPC on stdio)");
  serve->add_option("-c,--config", config_path, "Service config file")->capture_default_str();
  serve->add_flag("--stdio", stdio, "Serve JSON-RPC line by line on stdin/stdout");
  serve->add_option("--listen", listen, "Override the configured <host>:<port>");

  std::string rules_path;
  auto* validate = app.add_subcommand("validate", "Validate a rule-set document");
  validate->add_option("rules", rules_path, "Rule-set file")->required();

  std::string lint_config;
  bool lint_json = false;
  auto* lint = app.add_subcommand("lint", "Lint a rule-set document and report modality conflicts");
  lint->add_option("rules", rules_path, "Rule-set file")->required();
  lint->add_option("--lint-config", lint_config, "Phrase-list config");
  lint->add_flag("--json", lint_json, "Machine-readable output");

  ScenarioArgs sargs;
  auto* scenarios = app.add_subcommand("scenarios", "Scenario harness");
  scenarios->require_subcommand(1);
  auto* srun = scenarios->add_subcommand("run", "Run a scenario suite and report metrics");
  srun->add_option("-c,--config", sargs.config, "Service config (its log path is ignored)");
  srun->add_option("--rules", sargs.rules, "Rule-set file when no config is given")->capture_default_str();
  srun->add_option("--context", sargs.context, "Context seed when no config is given")->capture_default_str();
  srun->add_option("--suite", sargs.suite, "Scenario suite")->capture_default_str();
  srun->add_option("--json", sargs.json_out, "Also write the report as JSON to this file");
  srun->add_flag("--fixed-clock", sargs.fixed_clock, "Deterministic clock for byte-identical reports");
  srun->add_flag("--parallel", sargs.parallel, "Run repetitions concurrently");

  std::string log_path;
  TraceFilter filter;
  std::string kind, since, until;
  auto* traces = app.add_subcommand("traces", "Inspect a trace log file");
  traces->require_subcommand(1);
  auto* tquery = traces->add_subcommand("query", "Print matching records as canonical lines");
  tquery->add_option("--log", log_path, "Trace log file")->required();
  tquery->add_option("--agent", filter.agent_id);
  tquery->add_option("--workflow", filter.workflow_id);
  tquery->add_option("--decision", filter.decision);
  tquery->add_option("--rule", filter.rule_id, "Cited rule id");
  tquery->add_option("--run", filter.run_id);
  tquery->add_option("--kind", kind);
  tquery->add_option("--since", since, "ISO-8601 UTC, inclusive");
  tquery->add_option("--until", until, "ISO-8601 UTC, exclusive");
  tquery->add_option("--cursor", filter.cursor);
  tquery->add_option("--limit", filter.limit);
  auto* tverify = traces->add_subcommand("verify", "Recompute the hash chain");
  tverify->add_option("--log", log_path, "Trace log file")->required();

  std::string url = "http://127.0.0.1:8787";
  std::string token;
  std::string status, escalation_id, verdict, note;
  auto* esc = app.add_subcommand("escalations", "Operator escalation queue (talks to a running server)");
  esc->require_subcommand(1);
  esc->add_option("--url", url)->capture_default_str();
  esc->add_option("--token", token, "Operator token (default: $AGENTGOV_OPERATOR_TOKEN)");
  auto* elist = esc->add_subcommand("list", "List escalations");
  elist->add_option("--status", status, "PENDING | APPROVED | DENIED | EXPIRED");
  auto* eresolve = esc->add_subcommand("resolve", "Approve or deny an escalation");
  eresolve->add_option("id", escalation_id)->required();
  eresolve->add_option("verdict", verdict, "APPROVED | DENIED")->required();
  eresolve->add_option("--note", note);

  CLI11_PARSE(app, argc, argv);

  if (*serve) return cmd_serve(config_path, stdio, listen);
  if (*validate) return cmd_validate(rules_path);
  if (*lint) return cmd_lint(rules_path, lint_config, lint_json);
  if (*srun) return cmd_scenarios(sargs);
  if (*tquery) {
    try {
      if (!kind.empty()) {
        filter.kind = parse_record_kind(kind);
        if (!filter.kind) throw GovernanceError(ErrorCode::InvalidArgument, "unknown record kind", kind);
      }
      if (!since.empty()) filter.since_ns = parse_utc(since);
      if (!until.empty()) filter.until_ns = parse_utc(until);
    } catch (const std::exception& e) {
      return fail(e);
    }
    return cmd_traces_query(log_path, filter);
  }
  if (*tverify) return cmd_traces_verify(log_path);
  if (*esc) {
    if (token.empty()) {
      if (const char* t = std::getenv("AGENTGOV_OPERATOR_TOKEN")) token = t;
    }
    if (*elist) return http_call(url, token, "GET", "/v1/escalations" + (status.empty() ? "" : "?status=" + status), {});
    if (*eresolve) {
      return http_call(url, token, "POST", "/v1/escalations/" + escalation_id + "/resolve",
                       {{"verdict", verdict}, {"note", note}});
    }
  }
  return 0;
}
