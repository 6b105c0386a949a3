#include "agentgov/service.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "agentgov/error.hpp"
#include "agentgov/prompt.hpp"

namespace agentgov {

namespace {

constexpr std::string_view kServerVersion = "1.0.0";
constexpr std::string_view kProtocolVersion = "2025-06-18";

std::string resolve_path(const std::string& base, const std::string& p) {
  if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw GovernanceError(ErrorCode::SchemaError, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw GovernanceError(ErrorCode::SchemaError, "unknown key in " + where, key);
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GovernanceError(ErrorCode::ParseError, "cannot open file", path);
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw GovernanceError(ErrorCode::ParseError, "file is not valid JSON", path);
  return j;
}

// ── Tool table ───────────────────────────────────────────────────────────────

enum class Access { Any, Agent, Operator };

struct ToolSpec {
  std::string name;
  Access access;
  std::string description;
  json input_schema;
};

json object_schema(json properties, std::vector<std::string> required = {}) {
  json s = {{"type", "object"}, {"properties", std::move(properties)}};
  if (!required.empty()) s["required"] = required;
  return s;
}

const std::vector<ToolSpec>& tool_specs() {
  static const std::vector<ToolSpec> specs = [] {
    const json str = {{"type", "string"}};
    const json obj = {{"type", "object"}};
    const json integer = {{"type", "integer"}};
    return std::vector<ToolSpec>{
        {"evaluate_intent", Access::Agent,
         "Run the pre-action governance loop for an intent and return the compliance decision.",
         object_schema({{"intent", obj}}, {"intent"})},
        {"get_applicable_rules", Access::Any,
         "Rules that apply to an agent in a workflow under the current context, in precedence order.",
         object_schema({{"agent_id", str}, {"workflow_id", str}}, {"agent_id", "workflow_id"})},
        {"get_rules", Access::Any, "The active rule set, or a published version.",
         object_schema({{"version", integer}})},
        {"put_rules", Access::Operator, "Validate and activate a rule set as the next version.",
         object_schema({{"document", obj}}, {"document"})},
        {"validate_rules", Access::Any, "Structural validation of a rule set without activating it.",
         object_schema({{"document", obj}}, {"document"})},
        {"lint_rules", Access::Any, "Rule-writing warnings and modality conflicts for a rule set (default: active).",
         object_schema({{"document", obj}})},
        {"get_context", Access::Any, "Current runtime signals and registries.", object_schema(json::object())},
        {"set_signal", Access::Operator, "Set a runtime signal.",
         object_schema({{"key", str}, {"value", {{"type", json::array({"string", "number", "boolean"})}}}},
                       {"key", "value"})},
        {"clear_signal", Access::Operator, "Remove a runtime signal.", object_schema({{"key", str}}, {"key"})},
        {"update_registry", Access::Operator, "Replace the members of a named registry.",
         object_schema({{"name", str}, {"members", {{"type", "array"}, {"items", str}}}}, {"name", "members"})},
        {"query_traces", Access::Any, "Filter the reasoning-trace log.",
         object_schema({{"agent_id", str},
                        {"workflow_id", str},
                        {"decision", str},
                        {"rule_id", str},
                        {"kind", str},
                        {"run_id", str},
                        {"since", str},
                        {"until", str},
                        {"cursor", str},
                        {"limit", integer}})},
        {"verify_chain", Access::Any, "Recompute the trace log hash chain.",
         object_schema({{"first", integer}, {"count", integer}})},
        {"export_traces", Access::Operator, "The trace log as stored canonical lines.", object_schema(json::object())},
        {"list_escalations", Access::Operator, "Escalations, optionally filtered by status.",
         object_schema({{"status", str}})},
        {"get_escalation", Access::Any, "One escalation; agents may read only their own.",
         object_schema({{"escalation_id", str}}, {"escalation_id"})},
        {"resolve_escalation", Access::Operator, "Approve or deny a pending escalation.",
         object_schema({{"escalation_id", str}, {"verdict", str}, {"note", str}}, {"escalation_id", "verdict"})},
        {"poll_events", Access::Operator, "Escalation events after a sequence number, waiting up to wait_ms.",
         object_schema({{"after", integer}, {"wait_ms", integer}})},
        {"get_health", Access::Any, "Rule-set version, deliberator status and log chain status.",
         object_schema(json::object())},
    };
  }();
  return specs;
}

const ToolSpec* find_tool(std::string_view name) {
  for (const auto& t : tool_specs()) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

template <typename T>
T arg(const json& args, const char* key) {
  const auto it = args.find(key);
  if (it == args.end()) throw GovernanceError(ErrorCode::InvalidArgument, std::string("missing argument '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw GovernanceError(ErrorCode::InvalidArgument, std::string("argument '") + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> opt_arg(const json& args, const char* key) {
  const auto it = args.find(key);
  if (it == args.end() || it->is_null()) return std::nullopt;
  return arg<T>(args, key);
}

json rpc_error(const json& id, int code, const std::string& message, json data = nullptr) {
  json e = {{"code", code}, {"message", message}};
  if (!data.is_null()) e["data"] = std::move(data);
  return {{"jsonrpc", "2.0"}, {"id", id}, {"error", std::move(e)}};
}

json rpc_result(const json& id, json result) { return {{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}}; }

}  // namespace

// ── Config ───────────────────────────────────────────────────────────────────

std::map<std::string, std::string> parse_token_list(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    std::string_view item = text.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size()) {
        throw GovernanceError(ErrorCode::SchemaError, "token list entries must be <id>=<token>");
      }
      out.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    }
    pos = comma + 1;
  }
  return out;
}

ServiceConfig ServiceConfig::from_json(const json& j, const std::string& base_dir) {
  reject_unknown(j,
                 {"listen", "rules_path", "context_seed_path", "prompts_dir", "log_path", "log_fsync", "lint_config_path",
                  "deliberator", "engine", "escalations", "auth"},
                 "service config");
  ServiceConfig c;
  try {
    c.listen = j.value("listen", c.listen);
    c.rules_path = resolve_path(base_dir, j.value("rules_path", std::string()));
    c.context_seed_path = resolve_path(base_dir, j.value("context_seed_path", std::string()));
    c.prompts_dir = resolve_path(base_dir, j.value("prompts_dir", std::string()));
    c.log_path = resolve_path(base_dir, j.value("log_path", std::string()));
    c.log_fsync = j.value("log_fsync", c.log_fsync);
    c.lint_config_path = resolve_path(base_dir, j.value("lint_config_path", std::string()));

    if (const auto it = j.find("deliberator"); it != j.end()) {
      reject_unknown(*it, {"backend", "llm"}, "deliberator");
      c.backend = it->value("backend", c.backend);
      if (const auto llm = it->find("llm"); llm != it->end()) c.llm = CompletionEndpointConfig::from_json(*llm);
    }
    if (const auto it = j.find("engine"); it != j.end()) {
      reject_unknown(*it, {"max_self_correct", "default_action", "irreversible_action_classes"}, "engine");
      c.engine.max_self_correct = it->value("max_self_correct", c.engine.max_self_correct);
      const auto action = it->value("default_action", std::string("PROCEED"));
      if (action == "PROCEED") {
        c.engine.default_action = DefaultAction::Proceed;
      } else if (action == "ESCALATE") {
        c.engine.default_action = DefaultAction::Escalate;
      } else {
        throw GovernanceError(ErrorCode::SchemaError, "default_action must be PROCEED or ESCALATE", action);
      }
      c.engine.irreversible_action_classes =
          it->value("irreversible_action_classes", std::set<std::string>{});
    }
    if (const auto it = j.find("escalations"); it != j.end()) {
      reject_unknown(*it, {"token_ttl_seconds", "pending_ttl_seconds", "event_buffer"}, "escalations");
      c.escalations.token_ttl = std::chrono::seconds(it->value("token_ttl_seconds", c.escalations.token_ttl.count()));
      c.escalations.pending_ttl =
          std::chrono::seconds(it->value("pending_ttl_seconds", c.escalations.pending_ttl.count()));
      c.escalations.event_buffer = it->value("event_buffer", c.escalations.event_buffer);
    }
    if (const auto it = j.find("auth"); it != j.end()) {
      reject_unknown(*it, {"enabled", "operator_tokens_env", "agent_tokens_env"}, "auth");
      c.auth_enabled = it->value("enabled", c.auth_enabled);
      c.operator_tokens_env = it->value("operator_tokens_env", c.operator_tokens_env);
      c.agent_tokens_env = it->value("agent_tokens_env", c.agent_tokens_env);
    }
  } catch (const json::exception& e) {
    throw GovernanceError(ErrorCode::SchemaError, std::string("service config: ") + e.what());
  }
  if (c.backend != "reference" && c.backend != "llm") {
    throw GovernanceError(ErrorCode::SchemaError, "deliberator.backend must be reference or llm", c.backend);
  }
  if (c.backend == "llm" && !c.llm) {
    throw GovernanceError(ErrorCode::SchemaError, "llm backend needs deliberator.llm endpoint settings");
  }
  if (c.rules_path.empty()) throw GovernanceError(ErrorCode::SchemaError, "rules_path is required");
  c.port();  // validates listen
  return c;
}

ServiceConfig ServiceConfig::load(const std::string& path) {
  return from_json(read_json_file(path), std::filesystem::path(path).parent_path().string());
}

void ServiceConfig::resolve_secrets() {
  const auto read = [](const std::string& var) {
    const char* v = var.empty() ? nullptr : std::getenv(var.c_str());
    return v ? parse_token_list(v) : std::map<std::string, std::string>{};
  };
  operator_tokens = read(operator_tokens_env);
  agent_tokens = read(agent_tokens_env);
}

std::string ServiceConfig::host() const { return listen.substr(0, listen.rfind(':')); }

int ServiceConfig::port() const {
  const auto colon = listen.rfind(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument("no port");
    const int p = std::stoi(listen.substr(colon + 1));
    if (p < 0 || p > 65535) throw std::out_of_range("port");
    return p;
  } catch (const std::exception&) {
    throw GovernanceError(ErrorCode::SchemaError, "listen must be <host>:<port>", listen);
  }
}

json to_json(const ServiceConfig& c) {
  json j = {{"listen", c.listen},
            {"rules_path", c.rules_path},
            {"context_seed_path", c.context_seed_path},
            {"prompts_dir", c.prompts_dir},
            {"log_path", c.log_path},
            {"log_fsync", c.log_fsync},
            {"lint_config_path", c.lint_config_path},
            {"deliberator", {{"backend", c.backend}}},
            {"engine",
             {{"max_self_correct", c.engine.max_self_correct},
              {"default_action", to_string(c.engine.default_action)},
              {"irreversible_action_classes", c.engine.irreversible_action_classes}}},
            {"escalations",
             {{"token_ttl_seconds", c.escalations.token_ttl.count()},
              {"pending_ttl_seconds", c.escalations.pending_ttl.count()},
              {"event_buffer", c.escalations.event_buffer}}},
            {"auth",
             {{"enabled", c.auth_enabled},
              {"operator_tokens_env", c.operator_tokens_env},
              {"agent_tokens_env", c.agent_tokens_env}}}};
  if (c.llm) j["deliberator"]["llm"] = to_json(*c.llm);
  return j;
}

// ── Errors ───────────────────────────────────────────────────────────────────

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::SchemaError:
    case ErrorCode::TypeMismatch:
    case ErrorCode::InvalidArgument:
    case ErrorCode::PreconditionViolation:
    case ErrorCode::MissingRuleCitation:
      return 400;
    case ErrorCode::Unauthorized:
      return 401;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::AlreadyResolved:
      return 409;
    case ErrorCode::DeliberatorFailure:
    case ErrorCode::TransportError:
    case ErrorCode::ParseFailure:
      return 502;
    case ErrorCode::Timeout:
      return 504;
    case ErrorCode::StorageFailure:
      return 503;
  }
  return 500;
}

json error_body(const GovernanceError& e) {
  return {{"error", {{"code", to_string(e.code())}, {"message", e.detail()}, {"subject", e.subject()}}}};
}

const std::vector<std::string>& tool_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& t : tool_specs()) out.push_back(t.name);
    return out;
  }();
  return names;
}

// ── Service ──────────────────────────────────────────────────────────────────

GovernanceService::GovernanceService(ServiceConfig config, ServiceOverrides overrides)
    : config_(std::move(config)), clock_(overrides.clock ? overrides.clock : system_clock()) {
  lint_ = config_.lint_config_path.empty() ? LintConfig::defaults()
                                           : LintConfig::from_json(read_json_file(config_.lint_config_path));

  std::shared_ptr<TraceStorage> storage = overrides.storage;
  if (!storage) {
    storage = config_.log_path.empty()
                  ? std::static_pointer_cast<TraceStorage>(std::make_shared<MemoryTraceStorage>())
                  : std::make_shared<FileTraceStorage>(config_.log_path, config_.log_fsync);
  }
  log_ = std::make_shared<AuditLog>(storage, clock_);

  auto doc = load_ruleset_file(config_.rules_path);
  if (doc.metadata.timestamp.empty()) doc.metadata.timestamp = format_utc(clock_->utc_now_ns());
  rules_ = std::make_unique<RuleStore>(std::move(doc));
  rules_->set_observer([log = log_](const RuleSetDocument& activated, std::string_view actor) {
    TraceDraft draft;
    draft.kind = RecordKind::RulesActivated;
    draft.agent_id = std::string(actor);
    json ids = json::array();
    for (const auto& r : activated.rules) ids.push_back(r.id);
    draft.intent = {{"version", activated.version}, {"rule_ids", ids}, {"author", activated.metadata.author}};
    draft.ruleset_version = activated.version;
    draft.reasoning = "rule set version " + std::to_string(activated.version) + " activated with " +
                      std::to_string(activated.rules.size()) + " rule(s)";
    draft.decision = "ACTIVATED";
    log->append(std::move(draft));
  });

  RuntimeContext seed;
  if (!config_.context_seed_path.empty()) seed = context_from_json(read_json_file(config_.context_seed_path));
  context_ = std::make_unique<ContextStore>(std::move(seed));
  context_->set_observer([this](const ContextMutation& m) {
    TraceDraft draft;
    draft.kind = RecordKind::ContextMutation;
    draft.agent_id = m.actor;
    draft.intent = {{"kind", m.kind}, {"key", m.key}, {"value", m.value}, {"context_version", m.version}};
    draft.ruleset_version = rules_->active()->version;
    draft.reasoning = m.kind + " " + m.key;
    draft.decision = "COMMITTED";
    log_->append(std::move(draft));
  });

  queue_ = std::make_shared<EscalationQueue>(log_, clock_, config_.escalations);
  ApprovalVerifier verifier = [queue = queue_](const ApprovalCredential& cred, const IntentDescriptor& intent) {
    return queue->verify_approval(cred, intent);
  };

  if (overrides.deliberator) {
    deliberator_ = overrides.deliberator;
  } else if (config_.backend == "llm") {
    auto templates = config_.prompts_dir.empty() ? PromptTemplates::defaults() : PromptTemplates::load(config_.prompts_dir);
    std::shared_ptr<const CompletionTransport> transport =
        overrides.transport ? overrides.transport : std::make_shared<HttpCompletionTransport>();
    deliberator_ = std::make_shared<LlmDeliberator>(*config_.llm, std::move(templates), transport, verifier);
  } else {
    deliberator_ = std::make_shared<ReferenceDeliberator>(verifier);
  }

  engine_ = std::make_unique<GovernanceEngine>(config_.engine, log_, queue_, clock_);
}

std::optional<Principal> GovernanceService::authenticate(std::string_view token) const {
  if (!config_.auth_enabled) return Principal{"anonymous", true, true};
  if (token.empty()) return std::nullopt;
  std::optional<Principal> who;
  const auto grant = [&](const std::map<std::string, std::string>& tokens, bool op) {
    for (const auto& [id, t] : tokens) {
      if (t != token) continue;
      if (!who) who = Principal{id, false, false};
      (op ? who->operator_role : who->agent) = true;
    }
  };
  grant(config_.agent_tokens, false);
  grant(config_.operator_tokens, true);
  return who;
}

RunResult GovernanceService::evaluate(const IntentDescriptor& intent) {
  const auto rules = rules_->active();
  const auto ctx = context_->snapshot();
  return engine_->run(intent, ctx, rules, *deliberator_);
}

json GovernanceService::call_tool(std::string_view token, const std::string& name, const json& arguments) {
  const ToolSpec* tool = find_tool(name);
  if (!tool) throw GovernanceError(ErrorCode::NotFound, "unknown tool", name);
  const auto who = authenticate(token);
  if (!who) throw GovernanceError(ErrorCode::Unauthorized, "missing or unknown credential", name);
  if (tool->access == Access::Agent && !who->agent) {
    throw GovernanceError(ErrorCode::Unauthorized, "tool requires agent credentials", name);
  }
  if (tool->access == Access::Operator && !who->operator_role) {
    throw GovernanceError(ErrorCode::Unauthorized, "tool requires operator credentials", name);
  }
  const json args = arguments.is_null() ? json::object() : arguments;
  if (!args.is_object()) throw GovernanceError(ErrorCode::InvalidArgument, "arguments must be an object", name);
  return dispatch(*who, name, args);
}

json GovernanceService::dispatch(const Principal& who, const std::string& name, const json& args) {
  if (name == "evaluate_intent") {
    const auto intent = intent_from_json(arg<json>(args, "intent"));
    if (!who.operator_role && intent.agent_id != who.id) {
      throw GovernanceError(ErrorCode::Unauthorized, "agent credentials do not match intent.agent_id", intent.agent_id);
    }
    return to_json(evaluate(intent).decision);
  }
  if (name == "get_applicable_rules") {
    const auto doc = rules_->active();
    const auto ctx = context_->snapshot();
    json rules = json::array();
    for (const auto& r : applicable_rules(*doc, arg<std::string>(args, "agent_id"), arg<std::string>(args, "workflow_id"), *ctx)) {
      rules.push_back(to_json(r));
    }
    return {{"ruleset_version", doc->version}, {"context_snapshot_id", ctx->snapshot_id}, {"rules", rules}};
  }
  if (name == "get_rules") {
    if (const auto v = opt_arg<std::int64_t>(args, "version")) {
      const auto doc = rules_->version(*v);
      if (!doc) throw GovernanceError(ErrorCode::NotFound, "rule-set version was never published", std::to_string(*v));
      return to_json(*doc);
    }
    return to_json(*rules_->active());
  }
  if (name == "put_rules") {
    auto doc = ruleset_from_json(arg<json>(args, "document"));
    if (doc.metadata.author.empty()) doc.metadata.author = who.id;
    const auto result = rules_->publish(std::move(doc), who.id, format_utc(clock_->utc_now_ns()));
    return {{"version", result.document->version},
            {"changed", result.changed},
            {"message", result.message},
            {"rule_count", result.document->rules.size()}};
  }
  if (name == "validate_rules") {
    const auto doc = ruleset_from_json(arg<json>(args, "document"));
    json violations = json::array();
    for (const auto& v : validate_ruleset(doc)) violations.push_back(to_json(v));
    return {{"valid", violations.empty()}, {"violations", violations}};
  }
  if (name == "lint_rules") {
    const auto doc = args.contains("document") ? std::make_shared<const RuleSetDocument>(ruleset_from_json(args["document"]))
                                               : rules_->active();
    json warnings = json::array();
    for (const auto& w : lint_ruleset(*doc, lint_)) warnings.push_back(to_json(w));
    json conflicts = json::array();
    for (const auto& c : detect_conflicts(*doc)) conflicts.push_back(to_json(c));
    return {{"warnings", warnings}, {"conflicts", conflicts}};
  }
  if (name == "get_context") return to_json(*context_->snapshot());
  if (name == "set_signal") {
    const auto version = context_->set_signal(who.id, arg<std::string>(args, "key"), scalar_from_json(arg<json>(args, "value")));
    return {{"context_version", version}};
  }
  if (name == "clear_signal") {
    return {{"context_version", context_->clear_signal(who.id, arg<std::string>(args, "key"))}};
  }
  if (name == "update_registry") {
    const auto version = context_->update_registry(who.id, arg<std::string>(args, "name"),
                                                   arg<std::set<std::string>>(args, "members"));
    return {{"context_version", version}};
  }
  if (name == "query_traces") {
    TraceFilter f;
    f.agent_id = opt_arg<std::string>(args, "agent_id");
    f.workflow_id = opt_arg<std::string>(args, "workflow_id");
    f.decision = opt_arg<std::string>(args, "decision");
    f.rule_id = opt_arg<std::string>(args, "rule_id");
    f.run_id = opt_arg<std::string>(args, "run_id");
    f.cursor = opt_arg<std::string>(args, "cursor");
    if (const auto k = opt_arg<std::string>(args, "kind")) {
      f.kind = parse_record_kind(*k);
      if (!f.kind) throw GovernanceError(ErrorCode::InvalidArgument, "unknown record kind", *k);
    }
    if (const auto s = opt_arg<std::string>(args, "since")) f.since_ns = parse_utc(*s);
    if (const auto u = opt_arg<std::string>(args, "until")) f.until_ns = parse_utc(*u);
    if (const auto l = opt_arg<std::int64_t>(args, "limit")) {
      if (*l < 0) throw GovernanceError(ErrorCode::InvalidArgument, "limit must be >= 0");
      f.limit = static_cast<std::size_t>(*l);
    }
    const auto page = log_->query(f);
    json records = json::array();
    for (const auto& r : page.records) records.push_back(to_json(r));
    json out = {{"records", records}, {"next_cursor", nullptr}};
    if (page.next_cursor) out["next_cursor"] = *page.next_cursor;
    return out;
  }
  if (name == "verify_chain") {
    const auto first = opt_arg<std::int64_t>(args, "first").value_or(0);
    const auto count = opt_arg<std::int64_t>(args, "count");
    if (first < 0 || (count && *count < 0)) throw GovernanceError(ErrorCode::InvalidArgument, "first/count must be >= 0");
    return to_json(log_->verify_chain(static_cast<std::size_t>(first),
                                      count ? static_cast<std::size_t>(*count) : std::numeric_limits<std::size_t>::max()));
  }
  if (name == "export_traces") return {{"lines", log_->export_lines()}};
  if (name == "list_escalations") {
    std::optional<EscalationStatus> status;
    if (const auto s = opt_arg<std::string>(args, "status")) {
      status = parse_escalation_status(*s);
      if (!status) throw GovernanceError(ErrorCode::InvalidArgument, "unknown escalation status", *s);
    }
    queue_->expire_stale();
    json items = json::array();
    for (const auto& item : queue_->list(status)) items.push_back(to_json(item));
    return {{"escalations", items}};
  }
  if (name == "get_escalation") {
    const auto id = arg<std::string>(args, "escalation_id");
    const auto item = queue_->get(id);
    if (!item || (!who.operator_role && item->intent.agent_id != who.id)) {
      throw GovernanceError(ErrorCode::NotFound, "no such escalation", id);
    }
    return to_json(*item);
  }
  if (name == "resolve_escalation") {
    const auto verdict_text = arg<std::string>(args, "verdict");
    const auto verdict = parse_resolution(verdict_text);
    if (!verdict) throw GovernanceError(ErrorCode::InvalidArgument, "verdict must be APPROVED or DENIED", verdict_text);
    queue_->expire_stale();
    return to_json(queue_->resolve(arg<std::string>(args, "escalation_id"), *verdict, who.id,
                                   opt_arg<std::string>(args, "note").value_or("")));
  }
  if (name == "poll_events") {
    const auto after = opt_arg<std::int64_t>(args, "after").value_or(0);
    const auto wait = std::clamp<std::int64_t>(opt_arg<std::int64_t>(args, "wait_ms").value_or(0), 0, 60000);
    json events = json::array();
    for (const auto& e : queue_->events_after(static_cast<std::uint64_t>(std::max<std::int64_t>(after, 0)),
                                              std::chrono::milliseconds(wait))) {
      events.push_back(to_json(e));
    }
    return {{"events", events}, {"last_sequence", queue_->last_event_sequence()}};
  }
  if (name == "get_health") return health();
  throw GovernanceError(ErrorCode::NotFound, "unknown tool", name);
}

json GovernanceService::tool_list() const {
  json tools = json::array();
  for (const auto& t : tool_specs()) {
    tools.push_back({{"name", t.name}, {"description", t.description}, {"inputSchema", t.input_schema}});
  }
  return {{"tools", tools}};
}

json GovernanceService::health() const {
  const auto doc = rules_->active();
  const auto chain = log_->verify_chain();
  const auto backend = deliberator_->health();
  const bool ok = chain.ok && backend == BackendHealth::Ok && !engine_->halted();
  return {{"status", ok ? "ok" : "degraded"},
          {"ruleset_version", doc->version},
          {"rule_count", doc->rules.size()},
          {"deliberator",
           {{"name", deliberator_->name()},
            {"status", to_string(backend)},
            {"prompt_template_version", deliberator_->prompt_template_version()}}},
          {"log", {{"records", log_->size()}, {"chain_ok", chain.ok}, {"head_hash", log_->head_hash()}}},
          {"engine_halted", engine_->halted()},
          {"context_version", context_->version()},
          {"pending_escalations", queue_->list(EscalationStatus::Pending).size()}};
}

std::optional<json> GovernanceService::handle_jsonrpc(const json& request, std::string_view token) {
  if (!request.is_object() || request.value("jsonrpc", "") != "2.0" || !request.contains("method") ||
      !request["method"].is_string()) {
    return rpc_error(request.is_object() ? request.value("id", json()) : json(), -32600, "Invalid Request");
  }
  const bool notification = !request.contains("id");
  const json id = request.value("id", json());
  const auto method = request["method"].get<std::string>();
  const json params = request.value("params", json::object());

  if (notification) return std::nullopt;  // notifications/initialized and friends need no answer

  if (method == "initialize") {
    return rpc_result(id, {{"protocolVersion", kProtocolVersion},
                           {"capabilities", {{"tools", {{"listChanged", false}}}}},
                           {"serverInfo", {{"name", "agentgov"}, {"version", kServerVersion}}}});
  }
  if (method == "ping") return rpc_result(id, json::object());
  if (method == "tools/list") return rpc_result(id, tool_list());
  if (method == "tools/call") {
    if (!params.is_object() || !params.contains("name") || !params["name"].is_string()) {
      return rpc_error(id, -32602, "tools/call needs params.name");
    }
    const auto name = params["name"].get<std::string>();
    if (!find_tool(name)) return rpc_error(id, -32602, "Unknown tool: " + name);
    std::string effective_token(token);
    if (const auto meta = params.find("_meta"); meta != params.end() && meta->is_object()) {
      if (const auto t = meta->find("auth_token"); t != meta->end() && t->is_string()) effective_token = t->get<std::string>();
    }
    try {
      json result = call_tool(effective_token, name, params.value("arguments", json::object()));
      return rpc_result(id, {{"content", json::array({{{"type", "text"}, {"text", result.dump()}}})},
                             {"structuredContent", result},
                             {"isError", false}});
    } catch (const GovernanceError& e) {
      const json body = error_body(e);
      return rpc_result(id, {{"content", json::array({{{"type", "text"}, {"text", std::string(e.what())}}})},
                             {"structuredContent", body},
                             {"isError", true}});
    }
  }
  return rpc_error(id, -32601, "Method not found: " + method);
}

std::string GovernanceService::handle_jsonrpc_text(std::string_view text, std::string_view token) {
  const auto request = json::parse(text, nullptr, false);
  if (request.is_discarded()) return rpc_error(nullptr, -32700, "Parse error").dump();
  if (request.is_array()) {
    if (request.empty()) return rpc_error(nullptr, -32600, "Invalid Request").dump();
    json responses = json::array();
    for (const auto& r : request) {
      if (auto resp = handle_jsonrpc(r, token)) responses.push_back(std::move(*resp));
    }
    return responses.empty() ? std::string() : responses.dump();
  }
  const auto resp = handle_jsonrpc(request, token);
  return resp ? resp->dump() : std::string();
}

}  // namespace agentgov
