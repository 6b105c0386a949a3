#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agentgov/audit_log.hpp"
#include "agentgov/context.hpp"
#include "agentgov/deliberator.hpp"
#include "agentgov/engine.hpp"
#include "agentgov/error.hpp"
#include "agentgov/escalation_queue.hpp"
#include "agentgov/llm_deliberator.hpp"
#include "agentgov/rule_store.hpp"

namespace agentgov {

enum class Role { Agent, Operator };

struct ServiceConfig {
  std::string listen = "127.0.0.1:8787";
  std::string rules_path;
  std::string context_seed_path;  // empty = no signals or registries
  std::string prompts_dir;        // empty = built-in templates
  std::string log_path;           // empty = in-memory log
  bool log_fsync = true;
  std::string lint_config_path;   // empty = built-in phrase lists

  std::string backend = "reference";  // "reference" | "llm"
  std::optional<CompletionEndpointConfig> llm;

  EngineConfig engine;
  EscalationQueueOptions escalations;

  bool auth_enabled = true;
  std::string operator_tokens_env = "AGENTGOV_OPERATOR_TOKENS";
  std::string agent_tokens_env = "AGENTGOV_AGENT_TOKENS";
  /// principal id -> token, resolved from the environment by resolve_secrets().
  std::map<std::string, std::string> operator_tokens;
  std::map<std::string, std::string> agent_tokens;

  /// Relative paths resolve against `base_dir`. Unknown keys are a
  /// SCHEMA_ERROR.
  static ServiceConfig from_json(const json& j, const std::string& base_dir = ".");
  static ServiceConfig load(const std::string& path);

  /// Reads `<id>=<token>,...` lists from the configured variables.
  void resolve_secrets();

  std::string host() const;
  int port() const;
};

json to_json(const ServiceConfig& config);

/// Parses "<id>=<token>,<id>=<token>". Throws SCHEMA_ERROR.
std::map<std::string, std::string> parse_token_list(std::string_view text);

struct Principal {
  std::string id;
  bool agent = false;
  bool operator_role = false;
};

/// Test and embedding seams; anything left empty is built from the config.
struct ServiceOverrides {
  ClockPtr clock;
  std::shared_ptr<TraceStorage> storage;
  std::shared_ptr<const CompletionTransport> transport;
  std::shared_ptr<const Deliberator> deliberator;
};

/// Tool names, in discovery order.
const std::vector<std::string>& tool_names();

/// One governance server: rule store, context store, audit log, escalation
/// queue, deliberator and engine, with every operation reachable through
/// call_tool(). The JSON-RPC and HTTP surfaces are thin adapters over it.
class GovernanceService {
 public:
  /// Throws on any startup failure (PARSE_ERROR or SCHEMA_ERROR for a bad rule set,
  /// PARSE_ERROR for unreadable files, STORAGE_FAILURE for a corrupt log).
  explicit GovernanceService(ServiceConfig config, ServiceOverrides overrides = {});

  /// nullopt for an unknown or empty token; with auth disabled every caller
  /// is "anonymous" holding both roles.
  std::optional<Principal> authenticate(std::string_view token) const;

  /// Executes a tool. Throws GovernanceError (UNAUTHORIZED when the token
  /// lacks the tool's role; NOT_FOUND for an unknown tool).
  json call_tool(std::string_view token, const std::string& name, const json& arguments);

  /// JSON-RPC 2.0 over the tool set: initialize, tools/list, tools/call,
  /// ping. Returns nullopt for notifications. `token` authenticates the
  /// transport; `params._meta.auth_token` overrides it per call.
  std::optional<json> handle_jsonrpc(const json& request, std::string_view token);
  /// Whole-message form; handles batches and parse errors.
  std::string handle_jsonrpc_text(std::string_view text, std::string_view token);

  json tool_list() const;
  json health() const;

  /// The decision for one intent against the active rules and current
  /// context, both pinned at entry.
  RunResult evaluate(const IntentDescriptor& intent);

  const ServiceConfig& config() const noexcept { return config_; }
  RuleStore& rules() noexcept { return *rules_; }
  ContextStore& context() noexcept { return *context_; }
  AuditLog& log() noexcept { return *log_; }
  EscalationQueue& escalations() noexcept { return *queue_; }
  GovernanceEngine& engine() noexcept { return *engine_; }
  const Deliberator& deliberator() const noexcept { return *deliberator_; }
  ClockPtr clock() const noexcept { return clock_; }

 private:
  json dispatch(const Principal& who, const std::string& name, const json& args);

  ServiceConfig config_;
  ClockPtr clock_;
  LintConfig lint_;
  std::shared_ptr<AuditLog> log_;
  std::unique_ptr<RuleStore> rules_;
  std::unique_ptr<ContextStore> context_;
  std::shared_ptr<EscalationQueue> queue_;
  std::shared_ptr<const Deliberator> deliberator_;
  std::unique_ptr<GovernanceEngine> engine_;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);
/// {"error": {"code", "message", "subject"}}
json error_body(const GovernanceError& e);

}  // namespace agentgov
