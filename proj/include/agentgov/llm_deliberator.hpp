#pragma once

#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "agentgov/deliberator.hpp"
#include "agentgov/prompt.hpp"

namespace agentgov {

/// Chat-completion endpoint. `base_url` is the API root, e.g.
/// "http://127.0.0.1:8000/v1"; requests go to `<base_url>/chat/completions`.
struct CompletionEndpointConfig {
  std::string base_url;
  std::string model;
  std::string api_key_env;  // name of the variable holding the bearer token; empty = no auth header
  double temperature = 0.0;
  double timeout_seconds = 30.0;
  int max_retries = 2;  // repair attempts after an unparseable reply
  int max_in_flight = 4;

  /// Rejects unknown keys (SCHEMA_ERROR).
  static CompletionEndpointConfig from_json(const json& j);
};

json to_json(const CompletionEndpointConfig& config);

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

/// Request body sent for `messages`: {"model", "temperature", "messages": [{"role", "content"}]}.
json chat_request_body(const CompletionEndpointConfig& config, const std::vector<ChatMessage>& messages);
/// `choices[0].message.content` of a response body. Throws TRANSPORT_ERROR.
std::string chat_response_content(std::string_view body);

/// One request/response exchange. Implementations throw TIMEOUT or
/// TRANSPORT_ERROR.
class CompletionTransport {
 public:
  virtual ~CompletionTransport() = default;
  virtual std::string complete(const CompletionEndpointConfig& config, const std::vector<ChatMessage>& messages) const = 0;
  /// Cheap reachability check for health reporting.
  virtual bool reachable(const CompletionEndpointConfig&) const { return true; }
};

class HttpCompletionTransport final : public CompletionTransport {
 public:
  std::string complete(const CompletionEndpointConfig& config, const std::vector<ChatMessage>& messages) const override;
  bool reachable(const CompletionEndpointConfig& config) const override;
};

/// Delegates to a callable; used for scripted and garbage-producing backends.
class FunctionTransport final : public CompletionTransport {
 public:
  using Handler = std::function<std::string(const std::vector<ChatMessage>&)>;
  explicit FunctionTransport(Handler handler) : handler_(std::move(handler)) {}
  std::string complete(const CompletionEndpointConfig&, const std::vector<ChatMessage>& messages) const override {
    return handler_(messages);
  }

 private:
  Handler handler_;
};

/// Replays recorded exchanges. A fixture is {"exchanges": [{"request_sha256", "reply"}]} where the digest
/// covers the canonical request body; a request with no recorded exchange is a TRANSPORT_ERROR.
class ReplayTransport final : public CompletionTransport {
 public:
  explicit ReplayTransport(const json& fixture);
  static std::shared_ptr<ReplayTransport> load(const std::string& path);
  std::string complete(const CompletionEndpointConfig& config, const std::vector<ChatMessage>& messages) const override;

 private:
  std::vector<std::pair<std::string, std::string>> exchanges_;
};

/// Digest used by ReplayTransport fixtures.
std::string request_digest(const CompletionEndpointConfig& config, const std::vector<ChatMessage>& messages);

/// Repair instruction appended after an unparseable reply.
std::string repair_instruction(std::string_view problem);

/// Deliberation by a language model behind a chat-completion endpoint. The
/// prompt is the enforcement text, the reply contract and the layered rule
/// block; unparseable replies are retried with a repair instruction up to
/// `max_retries` times, then PARSE_FAILURE is raised. Transport failures are
/// not retried.
class LlmDeliberator final : public Deliberator {
 public:
  LlmDeliberator(CompletionEndpointConfig config, PromptTemplates templates,
                 std::shared_ptr<const CompletionTransport> transport, ApprovalVerifier verifier = {});

  std::string name() const override { return "llm:" + config_.model; }
  std::chrono::milliseconds timeout() const override;
  std::string prompt_template_version() const override { return templates_.version(); }
  BackendHealth health() const override;

  DeliberationVerdict deliberate(const IntentDescriptor& intent, std::span<const Rule> rules,
                                 const RuntimeContext& ctx) const override;

  const CompletionEndpointConfig& config() const noexcept { return config_; }

 private:
  CompletionEndpointConfig config_;
  PromptTemplates templates_;
  std::shared_ptr<const CompletionTransport> transport_;
  ApprovalVerifier verifier_;

  mutable std::mutex slots_mutex_;
  mutable std::condition_variable slots_cv_;
  mutable int in_flight_ = 0;
};

}  // namespace agentgov
