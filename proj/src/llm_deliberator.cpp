#include "agentgov/llm_deliberator.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // "" or "/v1"
};

SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw GovernanceError(ErrorCode::InvalidArgument, "endpoint base_url needs a scheme: " + url);
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

httplib::Client make_client(const CompletionEndpointConfig& config, double timeout_seconds) {
  httplib::Client client(split_url(config.base_url).origin);
  const auto whole = static_cast<time_t>(timeout_seconds);
  const auto micros = static_cast<time_t>(std::llround((timeout_seconds - static_cast<double>(whole)) * 1e6));
  client.set_connection_timeout(whole, micros);
  client.set_read_timeout(whole, micros);
  client.set_write_timeout(whole, micros);
  if (!config.api_key_env.empty()) {
    if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
      client.set_bearer_token_auth(key);
    }
  }
  return client;
}

}  // namespace

CompletionEndpointConfig CompletionEndpointConfig::from_json(const json& j) {
  if (!j.is_object()) throw GovernanceError(ErrorCode::SchemaError, "endpoint config must be an object");
  static const std::set<std::string> known{"base_url",        "model",       "api_key_env",  "temperature",
                                           "timeout_seconds", "max_retries", "max_in_flight"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw GovernanceError(ErrorCode::SchemaError, "unknown endpoint config key", key);
  }
  CompletionEndpointConfig c;
  try {
    c.base_url = j.value("base_url", c.base_url);
    c.model = j.value("model", c.model);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.temperature = j.value("temperature", c.temperature);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  } catch (const json::exception& e) {
    throw GovernanceError(ErrorCode::SchemaError, std::string("endpoint config: ") + e.what());
  }
  if (c.timeout_seconds <= 0 || c.max_retries < 0 || c.max_in_flight < 1) {
    throw GovernanceError(ErrorCode::SchemaError,
                          "endpoint config needs timeout_seconds > 0, max_retries >= 0, max_in_flight >= 1");
  }
  return c;
}

json to_json(const CompletionEndpointConfig& c) {
  return {{"base_url", c.base_url},
          {"model", c.model},
          {"api_key_env", c.api_key_env},
          {"temperature", c.temperature},
          {"timeout_seconds", c.timeout_seconds},
          {"max_retries", c.max_retries},
          {"max_in_flight", c.max_in_flight}};
}

json chat_request_body(const CompletionEndpointConfig& config, const std::vector<ChatMessage>& messages) {
  json body = {{"model", config.model}, {"temperature", config.temperature}, {"messages", json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  return body;
}

std::string chat_response_content(std::string_view body) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw GovernanceError(ErrorCode::TransportError, "completion response is not JSON");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw GovernanceError(ErrorCode::TransportError, "completion response lacks choices[0].message.content");
  }
}

std::string HttpCompletionTransport::complete(const CompletionEndpointConfig& config,
                                              const std::vector<ChatMessage>& messages) const {
  auto client = make_client(config, config.timeout_seconds);
  const auto path = split_url(config.base_url).path + "/chat/completions";
  const auto res = client.Post(path, chat_request_body(config, messages).dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::Read || err == httplib::Error::Write ||
                           err == httplib::Error::ConnectionTimeout;
    throw GovernanceError(timed_out ? ErrorCode::Timeout : ErrorCode::TransportError,
                          "completion request to " + config.base_url + " failed: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw GovernanceError(ErrorCode::TransportError,
                          "completion endpoint returned HTTP " + std::to_string(res->status));
  }
  return chat_response_content(res->body);
}

bool HttpCompletionTransport::reachable(const CompletionEndpointConfig& config) const {
  auto client = make_client(config, std::min(config.timeout_seconds, 2.0));
  const auto res = client.Get(split_url(config.base_url).path + "/models");
  return static_cast<bool>(res);  // any HTTP answer means the endpoint is up
}

std::string request_digest(const CompletionEndpointConfig& config, const std::vector<ChatMessage>& messages) {
  return sha256_hex(canonical_dump(chat_request_body(config, messages)));
}

ReplayTransport::ReplayTransport(const json& fixture) {
  try {
    for (const auto& e : fixture.at("exchanges")) {
      exchanges_.emplace_back(e.at("request_sha256").get<std::string>(), e.at("reply").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw GovernanceError(ErrorCode::ParseError, std::string("replay fixture: ") + e.what());
  }
}

std::shared_ptr<ReplayTransport> ReplayTransport::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GovernanceError(ErrorCode::ParseError, "cannot open replay fixture", path);
  const auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw GovernanceError(ErrorCode::ParseError, "replay fixture is not JSON", path);
  return std::make_shared<ReplayTransport>(j);
}

std::string ReplayTransport::complete(const CompletionEndpointConfig& config,
                                      const std::vector<ChatMessage>& messages) const {
  const auto digest = request_digest(config, messages);
  for (const auto& [sha, reply] : exchanges_) {
    if (sha == digest) return reply;
  }
  throw GovernanceError(ErrorCode::TransportError, "no recorded exchange for request", digest);
}

std::string repair_instruction(std::string_view problem) {
  return "Your previous reply could not be used: " + std::string(problem) +
         ". Reply again with exactly one JSON object in the required format and nothing else.";
}

LlmDeliberator::LlmDeliberator(CompletionEndpointConfig config, PromptTemplates templates,
                               std::shared_ptr<const CompletionTransport> transport, ApprovalVerifier verifier)
    : config_(std::move(config)),
      templates_(std::move(templates)),
      transport_(std::move(transport)),
      verifier_(std::move(verifier)) {
  if (!transport_) throw GovernanceError(ErrorCode::InvalidArgument, "LLM deliberator needs a transport");
}

std::chrono::milliseconds LlmDeliberator::timeout() const {
  // Every attempt may use the full per-request budget.
  const double seconds = config_.timeout_seconds * (config_.max_retries + 1);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::ceil(seconds * 1000.0)) + 250);
}

BackendHealth LlmDeliberator::health() const {
  return transport_->reachable(config_) ? BackendHealth::Ok : BackendHealth::Degraded;
}

DeliberationVerdict LlmDeliberator::deliberate(const IntentDescriptor& intent, std::span<const Rule> rules,
                                               const RuntimeContext& ctx) const {
  std::vector<std::string> verified;
  if (verifier_) {
    for (const auto& cred : intent.approvals) {
      if (verifier_(cred, intent)) verified.push_back(cred.rule_id);
    }
  }
  const auto prompt = build_governance_prompt(templates_, intent, rules, ctx, verified);
  std::vector<ChatMessage> messages{{"system", prompt.system_text}, {"user", prompt.user_text}};

  std::unique_lock slot(slots_mutex_);
  slots_cv_.wait(slot, [&] { return in_flight_ < config_.max_in_flight; });
  ++in_flight_;
  slot.unlock();
  struct Release {
    const LlmDeliberator& self;
    ~Release() {
      {
        std::lock_guard lock(self.slots_mutex_);
        --self.in_flight_;
      }
      self.slots_cv_.notify_one();
    }
  } release{*this};

  std::string last_problem;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    const std::string reply = transport_->complete(config_, messages);
    try {
      return parse_decision(reply);
    } catch (const GovernanceError& e) {
      if (e.code() != ErrorCode::ParseFailure) throw;
      last_problem = e.detail();
      messages.push_back({"assistant", reply});
      messages.push_back({"user", repair_instruction(last_problem)});
    }
  }
  throw GovernanceError(ErrorCode::ParseFailure,
                        "no parseable decision after " + std::to_string(config_.max_retries + 1) +
                            " attempt(s); last problem: " + last_problem);
}

}  // namespace agentgov
