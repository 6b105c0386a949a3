#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "agentgov/error.hpp"
#include "agentgov/harness.hpp"
#include "agentgov/llm_deliberator.hpp"
#include "agentgov/service.hpp"
#include "fixtures.hpp"
#include "scripted.hpp"
#include "stack.hpp"

using namespace agentgov;
using namespace agentgov::testing;

namespace {

CompletionEndpointConfig endpoint(int max_retries = 2) {
  CompletionEndpointConfig c;
  c.base_url = "http://model.invalid/v1";
  c.model = "test-model";
  c.max_retries = max_retries;
  return c;
}

const std::string kProceed = R"({"decision":"PROCEED","rules_consulted":[],"reasoning":"nothing engaged"})";

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const GovernanceError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no GovernanceError";
  return ErrorCode::InvalidArgument;
}

DeliberationVerdict deliberate_with(const LlmDeliberator& d, const IntentDescriptor& intent, bool disruption = false) {
  const auto doc = flowr_rules();
  const auto ctx = flowr_context(disruption);
  return d.deliberate(intent, applicable_rules(doc, intent.agent_id, intent.workflow_id, ctx), ctx);
}

// Port that accepts TCP connections but never answers.
struct Blackhole {
  int fd = -1;
  int port = 0;
  Blackhole() {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    ::listen(fd, 64);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port = ntohs(addr.sin_port);
  }
  ~Blackhole() { ::close(fd); }
};

// Local chat-completion endpoint that records what it receives.
struct FakeEndpoint {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::mutex mutex;
  std::vector<json> bodies;
  std::vector<std::string> auth_headers;
  std::string reply = kProceed;
  int status = 200;

  FakeEndpoint() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      bodies.push_back(json::parse(req.body));
      auth_headers.push_back(req.get_header_value("Authorization"));
      res.status = status;
      res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", reply}}}}}}}.dump(),
                      "application/json");
    });
    server.Get("/v1/models", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"data":[]})", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeEndpoint() {
    server.stop();
    thread.join();
  }
  CompletionEndpointConfig config() const {
    auto c = endpoint();
    c.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    c.timeout_seconds = 5;
    return c;
  }
};

}  // namespace

TEST(CompletionEndpointConfig, FromJsonValidates) {
  const auto c = CompletionEndpointConfig::from_json(
      {{"base_url", "http://h/v1"}, {"model", "m"}, {"timeout_seconds", 3.5}, {"max_retries", 0}});
  EXPECT_EQ(c.base_url, "http://h/v1");
  EXPECT_EQ(c.max_retries, 0);
  EXPECT_EQ(c.max_in_flight, 4);
  EXPECT_EQ(CompletionEndpointConfig::from_json(to_json(c)).timeout_seconds, 3.5);
  EXPECT_EQ(code_of([] { CompletionEndpointConfig::from_json({{"base_url", "x"}, {"retries", 1}}); }),
            ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { CompletionEndpointConfig::from_json({{"timeout_seconds", 0}}); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { CompletionEndpointConfig::from_json({{"model", 5}}); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { CompletionEndpointConfig::from_json(json::array()); }), ErrorCode::SchemaError);
}

TEST(ChatWireFormat, RequestAndResponseShapes) {
  const auto body = chat_request_body(endpoint(), {{"system", "s"}, {"user", "u"}});
  EXPECT_EQ(body, (json{{"model", "test-model"},
                        {"temperature", 0.0},
                        {"messages", {{{"role", "system"}, {"content", "s"}}, {{"role", "user"}, {"content", "u"}}}}}));
  EXPECT_EQ(chat_response_content(R"({"choices":[{"message":{"content":"hi"}}]})"), "hi");
  EXPECT_EQ(code_of([] { chat_response_content("not json"); }), ErrorCode::TransportError);
  EXPECT_EQ(code_of([] { chat_response_content(R"({"choices":[]})"); }), ErrorCode::TransportError);
}

TEST(LlmDeliberator, ParsesReplyAndSendsSystemThenUser) {
  std::vector<ChatMessage> seen;
  auto transport = std::make_shared<FunctionTransport>([&](const std::vector<ChatMessage>& m) {
    seen = m;
    return R"({"decision":"ESCALATE","rules_consulted":["R1","R3"],"reasoning":"over threshold"})";
  });
  const LlmDeliberator d(endpoint(), PromptTemplates::defaults(), transport);
  const auto v = deliberate_with(d, s2_intent());
  EXPECT_EQ(v.outcome, Outcome::Escalate);
  EXPECT_EQ(v.rules_cited, (std::vector<std::string>{"R1", "R3"}));
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0].role, "system");
  EXPECT_EQ(seen[1].role, "user");
  EXPECT_NE(seen[0].content.find("[R3]"), std::string::npos);
  EXPECT_EQ(d.name(), "llm:test-model");
  EXPECT_EQ(d.prompt_template_version(), PromptTemplates::defaults().version());
}

TEST(LlmDeliberator, UnparseableReplyIsRepairedOnce) {
  std::vector<std::vector<ChatMessage>> calls;
  auto transport = std::make_shared<FunctionTransport>([&](const std::vector<ChatMessage>& m) {
    calls.push_back(m);
    return calls.size() == 1 ? std::string("I would PROCEED.") : kProceed;
  });
  const LlmDeliberator d(endpoint(), PromptTemplates::defaults(), transport);
  EXPECT_EQ(deliberate_with(d, s1_intent()).outcome, Outcome::Proceed);
  ASSERT_EQ(calls.size(), 2u);
  ASSERT_EQ(calls[1].size(), 4u);
  EXPECT_EQ(calls[1][2], (ChatMessage{"assistant", "I would PROCEED."}));
  EXPECT_EQ(calls[1][3].role, "user");
  EXPECT_EQ(calls[1][3].content.rfind("Your previous reply could not be used: ", 0), 0u);
}

TEST(LlmDeliberator, ExhaustedRetriesRaiseParseFailure) {
  for (const int retries : {0, 1, 3}) {
    std::atomic<int> calls{0};
    auto transport = std::make_shared<FunctionTransport>([&](const std::vector<ChatMessage>&) {
      ++calls;
      return std::string(R"({"rules_consulted":[],"reasoning":"no decision field"})");
    });
    const LlmDeliberator d(endpoint(retries), PromptTemplates::defaults(), transport);
    EXPECT_EQ(code_of([&] { deliberate_with(d, s1_intent()); }), ErrorCode::ParseFailure);
    EXPECT_EQ(calls.load(), retries + 1);
  }
}

TEST(LlmDeliberator, TransportFailuresAreNotRetried) {
  for (const auto code : {ErrorCode::TransportError, ErrorCode::Timeout}) {
    std::atomic<int> calls{0};
    auto transport = std::make_shared<FunctionTransport>([&](const std::vector<ChatMessage>&) -> std::string {
      ++calls;
      throw GovernanceError(code, "down");
    });
    const LlmDeliberator d(endpoint(), PromptTemplates::defaults(), transport);
    EXPECT_EQ(code_of([&] { deliberate_with(d, s1_intent()); }), code);
    EXPECT_EQ(calls.load(), 1);
  }
}

TEST(LlmDeliberator, TimeoutCoversEveryAttempt) {
  auto c = endpoint(2);
  c.timeout_seconds = 1.5;
  const LlmDeliberator d(c, PromptTemplates::defaults(), std::make_shared<FunctionTransport>(nullptr));
  EXPECT_EQ(d.timeout(), std::chrono::milliseconds(4750));
  EXPECT_THROW(LlmDeliberator(c, PromptTemplates::defaults(), nullptr), GovernanceError);
}

TEST(LlmDeliberator, InFlightCallsAreCapped) {
  auto c = endpoint();
  c.max_in_flight = 2;
  std::atomic<int> now{0};
  std::atomic<int> peak{0};
  auto transport = std::make_shared<FunctionTransport>([&](const std::vector<ChatMessage>&) {
    const int n = ++now;
    int p = peak.load();
    while (n > p && !peak.compare_exchange_weak(p, n)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --now;
    return kProceed;
  });
  const LlmDeliberator d(c, PromptTemplates::defaults(), transport);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { deliberate_with(d, s1_intent()); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(peak.load(), 2);
}

// A model that answers with the reference verdict for the intent it is shown
// makes the engine behave exactly as with the reference backend.
TEST(LlmDeliberator, SubstitutableForReferenceBackend) {
  for (const bool disruption : {false, true}) {
    const auto doc = flowr_rules();
    const auto ctx = flowr_context(disruption);
    auto model = std::make_shared<FunctionTransport>([&](const std::vector<ChatMessage>& m) {
      const auto& user = m.at(1).content;
      const auto intent = intent_from_json(json::parse(user.substr(user.find("Intent:\n") + 8)));
      const auto rules = applicable_rules(doc, intent.agent_id, intent.workflow_id, ctx);
      return render_reply(ReferenceDeliberator().deliberate(intent, rules, ctx));
    });
    const LlmDeliberator llm(endpoint(), PromptTemplates::defaults(), model);
    for (const auto& intent : {s1_intent(), s2_intent(), s3_intent(), s3_intent(false), s4_intent()}) {
      Stack reference_stack;
      Stack llm_stack;
      const auto expected = reference_stack.run(intent, disruption).decision;
      const auto actual = llm_stack.run_with(intent, llm, disruption).decision;
      EXPECT_EQ(actual.outcome, expected.outcome) << intent.intent_id;
      EXPECT_EQ(actual.rules_cited, expected.rules_cited) << intent.intent_id;
      EXPECT_EQ(actual.deliberation_rounds, expected.deliberation_rounds) << intent.intent_id;
      EXPECT_EQ(actual.effective_intent.parameters, expected.effective_intent.parameters) << intent.intent_id;
    }
  }
}

TEST(ReplayTransport, RecordedS2ExchangeEscalatesThroughService) {
  ServiceConfig c;
  c.rules_path = source_path("rules/flowr.json");
  c.context_seed_path = source_path("context/flowr.json");
  c.prompts_dir = source_path("prompts");
  c.auth_enabled = false;
  c.backend = "llm";
  c.llm = CompletionEndpointConfig{};
  c.llm->base_url = "http://replay.invalid/v1";
  c.llm->model = "recorded-model";
  ServiceOverrides o;
  o.transport = ReplayTransport::load(source_path("tests/fixtures/s2_llm_transcript.json"));
  GovernanceService service(c, o);
  const auto suite = load_scenario_suite(source_path("scenarios/flowr.json"));
  const auto intent = intent_from_json(json::parse(stub_intent_text(suite.scenarios[1], "flowr", 0)));
  const auto run = service.evaluate(intent);
  EXPECT_EQ(run.decision.outcome, Outcome::Escalate);
  EXPECT_EQ(run.decision.rules_cited, (std::vector<std::string>{"R1", "R3"})) << run.decision.reasoning;
  ASSERT_TRUE(run.decision.escalation);
  EXPECT_EQ(run.traces.at(0).deliberator_name, "llm:recorded-model");

  // Any other request misses the recording and fails closed.
  auto other = intent;
  other.parameters["amount_usd"] = 46000.0;
  const auto miss = service.evaluate(other);
  EXPECT_EQ(miss.decision.outcome, Outcome::Escalate);
  EXPECT_EQ(miss.decision.escalation->trigger_kind, TriggerKind::Uncertain);
  EXPECT_NE(miss.decision.reasoning.find("TRANSPORT_ERROR"), std::string::npos);
}

TEST(ReplayTransport, RejectsMalformedFixtures) {
  EXPECT_EQ(code_of([] { ReplayTransport(json{{"exchanges", {{{"reply", "x"}}}}}); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { ReplayTransport::load("/nonexistent/fixture.json"); }), ErrorCode::ParseError);
  const ReplayTransport empty(json{{"exchanges", json::array()}});
  EXPECT_EQ(code_of([&] { empty.complete(endpoint(), {{"user", "u"}}); }), ErrorCode::TransportError);
}

TEST(HttpCompletionTransport, PostsToChatCompletionsWithBearerToken) {
  FakeEndpoint fake;
  auto c = fake.config();
  ::setenv("AGENTGOV_TEST_LLM_KEY", "sk-test", 1);
  c.api_key_env = "AGENTGOV_TEST_LLM_KEY";
  const LlmDeliberator d(c, PromptTemplates::defaults(), std::make_shared<HttpCompletionTransport>());
  EXPECT_EQ(deliberate_with(d, s1_intent()).outcome, Outcome::Proceed);
  EXPECT_EQ(d.health(), BackendHealth::Ok);
  std::lock_guard lock(fake.mutex);
  ASSERT_EQ(fake.bodies.size(), 1u);
  EXPECT_EQ(fake.bodies[0]["model"], "test-model");
  EXPECT_EQ(fake.bodies[0]["messages"].size(), 2u);
  EXPECT_EQ(fake.auth_headers[0], "Bearer sk-test");
  ::unsetenv("AGENTGOV_TEST_LLM_KEY");
}

TEST(HttpCompletionTransport, NoKeyMeansNoAuthHeaderAndErrorsMapToTransportError) {
  FakeEndpoint fake;
  auto c = fake.config();
  c.api_key_env = "AGENTGOV_TEST_UNSET_KEY";
  ::unsetenv("AGENTGOV_TEST_UNSET_KEY");
  const HttpCompletionTransport http;
  EXPECT_EQ(http.complete(c, {{"user", "u"}}), kProceed);
  {
    std::lock_guard lock(fake.mutex);
    EXPECT_EQ(fake.auth_headers.at(0), "");
    fake.status = 500;
  }
  EXPECT_EQ(code_of([&] { http.complete(c, {{"user", "u"}}); }), ErrorCode::TransportError);
  c.base_url = "no-scheme";
  EXPECT_EQ(code_of([&] { http.complete(c, {{"user", "u"}}); }), ErrorCode::InvalidArgument);
}

TEST(HttpCompletionTransport, SilentEndpointTimesOutAndReportsDegraded) {
  Blackhole hole;
  auto c = endpoint(0);
  c.base_url = "http://127.0.0.1:" + std::to_string(hole.port) + "/v1";
  c.timeout_seconds = 0.3;
  const LlmDeliberator d(c, PromptTemplates::defaults(), std::make_shared<HttpCompletionTransport>());
  EXPECT_EQ(code_of([&] { deliberate_with(d, s1_intent()); }), ErrorCode::Timeout);
  EXPECT_EQ(d.health(), BackendHealth::Degraded);

  Stack stack;
  const auto run = stack.run_with(s1_intent(), d);
  EXPECT_EQ(run.decision.outcome, Outcome::Escalate);
  EXPECT_EQ(run.decision.escalation->trigger_kind, TriggerKind::Uncertain);
  EXPECT_EQ(run.traces.size(), 1u);
}

TEST(HttpCompletionTransport, ClosedPortIsATransportError) {
  int port = 0;
  {
    Blackhole probe;
    port = probe.port;
  }
  auto c = endpoint(0);
  c.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  c.timeout_seconds = 1;
  const HttpCompletionTransport http;
  EXPECT_EQ(code_of([&] { http.complete(c, {{"user", "u"}}); }), ErrorCode::TransportError);
  EXPECT_FALSE(http.reachable(c));
}
