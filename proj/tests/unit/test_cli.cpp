#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "agentgov/audit_log.hpp"
#include "fixtures.hpp"

using namespace agentgov;
using namespace agentgov::testing;

namespace {

struct Outcome {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

// Runs the CLI from the source tree so the default asset paths resolve.
Outcome cli(const std::string& args, const std::string& env = "") {
  const std::string command =
      "cd '" + source_path("") + "' && " + env + " '" + AGENTGOV_CLI + "' " + args + " 2>&1";
  Outcome out;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) return out;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.output.append(buf, n);
  const int status = ::pclose(pipe);
  out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

std::string scratch(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("agentgov-cli-" + tag + "-" + random_hex(6));
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST(Cli, ValidateAndLintShippedRules) {
  const auto ok = cli("validate rules/flowr.json");
  EXPECT_EQ(ok.exit_code, 0) << ok.output;
  EXPECT_NE(ok.output.find("OK version 1, 7 rule(s): GLOBAL=2 WORKFLOW=2 AGENT=2 SITUATIONAL=1"), std::string::npos)
      << ok.output;
  const auto lint = cli("lint rules/flowr.json --json");
  EXPECT_EQ(lint.exit_code, 0) << lint.output;
  EXPECT_TRUE(json::parse(lint.output).contains("conflicts"));
}

TEST(Cli, SchemaViolationsAndUnreadableInput) {
  const auto dir = scratch("validate");
  std::ofstream(dir + "/rules.json") << R"({"version":1,"rules":[{"id":"S1","layer":"SITUATIONAL","text":"t"}]})";
  const auto bad = cli("validate " + dir + "/rules.json");
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.output.find("SCHEMA_ERROR"), std::string::npos) << bad.output;
  EXPECT_NE(bad.output.find("S1"), std::string::npos) << bad.output;
  const auto missing = cli("validate " + dir + "/absent.json");
  EXPECT_EQ(missing.exit_code, 2);
  EXPECT_NE(missing.output.find("PARSE_ERROR"), std::string::npos) << missing.output;
  std::filesystem::remove_all(dir);
}

TEST(Cli, ServeRefusesMalformedRules) {
  const auto dir = scratch("serve");
  std::ofstream(dir + "/rules.json") << R"({"version":1,"rules":[{"id":"S1","layer":"SITUATIONAL","text":"t"}]})";
  std::ofstream(dir + "/service.json") << R"({"listen":"127.0.0.1:0","rules_path":"rules.json"})";
  const auto out = cli("serve -c " + dir + "/service.json");
  EXPECT_NE(out.exit_code, 0);
  EXPECT_NE(out.output.find("SCHEMA_ERROR"), std::string::npos) << out.output;
  std::filesystem::remove_all(dir);
}

TEST(Cli, ServeSpeaksJsonRpcOnStdio) {
  const auto dir = scratch("stdio");
  std::ofstream(dir + "/requests.jsonl")
      << R"({"jsonrpc":"2.0","id":1,"method":"initialize","params":{}})" << "\n"
      << R"({"jsonrpc":"2.0","method":"notifications/initialized"})" << "\n"
      << R"({"jsonrpc":"2.0","id":2,"method":"tools/call","params":{"name":"get_health","arguments":{}}})" << "\n";
  std::ofstream(dir + "/service.json") << json{{"rules_path", source_path("rules/flowr.json")},
                                              {"context_seed_path", source_path("context/flowr.json")}}
                                                 .dump();
  const auto out = cli("serve -c " + dir + "/service.json --stdio < " + dir + "/requests.jsonl",
                       "AGENTGOV_OPERATOR_TOKENS=ops=t1 AGENTGOV_STDIO_TOKEN=t1");
  EXPECT_EQ(out.exit_code, 0) << out.output;
  std::istringstream lines(out.output);
  std::vector<json> replies;
  for (std::string line; std::getline(lines, line);) replies.push_back(json::parse(line));
  ASSERT_EQ(replies.size(), 2u) << out.output;
  EXPECT_EQ(replies[0]["result"]["serverInfo"]["name"], "agentgov");
  EXPECT_EQ(replies[1]["result"]["structuredContent"]["rule_count"], 7);
  std::filesystem::remove_all(dir);
}

TEST(Cli, ScenarioRunIsReproducibleWithFixedClock) {
  const auto dir = scratch("scenarios");
  const auto a = cli("scenarios run --fixed-clock --json " + dir + "/a.json");
  const auto b = cli("scenarios run --fixed-clock --json " + dir + "/b.json");
  EXPECT_EQ(a.exit_code, 0) << a.output;
  EXPECT_EQ(b.exit_code, 0) << b.output;
  const auto read = [](const std::string& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto report = read(dir + "/a.json");
  EXPECT_EQ(report, read(dir + "/b.json"));
  EXPECT_EQ(a.output, b.output);
  const auto totals = json::parse(report)["totals"];
  EXPECT_EQ(totals["runs"], 40);
  EXPECT_EQ(totals["correct"], 40);
  EXPECT_EQ(totals["escalation_precision"], 1.0);
  std::filesystem::remove_all(dir);
}

TEST(Cli, TraceVerifyFlagsTampering) {
  const auto dir = scratch("traces");
  const auto log_path = dir + "/traces.ndjson";
  {
    AuditLog log(std::make_shared<FileTraceStorage>(log_path, false), std::make_shared<ManualClock>());
    for (int i = 0; i < 3; ++i) {
      TraceDraft d;
      d.agent_id = "procurement";
      d.workflow_id = "flowr";
      d.intent = {{"n", i}};
      d.reasoning = "r";
      d.decision = "PROCEED";
      d.round_index = 1;
      d.run_id = "run-x";
      d.deliberator_name = "reference";
      log.append(std::move(d));
    }
  }
  const auto ok = cli("traces verify --log " + log_path);
  EXPECT_EQ(ok.exit_code, 0) << ok.output;
  const auto query = cli("traces query --log " + log_path + " --agent procurement --limit 2");
  EXPECT_EQ(query.exit_code, 0) << query.output;

  std::vector<std::string> lines;
  {
    std::ifstream in(log_path);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
  }
  lines[1].replace(lines[1].find("\"r\""), 3, "\"R\"");
  {
    std::ofstream out(log_path, std::ios::trunc);
    for (const auto& l : lines) out << l << "\n";
  }
  const auto bad = cli("traces verify --log " + log_path);
  EXPECT_EQ(bad.exit_code, 1) << bad.output;
  const auto report = json::parse(bad.output);
  EXPECT_EQ(report["ok"], false);
  EXPECT_EQ(report["mismatch_index"], 1);
  std::filesystem::remove_all(dir);
}
