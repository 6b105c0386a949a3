#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "agentgov/audit_log.hpp"
#include "agentgov/error.hpp"

using namespace agentgov;

namespace {

TraceDraft deliberation(const std::string& agent, const std::string& decision, std::vector<std::string> cited,
                        int round = 1) {
  TraceDraft d;
  d.kind = RecordKind::Deliberation;
  d.agent_id = agent;
  d.workflow_id = "flowr";
  d.intent = {{"intent_id", "i-" + agent}, {"action_class", "x.do"}, {"description", "do x"}};
  d.ruleset_version = 1;
  d.rules_retrieved = {"R1", "R2"};
  d.rules_cited = std::move(cited);
  d.reasoning = "reasoned about " + agent;
  d.decision = decision;
  d.round_index = round;
  d.run_id = "run-" + agent;
  d.deliberator_name = "reference";
  d.prompt_template_version = "none";
  return d;
}

TraceDraft operator_action(const std::string& op, int n) {
  TraceDraft d;
  d.kind = RecordKind::ContextMutation;
  d.agent_id = op;
  d.intent = {{"kind", "set_signal"}, {"key", "k" + std::to_string(n)}};
  d.reasoning = "operator changed k" + std::to_string(n);
  d.decision = "COMMITTED";
  return d;
}

struct Fixture {
  std::shared_ptr<MemoryTraceStorage> storage = std::make_shared<MemoryTraceStorage>();
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
  AuditLog log{storage, clock};

  void fill(int n) {
    for (int i = 0; i < n; ++i) log.append(deliberation("agent" + std::to_string(i % 3), i % 2 ? "ESCALATE" : "PROCEED", {"R1"}));
  }
};

class FailingStorage final : public TraceStorage {
 public:
  void append(const std::string&) override { throw GovernanceError(ErrorCode::StorageFailure, "device gone"); }
  std::vector<std::string> read_all() const override { return {}; }
};

}  // namespace

TEST(AuditLog, GenesisAndChainLinks) {
  Fixture f;
  const auto a = f.log.append(deliberation("a", "PROCEED", {}));
  const auto b = f.log.append(deliberation("b", "ESCALATE", {"R1"}));
  EXPECT_EQ(a.prev_hash, kGenesisHash);
  EXPECT_EQ(b.prev_hash, a.record_hash);
  EXPECT_EQ(a.sequence, 0u);
  EXPECT_EQ(b.sequence, 1u);
  EXPECT_EQ(a.trace_id, "tr-000000000000");
  EXPECT_EQ(b.trace_id, "tr-000000000001");
  EXPECT_LT(a.timestamp_ns, b.timestamp_ns);
  EXPECT_EQ(f.log.head_hash(), b.record_hash);
  EXPECT_EQ(compute_record_hash(b), b.record_hash);
  EXPECT_EQ(f.storage->lines()[1], canonical_dump(to_json(b)));
}

TEST(AuditLog, RecordHashIsOverCanonicalFormWithoutHashField) {
  Fixture f;
  const auto r = f.log.append(deliberation("a", "PROCEED", {}));
  auto body = to_json(r, false);
  EXPECT_FALSE(body.contains("record_hash"));
  EXPECT_EQ(sha256_hex(canonical_dump(body)), r.record_hash);
}

TEST(AuditLog, FieldValidation) {
  Fixture f;
  const auto good = f.log.append(deliberation("a", "PROCEED", {}));
  EXPECT_TRUE(validate_trace_fields(good));
  const auto op = f.log.append(operator_action("ops", 1));
  EXPECT_TRUE(validate_trace_fields(op));

  std::string problem;
  auto missing_reasoning = good;
  missing_reasoning.reasoning.clear();
  EXPECT_FALSE(validate_trace_fields(missing_reasoning, &problem));
  EXPECT_EQ(problem, "reasoning empty");
  auto missing_rules = good;
  missing_rules.rules_retrieved.clear();
  EXPECT_FALSE(validate_trace_fields(missing_rules));
  auto missing_intent_field = good;
  missing_intent_field.intent.erase("description");
  EXPECT_FALSE(validate_trace_fields(missing_intent_field));
  auto default_route = missing_rules;
  default_route.deliberator_name = "default_action";
  EXPECT_TRUE(validate_trace_fields(default_route));
}

TEST(AuditLog, QueryFilters) {
  Fixture f;
  f.log.append(deliberation("procurement", "ESCALATE", {"R1", "R3"}));
  f.log.append(deliberation("supplier", "SELF_CORRECT", {"R4"}, 1));
  f.log.append(deliberation("supplier", "PROCEED", {}, 2));
  f.log.append(operator_action("ops", 1));
  f.log.append(deliberation("replenish", "ESCALATE", {"R7"}));

  EXPECT_EQ(f.log.query({}).records.size(), 5u);
  TraceFilter by_decision;
  by_decision.decision = "ESCALATE";
  EXPECT_EQ(f.log.query(by_decision).records.size(), 2u);
  TraceFilter by_rule;
  by_rule.rule_id = "R4";
  const auto r4 = f.log.query(by_rule).records;
  ASSERT_EQ(r4.size(), 1u);
  EXPECT_EQ(r4[0].round_index, 1);
  TraceFilter by_kind;
  by_kind.kind = RecordKind::ContextMutation;
  EXPECT_EQ(f.log.query(by_kind).records.size(), 1u);
  TraceFilter by_agent;
  by_agent.agent_id = "supplier";
  by_agent.decision = "PROCEED";
  EXPECT_EQ(f.log.query(by_agent).records.size(), 1u);

  const auto all = f.log.records();
  TraceFilter window;
  window.since_ns = all[1].timestamp_ns;
  window.until_ns = all[3].timestamp_ns;
  const auto mid = f.log.query(window).records;
  ASSERT_EQ(mid.size(), 2u);
  EXPECT_EQ(mid[0].trace_id, all[1].trace_id);
  EXPECT_EQ(mid[1].trace_id, all[2].trace_id);
}

TEST(AuditLog, FilterAgreesWithFullScan) {
  Fixture f;
  std::mt19937 rng(3);
  const std::vector<std::string> agents{"a", "b", "c"};
  const std::vector<std::string> decisions{"PROCEED", "ESCALATE", "SELF_CORRECT"};
  const std::vector<std::string> rules{"R1", "R3", "R4", "R7"};
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> cited;
    for (const auto& r : rules) {
      if (rng() % 3 == 0) cited.push_back(r);
    }
    f.log.append(deliberation(agents[rng() % 3], decisions[rng() % 3], cited));
  }
  const auto all = f.log.records();
  for (const auto& agent : agents) {
    for (const auto& decision : decisions) {
      for (const auto& rule : rules) {
        TraceFilter filter;
        filter.agent_id = agent;
        filter.decision = decision;
        filter.rule_id = rule;
        std::vector<std::string> expected;
        for (const auto& r : all) {
          if (r.agent_id == agent && r.decision == decision &&
              std::find(r.rules_cited.begin(), r.rules_cited.end(), rule) != r.rules_cited.end()) {
            expected.push_back(r.trace_id);
          }
        }
        std::vector<std::string> got;
        for (const auto& r : f.log.query(filter).records) got.push_back(r.trace_id);
        ASSERT_EQ(got, expected);
      }
    }
  }
}

TEST(AuditLog, CursorPaginationCoversEveryRecordOnce) {
  Fixture f;
  f.fill(23);
  TraceFilter filter;
  filter.limit = 5;
  std::vector<std::string> seen;
  int pages = 0;
  while (true) {
    const auto page = f.log.query(filter);
    ++pages;
    for (const auto& r : page.records) seen.push_back(r.trace_id);
    if (!page.next_cursor) break;
    filter.cursor = page.next_cursor;
  }
  EXPECT_EQ(pages, 5);
  ASSERT_EQ(seen.size(), 23u);
  for (std::size_t i = 0; i < seen.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "tr-%012zu", i);
    EXPECT_EQ(seen[i], buf);
  }
  TraceFilter bad;
  bad.cursor = "garbage";
  EXPECT_THROW(f.log.query(bad), GovernanceError);
}

TEST(AuditLog, VerifyUntouchedAndRanges) {
  Fixture f;
  f.fill(10);
  EXPECT_TRUE(f.log.verify_chain().ok);
  EXPECT_EQ(f.log.verify_chain().records_checked, 10u);
  const auto mid = f.log.verify_chain(4, 3);
  EXPECT_TRUE(mid.ok);
  EXPECT_EQ(mid.records_checked, 3u);
  EXPECT_TRUE(AuditLog::in_memory()->verify_chain().ok);
}

TEST(AuditLogCorruption, ByteFlipInReasoningIsDetectedAtThatRecord) {
  for (std::size_t k = 0; k < 8; ++k) {
    Fixture f;
    f.fill(8);
    auto& line = f.storage->lines()[k];
    const auto pos = line.find("reasoned about");
    ASSERT_NE(pos, std::string::npos);
    line[pos] ^= 0x01;
    const auto report = f.log.verify_chain();
    EXPECT_FALSE(report.ok);
    EXPECT_EQ(report.mismatch_index, k);
    EXPECT_EQ(report.mismatch_sequence, k);
  }
}

TEST(AuditLogCorruption, DeletionIsDetectedAtTheSuccessor) {
  for (std::size_t k = 0; k < 7; ++k) {
    Fixture f;
    f.fill(8);
    auto& lines = f.storage->lines();
    lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(k));
    const auto report = f.log.verify_chain();
    EXPECT_FALSE(report.ok);
    EXPECT_EQ(report.mismatch_index, k);
    EXPECT_EQ(report.mismatch_sequence, k + 1);
  }
}

TEST(AuditLogCorruption, TailDeletionIsInvisibleToChainButNotToHead) {
  Fixture f;
  f.fill(4);
  const auto head = f.log.head_hash();
  f.storage->lines().pop_back();
  // A truncated suffix still chains; the head hash published elsewhere is what exposes it.
  const auto lines = f.storage->read_all();
  EXPECT_TRUE(verify_lines(lines).ok);
  EXPECT_NE(trace_record_from_json(json::parse(lines.back())).record_hash, head);
}

TEST(AuditLogCorruption, ReorderIsDetectedAtTheFirstSwappedRecord) {
  for (std::size_t k = 0; k < 7; ++k) {
    Fixture f;
    f.fill(8);
    auto& lines = f.storage->lines();
    std::swap(lines[k], lines[k + 1]);
    const auto report = f.log.verify_chain();
    EXPECT_FALSE(report.ok);
    EXPECT_EQ(report.mismatch_index, k);
  }
}

TEST(AuditLogCorruption, EverySingleBitFlipIsDetected) {
  Fixture f;
  f.fill(3);
  const auto original = f.storage->read_all();
  std::size_t flips = 0;
  for (std::size_t k = 0; k < original.size(); ++k) {
    for (std::size_t byte = 0; byte < original[k].size(); ++byte) {
      for (int bit = 0; bit < 8; ++bit) {
        auto lines = original;
        lines[k][byte] = static_cast<char>(lines[k][byte] ^ (1 << bit));
        const auto report = verify_lines(lines);
        ASSERT_FALSE(report.ok) << "line " << k << " byte " << byte << " bit " << bit;
        ASSERT_EQ(report.mismatch_index, k);
        ++flips;
      }
    }
  }
  EXPECT_GT(flips, 1000u);
}

TEST(AuditLog, FileStorageReloadsAndContinuesChain) {
  const auto dir = std::filesystem::temp_directory_path() / ("agentgov-log-" + random_hex(6));
  const auto path = (dir / "nested" / "traces.ndjson").string();
  std::string head;
  {
    AuditLog log(std::make_shared<FileTraceStorage>(path, true), std::make_shared<ManualClock>());
    log.append(deliberation("a", "PROCEED", {}));
    log.append(operator_action("ops", 1));
    head = log.head_hash();
  }
  {
    AuditLog log(std::make_shared<FileTraceStorage>(path, false), std::make_shared<ManualClock>(1'800'000'000'000'000'000));
    EXPECT_EQ(log.size(), 2u);
    EXPECT_EQ(log.head_hash(), head);
    const auto next = log.append(deliberation("b", "ESCALATE", {"R1"}));
    EXPECT_EQ(next.prev_hash, head);
    EXPECT_EQ(next.sequence, 2u);
    EXPECT_TRUE(log.verify_chain().ok);
    EXPECT_EQ(log.export_lines(), FileTraceStorage(path, false).read_all());
  }
  std::filesystem::remove_all(dir);
}

TEST(AuditLog, CorruptFileFailsToLoad) {
  const auto dir = std::filesystem::temp_directory_path() / ("agentgov-log-" + random_hex(6));
  std::filesystem::create_directories(dir);
  const auto path = (dir / "traces.ndjson").string();
  {
    std::ofstream out(path);
    out << "{not json\n";
  }
  try {
    AuditLog log(std::make_shared<FileTraceStorage>(path, false), system_clock());
    FAIL();
  } catch (const GovernanceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::StorageFailure);
  }
  std::filesystem::remove_all(dir);
}

TEST(AuditLog, StorageFailureLeavesIndexUntouched) {
  AuditLog log(std::make_shared<FailingStorage>(), system_clock());
  try {
    log.append(deliberation("a", "PROCEED", {}));
    FAIL();
  } catch (const GovernanceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::StorageFailure);
  }
  EXPECT_EQ(log.size(), 0u);
  EXPECT_EQ(log.head_hash(), kGenesisHash);
}

TEST(AuditLog, ConcurrentAppendersProduceOneChain) {
  Fixture f;
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) f.log.append(deliberation("agent" + std::to_string(t), "PROCEED", {}));
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(f.log.size(), 400u);
  EXPECT_TRUE(f.log.verify_chain().ok);
}
