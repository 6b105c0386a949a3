#include <atomic>
#include <thread>

#include <gtest/gtest.h>

#include "agentgov/clock.hpp"
#include "agentgov/context.hpp"
#include "agentgov/error.hpp"
#include "agentgov/intent.hpp"
#include "agentgov/rule_store.hpp"
#include "agentgov/value.hpp"
#include "fixtures.hpp"

using namespace agentgov;
using agentgov::testing::flowr_rules;
using agentgov::testing::ids;
using agentgov::testing::s2_intent;

// ── Values and hashing ───────────────────────────────────────────────────────

TEST(Sha256, PublishedTestVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(RandomHex, LengthAndAlphabet) {
  const auto a = random_hex(16);
  EXPECT_EQ(a.size(), 32u);
  EXPECT_EQ(a.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_NE(a, random_hex(16));
}

TEST(CanonicalDump, SortedCompactAndStable) {
  const json a = json::parse(R"({"b": 1, "a": {"d": [1, 2], "c": "x"}})");
  const json b = json::parse(R"({"a": {"c": "x", "d": [1, 2]}, "b": 1})");
  EXPECT_EQ(canonical_dump(a), R"({"a":{"c":"x","d":[1,2]},"b":1})");
  EXPECT_EQ(canonical_dump(a), canonical_dump(b));
}

TEST(Scalar, JsonRoundTripAndIntegralForm) {
  for (const Scalar s : {Scalar{true}, Scalar{false}, Scalar{45000.0}, Scalar{-0.5}, Scalar{std::string("SUP-0340")}}) {
    EXPECT_EQ(scalar_from_json(to_json(s)), s);
  }
  EXPECT_EQ(to_json(Scalar{45000.0}).dump(), "45000");
  EXPECT_EQ(kind_of(scalar_from_json(json(45000))), ScalarKind::Number);
  for (const json bad : {json(nullptr), json::array(), json::object()}) {
    EXPECT_THROW(scalar_from_json(bad), GovernanceError);
  }
  EXPECT_EQ(display(Scalar{45000.0}), "45000");
}

// ── Clock ────────────────────────────────────────────────────────────────────

TEST(Clock, UtcFormatRoundTrip) {
  EXPECT_EQ(format_utc(0), "1970-01-01T00:00:00.000000000Z");
  const std::int64_t t = 1'790'000'000'123'456'789;
  EXPECT_EQ(parse_utc(format_utc(t)), t);
  EXPECT_EQ(parse_utc("2026-10-18T12:00:00Z"), parse_utc("2026-10-18T12:00:00.000000000Z"));
  EXPECT_THROW(parse_utc("yesterday"), GovernanceError);
}

TEST(Clock, ManualClockSteps) {
  ManualClock clock(1000, 10);
  EXPECT_EQ(clock.utc_now_ns(), 1000);
  EXPECT_EQ(clock.utc_now_ns(), 1010);
  clock.advance(500);
  EXPECT_EQ(clock.monotonic_ns(), 1520);
}

TEST(Clock, SystemClockIsMonotonic) {
  const auto clock = system_clock();
  const auto a = clock->monotonic_ns();
  const auto b = clock->monotonic_ns();
  EXPECT_LE(a, b);
  EXPECT_GT(clock->utc_now_ns(), parse_utc("2020-01-01T00:00:00Z"));
}

// ── Intents ──────────────────────────────────────────────────────────────────

TEST(Intent, ValidationRejectsMissingFieldsAndEchoedAlternative) {
  auto i = s2_intent();
  EXPECT_NO_THROW(validate_intent(i));
  auto blank = i;
  blank.description.clear();
  EXPECT_THROW(validate_intent(blank), GovernanceError);
  auto echo = i;
  echo.alternatives.push_back(echo.parameters);
  try {
    validate_intent(echo);
    FAIL();
  } catch (const GovernanceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(Intent, JsonRoundTrip) {
  auto i = agentgov::testing::s3_intent();
  i.approvals.push_back({"R4", "tok"});
  EXPECT_EQ(intent_from_json(to_json(i)), i);
  EXPECT_THROW(intent_from_json(json::parse(R"({"intent_id": 5})")), GovernanceError);
}

TEST(Intent, RedactionHidesTokens) {
  auto i = s2_intent();
  i.approvals.push_back({"R1", "secret-token"});
  const auto text = redacted_json(i).dump();
  EXPECT_EQ(text.find("secret-token"), std::string::npos);
  EXPECT_NE(text.find("R1"), std::string::npos);
}

TEST(Intent, FingerprintCoversActionNotWording) {
  const auto base = s2_intent();
  auto reworded = base;
  reworded.description = "A differently phrased request";
  reworded.intent_id = "other";
  reworded.approvals.push_back({"R1", "t"});
  EXPECT_EQ(intent_fingerprint(base), intent_fingerprint(reworded));
  EXPECT_NE(intent_fingerprint(base), intent_fingerprint(s2_intent(45001)));
  auto other_agent = base;
  other_agent.agent_id = "inventory_replenishment";
  EXPECT_NE(intent_fingerprint(base), intent_fingerprint(other_agent));
}

TEST(Outcome, ParsingToleratesCaseAndSeparators) {
  EXPECT_EQ(parse_outcome("SELF-CORRECT"), Outcome::SelfCorrect);
  EXPECT_EQ(parse_outcome("self_correct"), Outcome::SelfCorrect);
  EXPECT_EQ(parse_outcome("Self Correct"), Outcome::SelfCorrect);
  EXPECT_EQ(parse_outcome("proceed"), Outcome::Proceed);
  EXPECT_EQ(parse_outcome("Escalate"), Outcome::Escalate);
  EXPECT_FALSE(parse_outcome("maybe"));
  EXPECT_FALSE(parse_outcome(""));
}

// ── Context store ────────────────────────────────────────────────────────────

TEST(ContextStore, SnapshotIsUnaffectedByLaterMutation) {
  ContextStore store;
  store.set_signal("ops", "supplier_disruption", true);
  store.update_registry("ops", "verified_suppliers", {"S1", "S2"});
  const auto snap = store.snapshot();
  store.update_registry("ops", "verified_suppliers", {"S1", "S2", "S3"});
  store.set_signal("ops", "supplier_disruption", false);
  EXPECT_EQ(*snap->registry("verified_suppliers"), (std::set<std::string>{"S1", "S2"}));
  EXPECT_EQ(std::get<bool>(*snap->signal("supplier_disruption")), true);
  EXPECT_EQ(store.snapshot()->registry("verified_suppliers")->size(), 3u);
  EXPECT_NE(snap->snapshot_id, store.snapshot()->snapshot_id);
}

TEST(ContextStore, EmptyStoreHasEmptySnapshot) {
  ContextStore store;
  const auto snap = store.snapshot();
  EXPECT_TRUE(snap->signals.empty());
  EXPECT_TRUE(snap->registries.empty());
  EXPECT_FALSE(snap->snapshot_id.empty());
}

TEST(ContextStore, SignalTogglesSituationalRetrieval) {
  ContextStore store(agentgov::testing::flowr_context());
  const auto doc = flowr_rules();
  const auto has_r7 = [&] {
    const auto r = ids(applicable_rules(doc, "inventory_replenishment", "flowr", *store.snapshot()));
    return std::find(r.begin(), r.end(), "R7") != r.end();
  };
  EXPECT_FALSE(has_r7());
  store.set_signal("ops", "supplier_disruption", true);
  EXPECT_TRUE(has_r7());
  store.set_signal("ops", "supplier_disruption", false);
  EXPECT_FALSE(has_r7());
  store.clear_signal("ops", "supplier_disruption");
  EXPECT_FALSE(has_r7());
}

TEST(ContextStore, RejectsEmptyKey) {
  ContextStore store;
  EXPECT_THROW(store.set_signal("ops", "", true), GovernanceError);
  EXPECT_THROW(store.update_registry("ops", "", {}), GovernanceError);
}

TEST(ContextStore, ObserverFailureAbandonsMutation) {
  ContextStore store;
  std::vector<ContextMutation> seen;
  store.set_observer([&](const ContextMutation& m) { seen.push_back(m); });
  const auto v = store.set_signal("ops", "risk", std::string("high"));
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(seen[0].actor, "ops");
  EXPECT_EQ(seen[0].kind, "set_signal");
  EXPECT_EQ(seen[0].version, v);

  store.set_observer([](const ContextMutation&) { throw GovernanceError(ErrorCode::StorageFailure, "disk full"); });
  EXPECT_THROW(store.set_signal("ops", "risk", std::string("low")), GovernanceError);
  EXPECT_EQ(store.version(), v);
  EXPECT_EQ(std::get<std::string>(*store.snapshot()->signal("risk")), "high");
}

TEST(ContextStore, ConcurrentSnapshotsSeeCommittedStates) {
  ContextStore store;
  const auto base = store.version();
  constexpr int kWrites = 2000;
  std::atomic<bool> done{false};
  std::atomic<int> violations{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([&] {
      std::uint64_t last = 0;
      while (!done.load()) {
        const auto snap = store.snapshot();
        // Sequential oracle: after the k-th write, n == k and the registry has k members.
        const auto k = snap->version - base;
        const auto* n = snap->signal("n");
        const auto* reg = snap->registry("seen");
        const bool consistent = k == 0 ? n == nullptr
                                       : (n && std::get<double>(*n) == static_cast<double>((k + 1) / 2) &&
                                          (k % 2 == 1 || (reg && reg->size() == k / 2)));
        if (!consistent || snap->version < last) ++violations;
        last = snap->version;
      }
    });
  }
  std::set<std::string> members;
  for (int i = 1; i <= kWrites / 2; ++i) {
    store.set_signal("ops", "n", static_cast<double>(i));
    members.insert(std::to_string(i));
    store.update_registry("ops", "seen", members);
  }
  done = true;
  for (auto& r : readers) r.join();
  EXPECT_EQ(violations.load(), 0);
  EXPECT_EQ(store.version() - base, static_cast<std::uint64_t>(kWrites));
}

// ── Rule store ───────────────────────────────────────────────────────────────

TEST(RuleStore, PublishActivatesNextVersionAndKeepsHistory) {
  RuleStore store(flowr_rules());
  const auto pinned = store.active();
  auto next = flowr_rules();
  for (auto& r : next.rules) {
    if (r.id == "R3") std::get<Scalar>(r.constraint->condition[0].value) = 20000.0;
  }
  std::vector<std::int64_t> observed;
  store.set_observer([&](const RuleSetDocument& d, std::string_view actor) {
    observed.push_back(d.version);
    EXPECT_EQ(actor, "ops");
  });
  const auto result = store.publish(next, "ops", "2026-10-18T00:00:00Z");
  EXPECT_TRUE(result.changed);
  EXPECT_EQ(result.document->version, 2);
  EXPECT_EQ(store.active()->version, 2);
  EXPECT_EQ(observed, (std::vector<std::int64_t>{2}));
  EXPECT_EQ(pinned->version, 1);
  EXPECT_EQ(std::get<double>(std::get<Scalar>(pinned->find("R3")->constraint->condition[0].value)), 10000.0);
  EXPECT_EQ(store.version(1), pinned);
  EXPECT_EQ(store.versions(), (std::vector<std::int64_t>{1, 2}));
  EXPECT_EQ(store.version(7), nullptr);
}

TEST(RuleStore, IdenticalRulesAreNoOp) {
  RuleStore store(flowr_rules());
  const auto result = store.publish(flowr_rules(), "ops", "t");
  EXPECT_FALSE(result.changed);
  EXPECT_EQ(store.active()->version, 1);
}

TEST(RuleStore, InvalidCandidateIsRejected) {
  RuleStore store(flowr_rules());
  auto bad = flowr_rules();
  bad.rules.back().predicate.reset();  // R7 is situational
  try {
    store.publish(bad, "ops", "t");
    FAIL();
  } catch (const GovernanceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    EXPECT_EQ(e.subject(), "R7");
  }
  EXPECT_EQ(store.active()->version, 1);
}

TEST(RuleStore, ObserverFailureBlocksActivation) {
  RuleStore store(flowr_rules());
  store.set_observer([](const RuleSetDocument&, std::string_view) {
    throw GovernanceError(ErrorCode::StorageFailure, "log unavailable");
  });
  auto next = flowr_rules();
  next.rules.pop_back();
  EXPECT_THROW(store.publish(next, "ops", "t"), GovernanceError);
  EXPECT_EQ(store.active()->version, 1);
  EXPECT_EQ(store.active()->rules.size(), 7u);
}
