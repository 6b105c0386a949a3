#pragma once

#include <algorithm>
#include <random>

#include "agentgov/rules.hpp"

namespace agentgov::testing {

struct RandomCascade {
  RuleSetDocument doc;
  std::string agent;
  std::string workflow;
  RuntimeContext ctx;
};

inline const std::vector<std::string> kAgents{"a1", "a2", "a3"};
inline const std::vector<std::string> kWorkflows{"w1", "w2"};
inline const std::vector<std::string> kSignals{"s1", "s2", "s3"};

inline RandomCascade random_cascade(std::mt19937& rng) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> layer_pick(1, 4);
  std::uniform_int_distribution<int> count(0, 9);
  const auto subset = [&](const std::vector<std::string>& pool) {
    std::set<std::string> out;
    for (const auto& x : pool) {
      if (coin(rng)) out.insert(x);
    }
    return out;
  };
  RandomCascade c;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    Rule r;
    r.id = "X" + std::to_string(count(rng)) + std::to_string(i);
    r.layer = static_cast<GovernanceLayer>(layer_pick(rng));
    r.text = "rule " + r.id;
    r.enabled = coin(rng) || coin(rng);
    if (r.layer != GovernanceLayer::Global) r.scope = {subset(kWorkflows), subset(kAgents)};
    if (r.layer == GovernanceLayer::Situational) {
      ActivationPredicate p;
      const int k = 1 + coin(rng) + coin(rng);
      for (int j = 0; j < k; ++j) {
        p.conjuncts.push_back({kSignals[static_cast<std::size_t>(count(rng) % 3)], CompareOp::Eq, Scalar{coin(rng) == 1}});
      }
      r.predicate = p;
    }
    c.doc.rules.push_back(r);
  }
  c.agent = kAgents[static_cast<std::size_t>(count(rng) % 3)];
  c.workflow = kWorkflows[static_cast<std::size_t>(coin(rng))];
  for (const auto& s : kSignals) {
    const int state = count(rng) % 3;  // absent, false, true
    if (state > 0) c.ctx.signals[s] = state == 2;
  }
  return c;
}

/// Independent restatement of the cascade: scope, enablement and predicate
/// truth, then (rank, id) order.
inline std::vector<std::string> cascade_oracle(const RandomCascade& c) {
  std::vector<const Rule*> hits;
  for (const auto& r : c.doc.rules) {
    if (!r.enabled) continue;
    if (!r.scope.workflow_ids.empty() && r.scope.workflow_ids.count(c.workflow) == 0) continue;
    if (!r.scope.agent_ids.empty() && r.scope.agent_ids.count(c.agent) == 0) continue;
    if (r.layer == GovernanceLayer::Situational) {
      bool all = true;
      for (const auto& cmp : r.predicate->conjuncts) {
        const auto it = c.ctx.signals.find(cmp.key);
        const bool want = std::get<bool>(std::get<Scalar>(cmp.value));
        if (it == c.ctx.signals.end() || std::get<bool>(it->second) != want) all = false;
      }
      if (!all) continue;
    }
    hits.push_back(&r);
  }
  std::stable_sort(hits.begin(), hits.end(), [](const Rule* a, const Rule* b) {
    if (static_cast<int>(a->layer) != static_cast<int>(b->layer)) return static_cast<int>(a->layer) < static_cast<int>(b->layer);
    return a->id < b->id;
  });
  std::vector<std::string> out;
  for (const auto* r : hits) out.push_back(r->id);
  return out;
}

}  // namespace agentgov::testing
