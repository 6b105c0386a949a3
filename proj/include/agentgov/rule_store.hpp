#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "agentgov/rules.hpp"

namespace agentgov {

using RuleSetPtr = std::shared_ptr<const RuleSetDocument>;

struct PublishResult {
  RuleSetPtr document;
  bool changed = false;
  std::string message;
};

/// Holds every published rule-set version and the active one. Published
/// documents are immutable; activating a new version swaps one pointer, so
/// evaluations that already pinned the previous version are unaffected.
class RuleStore {
 public:
  /// Invoked under the write lock before a new version becomes active.
  using ActivationObserver = std::function<void(const RuleSetDocument& activated, std::string_view actor)>;

  /// Throws SCHEMA_ERROR if `initial` fails validation.
  explicit RuleStore(RuleSetDocument initial);

  RuleSetPtr active() const;
  /// nullptr when the version was never published.
  RuleSetPtr version(std::int64_t v) const;
  std::vector<std::int64_t> versions() const;

  /// Validates `candidate` and activates it as version active+1. A candidate
  /// whose rules equal the active ones is a no-op (changed == false).
  /// Throws SCHEMA_ERROR naming the first offending rule.
  PublishResult publish(RuleSetDocument candidate, std::string_view actor, std::string timestamp);

  void set_observer(ActivationObserver observer);

 private:
  mutable std::mutex mutex_;
  std::map<std::int64_t, RuleSetPtr> history_;
  RuleSetPtr active_;
  ActivationObserver observer_;
};

}  // namespace agentgov
