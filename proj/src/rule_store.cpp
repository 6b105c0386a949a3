#include "agentgov/rule_store.hpp"

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

void ensure_valid(const RuleSetDocument& doc) {
  const auto violations = validate_ruleset(doc);
  if (violations.empty()) return;
  const auto& v = violations.front();
  throw GovernanceError(ErrorCode::SchemaError,
                        "rule '" + v.rule_id + "': " + std::string(to_string(v.code)) + " (" + v.message + ")",
                        v.rule_id);
}

}  // namespace

RuleStore::RuleStore(RuleSetDocument initial) {
  ensure_valid(initial);
  active_ = std::make_shared<const RuleSetDocument>(std::move(initial));
  history_.emplace(active_->version, active_);
}

RuleSetPtr RuleStore::active() const {
  std::lock_guard lock(mutex_);
  return active_;
}

RuleSetPtr RuleStore::version(std::int64_t v) const {
  std::lock_guard lock(mutex_);
  const auto it = history_.find(v);
  return it == history_.end() ? nullptr : it->second;
}

std::vector<std::int64_t> RuleStore::versions() const {
  std::lock_guard lock(mutex_);
  std::vector<std::int64_t> out;
  for (const auto& [v, _] : history_) out.push_back(v);
  return out;
}

void RuleStore::set_observer(ActivationObserver observer) {
  std::lock_guard lock(mutex_);
  observer_ = std::move(observer);
}

PublishResult RuleStore::publish(RuleSetDocument candidate, std::string_view actor, std::string timestamp) {
  std::lock_guard lock(mutex_);
  // Validate with a provisional version so a stale version field is not the
  // reason for rejection.
  candidate.version = active_->version + 1;
  ensure_valid(candidate);
  if (candidate.rules == active_->rules) {
    return {active_, false, "rules identical to active version " + std::to_string(active_->version) + "; nothing published"};
  }
  if (candidate.metadata.author.empty()) candidate.metadata.author = std::string(actor);
  candidate.metadata.timestamp = std::move(timestamp);
  if (observer_) observer_(candidate, actor);
  active_ = std::make_shared<const RuleSetDocument>(std::move(candidate));
  history_.emplace(active_->version, active_);
  return {active_, true, "activated version " + std::to_string(active_->version)};
}

}  // namespace agentgov
