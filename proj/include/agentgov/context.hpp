#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>

#include "agentgov/value.hpp"

namespace agentgov {

/// Immutable view of runtime signals and registries. One governance run reads
/// exactly one of these.
struct RuntimeContext {
  std::map<std::string, Scalar, std::less<>> signals;
  std::map<std::string, std::set<std::string>, std::less<>> registries;
  std::string snapshot_id;
  std::uint64_t version = 0;

  const Scalar* signal(std::string_view key) const;
  const std::set<std::string>* registry(std::string_view name) const;
};

using ContextSnapshot = std::shared_ptr<const RuntimeContext>;

/// {"signals": {...}, "registries": {...}}; snapshot_id and version are
/// included when non-empty.
json to_json(const RuntimeContext& ctx);
/// Parses the seed/document form. Throws ParseError.
RuntimeContext context_from_json(const json& j);

struct ContextMutation {
  std::string actor;
  std::string kind;  // "set_signal" | "clear_signal" | "update_registry"
  std::string key;
  json value;
  std::uint64_t version = 0;
};

/// Live, mutable context. Writers serialize on an internal mutex; readers get
/// a shared pointer to the last committed version and never observe a partial
/// write.
class ContextStore {
 public:
  /// Invoked under the write lock before a mutation commits. If it throws,
  /// the mutation is abandoned and the exception propagates.
  using MutationObserver = std::function<void(const ContextMutation&)>;

  explicit ContextStore(RuntimeContext initial = {});

  ContextSnapshot snapshot() const;
  std::uint64_t version() const;

  std::uint64_t set_signal(std::string_view actor, const std::string& key, Scalar value);
  std::uint64_t clear_signal(std::string_view actor, const std::string& key);
  std::uint64_t update_registry(std::string_view actor, const std::string& name, std::set<std::string> members);

  void set_observer(MutationObserver observer);

 private:
  std::uint64_t commit(RuntimeContext next, ContextMutation mutation);

  mutable std::mutex mutex_;
  ContextSnapshot current_;
  MutationObserver observer_;
};

}  // namespace agentgov
