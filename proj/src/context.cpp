#include "agentgov/context.hpp"

#include "agentgov/error.hpp"

namespace agentgov {

const Scalar* RuntimeContext::signal(std::string_view key) const {
  const auto it = signals.find(key);
  return it == signals.end() ? nullptr : &it->second;
}

const std::set<std::string>* RuntimeContext::registry(std::string_view name) const {
  const auto it = registries.find(name);
  return it == registries.end() ? nullptr : &it->second;
}

json to_json(const RuntimeContext& ctx) {
  json signals = json::object();
  for (const auto& [key, value] : ctx.signals) signals[key] = to_json(value);
  json registries = json::object();
  for (const auto& [name, members] : ctx.registries) registries[name] = members;
  json out = {{"signals", signals}, {"registries", registries}};
  if (!ctx.snapshot_id.empty()) {
    out["snapshot_id"] = ctx.snapshot_id;
    out["version"] = ctx.version;
  }
  return out;
}

RuntimeContext context_from_json(const json& j) {
  if (!j.is_object()) throw GovernanceError(ErrorCode::ParseError, "context document must be an object");
  RuntimeContext ctx;
  if (const auto it = j.find("signals"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw GovernanceError(ErrorCode::ParseError, "'signals' must be an object");
    for (const auto& [key, value] : it->items()) ctx.signals.emplace(key, scalar_from_json(value));
  }
  if (const auto it = j.find("registries"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw GovernanceError(ErrorCode::ParseError, "'registries' must be an object");
    for (const auto& [name, members] : it->items()) {
      if (!members.is_array()) throw GovernanceError(ErrorCode::ParseError, "registry '" + name + "' must be an array");
      std::set<std::string> set;
      for (const auto& m : members) {
        if (!m.is_string()) throw GovernanceError(ErrorCode::ParseError, "registry '" + name + "' members must be strings");
        set.insert(m.get<std::string>());
      }
      ctx.registries.emplace(name, std::move(set));
    }
  }
  return ctx;
}

ContextStore::ContextStore(RuntimeContext initial) {
  initial.version = 1;
  initial.snapshot_id = "ctx-1";
  current_ = std::make_shared<const RuntimeContext>(std::move(initial));
}

ContextSnapshot ContextStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return current_;
}

std::uint64_t ContextStore::version() const {
  std::lock_guard lock(mutex_);
  return current_->version;
}

void ContextStore::set_observer(MutationObserver observer) {
  std::lock_guard lock(mutex_);
  observer_ = std::move(observer);
}

std::uint64_t ContextStore::set_signal(std::string_view actor, const std::string& key, Scalar value) {
  if (key.empty()) throw GovernanceError(ErrorCode::InvalidArgument, "signal key must be non-empty");
  std::lock_guard lock(mutex_);
  RuntimeContext next = *current_;
  next.signals.insert_or_assign(key, value);
  return commit(std::move(next), {std::string(actor), "set_signal", key, to_json(value), 0});
}

std::uint64_t ContextStore::clear_signal(std::string_view actor, const std::string& key) {
  if (key.empty()) throw GovernanceError(ErrorCode::InvalidArgument, "signal key must be non-empty");
  std::lock_guard lock(mutex_);
  RuntimeContext next = *current_;
  next.signals.erase(key);
  return commit(std::move(next), {std::string(actor), "clear_signal", key, nullptr, 0});
}

std::uint64_t ContextStore::update_registry(std::string_view actor, const std::string& name,
                                            std::set<std::string> members) {
  if (name.empty()) throw GovernanceError(ErrorCode::InvalidArgument, "registry name must be non-empty");
  std::lock_guard lock(mutex_);
  RuntimeContext next = *current_;
  json value = members;
  next.registries.insert_or_assign(name, std::move(members));
  return commit(std::move(next), {std::string(actor), "update_registry", name, std::move(value), 0});
}

// Caller holds mutex_.
std::uint64_t ContextStore::commit(RuntimeContext next, ContextMutation mutation) {
  next.version = current_->version + 1;
  next.snapshot_id = "ctx-" + std::to_string(next.version);
  mutation.version = next.version;
  if (observer_) observer_(mutation);
  current_ = std::make_shared<const RuntimeContext>(std::move(next));
  return current_->version;
}

}  // namespace agentgov
