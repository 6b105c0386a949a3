#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "agentgov/audit_log.hpp"
#include "agentgov/clock.hpp"
#include "agentgov/context.hpp"
#include "agentgov/intent.hpp"

namespace agentgov {

enum class EscalationStatus { Pending, Approved, Denied, Expired };
std::string_view to_string(EscalationStatus s) noexcept;
std::optional<EscalationStatus> parse_escalation_status(std::string_view text) noexcept;

enum class Resolution { Approved, Denied };
std::optional<Resolution> parse_resolution(std::string_view text) noexcept;

struct ApprovalToken {
  std::string rule_id;
  std::string token;
  std::int64_t expires_at_ns = 0;
  std::string escalation_id;
  std::string intent_fingerprint;
};

struct PendingEscalation {
  std::string escalation_id;
  EscalationMessage message;
  IntentDescriptor intent;
  json context = json::object();  // signals + registries at decision time
  std::string run_id;
  std::int64_t ruleset_version = 0;
  std::int64_t created_at_ns = 0;
  EscalationStatus status = EscalationStatus::Pending;
  std::string resolver;
  std::string note;
  std::int64_t resolved_at_ns = 0;
  std::vector<ApprovalToken> approval_tokens;
};

json to_json(const PendingEscalation& item);

struct EscalationEvent {
  std::uint64_t sequence = 0;
  std::string type;  // "escalation.enqueued" | "escalation.resolved" | "escalation.expired"
  PendingEscalation item;
};

json to_json(const EscalationEvent& event);

struct EscalationQueueOptions {
  std::chrono::seconds token_ttl{3600};
  std::chrono::seconds pending_ttl{86400};
  std::size_t event_buffer = 4096;
};

/// Suspended escalations awaiting a human decision. Mutations serialize on
/// one mutex; every enqueue and resolution is appended to the audit log
/// before it takes effect.
class EscalationQueue {
 public:
  using Subscriber = std::function<void(const EscalationEvent&)>;

  EscalationQueue(std::shared_ptr<AuditLog> log, ClockPtr clock, EscalationQueueOptions options = {});

  /// Precondition: decision.outcome == ESCALATE with an escalation message
  /// (PRECONDITION_VIOLATION otherwise).
  PendingEscalation enqueue(const ComplianceDecision& decision, const RuntimeContext& ctx);

  /// NOT_FOUND, ALREADY_RESOLVED (including expired items), INVALID_ARGUMENT
  /// for an empty operator id. Approval mints one token per triggering rule.
  PendingEscalation resolve(const std::string& escalation_id, Resolution verdict, const std::string& operator_id,
                            const std::string& note);

  std::optional<PendingEscalation> get(const std::string& escalation_id) const;
  std::vector<PendingEscalation> list(std::optional<EscalationStatus> status = std::nullopt) const;

  /// True iff the token was minted by an approval for exactly this rule and
  /// this intent's fingerprint, and has not expired.
  bool verify_approval(const ApprovalCredential& credential, const IntentDescriptor& intent) const;

  /// Moves PENDING items older than pending_ttl to EXPIRED. Returns how many.
  std::size_t expire_stale();

  /// Events with sequence > after; blocks up to `wait` when none are ready.
  std::vector<EscalationEvent> events_after(std::uint64_t after, std::chrono::milliseconds wait) const;
  std::uint64_t last_event_sequence() const;

  std::size_t subscribe(Subscriber subscriber);
  void unsubscribe(std::size_t id);

 private:
  std::size_t expire_locked(std::vector<EscalationEvent>& emitted);
  EscalationEvent record_event_locked(std::string type, const PendingEscalation& item);
  void notify(const std::vector<EscalationEvent>& events);

  std::shared_ptr<AuditLog> log_;
  ClockPtr clock_;
  EscalationQueueOptions options_;

  mutable std::mutex mutex_;
  mutable std::condition_variable events_cv_;
  std::map<std::string, PendingEscalation> items_;
  std::map<std::string, ApprovalToken> tokens_;
  std::deque<EscalationEvent> events_;
  std::uint64_t next_event_ = 1;
  std::uint64_t next_id_ = 1;

  std::mutex subscribers_mutex_;
  std::map<std::size_t, Subscriber> subscribers_;
  std::size_t next_subscriber_ = 1;
};

}  // namespace agentgov
