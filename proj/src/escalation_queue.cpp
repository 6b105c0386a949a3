#include "agentgov/escalation_queue.hpp"

#include <cstdio>

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

std::string make_escalation_id(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "esc-%06llu", static_cast<unsigned long long>(n));
  return buf;
}

std::int64_t seconds_to_ns(std::chrono::seconds s) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(s).count();
}

}  // namespace

std::string_view to_string(EscalationStatus s) noexcept {
  switch (s) {
    case EscalationStatus::Pending: return "PENDING";
    case EscalationStatus::Approved: return "APPROVED";
    case EscalationStatus::Denied: return "DENIED";
    case EscalationStatus::Expired: return "EXPIRED";
  }
  return "UNKNOWN";
}

std::optional<EscalationStatus> parse_escalation_status(std::string_view text) noexcept {
  for (const auto s : {EscalationStatus::Pending, EscalationStatus::Approved, EscalationStatus::Denied,
                       EscalationStatus::Expired}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::optional<Resolution> parse_resolution(std::string_view text) noexcept {
  if (text == "APPROVED" || text == "APPROVE") return Resolution::Approved;
  if (text == "DENIED" || text == "DENY") return Resolution::Denied;
  return std::nullopt;
}

json to_json(const PendingEscalation& item) {
  json tokens = json::array();
  for (const auto& t : item.approval_tokens) {
    tokens.push_back({{"rule_id", t.rule_id},
                      {"token", t.token},
                      {"expires_at", format_utc(t.expires_at_ns)},
                      {"escalation_id", t.escalation_id},
                      {"intent_fingerprint", t.intent_fingerprint}});
  }
  json out = {{"escalation_id", item.escalation_id},
              {"message", to_json(item.message)},
              {"intent", redacted_json(item.intent)},
              {"context", item.context},
              {"run_id", item.run_id},
              {"ruleset_version", item.ruleset_version},
              {"created_at", format_utc(item.created_at_ns)},
              {"status", to_string(item.status)},
              {"resolver", item.resolver},
              {"note", item.note},
              {"approval_tokens", tokens}};
  out["resolved_at"] = item.resolved_at_ns ? json(format_utc(item.resolved_at_ns)) : json(nullptr);
  return out;
}

json to_json(const EscalationEvent& event) {
  return {{"sequence", event.sequence}, {"type", event.type}, {"escalation", to_json(event.item)}};
}

EscalationQueue::EscalationQueue(std::shared_ptr<AuditLog> log, ClockPtr clock, EscalationQueueOptions options)
    : log_(std::move(log)), clock_(std::move(clock)), options_(options) {}

PendingEscalation EscalationQueue::enqueue(const ComplianceDecision& decision, const RuntimeContext& ctx) {
  if (decision.outcome != Outcome::Escalate || !decision.escalation) {
    throw GovernanceError(ErrorCode::PreconditionViolation, "only ESCALATE decisions can be enqueued");
  }
  std::vector<EscalationEvent> emitted;
  PendingEscalation item;
  {
    std::lock_guard lock(mutex_);
    item.escalation_id = make_escalation_id(next_id_);
    item.message = *decision.escalation;
    item.intent = decision.effective_intent;
    item.context = to_json(ctx);
    item.run_id = decision.run_id;
    item.ruleset_version = decision.ruleset_version;
    item.created_at_ns = clock_->utc_now_ns();

    TraceDraft draft;
    draft.kind = RecordKind::EscalationEnqueued;
    draft.agent_id = item.intent.agent_id;
    draft.workflow_id = item.intent.workflow_id;
    draft.intent = {{"escalation_id", item.escalation_id},
                    {"intent", redacted_json(item.intent)},
                    {"trigger_kind", to_string(item.message.trigger_kind)}};
    draft.ruleset_version = item.ruleset_version;
    draft.rules_cited = item.message.triggering_rule_ids;
    draft.reasoning = item.message.reasoning;
    draft.decision = "ENQUEUED";
    draft.run_id = item.run_id;
    log_->append(std::move(draft));

    ++next_id_;
    items_.emplace(item.escalation_id, item);
    emitted.push_back(record_event_locked("escalation.enqueued", item));
  }
  notify(emitted);
  return item;
}

PendingEscalation EscalationQueue::resolve(const std::string& escalation_id, Resolution verdict,
                                           const std::string& operator_id, const std::string& note) {
  if (operator_id.empty()) throw GovernanceError(ErrorCode::InvalidArgument, "operator id required");
  std::vector<EscalationEvent> emitted;
  PendingEscalation result;
  {
    std::lock_guard lock(mutex_);
    expire_locked(emitted);
    const auto it = items_.find(escalation_id);
    if (it == items_.end()) {
      throw GovernanceError(ErrorCode::NotFound, "no escalation '" + escalation_id + "'", escalation_id);
    }
    if (it->second.status != EscalationStatus::Pending) {
      throw GovernanceError(ErrorCode::AlreadyResolved,
                            "escalation '" + escalation_id + "' is " + std::string(to_string(it->second.status)),
                            escalation_id);
    }
    PendingEscalation next = it->second;
    const std::int64_t now = clock_->utc_now_ns();
    next.status = verdict == Resolution::Approved ? EscalationStatus::Approved : EscalationStatus::Denied;
    next.resolver = operator_id;
    next.note = note;
    next.resolved_at_ns = now;
    if (verdict == Resolution::Approved) {
      const auto fingerprint = intent_fingerprint(next.intent);
      for (const auto& rule_id : next.message.triggering_rule_ids) {
        next.approval_tokens.push_back(
            {rule_id, random_hex(16), now + seconds_to_ns(options_.token_ttl), next.escalation_id, fingerprint});
      }
    }

    TraceDraft draft;
    draft.kind = RecordKind::EscalationResolved;
    draft.agent_id = operator_id;
    draft.workflow_id = next.intent.workflow_id;
    json token_rules = json::array();
    for (const auto& t : next.approval_tokens) token_rules.push_back(t.rule_id);
    draft.intent = {{"escalation_id", next.escalation_id},
                    {"intent_id", next.intent.intent_id},
                    {"tokens_minted_for", token_rules}};
    draft.ruleset_version = next.ruleset_version;
    draft.rules_cited = next.message.triggering_rule_ids;
    draft.reasoning = note.empty() ? "resolved without note" : note;
    draft.decision = std::string(to_string(next.status));
    draft.run_id = next.run_id;
    log_->append(std::move(draft));

    for (const auto& t : next.approval_tokens) tokens_.emplace(t.token, t);
    it->second = next;
    result = next;
    emitted.push_back(record_event_locked("escalation.resolved", next));
  }
  notify(emitted);
  return result;
}

std::optional<PendingEscalation> EscalationQueue::get(const std::string& escalation_id) const {
  std::lock_guard lock(mutex_);
  const auto it = items_.find(escalation_id);
  if (it == items_.end()) return std::nullopt;
  return it->second;
}

std::vector<PendingEscalation> EscalationQueue::list(std::optional<EscalationStatus> status) const {
  std::lock_guard lock(mutex_);
  std::vector<PendingEscalation> out;
  for (const auto& [_, item] : items_) {
    if (!status || item.status == *status) out.push_back(item);
  }
  return out;
}

bool EscalationQueue::verify_approval(const ApprovalCredential& credential, const IntentDescriptor& intent) const {
  std::lock_guard lock(mutex_);
  const auto it = tokens_.find(credential.token);
  if (it == tokens_.end()) return false;
  const ApprovalToken& token = it->second;
  return token.rule_id == credential.rule_id && clock_->utc_now_ns() < token.expires_at_ns &&
         token.intent_fingerprint == intent_fingerprint(intent);
}

std::size_t EscalationQueue::expire_stale() {
  std::vector<EscalationEvent> emitted;
  std::size_t n = 0;
  {
    std::lock_guard lock(mutex_);
    n = expire_locked(emitted);
  }
  notify(emitted);
  return n;
}

std::size_t EscalationQueue::expire_locked(std::vector<EscalationEvent>& emitted) {
  const std::int64_t now = clock_->utc_now_ns();
  const std::int64_t ttl = seconds_to_ns(options_.pending_ttl);
  std::size_t n = 0;
  for (auto& [id, item] : items_) {
    if (item.status != EscalationStatus::Pending || now - item.created_at_ns < ttl) continue;
    TraceDraft draft;
    draft.kind = RecordKind::EscalationExpired;
    draft.agent_id = "system";
    draft.workflow_id = item.intent.workflow_id;
    draft.intent = {{"escalation_id", id}, {"intent_id", item.intent.intent_id}};
    draft.ruleset_version = item.ruleset_version;
    draft.rules_cited = item.message.triggering_rule_ids;
    draft.reasoning = "pending escalation exceeded its review window";
    draft.decision = "EXPIRED";
    draft.run_id = item.run_id;
    log_->append(std::move(draft));
    item.status = EscalationStatus::Expired;
    item.resolved_at_ns = now;
    emitted.push_back(record_event_locked("escalation.expired", item));
    ++n;
  }
  return n;
}

EscalationEvent EscalationQueue::record_event_locked(std::string type, const PendingEscalation& item) {
  EscalationEvent event{next_event_++, std::move(type), item};
  events_.push_back(event);
  while (events_.size() > options_.event_buffer) events_.pop_front();
  events_cv_.notify_all();
  return event;
}

std::vector<EscalationEvent> EscalationQueue::events_after(std::uint64_t after, std::chrono::milliseconds wait) const {
  std::unique_lock lock(mutex_);
  events_cv_.wait_for(lock, wait, [&] { return !events_.empty() && events_.back().sequence > after; });
  std::vector<EscalationEvent> out;
  for (const auto& e : events_) {
    if (e.sequence > after) out.push_back(e);
  }
  return out;
}

std::uint64_t EscalationQueue::last_event_sequence() const {
  std::lock_guard lock(mutex_);
  return next_event_ - 1;
}

std::size_t EscalationQueue::subscribe(Subscriber subscriber) {
  std::lock_guard lock(subscribers_mutex_);
  subscribers_.emplace(next_subscriber_, std::move(subscriber));
  return next_subscriber_++;
}

void EscalationQueue::unsubscribe(std::size_t id) {
  std::lock_guard lock(subscribers_mutex_);
  subscribers_.erase(id);
}

void EscalationQueue::notify(const std::vector<EscalationEvent>& events) {
  if (events.empty()) return;
  std::lock_guard lock(subscribers_mutex_);
  for (const auto& e : events) {
    for (const auto& [_, sub] : subscribers_) sub(e);
  }
}

}  // namespace agentgov
