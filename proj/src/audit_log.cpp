#include "agentgov/audit_log.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>

#include <fcntl.h>
#include <unistd.h>

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

bool is_hex_digest(const std::string& s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

std::string make_trace_id(std::uint64_t sequence) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "tr-%012llu", static_cast<unsigned long long>(sequence));
  return buf;
}

std::string make_cursor(const TraceRecord& r) { return std::to_string(r.timestamp_ns) + ":" + r.trace_id; }

std::pair<std::int64_t, std::string> parse_cursor(const std::string& cursor) {
  const auto colon = cursor.find(':');
  if (colon == std::string::npos) throw GovernanceError(ErrorCode::InvalidArgument, "malformed cursor '" + cursor + "'");
  try {
    return {std::stoll(cursor.substr(0, colon)), cursor.substr(colon + 1)};
  } catch (const std::exception&) {
    throw GovernanceError(ErrorCode::InvalidArgument, "malformed cursor '" + cursor + "'");
  }
}

}  // namespace

std::string_view to_string(RecordKind kind) noexcept {
  switch (kind) {
    case RecordKind::Deliberation: return "deliberation";
    case RecordKind::ContextMutation: return "context_mutation";
    case RecordKind::RulesActivated: return "rules_activated";
    case RecordKind::EscalationEnqueued: return "escalation_enqueued";
    case RecordKind::EscalationResolved: return "escalation_resolved";
    case RecordKind::EscalationExpired: return "escalation_expired";
  }
  return "unknown";
}

std::optional<RecordKind> parse_record_kind(std::string_view text) noexcept {
  for (const auto k : {RecordKind::Deliberation, RecordKind::ContextMutation, RecordKind::RulesActivated,
                       RecordKind::EscalationEnqueued, RecordKind::EscalationResolved, RecordKind::EscalationExpired}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

json to_json(const TraceRecord& r, bool include_record_hash) {
  json out = {{"kind", to_string(r.kind)},
              {"sequence", r.sequence},
              {"trace_id", r.trace_id},
              {"timestamp", format_utc(r.timestamp_ns)},
              {"agent_id", r.agent_id},
              {"workflow_id", r.workflow_id},
              {"intent", r.intent},
              {"rules_retrieved", {{"version", r.ruleset_version}, {"ids", r.rules_retrieved}}},
              {"rules_cited", r.rules_cited},
              {"reasoning", r.reasoning},
              {"decision", r.decision},
              {"round_index", r.round_index},
              {"run_id", r.run_id},
              {"deliberator_name", r.deliberator_name},
              {"prompt_template_version", r.prompt_template_version},
              {"prev_hash", r.prev_hash}};
  if (include_record_hash) out["record_hash"] = r.record_hash;
  return out;
}

TraceRecord trace_record_from_json(const json& j) {
  try {
    TraceRecord r;
    const auto kind = parse_record_kind(j.at("kind").get<std::string>());
    if (!kind) throw GovernanceError(ErrorCode::ParseError, "unknown record kind");
    r.kind = *kind;
    r.sequence = j.at("sequence").get<std::uint64_t>();
    r.trace_id = j.at("trace_id").get<std::string>();
    r.timestamp_ns = parse_utc(j.at("timestamp").get<std::string>());
    r.agent_id = j.at("agent_id").get<std::string>();
    r.workflow_id = j.at("workflow_id").get<std::string>();
    r.intent = j.at("intent");
    r.ruleset_version = j.at("rules_retrieved").at("version").get<std::int64_t>();
    r.rules_retrieved = j.at("rules_retrieved").at("ids").get<std::vector<std::string>>();
    r.rules_cited = j.at("rules_cited").get<std::vector<std::string>>();
    r.reasoning = j.at("reasoning").get<std::string>();
    r.decision = j.at("decision").get<std::string>();
    r.round_index = j.at("round_index").get<int>();
    r.run_id = j.at("run_id").get<std::string>();
    r.deliberator_name = j.at("deliberator_name").get<std::string>();
    r.prompt_template_version = j.at("prompt_template_version").get<std::string>();
    r.prev_hash = j.at("prev_hash").get<std::string>();
    r.record_hash = j.at("record_hash").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw GovernanceError(ErrorCode::ParseError, std::string("trace record: ") + e.what());
  }
}

std::string compute_record_hash(const TraceRecord& record) {
  return sha256_hex(canonical_dump(to_json(record, false)));
}

bool validate_trace_fields(const TraceRecord& r, std::string* problem) {
  const auto fail = [&](std::string why) {
    if (problem) *problem = std::move(why);
    return false;
  };
  if (r.trace_id.empty()) return fail("trace_id empty");
  if (r.timestamp_ns <= 0) return fail("timestamp missing");
  if (!is_hex_digest(r.prev_hash)) return fail("prev_hash malformed");
  if (!is_hex_digest(r.record_hash)) return fail("record_hash malformed");
  if (r.agent_id.empty()) return fail("agent_id empty");
  if (r.decision.empty()) return fail("decision empty");
  if (r.reasoning.empty()) return fail("reasoning empty");
  if (!r.intent.is_object() || r.intent.empty()) return fail("intent empty");

  if (r.kind != RecordKind::Deliberation) return true;

  if (r.workflow_id.empty()) return fail("workflow_id empty");
  if (r.ruleset_version < 1) return fail("rule-set version missing");
  if (r.rules_retrieved.empty() && r.deliberator_name != "default_action") return fail("rules_retrieved empty");
  if (r.round_index < 1) return fail("round_index missing");
  if (r.run_id.empty()) return fail("run_id empty");
  if (r.deliberator_name.empty()) return fail("deliberator_name empty");
  if (r.prompt_template_version.empty()) return fail("prompt_template_version empty");
  for (const char* field : {"intent_id", "action_class", "description"}) {
    const auto it = r.intent.find(field);
    if (it == r.intent.end() || !it->is_string() || it->get<std::string>().empty()) {
      return fail(std::string("intent.") + field + " empty");
    }
  }
  return true;
}

// ── Storage ──────────────────────────────────────────────────────────────────

void MemoryTraceStorage::append(const std::string& line) {
  std::unique_lock lock(mutex_);
  lines_.push_back(line);
}

std::vector<std::string> MemoryTraceStorage::read_all() const {
  std::shared_lock lock(mutex_);
  return lines_;
}

FileTraceStorage::FileTraceStorage(std::string path, bool sync) : path_(std::move(path)), sync_(sync) {
  if (const auto parent = std::filesystem::path(path_).parent_path(); !parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw GovernanceError(ErrorCode::StorageFailure, "cannot open trace log '" + path_ + "': " + std::strerror(errno));
  }
}

FileTraceStorage::~FileTraceStorage() {
  if (fd_ >= 0) ::close(fd_);
}

void FileTraceStorage::append(const std::string& line) {
  std::string buf = line;
  buf.push_back('\n');
  const char* p = buf.data();
  std::size_t left = buf.size();
  while (left > 0) {
    const ssize_t n = ::write(fd_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw GovernanceError(ErrorCode::StorageFailure, "write to '" + path_ + "' failed: " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (sync_ && ::fdatasync(fd_) != 0) {
    throw GovernanceError(ErrorCode::StorageFailure, "fsync of '" + path_ + "' failed: " + std::strerror(errno));
  }
}

std::vector<std::string> FileTraceStorage::read_all() const {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw GovernanceError(ErrorCode::StorageFailure, "cannot read trace log '" + path_ + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

// ── Verification ─────────────────────────────────────────────────────────────

json to_json(const VerificationReport& report) {
  json out = {{"ok", report.ok}, {"records_checked", report.records_checked}, {"reason", report.reason}};
  out["mismatch_index"] = report.mismatch_index ? json(*report.mismatch_index) : json(nullptr);
  out["mismatch_sequence"] = report.mismatch_sequence ? json(*report.mismatch_sequence) : json(nullptr);
  return out;
}

VerificationReport verify_lines(std::span<const std::string> lines, std::size_t first, std::size_t count) {
  VerificationReport report;
  if (first > lines.size()) first = lines.size();
  const std::size_t last = count > lines.size() - first ? lines.size() : first + count;

  std::string expected_prev(kGenesisHash);
  std::uint64_t expected_seq = 0;
  bool anchored = true;
  if (first > 0) {
    try {
      const auto prev = trace_record_from_json(json::parse(lines[first - 1]));
      expected_prev = prev.record_hash;
      expected_seq = prev.sequence + 1;
    } catch (const std::exception&) {
      expected_prev.clear();  // cannot anchor; first checked record will mismatch
      anchored = false;
    }
  }

  const auto mismatch = [&](std::size_t index, std::optional<std::uint64_t> seq, std::string why) {
    report.ok = false;
    report.mismatch_index = index;
    report.mismatch_sequence = seq;
    report.reason = std::move(why);
    return report;
  };

  for (std::size_t i = first; i < last; ++i) {
    TraceRecord r;
    try {
      r = trace_record_from_json(json::parse(lines[i]));
    } catch (const std::exception& e) {
      return mismatch(i, std::nullopt, std::string("unparseable record: ") + e.what());
    }
    ++report.records_checked;
    // Re-serializing must reproduce the stored bytes, so edits to keys or
    // formatting that decode to default values are caught too.
    if (canonical_dump(to_json(r)) != lines[i]) return mismatch(i, r.sequence, "record is not in canonical form");
    if (r.prev_hash != expected_prev) return mismatch(i, r.sequence, "prev_hash does not match preceding record");
    if (compute_record_hash(r) != r.record_hash) return mismatch(i, r.sequence, "record_hash does not match content");
    if (anchored && r.sequence != expected_seq) return mismatch(i, r.sequence, "sequence gap");
    expected_prev = r.record_hash;
    expected_seq = r.sequence + 1;
    anchored = true;
  }
  report.reason = "chain intact";
  return report;
}

// ── AuditLog ─────────────────────────────────────────────────────────────────

AuditLog::AuditLog(std::shared_ptr<TraceStorage> storage, ClockPtr clock)
    : storage_(std::move(storage)), clock_(std::move(clock)) {
  for (const auto& line : storage_->read_all()) {
    try {
      index_.push_back(trace_record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw GovernanceError(ErrorCode::StorageFailure,
                            "trace log record " + std::to_string(index_.size()) + " unreadable: " + e.what());
    }
  }
}

std::shared_ptr<AuditLog> AuditLog::in_memory(ClockPtr clock) {
  return std::make_shared<AuditLog>(std::make_shared<MemoryTraceStorage>(), std::move(clock));
}

TraceRecord AuditLog::append(TraceDraft draft) {
  std::unique_lock lock(mutex_);
  TraceRecord r;
  static_cast<TraceDraft&>(r) = std::move(draft);
  r.sequence = index_.size();
  r.trace_id = make_trace_id(r.sequence);
  r.timestamp_ns = clock_->utc_now_ns();
  if (!index_.empty()) r.timestamp_ns = std::max(r.timestamp_ns, index_.back().timestamp_ns);
  r.prev_hash = index_.empty() ? std::string(kGenesisHash) : index_.back().record_hash;
  r.record_hash = compute_record_hash(r);
  storage_->append(canonical_dump(to_json(r)));
  index_.push_back(r);
  return r;
}

TracePage AuditLog::query(const TraceFilter& f) const {
  std::optional<std::pair<std::int64_t, std::string>> after;
  if (f.cursor) after = parse_cursor(*f.cursor);

  std::shared_lock lock(mutex_);
  TracePage page;
  for (const auto& r : index_) {
    if (after && std::make_pair(r.timestamp_ns, r.trace_id) <= *after) continue;
    if (f.agent_id && r.agent_id != *f.agent_id) continue;
    if (f.workflow_id && r.workflow_id != *f.workflow_id) continue;
    if (f.decision && r.decision != *f.decision) continue;
    if (f.kind && r.kind != *f.kind) continue;
    if (f.run_id && r.run_id != *f.run_id) continue;
    if (f.since_ns && r.timestamp_ns < *f.since_ns) continue;
    if (f.until_ns && r.timestamp_ns >= *f.until_ns) continue;
    if (f.rule_id && std::find(r.rules_cited.begin(), r.rules_cited.end(), *f.rule_id) == r.rules_cited.end()) continue;
    if (f.limit != 0 && page.records.size() == f.limit) {
      page.next_cursor = make_cursor(page.records.back());
      break;
    }
    page.records.push_back(r);
  }
  return page;
}

std::vector<TraceRecord> AuditLog::records() const {
  std::shared_lock lock(mutex_);
  return index_;
}

std::size_t AuditLog::size() const {
  std::shared_lock lock(mutex_);
  return index_.size();
}

std::string AuditLog::head_hash() const {
  std::shared_lock lock(mutex_);
  return index_.empty() ? std::string(kGenesisHash) : index_.back().record_hash;
}

VerificationReport AuditLog::verify_chain(std::size_t first, std::size_t count) const {
  const auto lines = export_lines();
  return verify_lines(lines, first, count);
}

std::vector<std::string> AuditLog::export_lines() const {
  std::shared_lock lock(mutex_);
  return storage_->read_all();
}

}  // namespace agentgov
