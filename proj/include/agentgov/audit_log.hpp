#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agentgov/clock.hpp"
#include "agentgov/value.hpp"

namespace agentgov {

enum class RecordKind {
  Deliberation,
  ContextMutation,
  RulesActivated,
  EscalationEnqueued,
  EscalationResolved,
  EscalationExpired,
};

std::string_view to_string(RecordKind kind) noexcept;
std::optional<RecordKind> parse_record_kind(std::string_view text) noexcept;

/// Fields supplied by the writer. For deliberation records `intent` is the
/// full intent and `agent_id` the acting agent; for operator records
/// `agent_id` holds the operator id and `intent` the mutation details.
struct TraceDraft {
  RecordKind kind = RecordKind::Deliberation;
  std::string agent_id;
  std::string workflow_id;
  json intent = json::object();
  std::int64_t ruleset_version = 0;
  std::vector<std::string> rules_retrieved;
  std::vector<std::string> rules_cited;
  std::string reasoning;
  std::string decision;
  int round_index = 0;
  std::string run_id;
  std::string deliberator_name;
  std::string prompt_template_version;
};

struct TraceRecord : TraceDraft {
  std::uint64_t sequence = 0;
  std::string trace_id;
  std::int64_t timestamp_ns = 0;
  std::string prev_hash;
  std::string record_hash;
};

/// prev_hash of the first record in every log.
inline constexpr std::string_view kGenesisHash = "0000000000000000000000000000000000000000000000000000000000000000";

/// Canonical object form. The stored line is `canonical_dump(to_json(r))`.
json to_json(const TraceRecord& record, bool include_record_hash = true);
/// Throws PARSE_ERROR.
TraceRecord trace_record_from_json(const json& j);
/// SHA-256 over the canonical form without `record_hash`.
std::string compute_record_hash(const TraceRecord& record);

/// Every field the record kind requires is present and non-empty.
bool validate_trace_fields(const TraceRecord& record, std::string* problem = nullptr);

/// Backing store for canonical lines. Implementations must make a line
/// durable before append() returns and throw STORAGE_FAILURE otherwise.
class TraceStorage {
 public:
  virtual ~TraceStorage() = default;
  virtual void append(const std::string& line) = 0;
  virtual std::vector<std::string> read_all() const = 0;
};

class MemoryTraceStorage final : public TraceStorage {
 public:
  void append(const std::string& line) override;
  std::vector<std::string> read_all() const override;
  /// Direct access for corruption harnesses.
  std::vector<std::string>& lines() { return lines_; }

 private:
  mutable std::shared_mutex mutex_;
  std::vector<std::string> lines_;
};

/// One line per record in an append-only file, fsync'd per append when
/// `sync` is set.
class FileTraceStorage final : public TraceStorage {
 public:
  FileTraceStorage(std::string path, bool sync);
  ~FileTraceStorage() override;
  FileTraceStorage(const FileTraceStorage&) = delete;
  FileTraceStorage& operator=(const FileTraceStorage&) = delete;

  void append(const std::string& line) override;
  std::vector<std::string> read_all() const override;
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  bool sync_;
  int fd_ = -1;
};

struct TraceFilter {
  std::optional<std::string> agent_id;
  std::optional<std::string> workflow_id;
  std::optional<std::string> decision;
  std::optional<std::string> rule_id;  // matches cited rules
  std::optional<RecordKind> kind;
  std::optional<std::string> run_id;
  std::optional<std::int64_t> since_ns;  // inclusive
  std::optional<std::int64_t> until_ns;  // exclusive
  std::optional<std::string> cursor;     // from TracePage::next_cursor
  std::size_t limit = 0;                 // 0 = unlimited
};

struct TracePage {
  std::vector<TraceRecord> records;
  std::optional<std::string> next_cursor;
};

struct VerificationReport {
  bool ok = true;
  std::size_t records_checked = 0;
  std::optional<std::size_t> mismatch_index;        // 0-based position in storage
  std::optional<std::uint64_t> mismatch_sequence;   // sequence number found there, if parseable
  std::string reason;
};

json to_json(const VerificationReport& report);

/// Recomputes the chain over lines[first, first+count). The record at
/// `first` is checked against the previous line's hash (or genesis).
VerificationReport verify_lines(std::span<const std::string> lines, std::size_t first = 0,
                                std::size_t count = std::numeric_limits<std::size_t>::max());

/// Append-only, hash-chained reasoning-trace log with an in-memory index
/// rebuilt from storage at construction. There is no update or delete.
class AuditLog {
 public:
  /// Throws STORAGE_FAILURE if existing storage cannot be parsed.
  AuditLog(std::shared_ptr<TraceStorage> storage, ClockPtr clock);

  static std::shared_ptr<AuditLog> in_memory(ClockPtr clock = system_clock());

  /// Assigns sequence, trace id, timestamp and chain hashes; durable before
  /// return. Throws STORAGE_FAILURE.
  TraceRecord append(TraceDraft draft);

  /// Matching records in time order (ties by trace id).
  TracePage query(const TraceFilter& filter) const;
  std::vector<TraceRecord> records() const;
  std::size_t size() const;
  std::string head_hash() const;

  /// Re-reads storage and recomputes hashes.
  VerificationReport verify_chain(std::size_t first = 0,
                                  std::size_t count = std::numeric_limits<std::size_t>::max()) const;
  /// Canonical lines exactly as stored.
  std::vector<std::string> export_lines() const;

 private:
  std::shared_ptr<TraceStorage> storage_;
  ClockPtr clock_;
  mutable std::shared_mutex mutex_;
  std::vector<TraceRecord> index_;
};

}  // namespace agentgov
