#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

namespace agentgov {

/// Time source for trace timestamps, token expiry and latency measurement.
class Clock {
 public:
  virtual ~Clock() = default;
  /// Nanoseconds since the Unix epoch, UTC.
  virtual std::int64_t utc_now_ns() const = 0;
  /// Monotonic nanoseconds for durations.
  virtual std::int64_t monotonic_ns() const = 0;
};

using ClockPtr = std::shared_ptr<const Clock>;

class SystemClock final : public Clock {
 public:
  std::int64_t utc_now_ns() const override;
  std::int64_t monotonic_ns() const override;
};

/// Deterministic clock: every reading advances time by a fixed step. Used for
/// byte-reproducible scenario reports and expiry tests.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t start_ns = 1'790'000'000'000'000'000, std::int64_t step_ns = 1'000)
      : now_(start_ns), step_(step_ns) {}

  std::int64_t utc_now_ns() const override { return now_.fetch_add(step_); }
  std::int64_t monotonic_ns() const override { return now_.fetch_add(step_); }
  void advance(std::int64_t ns) { now_.fetch_add(ns); }

 private:
  mutable std::atomic<std::int64_t> now_;
  std::int64_t step_;
};

ClockPtr system_clock();

/// "2026-10-18T12:00:00.000000123Z"
std::string format_utc(std::int64_t ns);
/// Accepts the format above (fractional part optional). Throws ParseError.
std::int64_t parse_utc(const std::string& text);

}  // namespace agentgov
