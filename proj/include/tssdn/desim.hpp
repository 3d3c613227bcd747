#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tssdn/time.hpp"

namespace tssdn::sim {

enum class EventKind { FrameArrival, TransmissionComplete, GateChange, TimerFire, ControlMessage };

enum class TraceAction { Enqueued, Sent, Received, DroppedIngress, DroppedNoRule, ToController };

const char* action_name(TraceAction a);

struct TraceRecord {
  SimTime t = 0;
  std::string node;
  int port = 0;
  TraceAction action = TraceAction::Sent;
  std::uint64_t frame_id = 0;
  std::optional<std::uint32_t> cf_id;
  int pcp = 0;
  int wire_bytes = 0;
  std::string detail;
};

// Append-only event log; timestamps are non-decreasing in record order.
class EventTrace {
 public:
  static constexpr const char* kHeader = "t_us,node,port,action,frame_id,cf_id,pcp,wire_bytes,detail";

  void append(TraceRecord r);
  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t count(TraceAction a) const;
  void write_csv(std::ostream& out) const;
  bool operator==(const EventTrace&) const;

 private:
  std::vector<TraceRecord> records_;
};

struct EventHandle {
  std::uint64_t seq = 0;
};

// Single-threaded discrete event kernel. Events are ordered by (time, seq);
// seq is the insertion counter, so simultaneous events fire in the order they
// were scheduled.
class Kernel {
 public:
  using Handler = std::function<void()>;

  SimTime now() const { return now_; }

  // Throws Error(SchedulingInPast) when t < now().
  EventHandle schedule_at(SimTime t, EventKind kind, Handler h);
  EventHandle schedule_in(SimTime dt, EventKind kind, Handler h) { return schedule_at(now_ + dt, kind, std::move(h)); }
  // Returns false when the event already fired or was cancelled.
  bool cancel(EventHandle h);

  // Processes every event with time <= t_end, then advances the clock to t_end.
  const EventTrace& run_until(SimTime t_end);

  std::size_t pending() const { return queue_.size() - cancelled_.size(); }
  std::uint64_t processed() const { return processed_; }

  EventTrace& trace() { return trace_; }
  const EventTrace& trace() const { return trace_; }
  void record(TraceRecord r);

 private:
  struct Entry {
    SimTime time;
    std::uint64_t seq;
    EventKind kind;
    Handler handler;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::unordered_set<std::uint64_t> live_;
  std::unordered_set<std::uint64_t> cancelled_;
  EventTrace trace_;
};

// Portable seeded stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the seed is splitmix64(seed ^ fnv1a64(label)) and
// bounded draws use rejection sampling, so sequences are identical on every
// platform and standard library.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view stream_label);

  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform(std::uint64_t n);
  // Uniform integer in [lo, hi].
  std::int64_t uniform_range(std::int64_t lo, std::int64_t hi);
  // Uniform over {0, step, 2*step, ..., (count-1)*step}.
  std::int64_t uniform_step(std::int64_t step, std::int64_t count) {
    return step * static_cast<std::int64_t>(uniform(static_cast<std::uint64_t>(count)));
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace tssdn::sim
