#include "tssdn/desim.hpp"

#include <algorithm>
#include <limits>

#include "tssdn/error.hpp"

namespace tssdn::sim {

const char* action_name(TraceAction a) {
  switch (a) {
    case TraceAction::Enqueued: return "enqueued";
    case TraceAction::Sent: return "sent";
    case TraceAction::Received: return "received";
    case TraceAction::DroppedIngress: return "dropped_ingress";
    case TraceAction::DroppedNoRule: return "dropped_no_rule";
    case TraceAction::ToController: return "to_controller";
  }
  return "?";
}

void EventTrace::append(TraceRecord r) { records_.push_back(std::move(r)); }

std::size_t EventTrace::count(TraceAction a) const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [a](const TraceRecord& r) { return r.action == a; }));
}

void EventTrace::write_csv(std::ostream& out) const {
  out << kHeader << '\n';
  for (const auto& r : records_) {
    out << format_us(r.t) << ',' << r.node << ',' << r.port << ',' << action_name(r.action) << ','
        << r.frame_id << ',';
    if (r.cf_id) out << *r.cf_id;
    out << ',' << r.pcp << ',' << r.wire_bytes << ',' << r.detail << '\n';
  }
}

bool EventTrace::operator==(const EventTrace& o) const {
  if (records_.size() != o.records_.size()) return false;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& a = records_[i];
    const auto& b = o.records_[i];
    if (a.t != b.t || a.node != b.node || a.port != b.port || a.action != b.action ||
        a.frame_id != b.frame_id || a.cf_id != b.cf_id || a.pcp != b.pcp || a.wire_bytes != b.wire_bytes ||
        a.detail != b.detail)
      return false;
  }
  return true;
}

EventHandle Kernel::schedule_at(SimTime t, EventKind kind, Handler h) {
  if (t < now_)
    throw Error(Errc::SchedulingInPast, "t=" + format_us(t) + "us < now=" + format_us(now_) + "us");
  const auto seq = next_seq_++;
  queue_.push(Entry{t, seq, kind, std::move(h)});
  live_.insert(seq);
  return EventHandle{seq};
}

bool Kernel::cancel(EventHandle h) {
  if (!live_.count(h.seq) || cancelled_.count(h.seq)) return false;
  cancelled_.insert(h.seq);
  return true;
}

const EventTrace& Kernel::run_until(SimTime t_end) {
  while (!queue_.empty() && queue_.top().time <= t_end) {
    // priority_queue::top is const; the handler is moved out via a copy of the
    // entry so that handlers may schedule new events while running.
    Entry e = queue_.top();
    queue_.pop();
    live_.erase(e.seq);
    if (cancelled_.erase(e.seq)) continue;
    now_ = e.time;
    ++processed_;
    e.handler();
  }
  if (t_end > now_) now_ = t_end;
  return trace_;
}

void Kernel::record(TraceRecord r) {
  r.t = now_;
  trace_.append(std::move(r));
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::string_view stream_label)
    : engine_(splitmix64(seed ^ fnv1a64(stream_label))) {}

std::uint64_t Rng::uniform(std::uint64_t n) {
  if (n == 0) throw Error(Errc::Usage, "Rng::uniform(0)");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::int64_t Rng::uniform_range(std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(uniform(static_cast<std::uint64_t>(hi - lo) + 1));
}

}  // namespace tssdn::sim
