#include "tssdn/dataplane.hpp"

#include <algorithm>
#include <cstdio>

#include "tssdn/error.hpp"

namespace tssdn::dp {

// ---- GateControlList ----------------------------------------------------------------

GateControlList::GateControlList(SimTime period, SimTime base_time, std::vector<GclEntry> entries)
    : period_(period), base_time_(base_time), entries_(std::move(entries)) {}

GateControlList GateControlList::all_open(SimTime period) {
  return GateControlList(period, 0, {GclEntry{0xFF, period}});
}

bool GateControlList::valid() const {
  if (period_ <= 0 || entries_.empty()) return false;
  SimTime sum = 0;
  for (const auto& e : entries_) {
    if (e.duration <= 0) return false;
    sum += e.duration;
  }
  return sum == period_;
}

bool GateControlList::is_all_open() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const GclEntry& e) { return e.gates == 0xFF; });
}

std::pair<std::size_t, SimTime> GateControlList::locate(SimTime phase) const {
  SimTime start = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (phase < start + entries_[i].duration) return {i, start};
    start += entries_[i].duration;
  }
  // Only reachable for invalid lists whose durations undershoot the period.
  return {entries_.size() - 1, start - entries_.back().duration};
}

std::uint8_t GateControlList::gates_at(SimTime t) const {
  return entries_[locate(wrap(t - base_time_, period_)).first].gates;
}

SimTime GateControlList::next_change(SimTime t) const {
  const SimTime phase = wrap(t - base_time_, period_);
  const auto [i, start] = locate(phase);
  return t - (phase - start) + entries_[i].duration;
}

SimTime GateControlList::open_until(int queue, SimTime t) const {
  if (!open_at(queue, t)) return t;
  const SimTime phase = wrap(t - base_time_, period_);
  auto [i, start] = locate(phase);
  SimTime end = t - (phase - start) + entries_[i].duration;
  for (std::size_t steps = 0; steps <= entries_.size(); ++steps) {
    i = (i + 1) % entries_.size();
    if (!((entries_[i].gates >> queue) & 1)) return end;
    end += entries_[i].duration;
  }
  return kNever;
}

SimTime GateControlList::earliest_fit(int queue, SimTime t, SimTime duration) const {
  const SimTime limit = t + 2 * period_ + duration;
  SimTime cur = t;
  while (cur <= limit) {
    if (open_at(queue, cur)) {
      const SimTime until = open_until(queue, cur);
      if (until == kNever || until - cur >= duration) return cur;
      cur = until;
    } else {
      cur = next_change(cur);
    }
  }
  return kNever;
}

void GateControlList::dump(std::ostream& out) const {
  out << format_us(period_) << ',' << format_us(base_time_) << '\n';
  SimTime offset = 0;
  for (const auto& e : entries_) {
    char hex[8];
    std::snprintf(hex, sizeof hex, "0x%02X", e.gates);
    out << format_us(offset) << ',' << format_us(e.duration) << ',' << hex << '\n';
    offset += e.duration;
  }
}

// ---- FlowTables -----------------------------------------------------------------------

void FlowTables::install_static(FlowRule r) {
  if (sealed_) throw Error(Errc::StaticMutationAttempt, "static flow table is sealed (rule " + r.match.str() + ")");
  static_.push_back(std::move(r));
}

void FlowTables::install_dynamic(FlowRule r) {
  for (auto& existing : dynamic_) {
    if (existing.same_key(r)) {
      existing = std::move(r);
      return;
    }
  }
  dynamic_.push_back(std::move(r));
}

std::size_t FlowTables::remove_dynamic(const std::string& cookie) {
  const auto before = dynamic_.size();
  std::erase_if(dynamic_, [&](const FlowRule& r) { return r.cookie == cookie; });
  return before - dynamic_.size();
}

const FlowRule* FlowTables::best(const std::vector<FlowRule>& table, const net::HeaderTuple& h, int in_port) {
  const FlowRule* hit = nullptr;
  for (const auto& r : table) {
    if (r.matches(h, in_port) && (!hit || r.priority > hit->priority)) hit = &r;
  }
  return hit;
}

LookupResult FlowTables::lookup(const net::HeaderTuple& h, int in_port) const {
  if (const auto* r = best(static_, h, in_port)) return {r->actions, TableId::Static, r};
  if (const auto* r = best(dynamic_, h, in_port)) return {r->actions, TableId::Dynamic, r};
  return {};
}

// ---- SrTable ----------------------------------------------------------------------------

bool SrTable::admissible(const std::map<int, std::int64_t>& link_bps, int port, std::int64_t extra_bps) const {
  const auto it = link_bps.find(port);
  if (it == link_bps.end()) return false;
  return reserved_on(port) + extra_bps <= it->second;
}

void SrTable::upsert(SrTableEntry e) { entries_[e.stream_id] = std::move(e); }

bool SrTable::remove(const std::string& stream_id) { return entries_.erase(stream_id) != 0; }

const SrTableEntry* SrTable::find(const std::string& stream_id) const {
  const auto it = entries_.find(stream_id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::int64_t SrTable::reserved_on(int port, std::optional<int> pcp) const {
  std::int64_t sum = 0;
  for (const auto& [id, e] : entries_) {
    if (e.ports.count(port) && (!pcp || *pcp == e.pcp)) sum += e.reserved_bps;
  }
  return sum;
}

// ---- CBS --------------------------------------------------------------------------------

CbsState make_cbs(std::int64_t idle_slope_bps, std::int64_t link_bps) {
  return CbsState{0, idle_slope_bps, idle_slope_bps - link_bps};
}

// Wide enough for slope * dt over long idle spans.
__extension__ using Wide = __int128;

CbsState cbs_update(CbsState s, CbsPhase phase, SimTime dt) {
  if (dt <= 0) {
    if (phase == CbsPhase::Idle && s.credit_nbits > 0) s.credit_nbits = 0;
    return s;
  }
  const Wide idle_gain = static_cast<Wide>(s.idle_slope_bps) * dt;
  switch (phase) {
    case CbsPhase::Idle:
      if (s.credit_nbits > 0) {
        s.credit_nbits = 0;
      } else if (idle_gain >= -static_cast<Wide>(s.credit_nbits)) {
        s.credit_nbits = 0;
      } else {
        s.credit_nbits += static_cast<std::int64_t>(idle_gain);
      }
      break;
    case CbsPhase::Waiting:
      s.credit_nbits += static_cast<std::int64_t>(idle_gain);
      break;
    case CbsPhase::Transmitting:
      s.credit_nbits += s.send_slope_bps * dt;
      break;
  }
  return s;
}

// ---- ingress ----------------------------------------------------------------------------

IngressVerdict ingress_check(const IngressFilter& filter, const net::Frame& frame, SimTime arrival) {
  for (const auto& e : filter.entries) {
    if (!e.match.matches(frame.headers)) continue;
    if (e.max_frame_bytes && frame.wire_bytes > *e.max_frame_bytes) return IngressVerdict::DropOversize;
    if (e.window && wrap(arrival - e.window->offset, e.window->period) >= e.window->length)
      return IngressVerdict::DropMissedWindow;
    return IngressVerdict::Accept;
  }
  return IngressVerdict::Accept;
}

// ---- EgressPort -------------------------------------------------------------------------

EgressPort::EgressPort(std::int64_t link_bps, SimTime ifg) : link_bps_(link_bps), ifg_(ifg) {}

void EgressPort::set_cbs(int queue, std::int64_t idle_slope_bps, SimTime now) {
  advance_credit(now);
  if (idle_slope_bps <= 0) {
    cbs_[queue].reset();
  } else if (cbs_[queue]) {
    cbs_[queue]->idle_slope_bps = idle_slope_bps;
    cbs_[queue]->send_slope_bps = idle_slope_bps - link_bps_;
  } else {
    cbs_[queue] = make_cbs(idle_slope_bps, link_bps_);
  }
}

void EgressPort::advance_credit(SimTime now) {
  if (now <= credit_time_) return;
  for (int q = 0; q < kNumQueues; ++q) {
    if (!cbs_[q]) continue;
    SimTime from = credit_time_;
    if (q == tx_queue_ && tx_end_ > from) {
      const SimTime until = std::min(now, tx_end_);
      *cbs_[q] = cbs_update(*cbs_[q], CbsPhase::Transmitting, until - from);
      from = until;
    }
    if (now > from) {
      const auto phase = queues_[q].empty() ? CbsPhase::Idle : CbsPhase::Waiting;
      *cbs_[q] = cbs_update(*cbs_[q], phase, now - from);
    }
  }
  if (now >= tx_end_) tx_queue_ = -1;
  credit_time_ = now;
}

void EgressPort::enqueue(net::Frame f, SimTime now) {
  advance_credit(now);
  queues_[f.headers.pcp].push_back(QueuedFrame{std::move(f), now});
}

std::size_t EgressPort::total_queued() const {
  std::size_t n = 0;
  for (const auto& q : queues_) n += q.size();
  return n;
}

bool EgressPort::eligible(int q, SimTime now) const {
  if (queues_[q].empty()) return false;
  if (cbs_[q] && cbs_[q]->credit_nbits < 0) return false;
  if (!gcl_.open_at(q, now)) return false;
  return gcl_.open_until(q, now) - now >= tx_time(queues_[q].front().frame);
}

std::optional<int> EgressPort::select_transmission(SimTime now) {
  if (!idle(now)) return std::nullopt;
  advance_credit(now);
  for (int q = kNumQueues - 1; q >= 0; --q) {
    if (eligible(q, now)) return q;
  }
  return std::nullopt;
}

std::pair<QueuedFrame, SimTime> EgressPort::start_transmission(int queue, SimTime now) {
  advance_credit(now);
  QueuedFrame qf = std::move(queues_[queue].front());
  queues_[queue].pop_front();
  const SimTime tx = tx_time(qf.frame);
  tx_queue_ = queue;
  tx_end_ = now + tx;
  busy_until_ = now + tx + ifg_;
  return {std::move(qf), tx};
}

SimTime EgressPort::next_wakeup(SimTime now) {
  if (!idle(now)) return busy_until_;
  advance_credit(now);
  SimTime best = kNever;
  for (int q = 0; q < kNumQueues; ++q) {
    if (queues_[q].empty()) continue;
    SimTime from = now;
    if (cbs_[q] && cbs_[q]->credit_nbits < 0) {
      const std::int64_t need = -cbs_[q]->credit_nbits;
      from = now + (need + cbs_[q]->idle_slope_bps - 1) / cbs_[q]->idle_slope_bps;
    }
    best = std::min(best, gcl_.earliest_fit(q, from, tx_time(queues_[q].front().frame)));
  }
  if (best != kNever && best <= now) best = now + 1;
  return best;
}

}  // namespace tssdn::dp
