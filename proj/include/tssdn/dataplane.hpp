#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "tssdn/netmodel.hpp"

namespace tssdn::dp {

inline constexpr int kNumQueues = 8;
inline constexpr SimTime kNever = std::numeric_limits<SimTime>::max() / 4;

// ---- gate control list ---------------------------------------------------------

struct GclEntry {
  std::uint8_t gates = 0xFF;  // bit i set = queue i open
  SimTime duration = 0;
  bool operator==(const GclEntry&) const = default;
};

class GateControlList {
 public:
  GateControlList() = default;
  GateControlList(SimTime period, SimTime base_time, std::vector<GclEntry> entries);

  // Single entry, every gate open. This is also the unconfigured state.
  static GateControlList all_open(SimTime period = kNsPerMs);

  SimTime period() const { return period_; }
  SimTime base_time() const { return base_time_; }
  const std::vector<GclEntry>& entries() const { return entries_; }

  // period > 0, at least one entry, positive durations summing to period.
  bool valid() const;
  bool is_all_open() const;

  std::uint8_t gates_at(SimTime t) const;
  bool open_at(int queue, SimTime t) const { return (gates_at(t) >> queue) & 1; }

  // End of the open interval for `queue` containing t; t itself if closed at t.
  // kNever if the gate never closes.
  SimTime open_until(int queue, SimTime t) const;
  // Earliest time >= t at which `queue` is open and stays open for `duration`.
  // kNever if no such time exists.
  SimTime earliest_fit(int queue, SimTime t, SimTime duration) const;
  // Next entry boundary strictly after t.
  SimTime next_change(SimTime t) const;

  // Debug dump: "period_us,base_time_us" then "offset_us,duration_us,bitmap_hex" per entry.
  void dump(std::ostream& out) const;

  bool operator==(const GateControlList&) const = default;

 private:
  // Index of the entry active at phase p and the phase at which it starts.
  std::pair<std::size_t, SimTime> locate(SimTime phase) const;

  SimTime period_ = kNsPerMs;
  SimTime base_time_ = 0;
  std::vector<GclEntry> entries_{GclEntry{0xFF, kNsPerMs}};
};

// ---- flow tables -------------------------------------------------------------------

struct Action {
  enum class Kind { Forward, ToController, Drop };
  Kind kind = Kind::Drop;
  int port = 0;

  static Action forward(int port) { return Action{Kind::Forward, port}; }
  static Action to_controller() { return Action{Kind::ToController, 0}; }
  static Action drop() { return Action{Kind::Drop, 0}; }
  bool operator==(const Action&) const = default;
};

enum class TableId { Static, Dynamic };

struct FlowRule {
  net::HeaderPattern match;
  std::optional<int> in_port;
  int priority = 0;
  std::vector<Action> actions;
  std::string cookie;  // free-form owner tag (flow label, stream id ...)

  bool matches(const net::HeaderTuple& h, int port) const {
    return (!in_port || *in_port == port) && match.matches(h);
  }
  bool same_key(const FlowRule& o) const {
    return match == o.match && in_port == o.in_port && priority == o.priority;
  }
};

struct LookupResult {
  std::vector<Action> actions;  // empty = drop
  std::optional<TableId> table;
  const FlowRule* rule = nullptr;
};

// Protected static table consulted before the controller-managed dynamic table.
class FlowTables {
 public:
  // Throws StaticMutationAttempt once sealed.
  void install_static(FlowRule r);
  void seal() { sealed_ = true; }
  bool sealed() const { return sealed_; }

  // Replaces an existing dynamic rule with the same key, keeping its install order.
  void install_dynamic(FlowRule r);
  std::size_t remove_dynamic(const std::string& cookie);

  LookupResult lookup(const net::HeaderTuple& h, int in_port) const;

  const std::vector<FlowRule>& static_rules() const { return static_; }
  const std::vector<FlowRule>& dynamic_rules() const { return dynamic_; }

 private:
  static const FlowRule* best(const std::vector<FlowRule>& table, const net::HeaderTuple& h, int in_port);

  std::vector<FlowRule> static_;
  std::vector<FlowRule> dynamic_;
  bool sealed_ = false;
};

// ---- stream reservation ----------------------------------------------------------------

struct SrTableEntry {
  std::string stream_id;
  net::HeaderPattern match;
  std::int64_t reserved_bps = 0;
  std::set<int> ports;
  int pcp = 4;
};

class SrTable {
 public:
  // Checks sum of reservations per port against the port's link rate.
  bool admissible(const std::map<int, std::int64_t>& link_bps, int port, std::int64_t extra_bps) const;
  void upsert(SrTableEntry e);
  bool remove(const std::string& stream_id);
  const SrTableEntry* find(const std::string& stream_id) const;
  std::int64_t reserved_on(int port, std::optional<int> pcp = {}) const;
  const std::map<std::string, SrTableEntry>& entries() const { return entries_; }

 private:
  std::map<std::string, SrTableEntry> entries_;
};

// ---- credit based shaper ----------------------------------------------------------------

enum class CbsPhase { Idle, Transmitting, Waiting };

// Credit is tracked in nano-bits (bits * 1e9) so that slope * dt is exact integer math.
struct CbsState {
  std::int64_t credit_nbits = 0;
  std::int64_t idle_slope_bps = 0;
  std::int64_t send_slope_bps = 0;  // idle_slope - link rate (negative)

  double credit_bits() const { return static_cast<double>(credit_nbits) / 1e9; }
};

CbsState make_cbs(std::int64_t idle_slope_bps, std::int64_t link_bps);

// Idle: negative credit recovers towards 0, positive credit resets to 0.
// Waiting: credit grows with the idle slope (also while the gate is closed).
// Transmitting: credit changes with the send slope.
CbsState cbs_update(CbsState s, CbsPhase phase, SimTime dt);

// ---- ingress filtering ------------------------------------------------------------------

struct IngressWindow {
  SimTime offset = 0;
  SimTime length = 0;
  SimTime period = kNsPerMs;
};

struct IngressFilterEntry {
  net::HeaderPattern match;
  std::optional<IngressWindow> window;
  std::optional<int> max_frame_bytes;
};

enum class IngressVerdict { Accept, DropMissedWindow, DropOversize };

struct IngressFilter {
  std::vector<IngressFilterEntry> entries;
};

// First matching entry decides; no match accepts.
IngressVerdict ingress_check(const IngressFilter& filter, const net::Frame& frame, SimTime arrival);

// ---- egress port --------------------------------------------------------------------

struct QueuedFrame {
  net::Frame frame;
  SimTime enqueued = 0;
};

// Eight strict-priority FIFO queues (unbounded) behind a GCL, with optional
// CBS per queue. Transmission start is hold-back: a frame only starts when its
// gate stays open for the full transmission.
class EgressPort {
 public:
  EgressPort(std::int64_t link_bps = 100'000'000, SimTime ifg = 960);

  std::int64_t link_bps() const { return link_bps_; }
  SimTime ifg() const { return ifg_; }

  const GateControlList& gcl() const { return gcl_; }
  void set_gcl(GateControlList g) { gcl_ = std::move(g); }

  // idle_slope 0 removes the shaper from the queue.
  void set_cbs(int queue, std::int64_t idle_slope_bps, SimTime now);
  const std::optional<CbsState>& cbs(int queue) const { return cbs_[queue]; }

  void enqueue(net::Frame f, SimTime now);
  std::size_t queue_length(int queue) const { return queues_[queue].size(); }
  std::size_t total_queued() const;
  const std::deque<QueuedFrame>& queue(int q) const { return queues_[q]; }

  // Link considered idle at `now`; busy_until includes the inter-frame gap.
  bool idle(SimTime now) const { return now >= busy_until_; }
  SimTime busy_until() const { return busy_until_; }

  // Queue index selected for transmission at `now`, if any.
  std::optional<int> select_transmission(SimTime now);
  // Pops the selected head frame and accounts the transmission; returns the
  // frame and the transmission duration.
  std::pair<QueuedFrame, SimTime> start_transmission(int queue, SimTime now);
  // Earliest time > now worth re-evaluating, or kNever.
  SimTime next_wakeup(SimTime now);

  SimTime tx_time(const net::Frame& f) const { return net::transmission_time(f.wire_bytes, link_bps_); }

 private:
  void advance_credit(SimTime now);
  bool eligible(int q, SimTime now) const;

  std::int64_t link_bps_;
  SimTime ifg_;
  GateControlList gcl_;
  std::array<std::deque<QueuedFrame>, kNumQueues> queues_;
  std::array<std::optional<CbsState>, kNumQueues> cbs_;
  SimTime credit_time_ = 0;
  int tx_queue_ = -1;
  SimTime tx_end_ = 0;
  SimTime busy_until_ = 0;
};

}  // namespace tssdn::dp
