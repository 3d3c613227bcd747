#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tssdn/bounds.hpp"
#include "tssdn/dataplane.hpp"
#include "tssdn/desim.hpp"

namespace tssdn::txn {

// ---- planning -------------------------------------------------------------------------

enum class OpKind { AddSlot, RemoveSlot, ShiftEarlier, ShiftLater };
const char* op_name(OpKind k);

struct SlotEdit {
  std::string device;
  int port = 0;
  std::optional<bounds::Window> old_window;
  std::optional<bounds::Window> new_window;
};

struct BasicOp {
  OpKind kind = OpKind::AddSlot;
  std::string flow;
  std::vector<SlotEdit> edits;     // source to destination
  std::vector<std::string> path;   // edited devices, source to destination

  std::vector<std::string> required_order() const;
};

// AddSlot / ShiftLater: destination to source. RemoveSlot / ShiftEarlier: source to destination.
std::vector<std::string> commit_order(OpKind kind, const std::vector<std::string>& path);

// One op per flow whose windows differ, ordered by flow id. Throws Unrealizable
// when a changed window overlaps a window of a flow left untouched.
std::vector<BasicOp> plan_update(const bounds::SlotPlan& current, const bounds::SlotPlan& target);

// A device order satisfying every op's required order, or nullopt on conflict.
// Ties follow first appearance.
std::optional<std::vector<std::string>> merged_order(const std::vector<BasicOp>& ops);

struct OpGroup {
  std::vector<BasicOp> ops;
  std::vector<std::string> sequence;
};

// Greedy: an op joins the open group while the group's orders stay consistent.
std::vector<OpGroup> split_transaction(const std::vector<BasicOp>& ops);

// `current` with the windows of the ops' flows replaced by their target windows.
bounds::SlotPlan apply_ops(const bounds::SlotPlan& current, const bounds::SlotPlan& target,
                           const std::vector<BasicOp>& ops);

// ---- transactions ------------------------------------------------------------------

enum class Phase { Idle, Locked, Configured, Committed, Unlocked };
const char* phase_name(Phase p);

enum class Strategy { Synchronous, Ordered };

struct DeviceConfig {
  std::map<int, dp::GateControlList> ports;
  bool operator==(const DeviceConfig&) const = default;
};

// Per-device GCLs of `plan`; ports scheduled only in `previous` fall back to all-open.
std::map<std::string, DeviceConfig> device_configs(const bounds::SlotPlan& plan, const bounds::SlotPlan& previous);

struct Transaction {
  std::uint64_t id = 0;
  std::string label;
  Strategy strategy = Strategy::Synchronous;
  std::vector<BasicOp> ops;
  std::vector<std::string> devices;   // lock order
  std::vector<std::string> sequence;  // ordered commit sequence
  std::map<std::string, DeviceConfig> candidates;
  std::map<std::string, bounds::SlotPlan> plan_slices;  // per device, for validation
  SimTime not_before = 0;
  // Phases of the period that must not contain the synchronous commit instant.
  std::vector<std::pair<SimTime, SimTime>> busy;
  Phase phase = Phase::Idle;
};

// Builds a transaction moving the devices touched by `ops` from `current` to
// the intermediate plan. Lock order is sorted device id.
Transaction make_transaction(std::uint64_t id, std::string label, Strategy strategy, const std::vector<BasicOp>& ops,
                             const bounds::SlotPlan& current, const bounds::SlotPlan& target,
                             std::optional<std::vector<std::string>> sequence = {});

// ---- messages -----------------------------------------------------------------------

enum class MsgKind {
  Lock, LockOk, LockFail,
  Edit, EditOk, EditFail,
  Prepare, Ready, Release,
  Commit, Committed,
  Discard, Discarded,
  Unlock, Unlocked,
};
const char* msg_name(MsgKind k);

struct TxnMessage {
  MsgKind kind = MsgKind::Lock;
  std::uint64_t txn = 0;
  std::optional<DeviceConfig> candidate;
  std::optional<bounds::SlotPlan> slice;
  SimTime commit_time = 0;
  std::string detail;

  static TxnMessage of(MsgKind k) {
    TxnMessage m;
    m.kind = k;
    return m;
  }
};

// ---- device side ----------------------------------------------------------------------

class ManagedDevice {
 public:
  explicit ManagedDevice(std::string id, DeviceConfig running = {});

  const std::string& id() const { return id_; }
  const DeviceConfig& running() const { return running_; }
  const std::optional<DeviceConfig>& candidate() const { return candidate_; }
  std::optional<std::uint64_t> lock_owner() const { return owner_; }

  bool lock(std::uint64_t txn);
  bool unlock(std::uint64_t txn);
  bounds::ValidationReport edit(std::uint64_t txn, DeviceConfig candidate, const bounds::SlotPlan& slice);
  void discard(std::uint64_t txn);
  // Swaps candidate into running. Commit itself always succeeds.
  bool commit(std::uint64_t txn);

  // Fired after running changes (data plane applies the new GCLs).
  std::function<void(const DeviceConfig&)> on_commit;
  std::vector<SimTime> commit_times;

 private:
  std::string id_;
  DeviceConfig running_;
  std::optional<DeviceConfig> candidate_;
  std::optional<std::uint64_t> owner_;
};

// Runs one coordinator message on a device; replies go through `reply`
// (possibly later, e.g. the synchronous commit fires at its timestamp).
void handle_on_device(ManagedDevice& dev, const TxnMessage& m, sim::Kernel& kernel,
                      const std::function<void(TxnMessage)>& reply);

// ---- coordinator -----------------------------------------------------------------------

struct TxnLogRow {
  std::uint64_t txn = 0;
  Phase phase = Phase::Idle;
  std::string device;
  SimTime t = 0;
  std::string detail;
};

class TxnLog {
 public:
  static constexpr const char* kHeader = "txn_id,phase,device,t_us,detail";
  void add(TxnLogRow r) { rows_.push_back(std::move(r)); }
  const std::vector<TxnLogRow>& rows() const { return rows_; }
  void write_csv(std::ostream& out) const;

 private:
  std::vector<TxnLogRow> rows_;
};

struct Outcome {
  std::uint64_t txn = 0;
  std::string label;
  bool committed = false;
  std::optional<std::string> failed_device;
  std::string detail;
  SimTime first_commit = 0;
  SimTime last_commit = 0;
  SimTime finished = 0;
  std::vector<std::string> lock_sequence;
};

class TxnTransport {
 public:
  virtual ~TxnTransport() = default;
  virtual void send(const std::string& device, TxnMessage m) = 0;
  // Worst round trip to any device, used to place synchronous commits.
  virtual SimTime max_round_trip() const = 0;
};

struct CoordinatorParams {
  SimTime period = kNsPerMs;
  // Ordered commits start at this phase of the period; unset starts right away.
  std::optional<SimTime> ordered_commit_phase;
};

// Controller-resident state machine. Transactions run one at a time in
// submission order.
class Coordinator {
 public:
  using Done = std::function<void(const Outcome&)>;

  Coordinator(sim::Kernel& kernel, TxnTransport& transport, CoordinatorParams params = {});

  void submit(Transaction t, Done done = {});
  void on_reply(const std::string& device, const TxnMessage& m);

  bool busy() const { return active_.has_value(); }
  const TxnLog& log() const { return log_; }
  const std::vector<Outcome>& outcomes() const { return outcomes_; }

  std::function<void(const Transaction&, const std::string& device, SimTime t)> on_device_commit;

  // Earliest period boundary >= not_before, moved past any busy phase span
  // containing the boundary.
  static SimTime pick_commit_time(SimTime not_before, SimTime period,
                                  const std::vector<std::pair<SimTime, SimTime>>& busy);

 private:
  struct Active {
    Transaction txn;
    Done done;
    Outcome outcome;
    std::size_t cursor = 0;
    std::size_t pending = 0;
    bool rolling_back = false;
    SimTime commit_time = 0;
  };

  void start_next();
  void send(const std::string& device, TxnMessage m);
  void note(const std::string& device, const std::string& detail);
  void begin_commit();
  void begin_ordered_commit();
  void begin_unlock();
  void rollback(const std::string& device, const std::string& why);
  void finish();

  sim::Kernel& kernel_;
  TxnTransport& transport_;
  CoordinatorParams params_;
  std::deque<std::pair<Transaction, Done>> queue_;
  std::optional<Active> active_;
  TxnLog log_;
  std::vector<Outcome> outcomes_;
};

// Transport with a fixed one-way latency straight into ManagedDevice objects.
class DirectTransport : public TxnTransport {
 public:
  DirectTransport(sim::Kernel& kernel, SimTime one_way) : kernel_(kernel), one_way_(one_way) {}
  void attach(Coordinator& c) { coordinator_ = &c; }
  void add_device(ManagedDevice& d) { devices_[d.id()] = &d; }
  void send(const std::string& device, TxnMessage m) override;
  SimTime max_round_trip() const override { return 2 * one_way_; }

 private:
  sim::Kernel& kernel_;
  SimTime one_way_;
  Coordinator* coordinator_ = nullptr;
  std::map<std::string, ManagedDevice*> devices_;
};

}  // namespace tssdn::txn
