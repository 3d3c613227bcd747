#include "tssdn/txnsched.hpp"

#include <algorithm>
#include <set>

#include "tssdn/error.hpp"

namespace tssdn::txn {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::AddSlot: return "AddSlot";
    case OpKind::RemoveSlot: return "RemoveSlot";
    case OpKind::ShiftEarlier: return "ShiftEarlier";
    case OpKind::ShiftLater: return "ShiftLater";
  }
  return "?";
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Idle: return "Idle";
    case Phase::Locked: return "Locked";
    case Phase::Configured: return "Configured";
    case Phase::Committed: return "Committed";
    case Phase::Unlocked: return "Unlocked";
  }
  return "?";
}

const char* msg_name(MsgKind k) {
  switch (k) {
    case MsgKind::Lock: return "lock";
    case MsgKind::LockOk: return "lock-ok";
    case MsgKind::LockFail: return "lock-fail";
    case MsgKind::Edit: return "edit-config";
    case MsgKind::EditOk: return "edit-ok";
    case MsgKind::EditFail: return "edit-fail";
    case MsgKind::Prepare: return "prepare";
    case MsgKind::Ready: return "ready";
    case MsgKind::Release: return "release";
    case MsgKind::Commit: return "commit";
    case MsgKind::Committed: return "committed";
    case MsgKind::Discard: return "discard";
    case MsgKind::Discarded: return "discarded";
    case MsgKind::Unlock: return "unlock";
    case MsgKind::Unlocked: return "unlocked";
  }
  return "?";
}

// ---- planning ---------------------------------------------------------------------

std::vector<std::string> commit_order(OpKind kind, const std::vector<std::string>& path) {
  std::vector<std::string> out = path;
  if (kind == OpKind::AddSlot || kind == OpKind::ShiftLater) std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::string> BasicOp::required_order() const { return commit_order(kind, path); }

std::vector<BasicOp> plan_update(const bounds::SlotPlan& current, const bounds::SlotPlan& target) {
  std::set<std::string> ids;
  for (const auto& f : current.flows) ids.insert(f.id);
  for (const auto& f : target.flows) ids.insert(f.id);

  std::vector<BasicOp> ops;
  for (const auto& id : ids) {
    const auto cw = current.windows_of(id);
    const auto tw = target.windows_of(id);
    BasicOp op;
    op.flow = id;
    if (cw.empty() && tw.empty()) continue;
    if (cw.empty()) {
      op.kind = OpKind::AddSlot;
      for (const auto& w : tw) op.edits.push_back({w.device, w.port, std::nullopt, w});
    } else if (tw.empty()) {
      op.kind = OpKind::RemoveSlot;
      for (const auto& w : cw) op.edits.push_back({w.device, w.port, w, std::nullopt});
    } else {
      std::optional<SimTime> first_delta;
      for (std::size_t h = 0; h < std::max(cw.size(), tw.size()); ++h) {
        std::optional<bounds::Window> o, n;
        if (h < cw.size()) o = cw[h];
        if (h < tw.size()) n = tw[h];
        if (o == n) continue;
        const auto& any = n ? *n : *o;
        op.edits.push_back({any.device, any.port, o, n});
        if (!first_delta && o && n) first_delta = n->start != o->start ? n->start - o->start : n->length - o->length;
      }
      if (op.edits.empty()) continue;
      op.kind = first_delta.value_or(1) > 0 ? OpKind::ShiftLater : OpKind::ShiftEarlier;
    }
    for (const auto& e : op.edits) op.path.push_back(e.device);
    ops.push_back(std::move(op));
  }

  std::set<std::string> changed;
  for (const auto& op : ops) changed.insert(op.flow);
  for (const auto& op : ops) {
    for (const auto& e : op.edits) {
      if (!e.new_window) continue;
      for (const auto& w : current.windows) {
        if (changed.count(w.flow) || w.device != e.device || w.port != e.port) continue;
        if (bounds::windows_overlap(*e.new_window, w, current.period))
          throw Error(Errc::Unrealizable, "slot of " + op.flow + " on " + e.device + " overlaps retained slot of " +
                                              w.flow);
      }
    }
  }
  return ops;
}

std::optional<std::vector<std::string>> merged_order(const std::vector<BasicOp>& ops) {
  std::vector<std::string> nodes;
  std::map<std::string, std::set<std::string>> succ;
  std::map<std::string, int> indeg;
  auto touch = [&](const std::string& n) {
    if (!indeg.count(n)) {
      indeg[n] = 0;
      nodes.push_back(n);
    }
  };
  for (const auto& op : ops) {
    const auto order = op.required_order();
    for (const auto& d : order) touch(d);
    for (std::size_t i = 0; i + 1 < order.size(); ++i)
      if (succ[order[i]].insert(order[i + 1]).second) ++indeg[order[i + 1]];
  }
  std::vector<std::string> out;
  std::set<std::string> done;
  while (out.size() < nodes.size()) {
    auto it = std::find_if(nodes.begin(), nodes.end(),
                           [&](const std::string& n) { return !done.count(n) && indeg[n] == 0; });
    if (it == nodes.end()) return std::nullopt;
    done.insert(*it);
    out.push_back(*it);
    for (const auto& s : succ[*it]) --indeg[s];
  }
  return out;
}

std::vector<OpGroup> split_transaction(const std::vector<BasicOp>& ops) {
  std::vector<OpGroup> groups;
  for (const auto& op : ops) {
    if (!groups.empty()) {
      auto trial = groups.back().ops;
      trial.push_back(op);
      if (auto order = merged_order(trial)) {
        groups.back().ops = std::move(trial);
        groups.back().sequence = std::move(*order);
        continue;
      }
    }
    groups.push_back(OpGroup{{op}, op.required_order()});
  }
  return groups;
}

bounds::SlotPlan apply_ops(const bounds::SlotPlan& current, const bounds::SlotPlan& target,
                           const std::vector<BasicOp>& ops) {
  std::set<std::string> ids;
  for (const auto& op : ops) ids.insert(op.flow);
  bounds::SlotPlan out;
  out.period = current.period;
  out.guard_band = current.guard_band;
  for (const auto& f : current.flows)
    if (!ids.count(f.id)) out.flows.push_back(f);
  for (const auto& w : current.windows)
    if (!ids.count(w.flow)) out.windows.push_back(w);
  for (const auto& f : target.flows)
    if (ids.count(f.id)) out.flows.push_back(f);
  for (const auto& w : target.windows)
    if (ids.count(w.flow)) out.windows.push_back(w);
  return out;
}

std::map<std::string, DeviceConfig> device_configs(const bounds::SlotPlan& plan, const bounds::SlotPlan& previous) {
  std::map<std::string, DeviceConfig> out;
  for (const auto& [port, g] : bounds::build_gcls(plan)) out[port.node].ports[port.port] = g;
  for (const auto& port : previous.ports()) {
    auto& cfg = out[port.node];
    if (!cfg.ports.count(port.port)) cfg.ports[port.port] = dp::GateControlList::all_open(plan.period);
  }
  return out;
}

Transaction make_transaction(std::uint64_t id, std::string label, Strategy strategy, const std::vector<BasicOp>& ops,
                             const bounds::SlotPlan& current, const bounds::SlotPlan& target,
                             std::optional<std::vector<std::string>> sequence) {
  Transaction t;
  t.id = id;
  t.label = std::move(label);
  t.strategy = strategy;
  t.ops = ops;

  std::set<std::string> devices;
  for (const auto& op : ops) devices.insert(op.path.begin(), op.path.end());
  t.devices.assign(devices.begin(), devices.end());

  const auto next = apply_ops(current, target, ops);
  const auto configs = device_configs(next, current);
  for (const auto& d : t.devices) {
    const auto it = configs.find(d);
    t.candidates[d] = it == configs.end() ? DeviceConfig{} : it->second;
    bounds::SlotPlan slice;
    slice.period = next.period;
    slice.guard_band = next.guard_band;
    for (const auto& w : next.windows)
      if (w.device == d) slice.windows.push_back(w);
    t.plan_slices[d] = std::move(slice);
  }
  for (const auto* plan : {&current, &next})
    for (const auto& w : plan->windows)
      if (devices.count(w.device)) t.busy.emplace_back(w.start, w.end());

  if (sequence) {
    t.sequence = std::move(*sequence);
  } else if (auto merged = merged_order(ops)) {
    t.sequence = std::move(*merged);
  } else {
    // Conflicting orders: first op wins, remaining devices follow in lock order.
    t.sequence = ops.front().required_order();
    for (const auto& d : t.devices)
      if (std::find(t.sequence.begin(), t.sequence.end(), d) == t.sequence.end()) t.sequence.push_back(d);
  }
  return t;
}

// ---- device side ----------------------------------------------------------------------

ManagedDevice::ManagedDevice(std::string id, DeviceConfig running) : id_(std::move(id)), running_(std::move(running)) {}

bool ManagedDevice::lock(std::uint64_t txn) {
  if (owner_ && *owner_ != txn) return false;
  owner_ = txn;
  return true;
}

bool ManagedDevice::unlock(std::uint64_t txn) {
  if (owner_ != txn) return false;
  owner_.reset();
  candidate_.reset();
  return true;
}

bounds::ValidationReport ManagedDevice::edit(std::uint64_t txn, DeviceConfig candidate, const bounds::SlotPlan& slice) {
  bounds::ValidationReport rep;
  if (owner_ != txn) {
    rep.violations.push_back({id_, 0, "device not locked by transaction " + std::to_string(txn)});
    return rep;
  }
  bounds::GclMap gcls;
  for (const auto& [port, g] : candidate.ports) gcls[{id_, port}] = g;
  rep = bounds::validate_schedule(gcls, slice);
  if (rep.ok()) candidate_ = std::move(candidate);
  return rep;
}

void ManagedDevice::discard(std::uint64_t txn) {
  if (owner_ == txn) candidate_.reset();
}

bool ManagedDevice::commit(std::uint64_t txn) {
  if (owner_ != txn || !candidate_) return false;
  running_ = std::move(*candidate_);
  candidate_.reset();
  if (on_commit) on_commit(running_);
  return true;
}

void handle_on_device(ManagedDevice& dev, const TxnMessage& m, sim::Kernel& kernel,
                      const std::function<void(TxnMessage)>& reply) {
  TxnMessage r;
  r.txn = m.txn;
  switch (m.kind) {
    case MsgKind::Lock:
      r.kind = dev.lock(m.txn) ? MsgKind::LockOk : MsgKind::LockFail;
      break;
    case MsgKind::Edit: {
      const auto rep = dev.edit(m.txn, m.candidate.value_or(DeviceConfig{}), m.slice.value_or(bounds::SlotPlan{}));
      r.kind = rep.ok() ? MsgKind::EditOk : MsgKind::EditFail;
      r.detail = rep.str();
      break;
    }
    case MsgKind::Prepare:
      r.kind = MsgKind::Ready;
      r.commit_time = m.commit_time;
      break;
    case MsgKind::Release: {
      const SimTime at = std::max(m.commit_time, kernel.now());
      const auto txn = m.txn;
      kernel.schedule_at(at, sim::EventKind::TimerFire, [&dev, &kernel, txn, at, reply] {
        dev.commit(txn);
        dev.commit_times.push_back(kernel.now());
        TxnMessage c;
        c.kind = MsgKind::Committed;
        c.txn = txn;
        c.commit_time = at;
        reply(c);
      });
      return;
    }
    case MsgKind::Commit:
      dev.commit(m.txn);
      dev.commit_times.push_back(kernel.now());
      r.kind = MsgKind::Committed;
      r.commit_time = kernel.now();
      break;
    case MsgKind::Discard:
      dev.discard(m.txn);
      r.kind = MsgKind::Discarded;
      break;
    case MsgKind::Unlock:
      dev.unlock(m.txn);
      r.kind = MsgKind::Unlocked;
      break;
    default:
      return;  // replies are never sent to devices
  }
  reply(r);
}

// ---- coordinator -----------------------------------------------------------------------

void TxnLog::write_csv(std::ostream& out) const {
  out << kHeader << '\n';
  for (const auto& r : rows_) {
    std::string detail = r.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    std::replace(detail.begin(), detail.end(), '\n', ' ');
    out << r.txn << ',' << phase_name(r.phase) << ',' << r.device << ',' << format_us(r.t) << ',' << detail << '\n';
  }
}

Coordinator::Coordinator(sim::Kernel& kernel, TxnTransport& transport, CoordinatorParams params)
    : kernel_(kernel), transport_(transport), params_(params) {}

SimTime Coordinator::pick_commit_time(SimTime not_before, SimTime period,
                                      const std::vector<std::pair<SimTime, SimTime>>& busy) {
  SimTime t = not_before + wrap(-not_before, period);
  for (std::size_t guard = 0; guard <= busy.size(); ++guard) {
    const SimTime phase = wrap(t, period);
    bool moved = false;
    for (const auto& [s, e] : busy) {
      const SimTime rel = wrap(phase - s, period);
      if (rel > 0 && rel < e - s) {
        t += e - s - rel;
        moved = true;
        break;
      }
    }
    if (!moved) return t;
  }
  return t;
}

void Coordinator::submit(Transaction t, Done done) {
  queue_.emplace_back(std::move(t), std::move(done));
  if (!active_) start_next();
}

void Coordinator::note(const std::string& device, const std::string& detail) {
  log_.add({active_->txn.id, active_->txn.phase, device, kernel_.now(), detail});
}

void Coordinator::send(const std::string& device, TxnMessage m) {
  m.txn = active_->txn.id;
  note(device, msg_name(m.kind));
  transport_.send(device, std::move(m));
}

void Coordinator::start_next() {
  if (queue_.empty()) return;
  auto [t, done] = std::move(queue_.front());
  queue_.pop_front();
  active_.emplace();
  active_->txn = std::move(t);
  active_->done = std::move(done);
  active_->outcome.txn = active_->txn.id;
  active_->outcome.label = active_->txn.label;
  active_->txn.phase = Phase::Idle;
  note("", "begin " + active_->txn.label);
  if (active_->txn.devices.empty()) {
    active_->outcome.committed = true;
    finish();
    return;
  }
  send(active_->txn.devices[0], TxnMessage::of(MsgKind::Lock));
}

void Coordinator::on_reply(const std::string& device, const TxnMessage& m) {
  if (!active_ || m.txn != active_->txn.id) return;
  auto& a = *active_;
  auto& t = a.txn;
  note(device, std::string(msg_name(m.kind)) + (m.detail.empty() ? "" : " " + m.detail));
  const std::size_t n = t.devices.size();

  switch (m.kind) {
    case MsgKind::LockOk:
      a.outcome.lock_sequence.push_back(device);
      if (++a.cursor < n) {
        send(t.devices[a.cursor], TxnMessage::of(MsgKind::Lock));
      } else {
        t.phase = Phase::Locked;
        a.cursor = 0;
        auto e = TxnMessage::of(MsgKind::Edit);
        e.candidate = t.candidates[t.devices[0]];
        e.slice = t.plan_slices[t.devices[0]];
        send(t.devices[0], std::move(e));
      }
      break;
    case MsgKind::LockFail:
      rollback(device, "lock refused");
      break;
    case MsgKind::EditOk:
      if (++a.cursor < n) {
        const auto& d = t.devices[a.cursor];
        auto e = TxnMessage::of(MsgKind::Edit);
        e.candidate = t.candidates[d];
        e.slice = t.plan_slices[d];
        send(d, std::move(e));
      } else {
        t.phase = Phase::Configured;
        begin_commit();
      }
      break;
    case MsgKind::EditFail:
      rollback(device, m.detail);
      break;
    case MsgKind::Ready:
      if (--a.pending == 0) {
        a.pending = n;
        for (const auto& d : t.devices) {
          auto r = TxnMessage::of(MsgKind::Release);
          r.commit_time = a.commit_time;
          send(d, std::move(r));
        }
      }
      break;
    case MsgKind::Committed: {
      if (a.outcome.first_commit == 0 || m.commit_time < a.outcome.first_commit) a.outcome.first_commit = m.commit_time;
      a.outcome.last_commit = std::max(a.outcome.last_commit, m.commit_time);
      if (on_device_commit) on_device_commit(t, device, m.commit_time);
      if (t.strategy == Strategy::Synchronous) {
        if (--a.pending == 0) {
          t.phase = Phase::Committed;
          begin_unlock();
        }
      } else if (++a.cursor < t.sequence.size()) {
        send(t.sequence[a.cursor], TxnMessage::of(MsgKind::Commit));
      } else {
        t.phase = Phase::Committed;
        begin_unlock();
      }
      break;
    }
    case MsgKind::Unlocked:
      if (--a.pending == 0) {
        if (a.rolling_back) {
          t.phase = Phase::Idle;
        } else {
          t.phase = Phase::Unlocked;
          a.outcome.committed = true;
        }
        finish();
      }
      break;
    default:
      break;
  }
}

void Coordinator::begin_commit() {
  auto& a = *active_;
  auto& t = a.txn;
  if (t.strategy == Strategy::Ordered) {
    begin_ordered_commit();
    return;
  }
  const SimTime earliest = std::max(kernel_.now() + 2 * transport_.max_round_trip(), t.not_before);
  a.commit_time = pick_commit_time(earliest, params_.period, t.busy);
  note("", "commit-time " + format_us(a.commit_time));
  a.pending = t.devices.size();
  for (const auto& d : t.devices) {
    auto p = TxnMessage::of(MsgKind::Prepare);
    p.commit_time = a.commit_time;
    send(d, std::move(p));
  }
}

void Coordinator::begin_ordered_commit() {
  auto& a = *active_;
  a.cursor = 0;
  SimTime at = kernel_.now();
  if (params_.ordered_commit_phase) at += wrap(*params_.ordered_commit_phase - at, params_.period);
  const auto id = a.txn.id;
  kernel_.schedule_at(at, sim::EventKind::TimerFire, [this, id] {
    if (!active_ || active_->txn.id != id) return;
    send(active_->txn.sequence[0], TxnMessage::of(MsgKind::Commit));
  });
}

void Coordinator::begin_unlock() {
  auto& a = *active_;
  a.pending = a.txn.devices.size();
  for (const auto& d : a.txn.devices) send(d, TxnMessage::of(MsgKind::Unlock));
}

void Coordinator::rollback(const std::string& device, const std::string& why) {
  auto& a = *active_;
  a.rolling_back = true;
  a.outcome.failed_device = device;
  a.outcome.detail = why;
  note(device, "rollback");
  const auto locked = a.outcome.lock_sequence;
  a.pending = locked.size();
  if (locked.empty()) {
    a.txn.phase = Phase::Idle;
    finish();
    return;
  }
  for (const auto& d : locked) {
    send(d, TxnMessage::of(MsgKind::Discard));
    send(d, TxnMessage::of(MsgKind::Unlock));
  }
}

void Coordinator::finish() {
  Active a = std::move(*active_);
  a.outcome.finished = kernel_.now();
  active_.reset();
  log_.add({a.txn.id, a.txn.phase, "", kernel_.now(), a.outcome.committed ? "done" : "rolled-back"});
  outcomes_.push_back(a.outcome);
  if (a.done) a.done(a.outcome);
  if (!active_) start_next();
}

// ---- direct transport ------------------------------------------------------------------

void DirectTransport::send(const std::string& device, TxnMessage m) {
  kernel_.schedule_in(one_way_, sim::EventKind::ControlMessage, [this, device, m] {
    handle_on_device(*devices_.at(device), m, kernel_, [this, device](TxnMessage r) {
      kernel_.schedule_in(one_way_, sim::EventKind::ControlMessage,
                          [this, device, r] { coordinator_->on_reply(device, r); });
    });
  });
}

}  // namespace tssdn::txn
