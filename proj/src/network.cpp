#include "tssdn/network.hpp"

#include <algorithm>

#include "tssdn/error.hpp"

namespace tssdn::netsim {

using sim::EventKind;
using sim::TraceAction;

Network::Network(sim::Kernel& kernel, net::Topology topo, NetworkParams params)
    : kernel_(kernel), topo_(std::move(topo)), params_(params) {
  for (const auto& n : topo_.nodes()) {
    if (n.kind == net::NodeKind::Switch) switches_[n.id];
    for (int p = 1; p <= topo_.port_count(n.id); ++p) {
      auto& ps = ports_[net::PortRef{n.id, p}];
      ps.egress = std::make_unique<dp::EgressPort>(topo_.link_at(n.id, p).bandwidth_bps, params_.ifg);
    }
  }
}

Network::~Network() = default;

bool Network::is_switch(const std::string& id) const { return switches_.count(id) != 0; }

SimTime Network::channel_arrival(Channel& ch, SimTime latency) {
  const SimTime depart = std::max(kernel_.now(), ch.free);
  const SimTime tx = net::transmission_time(params_.ctrl_msg_bytes, params_.ctrl_bps);
  ch.free = depart + tx;
  return depart + tx + latency;
}

void Network::trace(const std::string& node, int port, TraceAction a, const net::Frame& f, std::string detail) {
  if (!params_.trace) return;
  kernel_.record(sim::TraceRecord{kernel_.now(), node, port, a, f.frame_id, f.cf_id, f.headers.pcp, f.wire_bytes,
                                  std::move(detail)});
}

// ---- boot -------------------------------------------------------------------------------

void Network::install_static(const std::string& sw, dp::FlowRule rule) {
  auto it = switches_.find(sw);
  if (it == switches_.end()) throw Error(Errc::UnknownNode, "not a switch: " + sw);
  it->second.tables.install_static(std::move(rule));
}

void Network::set_ingress_filter(const net::PortRef& port, dp::IngressFilter filter) {
  switches_.at(port.node).filters[port.port] = std::move(filter);
}

void Network::set_gcl(const net::PortRef& p, dp::GateControlList gcl) {
  port(p).set_gcl(std::move(gcl));
  kick(p, kernel_.now());
}

void Network::join_group(const std::string& host, net::MacAddr group) {
  for (auto& [id, s] : switches_) {
    const auto path = topo_.shortest_path(id, host);
    if (path.size() >= 2) s.groups[group].insert(topo_.port_towards(id, path[1]));
  }
}

void Network::boot() {
  for (auto& [id, s] : switches_) {
    if (params_.mode == Mode::Sdn) {
      dp::FlowRule srp;
      srp.match.ethertype = net::ethertype::kSrp;
      srp.priority = 1000;
      srp.actions = {dp::Action::to_controller()};
      srp.cookie = "srp";
      s.tables.install_static(srp);
      s.tables.seal();
      dp::FlowRule miss;
      miss.priority = 0;
      miss.actions = {dp::Action::to_controller()};
      miss.cookie = "table-miss";
      s.tables.install_dynamic(miss);
    } else {
      s.tables.seal();
      if (params_.prefill_fdb) {
        for (const auto& n : topo_.nodes()) {
          if (n.kind != net::NodeKind::Host) continue;
          const auto path = topo_.shortest_path(id, n.id);
          if (path.size() >= 2) s.fdb[n.mac] = topo_.port_towards(id, path[1]);
        }
      }
    }
  }
  booted_ = true;
}

// ---- control plane ------------------------------------------------------------------------

ctl::Controller& Network::attach_controller(ctl::AclPolicy acl) {
  controller_ = std::make_unique<ctl::Controller>(ctl::GlobalView::from_topology(topo_), std::move(acl), *this);
  return *controller_;
}

txn::Coordinator& Network::attach_coordinator(txn::CoordinatorParams params) {
  coordinator_ = std::make_unique<txn::Coordinator>(kernel_, *this, params);
  return *coordinator_;
}

txn::ManagedDevice& Network::device(const std::string& id) {
  auto it = devices_.find(id);
  if (it != devices_.end()) return *it->second;
  if (!topo_.has_node(id)) throw Error(Errc::UnknownNode, id);
  auto dev = std::make_unique<txn::ManagedDevice>(id);
  dev->on_commit = [this, id](const txn::DeviceConfig& cfg) {
    for (const auto& [p, gcl] : cfg.ports) set_gcl(net::PortRef{id, p}, gcl);
    if (on_device_commit) on_device_commit(id, kernel_.now());
  };
  return *devices_.emplace(id, std::move(dev)).first->second;
}

void Network::flow_mod(const std::string& sw, const dp::FlowRule& rule) {
  auto& s = switches_.at(sw);
  kernel_.schedule_at(channel_arrival(s.from_ctrl, params_.ctrl_latency), EventKind::ControlMessage,
                      [this, sw, rule] { switches_.at(sw).tables.install_dynamic(rule); });
}

void Network::sr_mod(const std::string& sw, const dp::SrTableEntry& entry) {
  auto& s = switches_.at(sw);
  kernel_.schedule_at(channel_arrival(s.from_ctrl, params_.ctrl_latency), EventKind::ControlMessage,
                      [this, sw, entry] {
                        auto& st = switches_.at(sw);
                        st.sr.upsert(entry);
                        apply_cbs(sw, st.sr);
                      });
}

void Network::packet_out(const std::string& sw, const net::Frame& frame, const std::vector<int>& ports) {
  auto& s = switches_.at(sw);
  kernel_.schedule_at(channel_arrival(s.from_ctrl, params_.ctrl_latency), EventKind::ControlMessage,
                      [this, sw, frame, ports] {
                        counters_.originated += ports.size();
                        for (int p : ports) enqueue(net::PortRef{sw, p}, frame);
                      });
}

void Network::send(const std::string& dev, txn::TxnMessage m) {
  if (!coordinator_) throw Error(Errc::Usage, "no coordinator attached");
  const SimTime at = channel_arrival(mgmt_down_[dev], params_.mgmt_latency);
  kernel_.schedule_at(at, EventKind::ControlMessage, [this, dev, m = std::move(m)] {
    txn::handle_on_device(device(dev), m, kernel_, [this, dev](txn::TxnMessage r) {
      const SimTime back = channel_arrival(mgmt_up_[dev], params_.mgmt_latency);
      kernel_.schedule_at(back, EventKind::ControlMessage,
                          [this, dev, r = std::move(r)] { coordinator_->on_reply(dev, r); });
    });
  });
}

SimTime Network::max_round_trip() const {
  return 2 * (params_.mgmt_latency + net::transmission_time(params_.ctrl_msg_bytes, params_.ctrl_bps));
}

void Network::apply_cbs(const std::string& sw, const dp::SrTable& sr) {
  std::map<std::pair<int, int>, std::int64_t> slopes;
  for (const auto& [id, e] : sr.entries())
    for (int p : e.ports) slopes[{p, e.pcp}] += e.reserved_bps;
  for (const auto& [key, bps] : slopes) port(net::PortRef{sw, key.first}).set_cbs(key.second, bps, kernel_.now());
}

// ---- hosts and egress ------------------------------------------------------------------------

std::uint64_t Network::host_send(const std::string& host, net::Frame f) {
  if (topo_.node(host).kind != net::NodeKind::Host) throw Error(Errc::UnknownNode, "not a host: " + host);
  f.frame_id = next_frame_id_++;
  f.created = kernel_.now();
  ++counters_.originated;
  enqueue(net::PortRef{host, 1}, f);
  return f.frame_id;
}

dp::EgressPort& Network::port(const net::PortRef& p) {
  auto it = ports_.find(p);
  if (it == ports_.end()) throw Error(Errc::UnknownNode, "no port " + p.node + ":" + std::to_string(p.port));
  return *it->second.egress;
}

const dp::FlowTables& Network::tables(const std::string& sw) const { return switches_.at(sw).tables; }
const dp::SrTable& Network::sr_table(const std::string& sw) const { return switches_.at(sw).sr; }

std::uint64_t Network::in_flight() const {
  std::uint64_t n = in_transit_;
  for (const auto& [ref, ps] : ports_) n += ps.egress->total_queued();
  return n;
}

void Network::enqueue(const net::PortRef& p, net::Frame f) {
  trace(p.node, p.port, TraceAction::Enqueued, f);
  port(p).enqueue(std::move(f), kernel_.now());
  kick(p, kernel_.now());
}

// One pending wake-up per port; an earlier request replaces a later one.
void Network::kick(const net::PortRef& p, SimTime at) {
  auto& ps = ports_.at(p);
  if (ps.wake) {
    if (ps.wake_at <= at) return;
    kernel_.cancel(*ps.wake);
  }
  ps.wake_at = at;
  ps.wake = kernel_.schedule_at(at, EventKind::GateChange, [this, p] {
    ports_.at(p).wake.reset();
    service(p);
  });
}

void Network::service(const net::PortRef& p) {
  auto& eg = port(p);
  const SimTime now = kernel_.now();
  if (!eg.idle(now)) {
    kick(p, eg.busy_until());
    return;
  }
  const auto q = eg.select_transmission(now);
  if (!q) {
    const SimTime w = eg.next_wakeup(now);
    if (w < dp::kNever) kick(p, w);
    return;
  }
  auto [qf, tx] = eg.start_transmission(*q, now);
  trace(p.node, p.port, TraceAction::Sent, qf.frame);
  const auto peer = topo_.peer(p.node, p.port);
  const SimTime arrival = now + tx + topo_.link_at(p.node, p.port).propagation;
  ++in_transit_;
  kernel_.schedule_at(arrival, EventKind::FrameArrival, [this, peer, f = std::move(qf.frame)]() mutable {
    --in_transit_;
    arrive(peer.node, peer.port, std::move(f));
  });
  kick(p, eg.busy_until());
}

// ---- reception ---------------------------------------------------------------------------

void Network::arrive(const std::string& node, int port, net::Frame f) {
  switch (topo_.node(node).kind) {
    case net::NodeKind::Host: deliver(node, port, f); break;
    case net::NodeKind::Switch: switch_receive(node, port, std::move(f)); break;
    case net::NodeKind::Controller: drop(node, port, f, TraceAction::DroppedNoRule, "controller-port"); break;
  }
}

void Network::deliver(const std::string& host, int port, const net::Frame& f) {
  ++counters_.delivered;
  trace(host, port, TraceAction::Received, f);
  if (on_receive) on_receive(host, f, kernel_.now());
}

void Network::drop(const std::string& node, int port, const net::Frame& f, TraceAction a, std::string why) {
  ++counters_.dropped;
  trace(node, port, a, f, std::move(why));
}

void Network::switch_receive(const std::string& sw, int port, net::Frame f) {
  auto& s = switches_.at(sw);
  if (const auto fi = s.filters.find(port); fi != s.filters.end()) {
    const auto v = dp::ingress_check(fi->second, f, kernel_.now());
    if (v != dp::IngressVerdict::Accept) {
      drop(sw, port, f, TraceAction::DroppedIngress,
           v == dp::IngressVerdict::DropOversize ? "oversize" : "missed-window");
      return;
    }
  }
  if (params_.mode == Mode::Sdn) {
    sdn_receive(s, sw, port, f);
    return;
  }
  if (params_.learning && !f.headers.src_mac.is_multicast()) s.fdb[f.headers.src_mac] = port;
  if (f.headers.ethertype == net::ethertype::kSrp && f.headers.dst_mac == ctl::kSrpGroupMac) {
    bridge_srp(sw, port, f);
    return;
  }
  std::string why;
  const auto out = bridge_ports(s, sw, port, f, why);
  if (out.empty()) {
    drop(sw, port, f, TraceAction::DroppedNoRule, why);
    return;
  }
  forward(sw, port, f, out);
}

void Network::sdn_receive(SwitchState& s, const std::string& sw, int in_port, const net::Frame& f) {
  const auto res = s.tables.lookup(f.headers, in_port);
  std::vector<int> out;
  bool punt = false;
  for (const auto& a : res.actions) {
    if (a.kind == dp::Action::Kind::Forward && a.port != in_port) out.push_back(a.port);
    if (a.kind == dp::Action::Kind::ToController) punt = true;
  }
  if (punt) {
    to_controller(sw, in_port, f);
    return;
  }
  if (out.empty()) {
    drop(sw, in_port, f, TraceAction::DroppedNoRule, res.actions.empty() ? "no-match" : "rule-drop");
    return;
  }
  forward(sw, in_port, f, out);
}

void Network::forward(const std::string& sw, int, const net::Frame& f, const std::vector<int>& ports) {
  counters_.replicated += ports.size() - 1;
  for (int p : ports) {
    ++in_transit_;
    kernel_.schedule_in(params_.t_fwd, EventKind::TimerFire, [this, sw, p, f] {
      --in_transit_;
      enqueue(net::PortRef{sw, p}, f);
    });
  }
}

void Network::to_controller(const std::string& sw, int port, const net::Frame& f) {
  ++counters_.to_controller;
  trace(sw, port, TraceAction::ToController, f);
  if (!controller_) return;
  const SimTime at = channel_arrival(switches_.at(sw).to_ctrl, params_.ctrl_latency) + params_.ctrl_processing;
  kernel_.schedule_at(at, EventKind::ControlMessage, [this, sw, port, f] { controller_->on_packet_in(sw, port, f); });
}

std::vector<int> Network::flood_ports(const std::string& sw, int in_port) const {
  std::vector<int> out;
  for (int p = 1; p <= topo_.port_count(sw); ++p) {
    if (p == in_port) continue;
    if (topo_.node(topo_.peer(sw, p).node).kind == net::NodeKind::Controller) continue;
    out.push_back(p);
  }
  return out;
}

std::vector<int> Network::bridge_ports(SwitchState& s, const std::string& sw, int in_port, const net::Frame& f,
                                       std::string& why) {
  const auto& h = f.headers;
  auto without_in = [in_port](const std::set<int>& ports) {
    std::vector<int> out;
    for (int p : ports)
      if (p != in_port) out.push_back(p);
    return out;
  };
  for (const auto& [id, e] : s.sr.entries())
    if (e.match.matches(h)) {
      why = "stream-no-port";
      return without_in(e.ports);
    }
  if (h.dst_mac.is_broadcast()) {
    why = "flood-empty";
    return flood_ports(sw, in_port);
  }
  if (h.dst_mac.is_multicast()) {
    if (const auto g = s.groups.find(h.dst_mac); g != s.groups.end()) {
      why = "group-no-port";
      return without_in(g->second);
    }
    why = "unknown-multicast";
    if (params_.unknown_multicast == MulticastPolicy::Broadcast) return flood_ports(sw, in_port);
    return {};
  }
  if (const auto e = s.fdb.find(h.dst_mac); e != s.fdb.end()) {
    why = "same-port";
    if (e->second == in_port) return {};
    return {e->second};
  }
  why = "flood-empty";
  return flood_ports(sw, in_port);
}

// Local SRP agent of a bridge: talker advertisements are flooded, listener
// ready messages reserve the port they arrived on and travel to the talker.
void Network::bridge_srp(const std::string& sw, int in_port, const net::Frame& f) {
  ++counters_.delivered;
  trace(sw, in_port, TraceAction::Received, f, "srp");
  const auto m = ctl::SrpMessage::decode(f.app);
  if (!m) return;
  kernel_.schedule_in(params_.srp_processing, EventKind::TimerFire, [this, sw, in_port, f, m = *m] {
    auto& s = switches_.at(sw);
    std::vector<int> out;
    if (m.kind == ctl::SrpMessage::Kind::TalkerAdvertise) {
      s.srp[m.stream_id] = BridgeStream{m, in_port};
      out = flood_ports(sw, in_port);
    } else {
      const auto st = s.srp.find(m.stream_id);
      if (st == s.srp.end()) return;
      const auto& ad = st->second.advertise;
      const dp::SrTableEntry* existing = s.sr.find(m.stream_id);
      if (!existing || !existing->ports.count(in_port)) {
        std::map<int, std::int64_t> rates;
        for (int p = 1; p <= topo_.port_count(sw); ++p) rates[p] = topo_.link_at(sw, p).bandwidth_bps;
        if (!s.sr.admissible(rates, in_port, ad.bandwidth_bps)) return;
      }
      dp::SrTableEntry e = existing ? *existing : dp::SrTableEntry{};
      e.stream_id = m.stream_id;
      e.match.dst_mac = ad.stream_dst;
      e.match.pcp = static_cast<std::uint8_t>(ad.pcp);
      e.reserved_bps = ad.bandwidth_bps;
      e.pcp = ad.pcp;
      e.ports.insert(in_port);
      s.sr.upsert(e);
      apply_cbs(sw, s.sr);
      out = {st->second.talker_port};
    }
    counters_.originated += out.size();
    for (int p : out) enqueue(net::PortRef{sw, p}, f);
  });
}

}  // namespace tssdn::netsim
