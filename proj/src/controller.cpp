#include "tssdn/controller.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "tssdn/error.hpp"
#include "tssdn/util.hpp"

namespace tssdn::ctl {

// ---- ACL ---------------------------------------------------------------------------------

AclPolicy AclPolicy::parse(std::istream& in) {
  std::vector<AclEntry> entries;
  std::optional<Verdict> fallback;
  std::string line;
  int lineno = 0;
  auto verdict_of = [&](const std::string& w) {
    if (w == "allow") return Verdict::Allow;
    if (w == "deny") return Verdict::Deny;
    throw Error(Errc::Parse, "acl line " + std::to_string(lineno) + ": expected allow|deny, got '" + w + "'");
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = util::trim(line);
    if (line.empty()) continue;
    if (line.rfind("default=", 0) == 0) {
      fallback = verdict_of(util::trim(line.substr(8)));
      continue;
    }
    if (fallback) throw Error(Errc::Parse, "acl line " + std::to_string(lineno) + ": entry after default footer");
    const auto comma = line.find(',');
    AclEntry e;
    e.verdict = verdict_of(util::trim(line.substr(0, comma)));
    if (comma != std::string::npos) {
      std::vector<std::string> fields;
      for (const auto& item : util::split(line.substr(comma + 1), ';')) {
        const auto t = util::trim(item);
        if (t.rfind("in_node=", 0) == 0)
          e.in_node = util::trim(t.substr(8));
        else if (!t.empty())
          fields.push_back(t);
      }
      try {
        e.pattern = net::HeaderPattern::parse(util::join(fields, ";"));
      } catch (const Error& err) {
        throw Error(Errc::Parse, "acl line " + std::to_string(lineno) + ": " + err.what());
      }
    }
    entries.push_back(std::move(e));
  }
  if (!fallback) throw Error(Errc::Parse, "acl: missing default=allow|deny footer");
  return AclPolicy(std::move(entries), *fallback);
}

AclPolicy AclPolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Parse, "cannot open acl file " + path);
  return parse(in);
}

Verdict AclPolicy::decide(const net::HeaderTuple& h, const std::string& in_node) const {
  for (const auto& e : entries_) {
    if (e.in_node && *e.in_node != in_node) continue;
    if (e.pattern.matches(h)) return e.verdict;
  }
  return default_;
}

// ---- global view ---------------------------------------------------------------------------

GlobalView GlobalView::from_topology(const net::Topology& topo) {
  GlobalView v;
  v.topo = topo;
  for (const auto& n : topo.nodes()) {
    if (n.kind == net::NodeKind::Switch) v.sr[n.id];
    if (n.kind != net::NodeKind::Host) continue;
    v.host_by_mac[n.mac] = n.id;
    v.host_by_ip[n.ip] = n.id;
    if (topo.port_count(n.id) > 0) {
      const auto peer = topo.peer(n.id, 1);
      v.location[n.id] = HostLocation{peer.node, peer.port};
    }
  }
  return v;
}

std::vector<int> GlobalView::data_ports(const std::string& sw) const {
  std::vector<int> out;
  for (int p = 1; p <= topo.port_count(sw); ++p)
    if (topo.node(topo.peer(sw, p).node).kind != net::NodeKind::Controller) out.push_back(p);
  return out;
}

std::map<int, std::int64_t> GlobalView::port_rates(const std::string& sw) const {
  std::map<int, std::int64_t> out;
  for (int p = 1; p <= topo.port_count(sw); ++p) out[p] = topo.link_at(sw, p).bandwidth_bps;
  return out;
}

void GlobalView::record_rule(const std::string& sw, const dp::FlowRule& r) {
  auto& rs = rules[sw];
  for (auto& existing : rs) {
    if (existing.same_key(r)) {
      existing = r;
      return;
    }
  }
  rs.push_back(r);
}

// ---- SRP -----------------------------------------------------------------------------------

std::string SrpMessage::encode() const {
  char mac[24];
  std::snprintf(mac, sizeof mac, "%012llx", static_cast<unsigned long long>(stream_dst.value));
  return std::string("srp:") + (kind == Kind::TalkerAdvertise ? "ta" : "lr") + ":" + stream_id + ":" +
         std::to_string(bandwidth_bps) + ":" + mac + ":" + std::to_string(pcp);
}

std::optional<SrpMessage> SrpMessage::decode(const std::string& app) {
  const auto parts = util::split(app, ':');
  if (parts.size() != 6 || parts[0] != "srp") return std::nullopt;
  SrpMessage m;
  if (parts[1] == "ta")
    m.kind = Kind::TalkerAdvertise;
  else if (parts[1] == "lr")
    m.kind = Kind::ListenerReady;
  else
    return std::nullopt;
  try {
    m.stream_id = parts[2];
    m.bandwidth_bps = std::stoll(parts[3]);
    m.stream_dst.value = std::stoull(parts[4], nullptr, 16);
    m.pcp = std::stoi(parts[5]);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return m;
}

net::Frame make_srp_frame(const net::Node& from, const SrpMessage& m, int wire_bytes) {
  net::Frame f;
  f.headers.dst_mac = kSrpGroupMac;
  f.headers.src_mac = from.mac;
  f.headers.ethertype = net::ethertype::kSrp;
  f.headers.pcp = 0;
  f.wire_bytes = wire_bytes;
  f.payload_bytes = wire_bytes - 18;
  f.flow = "srp:" + m.stream_id;
  f.app = m.encode();
  return f;
}

// ---- packet-in ---------------------------------------------------------------------------

PacketInDecision decide_packet_in(const GlobalView& view, const AclPolicy& acl, const std::string& sw, int in_port,
                                  const net::Frame& frame) {
  PacketInDecision d;
  const auto& h = frame.headers;
  const std::string in_node = view.topo.peer(sw, in_port).node;
  if (acl.decide(h, in_node) == Verdict::Deny) {
    d.reason = "acl-deny";
    return d;
  }

  std::string dst_host;
  bool relay = false;
  if (h.dst_mac.is_broadcast()) {
    if (h.ethertype != net::ethertype::kArp || frame.app.rfind("arp-req:", 0) != 0) {
      d.reason = "broadcast";
      return d;
    }
    const auto it = view.host_by_ip.find(net::Ipv4Addr::parse(frame.app.substr(8)));
    if (it == view.host_by_ip.end()) {
      d.reason = "arp-unknown-target";
      return d;
    }
    dst_host = it->second;
    relay = true;
  } else if (h.dst_mac.is_multicast()) {
    d.reason = "multicast";
    return d;
  } else {
    const auto it = view.host_by_mac.find(h.dst_mac);
    if (it == view.host_by_mac.end()) {
      d.reason = "unknown-destination";
      return d;
    }
    dst_host = it->second;
  }

  const auto path = view.topo.shortest_path(sw, dst_host);
  if (path.size() < 2) {
    d.reason = "no-path";
    return d;
  }
  const int out = view.topo.port_towards(sw, path[1]);
  if (out == in_port) {
    d.reason = "hairpin";
    return d;
  }
  d.out_ports = {out};
  if (relay) {
    d.kind = PacketInDecision::Kind::Relay;
    return d;
  }
  d.kind = PacketInDecision::Kind::Install;
  for (std::size_t i = path.size() - 1; i-- > 0;) {
    if (view.topo.node(path[i]).kind != net::NodeKind::Switch) continue;
    dp::FlowRule r;
    r.match = net::HeaderPattern::exact(h);
    r.in_port = i == 0 ? in_port : view.topo.port_towards(path[i], path[i - 1]);
    r.priority = 10;
    r.actions = {dp::Action::forward(view.topo.port_towards(path[i], path[i + 1]))};
    r.cookie = "dyn:" + h.str();
    d.rules.emplace_back(path[i], std::move(r));
  }
  return d;
}

const char* reservation_name(ReservationResult r) {
  switch (r) {
    case ReservationResult::Reserved: return "reserved";
    case ReservationResult::AlreadyJoined: return "already-joined";
    case ReservationResult::UnknownStream: return "UnknownStream";
    case ReservationResult::InsufficientBandwidth: return "InsufficientBandwidth";
    case ReservationResult::NoPath: return "NoPath";
  }
  return "?";
}

ReservationResult plan_reservation(const GlobalView& view, const StreamRecord& stream, const std::string& listener,
                                   std::vector<SrPlanStep>& steps) {
  steps.clear();
  if (stream.listeners.count(listener)) return ReservationResult::AlreadyJoined;
  const auto path = view.topo.shortest_path(stream.talker, listener);
  if (path.size() < 2) return ReservationResult::NoPath;
  for (std::size_t i = 1; i + 1 < path.size(); ++i) {
    const auto& sw = path[i];
    const int out = view.topo.port_towards(sw, path[i + 1]);
    const int in = view.topo.port_towards(sw, path[i - 1]);
    const auto table = view.sr.find(sw);
    const dp::SrTableEntry* existing = table == view.sr.end() ? nullptr : table->second.find(stream.id);
    if (!existing || !existing->ports.count(out)) {
      const dp::SrTable empty;
      const auto& t = table == view.sr.end() ? empty : table->second;
      if (!t.admissible(view.port_rates(sw), out, stream.bandwidth_bps)) {
        steps.clear();
        return ReservationResult::InsufficientBandwidth;
      }
    }
    SrPlanStep step;
    step.sw = sw;
    if (existing) step.entry = *existing;
    step.entry.stream_id = stream.id;
    step.entry.match.dst_mac = stream.headers.dst_mac;
    step.entry.reserved_bps = stream.bandwidth_bps;
    step.entry.pcp = stream.headers.pcp;
    step.entry.ports.insert(out);
    step.rule.match.dst_mac = stream.headers.dst_mac;
    step.rule.match.pcp = stream.headers.pcp;
    step.rule.in_port = in;
    step.rule.priority = 20;
    for (int p : step.entry.ports) step.rule.actions.push_back(dp::Action::forward(p));
    step.rule.cookie = "sr:" + stream.id;
    steps.push_back(std::move(step));
  }
  return ReservationResult::Reserved;
}

// ---- controller ------------------------------------------------------------------------------

Controller::Controller(GlobalView view, AclPolicy acl, ControlIo& io)
    : view_(std::move(view)), acl_(std::move(acl)), io_(io) {}

void Controller::on_packet_in(const std::string& sw, int in_port, const net::Frame& frame) {
  ++stats_.packet_ins;
  ++per_flow_[frame.headers];
  if (frame.headers.ethertype == net::ethertype::kSrp) {
    ++stats_.srp_messages;
    const auto m = SrpMessage::decode(frame.app);
    if (!m) {
      log_.push_back("malformed SRP frame at " + sw);
      return;
    }
    if (m->kind == SrpMessage::Kind::TalkerAdvertise)
      handle_talker_advertise(sw, in_port, frame, *m);
    else
      on_listener_ready_frame(sw, in_port, frame, *m);
    return;
  }

  auto d = decide_packet_in(view_, acl_, sw, in_port, frame);
  switch (d.kind) {
    case PacketInDecision::Kind::Install:
      for (const auto& [target, rule] : d.rules) {
        io_.flow_mod(target, rule);
        view_.record_rule(target, rule);
      }
      io_.packet_out(sw, frame, d.out_ports);
      ++stats_.installs;
      break;
    case PacketInDecision::Kind::Relay:
      io_.packet_out(sw, frame, d.out_ports);
      ++stats_.relays;
      break;
    case PacketInDecision::Kind::Drop:
      if (d.reason == "acl-deny")
        ++stats_.denied;
      else
        ++stats_.dropped;
      break;
  }
}

void Controller::handle_talker_advertise(const std::string& sw, int in_port, const net::Frame& frame,
                                         const SrpMessage& m) {
  auto it = res_.streams.find(m.stream_id);
  if (it == res_.streams.end()) {
    StreamRecord s;
    s.id = m.stream_id;
    const auto talker = view_.host_by_mac.find(frame.headers.src_mac);
    s.talker = talker == view_.host_by_mac.end() ? "" : talker->second;
    s.bandwidth_bps = m.bandwidth_bps;
    s.headers.dst_mac = m.stream_dst;
    s.headers.src_mac = frame.headers.src_mac;
    s.headers.pcp = static_cast<std::uint8_t>(m.pcp);
    res_.streams.emplace(s.id, std::move(s));
    log_.push_back("advertise " + m.stream_id);
  }
  std::vector<int> ports;
  for (int p : view_.data_ports(sw))
    if (p != in_port) ports.push_back(p);
  if (!ports.empty()) io_.packet_out(sw, frame, ports);
}

ReservationResult Controller::handle_listener_ready(const std::string& listener, const std::string& stream_id) {
  const auto it = res_.streams.find(stream_id);
  if (it == res_.streams.end()) {
    log_.push_back("UnknownStream " + stream_id);
    return ReservationResult::UnknownStream;
  }
  auto& s = it->second;
  std::vector<SrPlanStep> steps;
  const auto r = plan_reservation(view_, s, listener, steps);
  if (r != ReservationResult::Reserved) {
    if (r != ReservationResult::AlreadyJoined)
      log_.push_back(std::string(reservation_name(r)) + " " + stream_id + " for " + listener);
    return r;
  }
  for (const auto& step : steps) {
    io_.sr_mod(step.sw, step.entry);
    io_.flow_mod(step.sw, step.rule);
    view_.sr[step.sw].upsert(step.entry);
    view_.record_rule(step.sw, step.rule);
    for (int p : step.entry.ports) {
      const net::PortRef ref{step.sw, p};
      if (std::find(s.path.begin(), s.path.end(), ref) == s.path.end()) s.path.push_back(ref);
    }
  }
  s.listeners.insert(listener);
  s.status = StreamStatus::Active;
  log_.push_back("reserved " + stream_id + " for " + listener);
  return r;
}

void Controller::on_listener_ready_frame(const std::string& sw, int, const net::Frame& frame, const SrpMessage& m) {
  const auto lis = view_.host_by_mac.find(frame.headers.src_mac);
  if (lis == view_.host_by_mac.end()) {
    log_.push_back("listener ready from unknown host at " + sw);
    return;
  }
  const auto r = handle_listener_ready(lis->second, m.stream_id);
  if (r != ReservationResult::Reserved && r != ReservationResult::AlreadyJoined) return;
  const auto& talker = res_.streams.at(m.stream_id).talker;
  const auto path = view_.topo.shortest_path(sw, talker);
  if (path.size() < 2) return;
  io_.packet_out(sw, frame, {view_.topo.port_towards(sw, path[1])});
}

}  // namespace tssdn::ctl
