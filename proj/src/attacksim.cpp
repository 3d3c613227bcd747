#include "tssdn/attacksim.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "tssdn/error.hpp"
#include "tssdn/util.hpp"

namespace tssdn::atk {

using json = nlohmann::json;

const char* kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::HostScan: return "host_scan";
    case AttackKind::PortScan: return "port_scan";
    case AttackKind::SynFlood: return "syn_flood";
    case AttackKind::Replay: return "replay";
  }
  return "?";
}

const char* policy_name(netsim::MulticastPolicy p) {
  return p == netsim::MulticastPolicy::Drop ? "drop_unknown" : "broadcast_unknown";
}

// ---- fixture ------------------------------------------------------------------------------

Fixture Fixture::from_json(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::Parse, std::string("attack fixture: ") + e.what());
  }
  Fixture fx;
  try {
    for (const auto& sw : j.at("switches")) fx.topo.add_node(sw.get<std::string>(), net::NodeKind::Switch);
    const auto& sws = j.at("switches");
    for (std::size_t i = 1; i < sws.size(); ++i) fx.topo.add_link(sws[i - 1], sws[i]);
    if (j.contains("controller")) {
      const auto c = j.at("controller").get<std::string>();
      fx.topo.add_node(c, net::NodeKind::Controller);
      for (const auto& sw : sws) fx.topo.add_link(c, sw.get<std::string>());
    }
    for (const auto& h : j.at("hosts")) {
      const auto id = h.at("id").get<std::string>();
      fx.topo.add_node(id, net::NodeKind::Host);
      fx.topo.add_link(id, h.at("switch").get<std::string>());
    }
    fx.topo.validate();
    fx.attacker = j.at("attacker").get<std::string>();
    fx.target = j.at("target").get<std::string>();
    for (const auto& id : {fx.attacker, fx.target}) fx.topo.node(id);
    for (const auto& z : j.value("zones", json::array())) {
      fx.zones.push_back(z.get<std::string>());
      fx.topo.node(fx.zones.back());
    }
    for (const auto& n : fx.topo.nodes())
      if (n.kind == net::NodeKind::Host && n.id != fx.attacker) fx.scan_candidates.push_back(n.ip);
    for (const auto& ip : j.value("extra_candidates", json::array()))
      fx.scan_candidates.push_back(net::Ipv4Addr::parse(ip.get<std::string>()));
    for (const auto& p : j.at("tcp_listen")) fx.tcp_listen.insert(p.get<std::uint16_t>());
    for (const auto& p : j.at("udp_listen")) fx.udp_listen.insert(p.get<std::uint16_t>());
    for (const auto& p : j.at("probe_ports")) fx.probe_ports.push_back(p.get<std::uint16_t>());
    if (j.contains("acl")) {
      fx.acl = ctl::AclPolicy::load((std::filesystem::path(base_dir) / j.at("acl").get<std::string>()).string());
    } else {
      fx.acl = ctl::AclPolicy::allow_all();
    }
  } catch (const json::exception& e) {
    throw Error(Errc::Parse, std::string("attack fixture: ") + e.what());
  }
  return fx;
}

Fixture Fixture::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Parse, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), std::filesystem::path(path).parent_path().string());
}

sep::AddressOf topology_addressing(const net::Topology& topo) {
  return [&topo](const std::string& zc) {
    const auto& n = topo.node(zc);
    return sep::ZoneAddress{n.mac, n.ip};
  };
}

// ---- trace files --------------------------------------------------------------------------

namespace {

template <typename T>
std::optional<T> opt_num(const std::string& raw, std::size_t row, const char* what) {
  const auto s = util::trim(raw);
  if (s.empty() || s == "-") return std::nullopt;
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw Error(Errc::Parse, "trace row " + std::to_string(row) + ": bad " + what + " '" + s + "'");
  return v;
}

template <typename T>
T req_num(const std::string& raw, std::size_t row, const char* what) {
  auto v = opt_num<T>(raw, row, what);
  if (!v) throw Error(Errc::Parse, "trace row " + std::to_string(row) + ": missing " + what);
  return *v;
}

std::string opt_str(const std::optional<std::uint16_t>& v) { return v ? std::to_string(*v) : ""; }

}  // namespace

std::vector<TraceRow> parse_trace(std::istream& in) {
  std::vector<TraceRow> rows;
  std::string line;
  std::size_t row = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (util::trim(line).empty() || line[0] == '#') continue;
    if (!header) {
      if (util::trim(line) != kTraceHeader) throw Error(Errc::Parse, "trace row " + std::to_string(row) + ": bad header");
      header = true;
      continue;
    }
    const auto c = util::split(line, ',');
    if (c.size() != 11)
      throw Error(Errc::Parse, "trace row " + std::to_string(row) + ": expected 11 columns, got " +
                                   std::to_string(c.size()));
    TraceRow r;
    r.rel_t_us = req_num<std::int64_t>(c[0], row, "rel_t_us");
    if (r.rel_t_us < 0) throw Error(Errc::Parse, "trace row " + std::to_string(row) + ": negative time");
    try {
      r.headers.dst_mac = net::MacAddr::parse(util::trim(c[1]));
      r.headers.src_mac = net::MacAddr::parse(util::trim(c[2]));
      const auto et = util::trim(c[3]);
      unsigned v = 0;
      const bool hex = et.rfind("0x", 0) == 0;
      const auto [p, ec] = std::from_chars(et.data() + (hex ? 2 : 0), et.data() + et.size(), v, hex ? 16 : 10);
      if (ec != std::errc{} || p != et.data() + et.size() || v > 0xFFFF) throw Error(Errc::Parse, "bad ethertype");
      r.headers.ethertype = static_cast<std::uint16_t>(v);
      r.headers.vlan_id = opt_num<std::uint16_t>(c[4], row, "vlan");
      r.headers.pcp = req_num<std::uint8_t>(c[5], row, "pcp");
      if (const auto s = util::trim(c[6]); !s.empty()) r.headers.src_ip = net::Ipv4Addr::parse(s);
      if (const auto s = util::trim(c[7]); !s.empty()) r.headers.dst_ip = net::Ipv4Addr::parse(s);
    } catch (const Error& e) {
      throw Error(Errc::Parse, "trace row " + std::to_string(row) + ": " + e.what());
    }
    r.headers.src_port = opt_num<std::uint16_t>(c[8], row, "src_port");
    r.headers.dst_port = opt_num<std::uint16_t>(c[9], row, "dst_port");
    if (r.headers.src_port || r.headers.dst_port) r.headers.ip_proto = net::ipproto::kUdp;
    if (r.headers.dst_ip) r.headers.dscp = static_cast<std::uint8_t>(r.headers.pcp << 3);
    r.wire_bytes = req_num<int>(c[10], row, "wire_bytes");
    if (!r.headers.valid() || r.wire_bytes < net::kMinFrameBytes || r.wire_bytes > net::kMaxFrameBytes)
      throw Error(Errc::Parse, "trace row " + std::to_string(row) + ": invalid frame");
    rows.push_back(std::move(r));
  }
  if (!header) throw Error(Errc::Parse, "trace: missing header line");
  return rows;
}

std::vector<TraceRow> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Parse, "cannot open " + path);
  return parse_trace(in);
}

void write_trace(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    const auto& h = r.headers;
    char et[8];
    std::snprintf(et, sizeof et, "0x%04x", unsigned(h.ethertype));
    out << r.rel_t_us << ',' << h.dst_mac.str() << ',' << h.src_mac.str() << ',' << et << ',' << opt_str(h.vlan_id)
        << ',' << unsigned(h.pcp) << ',' << (h.src_ip ? h.src_ip->str() : "") << ','
        << (h.dst_ip ? h.dst_ip->str() : "") << ',' << opt_str(h.src_port) << ',' << opt_str(h.dst_port) << ','
        << r.wire_bytes << '\n';
  }
}

std::vector<TraceRow> generate_trace(const net::CommunicationMatrix& m, const sep::Embedder& e, const std::string& zc,
                                     std::int64_t duration_us) {
  std::vector<std::pair<std::uint32_t, TraceRow>> tagged;
  for (const auto& cf : net::backbone_flows(m)) {
    if (cf.sender_zc != zc) continue;
    TraceRow r;
    r.headers = e.embed(cf);
    r.wire_bytes = sep::frame_bytes(e.layout(), e.strategy(), {cf.payload_bytes});
    for (std::int64_t t = 0; t < duration_us; t += cf.period_us) {
      r.rel_t_us = t;
      tagged.emplace_back(cf.cf_id, r);
    }
  }
  std::stable_sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) {
    return std::tie(a.second.rel_t_us, a.first) < std::tie(b.second.rel_t_us, b.first);
  });
  std::vector<TraceRow> rows;
  rows.reserve(tagged.size());
  for (auto& [id, r] : tagged) rows.push_back(std::move(r));
  return rows;
}

// ---- attack runs --------------------------------------------------------------------------

namespace {

constexpr SimTime kStart = kNsPerMs;
constexpr SimTime kDrain = 50 * kNsPerMs;
constexpr const char* kAttackFlow = "attack";

// One attack run: network in the mode the access control implies, plus the
// host stacks answering ARP, TCP and UDP probes.
struct Harness {
  const Fixture& fx;
  const AttackOptions& o;
  sim::Kernel kernel;
  std::unique_ptr<netsim::Network> net;
  AttackReport report;

  Harness(const Fixture& f, const AttackOptions& opts, AttackKind kind) : fx(f), o(opts) {
    netsim::NetworkParams p;
    p.mode = o.access == AccessControl::On ? netsim::Mode::Sdn : netsim::Mode::Bridge;
    p.unknown_multicast = o.policy;
    p.trace = false;
    net = std::make_unique<netsim::Network>(kernel, fx.topo, p);
    report.kind = kind;
    report.access = o.access;
    report.policy = o.policy;
    net->on_receive = [this](const std::string& host, const net::Frame& f, SimTime) { receive(host, f); };
  }

  void start() {
    net->boot();
    if (o.access == AccessControl::On) net->attach_controller(o.acl.value_or(fx.acl));
  }

  void finish(SimTime last_send) {
    kernel.run_until(last_send + kDrain);
    if (auto* c = net->controller()) report.to_controller = c->stats().packet_ins;
  }

  net::Frame frame_from(const std::string& host) const {
    const auto& n = fx.topo.node(host);
    net::Frame f;
    f.headers.src_mac = n.mac;
    f.headers.src_ip = n.ip;
    f.flow = kAttackFlow;
    return f;
  }

  void send_at(SimTime t, const std::string& host, net::Frame f) {
    ++report.sent;
    kernel.schedule_at(t, sim::EventKind::TimerFire, [this, host, f] { net->host_send(host, f); });
  }

  void reply(const std::string& host, const net::Frame& to, std::string app) {
    auto f = frame_from(host);
    f.flow = "reply";
    f.headers.dst_mac = to.headers.src_mac;
    f.headers.ethertype = to.headers.ethertype;
    f.app = std::move(app);
    if (to.headers.ethertype == net::ethertype::kIpv4) {
      f.headers.src_ip = to.headers.dst_ip;
      f.headers.dst_ip = to.headers.src_ip;
      f.headers.ip_proto = to.headers.ip_proto;
      f.headers.src_port = to.headers.dst_port;
      f.headers.dst_port = to.headers.src_port;
    } else {
      f.headers.src_ip.reset();
    }
    net->host_send(host, f);
  }

  void receive(const std::string& host, const net::Frame& f) {
    if (f.flow == kAttackFlow) ++report.delivered[host];
    const auto& me = fx.topo.node(host);
    const auto& h = f.headers;
    if (host == fx.attacker) {
      if (h.dst_mac != me.mac) return;
      if (f.app.rfind("arp-rep:", 0) == 0) {
        const auto ip = net::Ipv4Addr::parse(f.app.substr(8));
        for (const auto& n : fx.topo.nodes())
          if (n.ip == ip && n.kind == net::NodeKind::Host) report.hosts_discovered.insert(n.id);
      } else if (f.app == "syn-ack" && h.src_port) {
        report.tcp_open.insert(*h.src_port);
      } else if (f.app == "udp-rep" && h.src_port) {
        report.udp_open.insert(*h.src_port);
      }
      return;
    }
    if (h.ethertype == net::ethertype::kArp && h.dst_mac.is_broadcast() && f.app == "arp-req:" + me.ip.str()) {
      reply(host, f, "arp-rep:" + me.ip.str());
      return;
    }
    if (h.dst_mac != me.mac || !h.dst_ip || *h.dst_ip != me.ip || !h.dst_port) return;
    const bool serves = host == fx.target;
    if (f.app == "syn") {
      reply(host, f, serves && fx.tcp_listen.count(*h.dst_port) ? "syn-ack" : "rst");
    } else if (f.app == "udp-probe" && serves && fx.udp_listen.count(*h.dst_port)) {
      reply(host, f, "udp-rep");
    }
  }

  net::Frame probe(std::uint8_t proto, std::uint16_t src_port, std::uint16_t dst_port) const {
    const auto& tgt = fx.topo.node(fx.target);
    auto f = frame_from(fx.attacker);
    f.headers.dst_mac = tgt.mac;
    f.headers.dst_ip = tgt.ip;
    f.headers.ip_proto = proto;
    f.headers.src_port = src_port;
    f.headers.dst_port = dst_port;
    f.app = proto == net::ipproto::kTcp ? "syn" : "udp-probe";
    return f;
  }
};

}  // namespace

AttackReport run_host_scan(const Fixture& fx, const AttackOptions& o) {
  Harness h(fx, o, AttackKind::HostScan);
  h.start();
  SimTime t = kStart;
  for (const auto& ip : fx.scan_candidates) {
    auto f = h.frame_from(fx.attacker);
    f.headers.dst_mac = net::kBroadcastMac;
    f.headers.ethertype = net::ethertype::kArp;
    f.headers.src_ip.reset();
    f.app = "arp-req:" + ip.str();
    h.send_at(t, fx.attacker, f);
    t += o.spacing;
  }
  h.finish(t);
  return h.report;
}

AttackReport run_port_scan(const Fixture& fx, const AttackOptions& o) {
  Harness h(fx, o, AttackKind::PortScan);
  h.start();
  SimTime t = kStart;
  if (o.forged) {
    auto f = h.probe(o.forged->proto, o.forged->src_port, o.forged->dst_port);
    f.headers.src_ip = o.forged->src_ip;
    h.send_at(t, fx.attacker, f);
    t += o.spacing;
  } else {
    // Source ports vary per probe, as a scanner's ephemeral ports do.
    std::uint16_t sport = 50000;
    for (const auto proto : {net::ipproto::kTcp, net::ipproto::kUdp}) {
      for (const auto port : fx.probe_ports) {
        h.send_at(t, fx.attacker, h.probe(proto, sport++, port));
        t += o.spacing;
      }
    }
  }
  h.finish(t);
  return h.report;
}

AttackReport run_syn_flood(const Fixture& fx, const AttackOptions& o) {
  Harness h(fx, o, AttackKind::SynFlood);
  h.start();
  const std::uint16_t port = fx.tcp_listen.empty() ? 80 : *fx.tcp_listen.begin();
  SimTime t = kStart;
  for (int i = 0; i < o.syn_count; ++i) {
    auto f = h.probe(net::ipproto::kTcp, static_cast<std::uint16_t>(1024 + i % 60000), port);
    // Fresh spoofed source per SYN: 172.16.0.0/12.
    f.headers.src_ip = net::Ipv4Addr{(172u << 24) | (16u << 16) | static_cast<std::uint32_t>(i + 1)};
    h.send_at(t, fx.attacker, f);
    t += o.spacing;
  }
  h.finish(t);
  return h.report;
}

AttackReport run_replay(const Fixture& fx, const AttackOptions& o, const std::vector<TraceRow>& trace,
                        const net::CommunicationMatrix& m, const sep::Embedder& e) {
  Harness h(fx, o, AttackKind::Replay);
  const auto nfs = sep::derive_network_flows(m, e);
  if (o.access == AccessControl::On) {
    // One ingress-bound rule per switch on the NF's distribution tree.
    for (const auto& nf : nfs) {
      std::map<std::string, std::set<int>> out_ports;
      std::map<std::string, int> in_ports;
      for (const auto& d : nf.dest_zcs) {
        const auto path = fx.topo.shortest_path(nf.source_zc, d);
        for (std::size_t i = 1; i + 1 < path.size(); ++i) {
          out_ports[path[i]].insert(fx.topo.port_towards(path[i], path[i + 1]));
          in_ports[path[i]] = fx.topo.port_towards(path[i], path[i - 1]);
        }
      }
      for (const auto& [sw, ports] : out_ports) {
        dp::FlowRule r;
        r.match = net::HeaderPattern::exact(nf.match);
        r.in_port = in_ports.at(sw);
        r.priority = 100;
        for (int p : ports) r.actions.push_back(dp::Action::forward(p));
        r.cookie = "nf:" + nf.source_zc + ":" + std::to_string(*nf.member_cfs.begin());
        h.net->install_static(sw, r);
      }
    }
  } else {
    // Group registration: hidden embeddings join every group in use, exposed
    // ones only the CF groups a zone receives.
    std::set<net::MacAddr> groups;
    for (const auto& nf : nfs) groups.insert(nf.match.dst_mac);
    if (e.strategy() == sep::Strategy::ExposedPerMessage) {
      for (const auto& cf : net::backbone_flows(m))
        for (const auto& zc : cf.receiver_zcs())
          if (zc != cf.sender_zc) h.net->join_group(zc, e.embed(cf).dst_mac);
    } else {
      for (const auto& zc : fx.zones)
        for (const auto& g : groups) h.net->join_group(zc, g);
    }
  }
  h.start();
  SimTime last = kStart;
  for (const auto& r : trace) {
    net::Frame f;
    f.headers = r.headers;
    f.wire_bytes = r.wire_bytes;
    f.payload_bytes = std::max(0, r.wire_bytes - 18);
    f.flow = kAttackFlow;
    last = kStart + r.rel_t_us * kNsPerUs;
    h.send_at(last, fx.attacker, f);
  }
  h.finish(last);
  return h.report;
}

void write_report_csv(std::ostream& out, const std::vector<AttackReport>& reports) {
  out << "attack,access_control,multicast_policy,metric,value\n";
  for (const auto& r : reports) {
    const std::string prefix = std::string(kind_name(r.kind)) + ',' + (r.access == AccessControl::On ? "on" : "off") +
                               ',' + policy_name(r.policy) + ',';
    out << prefix << "sent," << r.sent << '\n';
    out << prefix << "hosts_discovered," << r.hosts_discovered.size() << '\n';
    out << prefix << "tcp_ports," << r.tcp_open.size() << '\n';
    out << prefix << "udp_ports," << r.udp_open.size() << '\n';
    out << prefix << "to_controller," << r.to_controller << '\n';
    for (const auto& [host, n] : r.delivered) out << prefix << "delivered:" << host << ',' << n << '\n';
  }
}

}  // namespace tssdn::atk
