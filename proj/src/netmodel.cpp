#include "tssdn/netmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>

#include "tssdn/error.hpp"
#include "tssdn/util.hpp"

namespace tssdn {

std::string format_us(SimTime ns) {
  const bool neg = ns < 0;
  const std::uint64_t a = neg ? static_cast<std::uint64_t>(-ns) : static_cast<std::uint64_t>(ns);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%llu.%03llu", neg ? "-" : "",
                static_cast<unsigned long long>(a / 1000), static_cast<unsigned long long>(a % 1000));
  return buf;
}

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::Parse: return "ParseError";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnknownZone: return "UnknownZone";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::InvalidTopology: return "InvalidTopology";
    case Errc::SchedulingInPast: return "SchedulingInPast";
    case Errc::Overlap: return "Overlap";
    case Errc::MissingSlot: return "MissingSlot";
    case Errc::Unrealizable: return "Unrealizable";
    case Errc::UnknownStream: return "UnknownStream";
    case Errc::InsufficientBandwidth: return "InsufficientBandwidth";
    case Errc::StaticMutationAttempt: return "StaticMutationAttempt";
    case Errc::NoPath: return "NoPath";
    case Errc::AggregationWithExposed: return "AggregationWithExposed";
    case Errc::ValidationFailure: return "ValidationFailure";
    case Errc::Usage: return "UsageError";
  }
  return "Error";
}

}  // namespace tssdn

namespace tssdn::net {

// ---- addresses ------------------------------------------------------------------

std::string MacAddr::str() const {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x",
                unsigned((value >> 40) & 0xFF), unsigned((value >> 32) & 0xFF),
                unsigned((value >> 24) & 0xFF), unsigned((value >> 16) & 0xFF),
                unsigned((value >> 8) & 0xFF), unsigned(value & 0xFF));
  return buf;
}

MacAddr MacAddr::parse(const std::string& s) {
  auto parts = util::split(s, ':');
  if (parts.size() != 6) throw Error(Errc::Parse, "bad MAC address '" + s + "'");
  std::uint64_t v = 0;
  for (const auto& p : parts) {
    unsigned byte = 0;
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), byte, 16);
    if (ec != std::errc() || ptr != p.data() + p.size() || byte > 0xFF || p.empty())
      throw Error(Errc::Parse, "bad MAC address '" + s + "'");
    v = (v << 8) | byte;
  }
  return MacAddr{v};
}

std::string Ipv4Addr::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (value >> 24) & 0xFF, (value >> 16) & 0xFF,
                (value >> 8) & 0xFF, value & 0xFF);
  return buf;
}

Ipv4Addr Ipv4Addr::parse(const std::string& s) {
  auto parts = util::split(s, '.');
  if (parts.size() != 4) throw Error(Errc::Parse, "bad IPv4 address '" + s + "'");
  std::uint32_t v = 0;
  for (const auto& p : parts) {
    unsigned octet = 0;
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), octet);
    if (ec != std::errc() || ptr != p.data() + p.size() || octet > 255 || p.empty())
      throw Error(Errc::Parse, "bad IPv4 address '" + s + "'");
    v = (v << 8) | octet;
  }
  return Ipv4Addr{v};
}

MacAddr multicast_mac_for(Ipv4Addr group) {
  return MacAddr{0x01005E000000ULL | (group.value & 0x7FFFFF)};
}

// ---- headers ----------------------------------------------------------------------

bool HeaderTuple::valid() const {
  if (pcp > 7) return false;
  if (vlan_id && *vlan_id > 0xFFF) return false;
  if (dscp && *dscp > 63) return false;
  const bool l3 = src_ip || dst_ip;
  if ((src_port || dst_port || ip_proto) && !l3) return false;
  return true;
}

std::string HeaderTuple::str() const { return HeaderPattern::exact(*this).str(); }

namespace {

template <typename T, typename U>
bool field_matches(const std::optional<T>& pattern, const U& value) {
  return !pattern || *pattern == value;
}

template <typename T>
bool field_matches(const std::optional<T>& pattern, const std::optional<T>& value) {
  return !pattern || (value && *pattern == *value);
}

std::uint64_t parse_uint(const std::string& field, const std::string& v) {
  std::uint64_t out = 0;
  int base = 10;
  std::string_view sv(v);
  if (sv.size() > 2 && sv[0] == '0' && (sv[1] == 'x' || sv[1] == 'X')) {
    base = 16;
    sv.remove_prefix(2);
  }
  auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), out, base);
  if (ec != std::errc() || ptr != sv.data() + sv.size() || sv.empty())
    throw Error(Errc::Parse, "bad value for " + field + ": '" + v + "'");
  return out;
}

}  // namespace

bool HeaderPattern::matches(const HeaderTuple& h) const {
  return field_matches(dst_mac, h.dst_mac) && field_matches(src_mac, h.src_mac) &&
         field_matches(ethertype, h.ethertype) && field_matches(vlan_id, h.vlan_id) &&
         field_matches(pcp, h.pcp) && field_matches(src_ip, h.src_ip) &&
         field_matches(dst_ip, h.dst_ip) && field_matches(dscp, h.dscp) &&
         field_matches(ip_proto, h.ip_proto) && field_matches(src_port, h.src_port) &&
         field_matches(dst_port, h.dst_port);
}

HeaderPattern HeaderPattern::exact(const HeaderTuple& h) {
  HeaderPattern p;
  p.dst_mac = h.dst_mac;
  p.src_mac = h.src_mac;
  p.ethertype = h.ethertype;
  p.vlan_id = h.vlan_id;
  p.pcp = h.pcp;
  p.src_ip = h.src_ip;
  p.dst_ip = h.dst_ip;
  p.dscp = h.dscp;
  p.ip_proto = h.ip_proto;
  p.src_port = h.src_port;
  p.dst_port = h.dst_port;
  return p;
}

HeaderPattern HeaderPattern::parse(const std::string& spec) {
  HeaderPattern p;
  for (const auto& raw : util::split(spec, ';')) {
    const auto item = util::trim(raw);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(Errc::Parse, "expected field=value, got '" + item + "'");
    const auto key = util::trim(item.substr(0, eq));
    const auto val = util::trim(item.substr(eq + 1));
    if (key == "dst_mac") p.dst_mac = MacAddr::parse(val);
    else if (key == "src_mac") p.src_mac = MacAddr::parse(val);
    else if (key == "ethertype") {
      if (val == "arp" || val == "ARP") p.ethertype = ethertype::kArp;
      else if (val == "ipv4" || val == "IPv4") p.ethertype = ethertype::kIpv4;
      else if (val == "srp" || val == "SRP") p.ethertype = ethertype::kSrp;
      else p.ethertype = static_cast<std::uint16_t>(parse_uint(key, val));
    } else if (key == "vlan" || key == "vlan_id") p.vlan_id = static_cast<std::uint16_t>(parse_uint(key, val));
    else if (key == "pcp") p.pcp = static_cast<std::uint8_t>(parse_uint(key, val));
    else if (key == "src_ip") p.src_ip = Ipv4Addr::parse(val);
    else if (key == "dst_ip") p.dst_ip = Ipv4Addr::parse(val);
    else if (key == "dscp") p.dscp = static_cast<std::uint8_t>(parse_uint(key, val));
    else if (key == "ip_proto") {
      if (val == "tcp") p.ip_proto = ipproto::kTcp;
      else if (val == "udp") p.ip_proto = ipproto::kUdp;
      else p.ip_proto = static_cast<std::uint8_t>(parse_uint(key, val));
    } else if (key == "src_port") p.src_port = static_cast<std::uint16_t>(parse_uint(key, val));
    else if (key == "dst_port") p.dst_port = static_cast<std::uint16_t>(parse_uint(key, val));
    else throw Error(Errc::Parse, "unknown header field '" + key + "'");
  }
  return p;
}

std::string HeaderPattern::str() const {
  std::vector<std::string> parts;
  char buf[32];
  if (dst_mac) parts.push_back("dst_mac=" + dst_mac->str());
  if (src_mac) parts.push_back("src_mac=" + src_mac->str());
  if (ethertype) {
    std::snprintf(buf, sizeof buf, "0x%04x", unsigned(*ethertype));
    parts.push_back(std::string("ethertype=") + buf);
  }
  if (vlan_id) parts.push_back("vlan=" + std::to_string(*vlan_id));
  if (pcp) parts.push_back("pcp=" + std::to_string(*pcp));
  if (src_ip) parts.push_back("src_ip=" + src_ip->str());
  if (dst_ip) parts.push_back("dst_ip=" + dst_ip->str());
  if (dscp) parts.push_back("dscp=" + std::to_string(*dscp));
  if (ip_proto) parts.push_back("ip_proto=" + std::to_string(*ip_proto));
  if (src_port) parts.push_back("src_port=" + std::to_string(*src_port));
  if (dst_port) parts.push_back("dst_port=" + std::to_string(*dst_port));
  return util::join(parts, ";");
}

SimTime transmission_time(int wire_bytes, std::int64_t bits_per_s) {
  const std::int64_t bits = static_cast<std::int64_t>(wire_bytes + kPreambleBytes) * 8;
  return (bits * kNsPerS + bits_per_s - 1) / bits_per_s;
}

int wire_bytes_for(int header_bytes, int payload_bytes) {
  return std::clamp(header_bytes + payload_bytes, kMinFrameBytes, kMaxFrameBytes);
}

// ---- topology -----------------------------------------------------------------------

const Node& Topology::add_node(const std::string& id, NodeKind kind) {
  if (index_.count(id)) throw Error(Errc::DuplicateId, "node '" + id + "'");
  const auto i = nodes_.size();
  Node n;
  n.id = id;
  n.kind = kind;
  n.mac = MacAddr{0x020000000000ULL | (i + 1)};
  n.ip = Ipv4Addr{(10u << 24) | static_cast<std::uint32_t>(i + 1)};
  nodes_.push_back(n);
  index_[id] = i;
  ports_[id];
  return nodes_.back();
}

void Topology::add_link(const std::string& a, const std::string& b, std::int64_t bandwidth_bps,
                        SimTime propagation) {
  if (!has_node(a)) throw Error(Errc::UnknownNode, a);
  if (!has_node(b)) throw Error(Errc::UnknownNode, b);
  if (bandwidth_bps <= 0) throw Error(Errc::InvalidTopology, "non-positive bandwidth on " + a + "-" + b);
  if (propagation < 0) throw Error(Errc::InvalidTopology, "negative delay on " + a + "-" + b);
  links_.push_back(Link{a, b, bandwidth_bps, propagation});
  ports_[a].push_back(links_.size() - 1);
  ports_[b].push_back(links_.size() - 1);
}

const Node& Topology::node(const std::string& id) const { return nodes_.at(index_of(id)); }

std::size_t Topology::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(Errc::UnknownNode, id);
  return it->second;
}

int Topology::port_count(const std::string& id) const {
  auto it = ports_.find(id);
  if (it == ports_.end()) throw Error(Errc::UnknownNode, id);
  return static_cast<int>(it->second.size());
}

const Link& Topology::link_at(const std::string& node, int port) const {
  auto it = ports_.find(node);
  if (it == ports_.end()) throw Error(Errc::UnknownNode, node);
  if (port < 1 || port > static_cast<int>(it->second.size()))
    throw Error(Errc::InvalidTopology, node + " has no port " + std::to_string(port));
  return links_[it->second[port - 1]];
}

PortRef Topology::peer(const std::string& node, int port) const {
  const auto& l = link_at(node, port);
  const std::string& other = l.a == node ? l.b : l.a;
  const auto& plist = ports_.at(other);
  const auto li = ports_.at(node)[port - 1];
  for (std::size_t k = 0; k < plist.size(); ++k)
    if (plist[k] == li) return PortRef{other, static_cast<int>(k + 1)};
  throw Error(Errc::InvalidTopology, "dangling link at " + node);
}

int Topology::port_towards(const std::string& node, const std::string& neighbour) const {
  const int n = port_count(node);
  for (int p = 1; p <= n; ++p)
    if (peer(node, p).node == neighbour) return p;
  throw Error(Errc::NoPath, node + " is not adjacent to " + neighbour);
}

std::vector<std::string> Topology::neighbours(const std::string& id) const {
  std::vector<std::string> out;
  const int n = port_count(id);
  for (int p = 1; p <= n; ++p) out.push_back(peer(id, p).node);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> Topology::shortest_path(const std::string& from, const std::string& to) const {
  index_of(from);
  index_of(to);
  std::map<std::string, std::string> parent;
  std::deque<std::string> q{from};
  parent[from] = from;
  while (!q.empty()) {
    auto cur = q.front();
    q.pop_front();
    if (cur == to) break;
    if (cur != from && node(cur).kind != NodeKind::Switch) continue;  // hosts do not forward
    for (const auto& nb : neighbours(cur)) {
      if (parent.count(nb)) continue;
      if (node(nb).kind == NodeKind::Controller && nb != to) continue;
      parent[nb] = cur;
      q.push_back(nb);
    }
  }
  if (!parent.count(to)) return {};
  std::vector<std::string> path{to};
  while (path.back() != from) path.push_back(parent[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

void Topology::validate() const {
  if (nodes_.empty()) throw Error(Errc::InvalidTopology, "no nodes");
  std::vector<std::string> data_nodes;
  std::string controller;
  for (const auto& n : nodes_) {
    if (n.kind == NodeKind::Controller) controller = n.id;
    else data_nodes.push_back(n.id);
    if (n.kind == NodeKind::Host && port_count(n.id) != 1)
      throw Error(Errc::InvalidTopology, "host " + n.id + " must have exactly one link");
  }
  // Connectivity over the data plane: BFS through switches.
  if (!data_nodes.empty()) {
    std::set<std::string> seen{data_nodes.front()};
    std::deque<std::string> q{data_nodes.front()};
    while (!q.empty()) {
      auto cur = q.front();
      q.pop_front();
      for (const auto& nb : neighbours(cur)) {
        if (node(nb).kind == NodeKind::Controller || seen.count(nb)) continue;
        seen.insert(nb);
        q.push_back(nb);
      }
    }
    if (seen.size() != data_nodes.size()) throw Error(Errc::InvalidTopology, "data plane not connected");
  }
  if (!controller.empty()) {
    for (const auto& n : nodes_) {
      if (n.kind != NodeKind::Switch) continue;
      auto nb = neighbours(n.id);
      if (std::find(nb.begin(), nb.end(), controller) == nb.end())
        throw Error(Errc::InvalidTopology, "controller not reachable from " + n.id);
    }
  }
}

// ---- communication matrix ----------------------------------------------------------

std::set<std::string> ControlFlow::receiver_zcs() const {
  std::set<std::string> out;
  for (const auto& r : receivers) out.insert(r.zc);
  return out;
}

bool ControlFlow::crosses_backbone() const {
  return std::any_of(receivers.begin(), receivers.end(),
                     [&](const Receiver& r) { return r.zc != sender_zc; });
}

namespace {

template <typename T>
T parse_field(const std::string& s, const char* name, std::size_t row) {
  T v{};
  const auto t = util::trim(s);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw Error(Errc::Parse, "row " + std::to_string(row) + ": bad " + name + " '" + s + "'");
  return v;
}

void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

}  // namespace

void CommunicationMatrix::add(ControlFlow cf) {
  for (const auto& f : flows_)
    if (f.cf_id == cf.cf_id) throw Error(Errc::DuplicateId, "cf_id " + std::to_string(cf.cf_id));
  if (cf.receivers.empty()) throw Error(Errc::Parse, "cf " + std::to_string(cf.cf_id) + " has no receivers");
  if (cf.priority < 0 || cf.priority > 7)
    throw Error(Errc::Parse, "cf " + std::to_string(cf.cf_id) + " priority out of range");
  auto check_zone = [&](const std::string& z) {
    if (zones_fixed_) {
      if (std::find(zones_.begin(), zones_.end(), z) == zones_.end())
        throw Error(Errc::UnknownZone, "'" + z + "' in cf " + std::to_string(cf.cf_id));
    } else {
      push_unique(zones_, z);
    }
  };
  check_zone(cf.sender_zc);
  for (const auto& r : cf.receivers) check_zone(r.zc);
  auto td = topic_domain_.find(cf.topic);
  if (td != topic_domain_.end() && td->second != cf.domain)
    throw Error(Errc::Parse, "topic '" + cf.topic + "' mapped to two domains");
  topic_domain_[cf.topic] = cf.domain;
  push_unique(domains_, cf.domain);
  push_unique(topics_, cf.topic);
  flows_.push_back(std::move(cf));
}

CommunicationMatrix CommunicationMatrix::parse(std::istream& in, std::optional<std::vector<std::string>> zones) {
  CommunicationMatrix m;
  if (zones) {
    m.zones_ = *zones;
    m.zones_fixed_ = true;
  }
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (util::trim(line).empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (util::trim(line) != kHeader) throw Error(Errc::Parse, "row " + std::to_string(row) + ": bad header");
      header_seen = true;
      continue;
    }
    auto cols = util::split(line, ',');
    if (cols.size() != 9)
      throw Error(Errc::Parse, "row " + std::to_string(row) + ": expected 9 columns, got " +
                                   std::to_string(cols.size()));
    ControlFlow cf;
    cf.cf_id = parse_field<std::uint32_t>(cols[0], "cf_id", row);
    cf.sender_ecu = util::trim(cols[1]);
    cf.sender_zc = util::trim(cols[2]);
    for (const auto& tok : util::split(cols[3], ';')) {
      const auto t = util::trim(tok);
      const auto at = t.find('@');
      if (at == std::string::npos || at == 0 || at + 1 == t.size())
        throw Error(Errc::Parse, "row " + std::to_string(row) + ": bad receiver '" + t + "'");
      cf.receivers.push_back(Receiver{t.substr(0, at), t.substr(at + 1)});
    }
    cf.domain = util::trim(cols[4]);
    cf.topic = util::trim(cols[5]);
    cf.period_us = parse_field<std::int64_t>(cols[6], "period_us", row);
    cf.payload_bytes = parse_field<int>(cols[7], "payload_bytes", row);
    cf.priority = parse_field<int>(cols[8], "priority", row);
    if (cf.sender_ecu.empty() || cf.sender_zc.empty() || cf.domain.empty() || cf.topic.empty())
      throw Error(Errc::Parse, "row " + std::to_string(row) + ": empty field");
    if (cf.period_us <= 0 || cf.payload_bytes < 0)
      throw Error(Errc::Parse, "row " + std::to_string(row) + ": non-positive period or negative payload");
    try {
      m.add(std::move(cf));
    } catch (const Error& e) {
      if (e.code() == Errc::Parse)
        throw Error(Errc::Parse, "row " + std::to_string(row) + ": " + e.what());
      throw;
    }
  }
  if (!header_seen) throw Error(Errc::Parse, "missing header line");
  return m;
}

CommunicationMatrix CommunicationMatrix::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Parse, "cannot open " + path);
  return parse(in);
}

void CommunicationMatrix::write(std::ostream& out) const {
  out << kHeader << '\n';
  for (const auto& cf : flows_) {
    std::vector<std::string> recv;
    for (const auto& r : cf.receivers) recv.push_back(r.ecu + "@" + r.zc);
    out << cf.cf_id << ',' << cf.sender_ecu << ',' << cf.sender_zc << ',' << util::join(recv, ";") << ','
        << cf.domain << ',' << cf.topic << ',' << cf.period_us << ',' << cf.payload_bytes << ','
        << cf.priority << '\n';
  }
}

const std::string& CommunicationMatrix::domain_of_topic(const std::string& topic) const {
  auto it = topic_domain_.find(topic);
  if (it == topic_domain_.end()) throw Error(Errc::Parse, "unknown topic '" + topic + "'");
  return it->second;
}

int CommunicationMatrix::domain_index(const std::string& d) const {
  auto it = std::find(domains_.begin(), domains_.end(), d);
  return it == domains_.end() ? -1 : static_cast<int>(it - domains_.begin());
}

int CommunicationMatrix::topic_index(const std::string& t) const {
  auto it = std::find(topics_.begin(), topics_.end(), t);
  return it == topics_.end() ? -1 : static_cast<int>(it - topics_.begin());
}

int CommunicationMatrix::zone_index(const std::string& z) const {
  auto it = std::find(zones_.begin(), zones_.end(), z);
  return it == zones_.end() ? -1 : static_cast<int>(it - zones_.begin());
}

std::vector<ControlFlow> backbone_flows(const CommunicationMatrix& m) {
  std::vector<ControlFlow> out;
  for (const auto& cf : m.flows())
    if (cf.crosses_backbone()) out.push_back(cf);
  std::stable_sort(out.begin(), out.end(),
                   [](const ControlFlow& a, const ControlFlow& b) { return a.cf_id < b.cf_id; });
  return out;
}

}  // namespace tssdn::net
