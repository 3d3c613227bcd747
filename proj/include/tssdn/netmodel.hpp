#pragma once

#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "tssdn/time.hpp"

namespace tssdn::net {

struct MacAddr {
  std::uint64_t value = 0;  // low 48 bits

  auto operator<=>(const MacAddr&) const = default;
  bool is_multicast() const { return (value >> 40) & 0x01; }
  bool is_broadcast() const { return value == 0xFFFFFFFFFFFFULL; }
  std::string str() const;
  static MacAddr parse(const std::string& s);
};

inline constexpr MacAddr kBroadcastMac{0xFFFFFFFFFFFFULL};

struct Ipv4Addr {
  std::uint32_t value = 0;

  auto operator<=>(const Ipv4Addr&) const = default;
  bool is_multicast() const { return (value >> 28) == 0xE; }
  std::string str() const;
  static Ipv4Addr parse(const std::string& s);
};

// Multicast IPv4 -> Ethernet group address (01:00:5e + low 23 bits).
MacAddr multicast_mac_for(Ipv4Addr group);

namespace ethertype {
inline constexpr std::uint16_t kIpv4 = 0x0800;
inline constexpr std::uint16_t kArp = 0x0806;
inline constexpr std::uint16_t kSrp = 0x22EA;
inline constexpr std::uint16_t kEmbeddedCan = 0x88B5;  // IEEE local experimental
inline constexpr std::uint16_t kControl = 0x88B6;
}  // namespace ethertype

namespace ipproto {
inline constexpr std::uint8_t kTcp = 6;
inline constexpr std::uint8_t kUdp = 17;
}  // namespace ipproto

// L2-L4 fields a forwarding device can match on.
struct HeaderTuple {
  MacAddr dst_mac;
  MacAddr src_mac;
  std::uint16_t ethertype = ethertype::kIpv4;
  std::optional<std::uint16_t> vlan_id;
  std::uint8_t pcp = 0;
  std::optional<Ipv4Addr> src_ip;
  std::optional<Ipv4Addr> dst_ip;
  std::optional<std::uint8_t> dscp;
  std::optional<std::uint8_t> ip_proto;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;

  auto operator<=>(const HeaderTuple&) const = default;

  // pcp in [0,7], vlan 12 bit, dscp 6 bit, L4 only with L3.
  bool valid() const;
  std::string str() const;
};

// Per-field wildcard pattern over HeaderTuple. An unset field matches anything.
// For optional header fields a set pattern value only matches frames that
// carry the field with that value.
struct HeaderPattern {
  std::optional<MacAddr> dst_mac;
  std::optional<MacAddr> src_mac;
  std::optional<std::uint16_t> ethertype;
  std::optional<std::uint16_t> vlan_id;
  std::optional<std::uint8_t> pcp;
  std::optional<Ipv4Addr> src_ip;
  std::optional<Ipv4Addr> dst_ip;
  std::optional<std::uint8_t> dscp;
  std::optional<std::uint8_t> ip_proto;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;

  auto operator<=>(const HeaderPattern&) const = default;

  bool matches(const HeaderTuple& h) const;
  static HeaderPattern exact(const HeaderTuple& h);
  // Parses "field=value;field=value" (the ACL syntax).
  static HeaderPattern parse(const std::string& spec);
  std::string str() const;
};

inline constexpr int kPreambleBytes = 8;
inline constexpr int kMinFrameBytes = 64;
inline constexpr int kMaxFrameBytes = 1522;

struct Frame {
  std::uint64_t frame_id = 0;
  HeaderTuple headers;
  int payload_bytes = 0;
  int wire_bytes = kMinFrameBytes;  // headers + payload + FCS, no preamble
  std::optional<std::uint32_t> cf_id;
  std::string flow;  // scenario flow label ("S1", "be:S2", ...)
  SimTime created = 0;
  // Opaque application payload for protocol messages (SRP, control, probes).
  std::string app;
};

// (wire_bytes + preamble) * 8 / bandwidth, in ns, rounded up.
SimTime transmission_time(int wire_bytes, std::int64_t bits_per_s);

// Clamps a payload into an Ethernet wire size given the header overhead.
int wire_bytes_for(int header_bytes, int payload_bytes);

// ---- Topology ---------------------------------------------------------------

enum class NodeKind { Host, Switch, Controller };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Host;
  MacAddr mac;
  Ipv4Addr ip;
};

struct Link {
  std::string a;
  std::string b;
  std::int64_t bandwidth_bps = 100'000'000;
  SimTime propagation = 0;
};

struct PortRef {
  std::string node;
  int port = 0;
  auto operator<=>(const PortRef&) const = default;
};

class Topology {
 public:
  // MAC/IP are assigned deterministically from the insertion index.
  const Node& add_node(const std::string& id, NodeKind kind);
  void add_link(const std::string& a, const std::string& b,
                std::int64_t bandwidth_bps = 100'000'000, SimTime propagation = 0);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const Node& node(const std::string& id) const;
  bool has_node(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t index_of(const std::string& id) const;

  // Ports are numbered per node in link insertion order, starting at 1.
  int port_count(const std::string& id) const;
  PortRef peer(const std::string& node, int port) const;
  const Link& link_at(const std::string& node, int port) const;
  int port_towards(const std::string& node, const std::string& neighbour) const;
  std::vector<std::string> neighbours(const std::string& id) const;

  // Shortest hop path between two nodes, ties broken by lowest node id.
  // Controller nodes are never used as transit. Empty when unreachable.
  std::vector<std::string> shortest_path(const std::string& from, const std::string& to) const;

  // Connected (ignoring controller links), every host single-homed, controller
  // adjacent to every switch when present, bandwidth positive.
  void validate() const;

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::map<std::string, std::size_t> index_;
  // node -> list of (link index) in port order
  std::map<std::string, std::vector<std::size_t>> ports_;
};

// ---- Communication matrix -----------------------------------------------------

struct Receiver {
  std::string ecu;
  std::string zc;
  auto operator<=>(const Receiver&) const = default;
};

struct ControlFlow {
  std::uint32_t cf_id = 0;
  std::string sender_ecu;
  std::string sender_zc;
  std::vector<Receiver> receivers;
  std::string domain;
  std::string topic;
  std::int64_t period_us = 0;
  int payload_bytes = 0;
  int priority = 0;

  bool operator==(const ControlFlow&) const = default;

  std::set<std::string> receiver_zcs() const;
  // True when at least one receiver sits behind a zone other than the sender's.
  bool crosses_backbone() const;
};

class CommunicationMatrix {
 public:
  static constexpr const char* kHeader =
      "cf_id,sender_ecu,sender_zc,receivers,domain,topic,period_us,payload_bytes,priority";

  // Zones are the sender and receiver zones in order of first appearance unless
  // declared explicitly; when declared, any other zone is an error.
  static CommunicationMatrix parse(std::istream& in, std::optional<std::vector<std::string>> zones = {});
  static CommunicationMatrix load(const std::string& path);
  void write(std::ostream& out) const;

  const std::vector<ControlFlow>& flows() const { return flows_; }
  const std::vector<std::string>& zones() const { return zones_; }
  const std::vector<std::string>& domains() const { return domains_; }
  const std::vector<std::string>& topics() const { return topics_; }
  const std::string& domain_of_topic(const std::string& topic) const;

  int domain_index(const std::string& domain) const;
  int topic_index(const std::string& topic) const;
  int zone_index(const std::string& zc) const;

  void add(ControlFlow cf);

  bool operator==(const CommunicationMatrix&) const = default;

 private:
  std::vector<ControlFlow> flows_;
  std::vector<std::string> zones_;
  std::vector<std::string> domains_;
  std::vector<std::string> topics_;
  std::map<std::string, std::string> topic_domain_;
  bool zones_fixed_ = false;
};

// Flows with a receiver outside the sender's zone, sorted by cf_id.
std::vector<ControlFlow> backbone_flows(const CommunicationMatrix& m);

}  // namespace tssdn::net
