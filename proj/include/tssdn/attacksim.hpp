#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "tssdn/controller.hpp"
#include "tssdn/netmodel.hpp"
#include "tssdn/network.hpp"
#include "tssdn/secsep.hpp"

namespace tssdn::atk {

enum class AccessControl { Off, On };
enum class AttackKind { HostScan, PortScan, SynFlood, Replay };

const char* kind_name(AttackKind k);
const char* policy_name(netsim::MulticastPolicy p);

// Attack environment: backbone, attacker, services of the target host.
struct Fixture {
  net::Topology topo;
  std::string attacker;
  std::string target;
  std::vector<std::string> zones;  // zone controller hosts, named as in the matrix
  std::vector<net::Ipv4Addr> scan_candidates;
  std::vector<std::uint16_t> probe_ports;
  std::set<std::uint16_t> tcp_listen;
  std::set<std::uint16_t> udp_listen;
  ctl::AclPolicy acl;

  // JSON: switches, hosts {id: switch}, attacker, target, zones, tcp_listen,
  // udp_listen, probe_ports, extra_candidates, acl (path relative to the file).
  static Fixture from_json(const std::string& text, const std::string& base_dir = ".");
  static Fixture load(const std::string& path);
};

struct ForgedProbe {
  net::Ipv4Addr src_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = net::ipproto::kTcp;
};

struct AttackOptions {
  AccessControl access = AccessControl::Off;
  netsim::MulticastPolicy policy = netsim::MulticastPolicy::Drop;
  std::optional<ctl::AclPolicy> acl;  // overrides the fixture ACL
  SimTime spacing = 100 * kNsPerUs;   // between attacker frames
  int syn_count = 1000;
  std::optional<ForgedProbe> forged;  // port scan: replaces the probe set
};

struct AttackReport {
  AttackKind kind = AttackKind::HostScan;
  AccessControl access = AccessControl::Off;
  netsim::MulticastPolicy policy = netsim::MulticastPolicy::Drop;
  std::uint64_t sent = 0;
  std::set<std::string> hosts_discovered;
  std::set<std::uint16_t> tcp_open;
  std::set<std::uint16_t> udp_open;
  std::map<std::string, std::uint64_t> delivered;  // attack frames reaching each host
  std::uint64_t to_controller = 0;                 // attack frames sent to the controller
};

// ---- replay traces ------------------------------------------------------------------------

struct TraceRow {
  std::int64_t rel_t_us = 0;
  net::HeaderTuple headers;
  int wire_bytes = net::kMinFrameBytes;
};

inline constexpr const char* kTraceHeader =
    "rel_t_us,dst_mac,src_mac,ethertype,vlan,pcp,src_ip,dst_ip,src_port,dst_port,wire_bytes";

// Throws Parse with the row number on malformed records.
std::vector<TraceRow> parse_trace(std::istream& in);
std::vector<TraceRow> load_trace(const std::string& path);
void write_trace(std::ostream& out, const std::vector<TraceRow>& rows);

// Frames sent by `zc` over `duration_us`: one frame per message, at multiples of the CF period.
std::vector<TraceRow> generate_trace(const net::CommunicationMatrix& m, const sep::Embedder& e, const std::string& zc,
                                     std::int64_t duration_us);

// ---- attacks ------------------------------------------------------------------------------

AttackReport run_host_scan(const Fixture& fx, const AttackOptions& o);
AttackReport run_port_scan(const Fixture& fx, const AttackOptions& o);
AttackReport run_syn_flood(const Fixture& fx, const AttackOptions& o);
// The matrix and embedding define the backbone configuration: group
// registrations with access control off, ingress-bound NF rules with it on.
AttackReport run_replay(const Fixture& fx, const AttackOptions& o, const std::vector<TraceRow>& trace,
                        const net::CommunicationMatrix& m, const sep::Embedder& e);

// Zone addressing taken from the fixture topology nodes.
sep::AddressOf topology_addressing(const net::Topology& topo);

void write_report_csv(std::ostream& out, const std::vector<AttackReport>& reports);

}  // namespace tssdn::atk
