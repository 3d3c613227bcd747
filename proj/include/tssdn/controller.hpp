#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tssdn/dataplane.hpp"
#include "tssdn/netmodel.hpp"

namespace tssdn::ctl {

// ---- ACL -----------------------------------------------------------------------------

enum class Verdict { Allow, Deny };

struct AclEntry {
  Verdict verdict = Verdict::Deny;
  net::HeaderPattern pattern;
  std::optional<std::string> in_node;  // neighbour the frame entered the network from
};

class AclPolicy {
 public:
  AclPolicy() = default;
  AclPolicy(std::vector<AclEntry> entries, Verdict fallback) : entries_(std::move(entries)), default_(fallback) {}

  // Lines "allow|deny,<field>=<value>[;...]"; "in_node=<id>" binds the entry
  // to an ingress neighbour; footer "default=allow|deny". '#' starts a comment.
  static AclPolicy parse(std::istream& in);
  static AclPolicy load(const std::string& path);
  static AclPolicy allow_all() { return AclPolicy({}, Verdict::Allow); }

  Verdict decide(const net::HeaderTuple& h, const std::string& in_node) const;

  const std::vector<AclEntry>& entries() const { return entries_; }
  Verdict fallback() const { return default_; }

 private:
  std::vector<AclEntry> entries_;
  Verdict default_ = Verdict::Deny;
};

// ---- global view & reservations ---------------------------------------------------------

struct HostLocation {
  std::string sw;
  int port = 0;
};

struct GlobalView {
  net::Topology topo;
  std::map<net::MacAddr, std::string> host_by_mac;
  std::map<net::Ipv4Addr, std::string> host_by_ip;
  std::map<std::string, HostLocation> location;  // host -> attachment switch port
  std::map<std::string, std::vector<dp::FlowRule>> rules;  // dynamic rules sent per switch
  std::map<std::string, std::map<int, dp::GateControlList>> gcls;
  std::map<std::string, dp::SrTable> sr;

  static GlobalView from_topology(const net::Topology& topo);

  // Data ports of a switch (controller links excluded).
  std::vector<int> data_ports(const std::string& sw) const;
  std::map<int, std::int64_t> port_rates(const std::string& sw) const;
  void record_rule(const std::string& sw, const dp::FlowRule& r);
};

enum class StreamStatus { Advertised, Ready, Active };

struct StreamRecord {
  std::string id;
  std::string talker;
  std::set<std::string> listeners;
  std::int64_t bandwidth_bps = 0;
  net::HeaderTuple headers;
  std::vector<net::PortRef> path;  // reserved switch egress ports
  StreamStatus status = StreamStatus::Advertised;
};

struct ReservationState {
  std::map<std::string, StreamRecord> streams;
};

// SRP payloads travel in Frame::app.
struct SrpMessage {
  enum class Kind { TalkerAdvertise, ListenerReady } kind = Kind::TalkerAdvertise;
  std::string stream_id;
  std::int64_t bandwidth_bps = 0;
  net::MacAddr stream_dst;
  int pcp = 4;

  std::string encode() const;
  static std::optional<SrpMessage> decode(const std::string& app);
};

inline constexpr net::MacAddr kSrpGroupMac{0x0180C200000EULL};

net::Frame make_srp_frame(const net::Node& from, const SrpMessage& m, int wire_bytes = 128);

// ---- packet-in decisions -----------------------------------------------------------------

struct PacketInDecision {
  enum class Kind { Install, Relay, Drop } kind = Kind::Drop;
  std::vector<std::pair<std::string, dp::FlowRule>> rules;  // per switch, destination side first
  std::vector<int> out_ports;  // re-injection ports at the packet-in switch
  std::string reason;
};

// ACL check, then a shortest path to the destination host and one exact-match
// rule (ingress port bound) per switch hop. Broadcast ARP requests are relayed
// hop by hop towards the addressed host without installing rules.
PacketInDecision decide_packet_in(const GlobalView& view, const AclPolicy& acl, const std::string& sw, int in_port,
                                  const net::Frame& frame);

enum class ReservationResult { Reserved, AlreadyJoined, UnknownStream, InsufficientBandwidth, NoPath };
const char* reservation_name(ReservationResult r);

struct SrPlanStep {
  std::string sw;
  dp::SrTableEntry entry;
  dp::FlowRule rule;
};

// Admission and per-hop configuration for a listener joining a stream. Only
// ports not yet reserved for the stream need new bandwidth.
ReservationResult plan_reservation(const GlobalView& view, const StreamRecord& stream, const std::string& listener,
                                   std::vector<SrPlanStep>& steps);

// ---- controller ------------------------------------------------------------------------

class ControlIo {
 public:
  virtual ~ControlIo() = default;
  virtual void flow_mod(const std::string& sw, const dp::FlowRule& rule) = 0;
  virtual void sr_mod(const std::string& sw, const dp::SrTableEntry& entry) = 0;
  virtual void packet_out(const std::string& sw, const net::Frame& frame, const std::vector<int>& ports) = 0;
};

struct ControllerStats {
  std::uint64_t packet_ins = 0;
  std::uint64_t denied = 0;
  std::uint64_t dropped = 0;
  std::uint64_t installs = 0;
  std::uint64_t relays = 0;
  std::uint64_t srp_messages = 0;
};

class Controller {
 public:
  Controller(GlobalView view, AclPolicy acl, ControlIo& io);

  void on_packet_in(const std::string& sw, int in_port, const net::Frame& frame);

  void handle_talker_advertise(const std::string& sw, int in_port, const net::Frame& frame, const SrpMessage& m);
  ReservationResult handle_listener_ready(const std::string& listener, const std::string& stream_id);

  const GlobalView& view() const { return view_; }
  const ReservationState& reservations() const { return res_; }
  const ControllerStats& stats() const { return stats_; }
  const std::vector<std::string>& log() const { return log_; }
  // Packet-in count per (headers) flow, for the bypass invariant.
  const std::map<net::HeaderTuple, std::uint64_t>& packet_ins_by_flow() const { return per_flow_; }

 private:
  void on_listener_ready_frame(const std::string& sw, int in_port, const net::Frame& frame, const SrpMessage& m);

  GlobalView view_;
  AclPolicy acl_;
  ControlIo& io_;
  ReservationState res_;
  ControllerStats stats_;
  std::vector<std::string> log_;
  std::map<net::HeaderTuple, std::uint64_t> per_flow_;
};

}  // namespace tssdn::ctl
