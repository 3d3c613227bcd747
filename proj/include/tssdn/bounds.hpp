#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tssdn/dataplane.hpp"
#include "tssdn/netmodel.hpp"

namespace tssdn::bounds {

struct TimingConstants {
  std::int64_t link_bps = 100'000'000;
  SimTime t_trans_max = 0;  // max frame on the wire, preamble included
  SimTime t_ifg = 960;
  SimTime t_fwd = 3'000;
  SimTime period = kNsPerMs;
  SimTime guard_band = 0;  // t_trans_max + t_ifg

  static TimingConstants for_link(std::int64_t link_bps, SimTime t_fwd = 3'000, SimTime period = kNsPerMs,
                                  SimTime t_ifg = 960);
};

SimTime transmission_time(int wire_bytes, std::int64_t bits_per_s);

// A scheduled (synchronous) flow. path runs sender host, switches..., receiver.
struct SyncFlow {
  std::string id;
  int pcp = 7;
  std::vector<std::string> path;
  SimTime offset = 0;
  int frames = 1;
  int frame_bytes = net::kMaxFrameBytes;
  // Extra queueing per switch hop (slot start later than earliest arrival).
  // Empty or one value per switch.
  std::vector<SimTime> hold;

  bool operator==(const SyncFlow&) const = default;
};

struct Window {
  std::string flow;
  int pcp = 0;
  std::string device;
  int port = 0;
  int hop = 0;  // 0 = sender
  SimTime start = 0;  // phase within the period
  SimTime length = 0;

  SimTime end() const { return start + length; }
  bool operator==(const Window&) const = default;
};

// True when the two periodic windows share any instant.
bool windows_overlap(const Window& a, const Window& b, SimTime period);

struct SlotPlan {
  SimTime period = kNsPerMs;
  SimTime guard_band = 0;
  std::vector<SyncFlow> flows;
  std::vector<Window> windows;

  const SyncFlow* flow(const std::string& id) const;
  std::vector<Window> windows_of(const std::string& flow) const;
  std::vector<Window> windows_on(const std::string& device, int port) const;
  std::set<net::PortRef> ports() const;
  std::set<std::string> devices() const;
};

using GclMap = std::map<net::PortRef, dp::GateControlList>;

struct Placement {
  SlotPlan plan;
  GclMap gcls;
};

// Sender window [offset, offset + frames*(t_trans+ifg)); every later hop starts
// t_trans + t_fwd (+ hold) after the previous one. Throws Overlap when two
// windows collide on a port.
Placement place_slots(const std::vector<SyncFlow>& flows, const net::Topology& topo, const TimingConstants& k);

// One GCL per scheduled port: only the window's queue open inside a window,
// all gates closed in the guard band before it. Elsewhere every queue without
// a slot on the port is open; a scheduled queue only ever opens in its own
// slots. A guard band that overlaps an earlier window is absorbed by it.
GclMap build_gcls(const SlotPlan& plan);

struct Violation {
  std::string device;
  int port = 0;
  std::string what;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string str() const;
};

ValidationReport validate_schedule(const GclMap& gcls, const SlotPlan& plan);

// Worst latency over the flow's frames of one period, walking the hop windows
// (creation at the sender window to reception at the receiver).
SimTime sync_bound(const std::string& flow, const SlotPlan& plan, const TimingConstants& k);

struct AsyncFlow {
  std::string id;
  int pcp = 4;
  std::vector<std::string> path;
  int frame_bytes = net::kMaxFrameBytes;
};

// Longest stretch on any path port during which scheduled windows of other
// queues block the flow: one guard band plus the windows chained behind it
// (windows whose guard band reaches into the previous window share it).
// Path hops are assumed aligned, so the stretch is counted once.
SimTime max_interference(const AsyncFlow& flow, const SlotPlan& plan, const net::Topology& topo);

// T_mi + hops * (t_BE + t_ifg + t_trans) + (hops - 1) * t_fwd.
SimTime async_bound(const AsyncFlow& flow, const SlotPlan& plan, const net::Topology& topo, const TimingConstants& k,
                    int be_max_bytes = net::kMaxFrameBytes);

// Brute-force cross-check: longest contiguous run on any listed port, sampled
// every `grid` ns over two periods, in which a frame of `frame_tx` on queue
// `pcp` could not start (gate closed or closing too early).
SimTime scan_blocked_run(const GclMap& gcls, const std::vector<net::PortRef>& ports, int pcp, SimTime frame_tx,
                         SimTime grid = 10);

// Egress ports a path traverses, sender first.
std::vector<net::PortRef> path_ports(const std::vector<std::string>& path, const net::Topology& topo);

}  // namespace tssdn::bounds
