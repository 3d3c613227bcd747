#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tssdn/bounds.hpp"
#include "tssdn/desim.hpp"
#include "tssdn/netmodel.hpp"
#include "tssdn/network.hpp"
#include "tssdn/txnsched.hpp"

namespace tssdn::scen {

struct SyncSource {
  std::string id;
  std::string src;
  std::string dst;
  int pcp = 7;
  int frames = 1;
  int frame_bytes = net::kMaxFrameBytes;
  SimTime offset = 0;
  SimTime start = 0;
  SimTime stop = 0;
};

// One reconfiguration: the scheduled flows after it and their per-switch hold.
struct ConfigStep {
  std::string name;
  SimTime at = 0;
  std::map<std::string, std::vector<SimTime>> flows;
  // Device sequence for a single ordered transaction; derived when absent.
  std::optional<std::vector<std::string>> ordered_sequence;
};

struct AsyncSource {
  std::string id;
  std::string talker;
  std::string listener;
  int pcp = 4;
  int frame_bytes = net::kMaxFrameBytes;
  SimTime period = kNsPerMs;
  std::int64_t bandwidth_bps = 0;
  net::MacAddr stream_dst;
  SimTime stop = 0;
};

struct SrSetup {
  SimTime at = 0;
  SimTime step = 50 * kNsPerUs;
  int steps = 20;
};

struct BeSource {
  std::string src;
  std::string dst;
  SimTime period = kNsPerMs;
  SimTime start = 0;
  int min_bytes = net::kMinFrameBytes;
  int max_bytes = net::kMaxFrameBytes;
};

struct Scenario {
  std::string name;
  net::Topology topo;
  bounds::TimingConstants k;
  SimTime t_end = kNsPerS;
  std::vector<SyncSource> sync;
  std::vector<ConfigStep> configs;
  std::optional<std::string> static_config;  // schedule of the TSN variant
  std::optional<AsyncSource> async;
  SrSetup sr;
  std::vector<BeSource> best_effort;
  netsim::NetworkParams net;
  SimTime lead = 5 * kNsPerMs;  // add/shift transactions start this long before their config time
  std::optional<SimTime> ordered_commit_phase;
  int be_max_bytes = net::kMaxFrameBytes;

  // Throws Parse / UnknownNode on schema or reference errors.
  static Scenario from_json(const std::string& text);
  static Scenario load(const std::string& path);

  const SyncSource& sync_source(const std::string& id) const;
  const ConfigStep& config(const std::string& name) const;
  std::vector<bounds::SyncFlow> flows_of(const ConfigStep& c) const;
  bounds::Placement placement_of(const ConfigStep& c) const;
  bounds::AsyncFlow async_flow() const;
};

enum class Variant { Tssdn, Tsn };
enum class UpdateMode { Sync, Ordered, Split };

struct RunOptions {
  Variant variant = Variant::Tssdn;
  UpdateMode update = UpdateMode::Sync;
  std::uint64_t seed = 0;
  std::optional<SimTime> sr_at;  // overrides the scenario SR start (before the seed offset)
  bool gates = true;              // TSN variant: static schedule active
  bool trace = true;
  std::optional<SimTime> t_end;
  std::optional<SimTime> ordered_commit_phase;
};

struct LatencyRow {
  std::string flow;
  std::uint64_t frame_id = 0;
  SimTime created = 0;
  SimTime received = 0;
  SimTime latency() const { return received - created; }
};

// Schedule in force from `begin`; two plans while a transaction is half applied.
struct PlanState {
  SimTime begin = 0;
  std::string label;
  std::vector<bounds::SlotPlan> plans;
};

struct SrRecord {
  SimTime start = 0;
  std::optional<SimTime> done;
  std::optional<SimTime> duration() const {
    if (!done) return std::nullopt;
    return *done - start;
  }
};

struct RunResult {
  std::vector<LatencyRow> latencies;
  std::vector<PlanState> states;
  SrRecord sr;
  txn::TxnLog txn_log;
  std::vector<txn::Outcome> outcomes;
  netsim::Counters counters;
  std::uint64_t in_flight = 0;
  sim::EventTrace trace;
  bool all_committed = true;
};

RunResult run(const Scenario& s, const RunOptions& o);

// Seed-dependent SR start: base + step * uniform(steps).
SimTime sr_start(const Scenario& s, const RunOptions& o);
// Seed-dependent first stream frame: the period boundary after the reservation
// completes, plus step * uniform(steps).
SimTime stream_start(const Scenario& s, const RunOptions& o, SimTime reserved);

// ---- bounds on measured frames ----------------------------------------------------------

class BoundOracle {
 public:
  BoundOracle(const Scenario& s, const std::vector<PlanState>& states);
  // Largest analytic bound over the schedules in force while the frame was in
  // the network, or nullopt when none of them covers the flow.
  std::optional<SimTime> allowed(const LatencyRow& r) const;
  std::optional<SimTime> bound_in(const std::string& flow, const bounds::SlotPlan& plan) const;

 private:
  const Scenario& s_;
  const std::vector<PlanState>& states_;
  mutable std::map<std::pair<std::size_t, std::string>, std::optional<SimTime>> cache_;
};

// Label of the timeline interval a time falls in ("init", then config names).
std::string interval_of(const Scenario& s, SimTime t);

struct BoundRow {
  std::string flow;
  std::string config;
  std::optional<SimTime> bound;
  SimTime measured_max = 0;
  bool ok = true;
};

// One row per (flow, interval) with measured frames; ok when no frame exceeds
// the bound allowed for it.
std::vector<BoundRow> bound_report(const Scenario& s, const RunResult& r);

void write_latency_csv(std::ostream& out, const std::vector<LatencyRow>& rows);
void write_bound_csv(std::ostream& out, const std::vector<BoundRow>& rows);

// Analytic table without simulation: each scheduled flow per config it appears
// in, and the asynchronous stream per config.
struct AnalyticRow {
  std::string flow;
  std::string config;
  std::optional<SimTime> bound;
  std::string note;
};
std::vector<AnalyticRow> analytic_bounds(const Scenario& s);

}  // namespace tssdn::scen
