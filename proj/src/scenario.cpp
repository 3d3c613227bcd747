#include "tssdn/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "tssdn/controller.hpp"
#include "tssdn/error.hpp"

namespace tssdn::scen {

using json = nlohmann::json;

namespace {

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw Error(Errc::Parse, where + ": missing '" + key + "'");
  return j.at(key);
}

SimTime us(const json& j, const char* key, const std::string& where) {
  const auto& v = need(j, key, where);
  if (!v.is_number()) throw Error(Errc::Parse, where + ": '" + key + "' must be a number");
  return from_us(v.get<double>());
}

SimTime us_or(const json& j, const char* key, SimTime fallback) {
  return j.contains(key) ? from_us(j.at(key).get<double>()) : fallback;
}

void need_node(const net::Topology& t, const std::string& id, const std::string& where) {
  if (!t.has_node(id)) throw Error(Errc::UnknownNode, where + ": unknown node '" + id + "'");
}

}  // namespace

Scenario Scenario::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::Parse, std::string("scenario: ") + e.what());
  }
  try {
    Scenario s;
    s.name = j.value("name", std::string("scenario"));
    const SimTime period = us_or(j, "period_us", kNsPerMs);
    const auto link_bps = j.value("link_bps", std::int64_t{100'000'000});
    s.k = bounds::TimingConstants::for_link(link_bps, us_or(j, "t_fwd_us", 3'000), period, us_or(j, "ifg_us", 960));
    s.t_end = us_or(j, "t_end_us", kNsPerS);

    for (const auto& h : need(j, "hosts", "scenario")) s.topo.add_node(h.get<std::string>(), net::NodeKind::Host);
    for (const auto& w : need(j, "switches", "scenario"))
      s.topo.add_node(w.get<std::string>(), net::NodeKind::Switch);
    if (j.contains("controller")) s.topo.add_node(j.at("controller").get<std::string>(), net::NodeKind::Controller);
    for (const auto& l : need(j, "links", "scenario")) {
      if (!l.is_array() || l.size() < 2) throw Error(Errc::Parse, "links: expected [a, b] or [a, b, bps]");
      const auto a = l[0].get<std::string>();
      const auto b = l[1].get<std::string>();
      need_node(s.topo, a, "links");
      need_node(s.topo, b, "links");
      s.topo.add_link(a, b, l.size() > 2 ? l[2].get<std::int64_t>() : link_bps);
    }
    s.topo.validate();

    if (j.contains("sync")) {
      for (const auto& f : j.at("sync")) {
        SyncSource ss;
        ss.id = need(f, "id", "sync").get<std::string>();
        const std::string where = "sync " + ss.id;
        ss.src = need(f, "src", where).get<std::string>();
        ss.dst = need(f, "dst", where).get<std::string>();
        need_node(s.topo, ss.src, where);
        need_node(s.topo, ss.dst, where);
        ss.pcp = f.value("pcp", 7);
        ss.frames = f.value("frames", 1);
        ss.frame_bytes = f.value("frame_bytes", net::kMaxFrameBytes);
        ss.offset = us(f, "offset_us", where);
        ss.start = us(f, "start_us", where);
        ss.stop = us(f, "stop_us", where);
        if (ss.pcp < 0 || ss.pcp > 7 || ss.frames < 1 || ss.stop < ss.start)
          throw Error(Errc::Parse, where + ": bad pcp, frame count or start/stop");
        s.sync.push_back(std::move(ss));
      }
    }

    SimTime last = std::numeric_limits<SimTime>::min();
    if (j.contains("configs")) {
      for (const auto& c : j.at("configs")) {
        ConfigStep step;
        step.name = need(c, "name", "configs").get<std::string>();
        step.at = us(c, "at_us", "config " + step.name);
        if (step.at <= last) throw Error(Errc::Parse, "config " + step.name + ": timeline must be strictly increasing");
        last = step.at;
        if (c.contains("flows")) {
          for (const auto& [id, hold] : c.at("flows").items()) {
            std::vector<SimTime> h;
            for (const auto& v : hold) h.push_back(from_us(v.get<double>()));
            step.flows[id] = std::move(h);
          }
        }
        if (c.contains("ordered_sequence")) step.ordered_sequence = c.at("ordered_sequence").get<std::vector<std::string>>();
        s.configs.push_back(std::move(step));
      }
    }
    for (const auto& c : s.configs)
      for (const auto& [id, hold] : c.flows) s.sync_source(id);
    if (j.contains("static_config")) {
      s.static_config = j.at("static_config").get<std::string>();
      s.config(*s.static_config);
    }

    if (j.contains("async")) {
      const auto& a = j.at("async");
      AsyncSource as;
      as.id = need(a, "id", "async").get<std::string>();
      as.talker = need(a, "talker", "async").get<std::string>();
      as.listener = need(a, "listener", "async").get<std::string>();
      need_node(s.topo, as.talker, "async");
      need_node(s.topo, as.listener, "async");
      as.pcp = a.value("pcp", 4);
      as.frame_bytes = a.value("frame_bytes", net::kMaxFrameBytes);
      as.period = us_or(a, "period_us", kNsPerMs);
      as.bandwidth_bps = need(a, "bandwidth_bps", "async").get<std::int64_t>();
      as.stream_dst = net::MacAddr::parse(need(a, "stream_dst", "async").get<std::string>());
      as.stop = us(a, "stop_us", "async");
      s.async = std::move(as);
    }
    if (j.contains("sr")) {
      const auto& r = j.at("sr");
      s.sr.at = us(r, "at_us", "sr");
      s.sr.step = us_or(r, "step_us", s.sr.step);
      s.sr.steps = r.value("steps", s.sr.steps);
      if (s.sr.steps < 1) throw Error(Errc::Parse, "sr: steps must be positive");
    }
    if (j.contains("best_effort")) {
      for (const auto& b : j.at("best_effort")) {
        BeSource be;
        be.src = need(b, "src", "best_effort").get<std::string>();
        be.dst = need(b, "dst", "best_effort").get<std::string>();
        need_node(s.topo, be.src, "best_effort");
        need_node(s.topo, be.dst, "best_effort");
        be.period = us(b, "period_us", "best_effort " + be.src);
        be.start = us_or(b, "start_us", 0);
        be.min_bytes = b.value("min_bytes", net::kMinFrameBytes);
        be.max_bytes = b.value("max_bytes", net::kMaxFrameBytes);
        if (be.period <= 0 || be.min_bytes < net::kMinFrameBytes || be.max_bytes > net::kMaxFrameBytes ||
            be.min_bytes > be.max_bytes)
          throw Error(Errc::Parse, "best_effort " + be.src + ": bad period or size range");
        s.best_effort.push_back(std::move(be));
      }
    }
    if (j.contains("network")) {
      const auto& n = j.at("network");
      s.net.ctrl_latency = us_or(n, "ctrl_latency_us", s.net.ctrl_latency);
      s.net.mgmt_latency = us_or(n, "mgmt_latency_us", s.net.mgmt_latency);
      s.net.ctrl_processing = us_or(n, "ctrl_processing_us", s.net.ctrl_processing);
      s.net.srp_processing = us_or(n, "srp_processing_us", s.net.srp_processing);
      s.net.ctrl_msg_bytes = n.value("ctrl_msg_bytes", s.net.ctrl_msg_bytes);
    }
    s.net.t_fwd = s.k.t_fwd;
    s.net.ifg = s.k.t_ifg;
    if (j.contains("updates")) {
      const auto& u = j.at("updates");
      s.lead = us_or(u, "lead_us", s.lead);
      if (u.contains("ordered_commit_phase_us")) s.ordered_commit_phase = from_us(u.at("ordered_commit_phase_us").get<double>());
    }
    s.be_max_bytes = j.value("be_max_bytes", net::kMaxFrameBytes);
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::Parse, std::string("scenario: ") + e.what());
  }
}

Scenario Scenario::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Parse, "cannot open scenario " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const SyncSource& Scenario::sync_source(const std::string& id) const {
  for (const auto& s : sync)
    if (s.id == id) return s;
  throw Error(Errc::Parse, "unknown synchronous flow '" + id + "'");
}

const ConfigStep& Scenario::config(const std::string& n) const {
  for (const auto& c : configs)
    if (c.name == n) return c;
  throw Error(Errc::Parse, "unknown configuration '" + n + "'");
}

std::vector<bounds::SyncFlow> Scenario::flows_of(const ConfigStep& c) const {
  std::vector<bounds::SyncFlow> out;
  for (const auto& [id, hold] : c.flows) {
    const auto& ss = sync_source(id);
    bounds::SyncFlow f;
    f.id = id;
    f.pcp = ss.pcp;
    f.path = topo.shortest_path(ss.src, ss.dst);
    f.offset = ss.offset;
    f.frames = ss.frames;
    f.frame_bytes = ss.frame_bytes;
    f.hold = hold;
    out.push_back(std::move(f));
  }
  return out;
}

bounds::Placement Scenario::placement_of(const ConfigStep& c) const { return bounds::place_slots(flows_of(c), topo, k); }

bounds::AsyncFlow Scenario::async_flow() const {
  if (!async) throw Error(Errc::Parse, "scenario has no asynchronous stream");
  return bounds::AsyncFlow{async->id, async->pcp, topo.shortest_path(async->talker, async->listener),
                           async->frame_bytes};
}

// ---- simulation ----------------------------------------------------------------------------

SimTime sr_start(const Scenario& s, const RunOptions& o) {
  sim::Rng rng(o.seed, "sr_start");
  return o.sr_at.value_or(s.sr.at) + rng.uniform_step(s.sr.step, s.sr.steps);
}

SimTime stream_start(const Scenario& s, const RunOptions& o, SimTime reserved) {
  sim::Rng rng(o.seed, "s4_start");
  const SimTime P = s.k.period;
  const SimTime boundary = (reserved + P - 1) / P * P;
  return boundary + rng.uniform_step(s.sr.step, s.sr.steps);
}

namespace {

bounds::SlotPlan empty_plan(const Scenario& s) {
  bounds::SlotPlan p;
  p.period = s.k.period;
  p.guard_band = s.k.guard_band;
  return p;
}

net::Frame udp_frame(const net::Node& src, const net::Node& dst, int pcp, int wire_bytes, std::uint16_t port,
                     std::string flow) {
  net::Frame f;
  f.headers.dst_mac = dst.mac;
  f.headers.src_mac = src.mac;
  f.headers.ethertype = net::ethertype::kIpv4;
  f.headers.pcp = static_cast<std::uint8_t>(pcp);
  f.headers.src_ip = src.ip;
  f.headers.dst_ip = dst.ip;
  f.headers.ip_proto = net::ipproto::kUdp;
  f.headers.src_port = port;
  f.headers.dst_port = port;
  f.wire_bytes = wire_bytes;
  f.payload_bytes = std::max(0, wire_bytes - 46);
  f.flow = std::move(flow);
  return f;
}

struct TxnPlans {
  bounds::SlotPlan from;
  bounds::SlotPlan to;
};

}  // namespace

RunResult run(const Scenario& s, const RunOptions& o) {
  sim::Kernel kernel;
  auto params = s.net;
  params.trace = o.trace;
  params.mode = o.variant == Variant::Tssdn ? netsim::Mode::Sdn : netsim::Mode::Bridge;
  netsim::Network net(kernel, s.topo, params);
  const SimTime t_end = o.t_end.value_or(s.t_end);
  const SimTime P = s.k.period;
  RunResult r;

  // Static forwarding for scheduled flows.
  if (o.variant == Variant::Tssdn) {
    for (const auto& ss : s.sync) {
      const auto path = s.topo.shortest_path(ss.src, ss.dst);
      for (std::size_t i = 1; i + 1 < path.size(); ++i) {
        dp::FlowRule rule;
        rule.match.src_mac = s.topo.node(ss.src).mac;
        rule.match.dst_mac = s.topo.node(ss.dst).mac;
        rule.match.pcp = static_cast<std::uint8_t>(ss.pcp);
        rule.in_port = s.topo.port_towards(path[i], path[i - 1]);
        rule.priority = 100;
        rule.actions = {dp::Action::forward(s.topo.port_towards(path[i], path[i + 1]))};
        rule.cookie = "sync:" + ss.id;
        net.install_static(path[i], rule);
      }
    }
  }

  auto initial = empty_plan(s);
  if (o.variant == Variant::Tsn && o.gates && s.static_config) {
    const auto placement = s.placement_of(s.config(*s.static_config));
    for (const auto& [ref, gcl] : placement.gcls) net.set_gcl(ref, gcl);
    initial = placement.plan;
  }
  net.boot();
  r.states.push_back(PlanState{0, "init", {initial}});

  // Reconfiguration transactions.
  std::map<std::uint64_t, TxnPlans> plans_of_txn;
  if (o.variant == Variant::Tssdn) {
    net.attach_controller(ctl::AclPolicy::allow_all());
    txn::CoordinatorParams cp;
    cp.period = P;
    cp.ordered_commit_phase = o.ordered_commit_phase ? o.ordered_commit_phase : s.ordered_commit_phase;
    auto& coord = net.attach_coordinator(cp);
    bounds::SlotPlan current = initial;
    std::uint64_t next_id = 1;
    for (const auto& c : s.configs) {
      const auto target = s.placement_of(c).plan;
      const auto ops = txn::plan_update(current, target);
      if (ops.empty()) {
        current = target;
        continue;
      }
      const bool additive =
          std::any_of(ops.begin(), ops.end(), [](const txn::BasicOp& op) { return op.kind != txn::OpKind::RemoveSlot; });
      const SimTime start = additive ? c.at - s.lead : c.at;
      std::vector<txn::Transaction> txns;
      auto keep = [&](txn::Transaction t, const bounds::SlotPlan& from, const bounds::SlotPlan& to) {
        t.not_before = c.at;
        plans_of_txn[t.id] = TxnPlans{from, to};
        txns.push_back(std::move(t));
      };
      switch (o.update) {
        case UpdateMode::Sync:
          keep(txn::make_transaction(next_id++, c.name, txn::Strategy::Synchronous, ops, current, target), current,
               target);
          break;
        case UpdateMode::Ordered:
          keep(txn::make_transaction(next_id++, c.name, txn::Strategy::Ordered, ops, current, target,
                                     c.ordered_sequence),
               current, target);
          break;
        case UpdateMode::Split: {
          const auto groups = txn::split_transaction(ops);
          auto cur = current;
          for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto next = txn::apply_ops(cur, target, groups[g].ops);
            const std::string label = groups.size() == 1 ? c.name : c.name + "-" + std::to_string(g + 1);
            keep(txn::make_transaction(next_id++, label, txn::Strategy::Ordered, groups[g].ops, cur, target,
                                       groups[g].sequence),
                 cur, next);
            cur = next;
          }
          break;
        }
      }
      kernel.schedule_at(start, sim::EventKind::TimerFire, [&coord, txns] {
        for (const auto& t : txns) coord.submit(t);
      });
      current = target;
    }
  }

  // Scheduled senders: frame i of a period leaves at offset + i * (t_trans + ifg).
  for (const auto& ss : s.sync) {
    const auto& src = s.topo.node(ss.src);
    const auto& dst = s.topo.node(ss.dst);
    const SimTime spacing = net::transmission_time(ss.frame_bytes, s.k.link_bps) + s.k.t_ifg;
    const auto port = static_cast<std::uint16_t>(5000 + ss.pcp);
    for (SimTime base = ss.start; base < ss.stop && base < t_end; base += P) {
      for (int i = 0; i < ss.frames; ++i) {
        const SimTime t = base + ss.offset + i * spacing;
        if (t >= t_end) break;
        kernel.schedule_at(t, sim::EventKind::TimerFire, [&net, &src, &dst, &ss, port] {
          net.host_send(ss.src, udp_frame(src, dst, ss.pcp, ss.frame_bytes, port, ss.id));
        });
      }
    }
  }

  // Best-effort senders with seeded frame sizes.
  for (const auto& be : s.best_effort) {
    auto rng = std::make_shared<sim::Rng>(o.seed, "be:" + be.src);
    const auto& src = s.topo.node(be.src);
    const auto& dst = s.topo.node(be.dst);
    const auto port = static_cast<std::uint16_t>(6000 + s.topo.index_of(be.src));
    auto tick = std::make_shared<std::function<void()>>();
    *tick = [&net, &kernel, &src, &dst, &be, rng, port, t_end, tick] {
      const int bytes = static_cast<int>(rng->uniform_range(be.min_bytes, be.max_bytes));
      net.host_send(be.src, udp_frame(src, dst, 0, bytes, port, "be:" + be.src));
      if (kernel.now() + be.period < t_end)
        kernel.schedule_in(be.period, sim::EventKind::TimerFire, [tick] { (*tick)(); });
    };
    if (be.start < t_end) kernel.schedule_at(be.start, sim::EventKind::TimerFire, [tick] { (*tick)(); });
  }

  // Stream reservation, then the asynchronous stream.
  std::shared_ptr<std::function<void()>> stream_tick;
  bool lr_sent = false;
  if (s.async) {
    const auto& a = *s.async;
    r.sr.start = sr_start(s, o);
    ctl::SrpMessage ta;
    ta.kind = ctl::SrpMessage::Kind::TalkerAdvertise;
    ta.stream_id = a.id;
    ta.bandwidth_bps = a.bandwidth_bps;
    ta.stream_dst = a.stream_dst;
    ta.pcp = a.pcp;
    if (r.sr.start < t_end) {
      kernel.schedule_at(r.sr.start, sim::EventKind::TimerFire, [&net, &s, ta] {
        net.host_send(s.async->talker, ctl::make_srp_frame(s.topo.node(s.async->talker), ta));
      });
    }
    stream_tick = std::make_shared<std::function<void()>>();
    *stream_tick = [&net, &kernel, &s, t_end, tick = std::weak_ptr<std::function<void()>>(stream_tick)] {
      const auto& as = *s.async;
      auto f = udp_frame(s.topo.node(as.talker), s.topo.node(as.listener), as.pcp, as.frame_bytes, 5004, as.id);
      f.headers.dst_mac = as.stream_dst;
      net.host_send(as.talker, f);
      const SimTime next = kernel.now() + as.period;
      if (next < as.stop && next < t_end) {
        kernel.schedule_in(as.period, sim::EventKind::TimerFire, [tick] {
          if (auto t = tick.lock()) (*t)();
        });
      }
    };
  }

  net.on_receive = [&](const std::string& host, const net::Frame& f, SimTime t) {
    if (f.headers.ethertype == net::ethertype::kSrp) {
      if (!s.async) return;
      const auto m = ctl::SrpMessage::decode(f.app);
      if (!m || m->stream_id != s.async->id) return;
      if (m->kind == ctl::SrpMessage::Kind::TalkerAdvertise && host == s.async->listener && !lr_sent) {
        lr_sent = true;
        auto lr = *m;
        lr.kind = ctl::SrpMessage::Kind::ListenerReady;
        net.host_send(host, ctl::make_srp_frame(s.topo.node(host), lr));
      } else if (m->kind == ctl::SrpMessage::Kind::ListenerReady && host == s.async->talker && !r.sr.done) {
        r.sr.done = t;
        const SimTime first = stream_start(s, o, t);
        if (first < s.async->stop && first < t_end)
          kernel.schedule_at(first, sim::EventKind::TimerFire, [stream_tick] { (*stream_tick)(); });
      }
      return;
    }
    if (f.flow.empty()) return;
    const bool mine = f.headers.dst_mac == s.topo.node(host).mac || (s.async && f.flow == s.async->id &&
                                                                      host == s.async->listener);
    if (mine) r.latencies.push_back(LatencyRow{f.flow, f.frame_id, f.created, t});
  };

  kernel.run_until(t_end);

  if (auto* coord = net.coordinator()) {
    r.txn_log = coord->log();
    r.outcomes = coord->outcomes();
    for (const auto& out : r.outcomes) {
      if (!out.committed) {
        r.all_committed = false;
        continue;
      }
      const auto& p = plans_of_txn.at(out.txn);
      r.states.push_back(PlanState{out.first_commit, out.label + "~", {p.from, p.to}});
      r.states.push_back(PlanState{out.last_commit, out.label, {p.to}});
    }
    if (coord->busy()) r.all_committed = false;
  }
  std::stable_sort(r.states.begin(), r.states.end(),
                   [](const PlanState& a, const PlanState& b) { return a.begin < b.begin; });
  r.counters = net.counters();
  r.in_flight = net.in_flight();
  r.trace = kernel.trace();
  return r;
}

// ---- bounds ---------------------------------------------------------------------------------

BoundOracle::BoundOracle(const Scenario& s, const std::vector<PlanState>& states) : s_(s), states_(states) {}

std::optional<SimTime> BoundOracle::bound_in(const std::string& flow, const bounds::SlotPlan& plan) const {
  if (s_.async && flow == s_.async->id) return bounds::async_bound(s_.async_flow(), plan, s_.topo, s_.k, s_.be_max_bytes);
  if (!plan.flow(flow)) return std::nullopt;
  return bounds::sync_bound(flow, plan, s_.k);
}

std::optional<SimTime> BoundOracle::allowed(const LatencyRow& r) const {
  std::optional<SimTime> best;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const SimTime end = i + 1 < states_.size() ? states_[i + 1].begin : std::numeric_limits<SimTime>::max();
    if (states_[i].begin > r.received || r.created >= end) continue;
    auto [it, fresh] = cache_.try_emplace({i, r.flow});
    if (fresh) {
      for (const auto& plan : states_[i].plans) {
        const auto b = bound_in(r.flow, plan);
        if (b && (!it->second || *b > *it->second)) it->second = b;
      }
    }
    if (it->second && (!best || *it->second > *best)) best = it->second;
  }
  return best;
}

std::string interval_of(const Scenario& s, SimTime t) {
  std::string label = "init";
  for (const auto& c : s.configs)
    if (c.at <= t) label = c.name;
  return label;
}

std::vector<BoundRow> bound_report(const Scenario& s, const RunResult& r) {
  std::set<std::string> bounded;
  for (const auto& ss : s.sync) bounded.insert(ss.id);
  if (s.async) bounded.insert(s.async->id);
  std::vector<std::string> order{"init"};
  for (const auto& c : s.configs) order.push_back(c.name);

  BoundOracle oracle(s, r.states);
  std::map<std::pair<std::string, std::size_t>, BoundRow> rows;
  for (const auto& row : r.latencies) {
    if (!bounded.count(row.flow)) continue;
    const auto label = interval_of(s, row.created);
    const auto idx = static_cast<std::size_t>(std::find(order.begin(), order.end(), label) - order.begin());
    auto& br = rows[{row.flow, idx}];
    br.flow = row.flow;
    br.config = label;
    br.measured_max = std::max(br.measured_max, row.latency());
    const auto allowed = oracle.allowed(row);
    if (allowed) {
      if (!br.bound || *allowed > *br.bound) br.bound = allowed;
      if (row.latency() > *allowed) br.ok = false;
    }
  }
  std::vector<BoundRow> out;
  for (auto& [key, row] : rows) out.push_back(std::move(row));
  return out;
}

void write_latency_csv(std::ostream& out, const std::vector<LatencyRow>& rows) {
  out << "flow,frame_id,t_created_us,t_received_us,latency_us\n";
  for (const auto& r : rows)
    out << r.flow << ',' << r.frame_id << ',' << format_us(r.created) << ',' << format_us(r.received) << ','
        << format_us(r.latency()) << '\n';
}

void write_bound_csv(std::ostream& out, const std::vector<BoundRow>& rows) {
  out << "flow,config,bound_us,measured_max_us,ok\n";
  for (const auto& r : rows)
    out << r.flow << ',' << r.config << ',' << (r.bound ? format_us(*r.bound) : "") << ','
        << format_us(r.measured_max) << ',' << (r.ok ? "true" : "false") << '\n';
}

std::vector<AnalyticRow> analytic_bounds(const Scenario& s) {
  std::vector<AnalyticRow> rows;
  for (const auto& c : s.configs) {
    bounds::SlotPlan plan;
    try {
      plan = s.placement_of(c).plan;
    } catch (const Error& e) {
      rows.push_back(AnalyticRow{"*", c.name, std::nullopt, errc_name(e.code())});
      continue;
    }
    for (const auto& [id, hold] : c.flows) {
      try {
        rows.push_back(AnalyticRow{id, c.name, bounds::sync_bound(id, plan, s.k), ""});
      } catch (const Error& e) {
        rows.push_back(AnalyticRow{id, c.name, std::nullopt, errc_name(e.code())});
      }
    }
    if (s.async)
      rows.push_back(AnalyticRow{s.async->id, c.name,
                                 bounds::async_bound(s.async_flow(), plan, s.topo, s.k, s.be_max_bytes), ""});
  }
  return rows;
}

}  // namespace tssdn::scen
