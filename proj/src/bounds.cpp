#include "tssdn/bounds.hpp"

#include <algorithm>
#include <sstream>

#include "tssdn/error.hpp"

namespace tssdn::bounds {

namespace {

using Interval = std::pair<SimTime, SimTime>;

// Splits a periodic interval starting at phase s into pieces inside [0, period).
std::vector<Interval> pieces(SimTime s, SimTime len, SimTime period) {
  s = wrap(s, period);
  if (len >= period) return {{0, period}};
  if (s + len <= period) return {{s, s + len}};
  return {{s, period}, {0, s + len - period}};
}

std::string describe(const Window& w) {
  return w.flow + "[" + format_us(w.start) + "," + format_us(w.end()) + ")";
}

struct Segment {
  SimTime from;
  SimTime to;
  std::uint8_t gates;
};

std::vector<Segment> gate_segments(const dp::GateControlList& g, SimTime a, SimTime b) {
  std::vector<Segment> out;
  for (SimTime t = a; t < b;) {
    const SimTime nx = std::min(g.next_change(t), b);
    out.push_back({t, nx, g.gates_at(t)});
    t = nx;
  }
  return out;
}

bool inside_window(const Window& w, SimTime a, SimTime b, SimTime period) {
  const SimTime rel = wrap(a - w.start, period);
  return rel < w.length && rel + (b - a) <= w.length;
}

}  // namespace

bool windows_overlap(const Window& a, const Window& b, SimTime period) {
  for (const auto& [a0, a1] : pieces(a.start, a.length, period))
    for (const auto& [b0, b1] : pieces(b.start, b.length, period))
      if (a0 < b1 && b0 < a1) return true;
  return false;
}

TimingConstants TimingConstants::for_link(std::int64_t link_bps, SimTime t_fwd, SimTime period, SimTime t_ifg) {
  TimingConstants k;
  k.link_bps = link_bps;
  k.t_trans_max = transmission_time(net::kMaxFrameBytes, link_bps);
  k.t_ifg = t_ifg;
  k.t_fwd = t_fwd;
  k.period = period;
  k.guard_band = k.t_trans_max + t_ifg;
  return k;
}

SimTime transmission_time(int wire_bytes, std::int64_t bits_per_s) {
  return net::transmission_time(wire_bytes, bits_per_s);
}

// ---- SlotPlan --------------------------------------------------------------------

const SyncFlow* SlotPlan::flow(const std::string& id) const {
  for (const auto& f : flows)
    if (f.id == id) return &f;
  return nullptr;
}

std::vector<Window> SlotPlan::windows_of(const std::string& f) const {
  std::vector<Window> out;
  for (const auto& w : windows)
    if (w.flow == f) out.push_back(w);
  std::sort(out.begin(), out.end(), [](const Window& a, const Window& b) { return a.hop < b.hop; });
  return out;
}

std::vector<Window> SlotPlan::windows_on(const std::string& device, int port) const {
  std::vector<Window> out;
  for (const auto& w : windows)
    if (w.device == device && w.port == port) out.push_back(w);
  std::sort(out.begin(), out.end(), [](const Window& a, const Window& b) { return a.start < b.start; });
  return out;
}

std::set<net::PortRef> SlotPlan::ports() const {
  std::set<net::PortRef> out;
  for (const auto& w : windows) out.insert({w.device, w.port});
  return out;
}

std::set<std::string> SlotPlan::devices() const {
  std::set<std::string> out;
  for (const auto& w : windows) out.insert(w.device);
  return out;
}

std::vector<net::PortRef> path_ports(const std::vector<std::string>& path, const net::Topology& topo) {
  std::vector<net::PortRef> out;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) out.push_back({path[i], topo.port_towards(path[i], path[i + 1])});
  return out;
}

// ---- placement -----------------------------------------------------------------

Placement place_slots(const std::vector<SyncFlow>& flows, const net::Topology& topo, const TimingConstants& k) {
  Placement out;
  out.plan.period = k.period;
  out.plan.guard_band = k.guard_band;
  for (const auto& f : flows) {
    if (f.path.size() < 2) throw Error(Errc::InvalidTopology, "flow " + f.id + ": path needs sender and receiver");
    const std::size_t switches = f.path.size() - 2;
    if (!f.hold.empty() && f.hold.size() != switches)
      throw Error(Errc::Parse, "flow " + f.id + ": hold needs one value per switch");
    const SimTime tx = transmission_time(f.frame_bytes, k.link_bps);
    const SimTime len = f.frames * (tx + k.t_ifg);
    const auto ports = path_ports(f.path, topo);
    SimTime start = f.offset;
    for (std::size_t hop = 0; hop < ports.size(); ++hop) {
      if (hop > 0) start += tx + k.t_fwd + (f.hold.empty() ? 0 : f.hold[hop - 1]);
      out.plan.windows.push_back(
          Window{f.id, f.pcp, ports[hop].node, ports[hop].port, static_cast<int>(hop), wrap(start, k.period), len});
    }
    out.plan.flows.push_back(f);
  }
  out.gcls = build_gcls(out.plan);
  return out;
}

GclMap build_gcls(const SlotPlan& plan) {
  const SimTime P = plan.period;
  GclMap out;
  for (const auto& port : plan.ports()) {
    const auto ws = plan.windows_on(port.node, port.port);
    for (std::size_t i = 0; i < ws.size(); ++i)
      for (std::size_t j = i + 1; j < ws.size(); ++j)
        if (windows_overlap(ws[i], ws[j], P))
          throw Error(Errc::Overlap, "port " + port.node + ":" + std::to_string(port.port) + ": " + describe(ws[i]) +
                                         " overlaps " + describe(ws[j]));

    // (piece, rank, gates): windows rank above guard bands, which rank above the open default.
    struct Cover {
      Interval iv;
      int rank;
      std::uint8_t gates;
    };
    std::vector<Cover> covers;
    std::vector<SimTime> cuts{0, P};
    std::uint8_t scheduled = 0;
    for (const auto& w : ws) scheduled |= static_cast<std::uint8_t>(1u << w.pcp);
    for (const auto& w : ws) {
      for (const auto& iv : pieces(w.start, w.length, P)) covers.push_back({iv, 2, static_cast<std::uint8_t>(1u << w.pcp)});
      for (const auto& iv : pieces(w.start - plan.guard_band, plan.guard_band, P)) covers.push_back({iv, 1, 0x00});
    }
    for (const auto& c : covers) {
      cuts.push_back(c.iv.first);
      cuts.push_back(c.iv.second);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::vector<dp::GclEntry> entries;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const SimTime a = cuts[i], b = cuts[i + 1];
      int rank = 0;
      auto gates = static_cast<std::uint8_t>(0xFF & ~scheduled);
      for (const auto& c : covers) {
        if (c.iv.first <= a && b <= c.iv.second && c.rank > rank) {
          rank = c.rank;
          gates = c.gates;
        }
      }
      if (!entries.empty() && entries.back().gates == gates)
        entries.back().duration += b - a;
      else
        entries.push_back({gates, b - a});
    }
    out[port] = dp::GateControlList(P, 0, std::move(entries));
  }
  return out;
}

// ---- validation ------------------------------------------------------------------

std::string ValidationReport::str() const {
  std::ostringstream os;
  for (const auto& v : violations) os << v.device << ':' << v.port << ": " << v.what << '\n';
  return os.str();
}

ValidationReport validate_schedule(const GclMap& gcls, const SlotPlan& plan) {
  ValidationReport rep;
  const SimTime P = plan.period;
  auto add = [&](const net::PortRef& p, std::string what) { rep.violations.push_back({p.node, p.port, std::move(what)}); };

  for (const auto& [port, g] : gcls) {
    if (!g.valid()) add(port, "gate durations do not sum to the period");
    else if (g.period() != P) add(port, "GCL period " + format_us(g.period()) + "us differs from plan");
  }
  for (const auto& port : plan.ports()) {
    const auto it = gcls.find(port);
    if (it == gcls.end()) {
      add(port, "no GCL for scheduled port");
      continue;
    }
    if (!it->second.valid()) continue;
    const auto& g = it->second;
    const auto ws = plan.windows_on(port.node, port.port);
    for (std::size_t i = 0; i < ws.size(); ++i)
      for (std::size_t j = i + 1; j < ws.size(); ++j)
        if (windows_overlap(ws[i], ws[j], P)) add(port, describe(ws[i]) + " overlaps " + describe(ws[j]));

    for (const auto& w : ws) {
      const auto own = static_cast<std::uint8_t>(1u << w.pcp);
      for (const auto& s : gate_segments(g, w.start, w.end())) {
        if (s.gates != own) {
          add(port, "window " + describe(w) + " not exclusive at " + format_us(wrap(s.from, P)) + "us");
          break;
        }
      }
      for (const auto& s : gate_segments(g, 0, P)) {
        if (!((s.gates >> w.pcp) & 1)) continue;
        const bool inside = std::any_of(ws.begin(), ws.end(), [&](const Window& o) {
          return o.pcp == w.pcp && inside_window(o, s.from, s.to, P);
        });
        if (!inside) {
          add(port, "queue " + std::to_string(w.pcp) + " open outside its slots at " + format_us(s.from) + "us");
          break;
        }
      }
      for (const auto& s : gate_segments(g, w.start - plan.guard_band, w.start)) {
        if (s.gates == 0) continue;
        const bool covered = std::any_of(ws.begin(), ws.end(), [&](const Window& o) {
          return !(o == w) && inside_window(o, s.from, s.to, P);
        });
        if (!covered) {
          add(port, "missing guard band before " + describe(w));
          break;
        }
      }
    }
  }
  return rep;
}

// ---- bounds ------------------------------------------------------------------------

SimTime sync_bound(const std::string& flow_id, const SlotPlan& plan, const TimingConstants& k) {
  const SyncFlow* f = plan.flow(flow_id);
  if (!f) throw Error(Errc::MissingSlot, "flow " + flow_id + " has no slot");
  const auto ws = plan.windows_of(flow_id);
  if (ws.size() + 1 != f->path.size())
    throw Error(Errc::MissingSlot, "flow " + flow_id + " lacks a slot on some hop");

  const SimTime P = plan.period;
  const SimTime tx = transmission_time(f->frame_bytes, k.link_bps);
  std::vector<SimTime> link_free(ws.size(), 0);
  SimTime worst = 0;
  for (int n = 0; n < f->frames; ++n) {
    const SimTime created = ws[0].start + n * (tx + k.t_ifg);
    SimTime end = created + tx;
    for (std::size_t h = 1; h < ws.size(); ++h) {
      const SimTime ready = std::max(end + k.t_fwd, link_free[h]);
      SimTime occ = ready - wrap(ready - ws[h].start, P);
      SimTime s = std::max(ready, occ);
      while (s + tx > occ + ws[h].length) {
        occ += P;
        s = std::max(ready, occ);
      }
      end = s + tx;
      link_free[h] = end + k.t_ifg;
    }
    worst = std::max(worst, end - created);
  }
  return worst;
}

SimTime max_interference(const AsyncFlow& flow, const SlotPlan& plan, const net::Topology& topo) {
  const SimTime P = plan.period;
  SimTime worst = 0;
  for (const auto& port : path_ports(flow.path, topo)) {
    std::vector<Window> ws;
    for (const auto& w : plan.windows_on(port.node, port.port))
      if (w.pcp != flow.pcp) ws.push_back(w);
    if (ws.empty()) continue;
    const std::size_t n = ws.size();
    auto gap_after = [&](std::size_t i) { return wrap(ws[(i + 1) % n].start - ws[i].end(), P); };
    std::size_t brk = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (gap_after(i) >= plan.guard_band) {
        brk = i;
        break;
      }
    }
    if (brk == n) return P;
    SimTime stretch = plan.guard_band;
    for (std::size_t step = 1; step <= n; ++step) {
      const std::size_t i = (brk + step) % n;
      stretch += ws[i].length;
      if (gap_after(i) >= plan.guard_band) {
        worst = std::max(worst, stretch);
        stretch = plan.guard_band;
      }
    }
  }
  return worst;
}

SimTime async_bound(const AsyncFlow& flow, const SlotPlan& plan, const net::Topology& topo, const TimingConstants& k,
                    int be_max_bytes) {
  const auto hops = static_cast<SimTime>(flow.path.size()) - 1;
  const SimTime t_be = transmission_time(be_max_bytes, k.link_bps);
  const SimTime t_own = transmission_time(flow.frame_bytes, k.link_bps);
  return max_interference(flow, plan, topo) + hops * (t_be + k.t_ifg + t_own) + (hops - 1) * k.t_fwd;
}

SimTime scan_blocked_run(const GclMap& gcls, const std::vector<net::PortRef>& ports, int pcp, SimTime frame_tx,
                         SimTime grid) {
  SimTime worst = 0;
  for (const auto& port : ports) {
    const auto it = gcls.find(port);
    if (it == gcls.end()) continue;
    const auto& g = it->second;
    SimTime run = 0;
    for (SimTime t = 0; t < 2 * g.period(); t += grid) {
      const bool blocked = !g.open_at(pcp, t) || g.open_until(pcp, t) - t < frame_tx;
      run = blocked ? run + grid : 0;
      worst = std::max(worst, std::min(run, g.period()));
    }
  }
  return worst;
}

}  // namespace tssdn::bounds
