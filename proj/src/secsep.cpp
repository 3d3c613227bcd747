#include "tssdn/secsep.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <tuple>

#include "tssdn/error.hpp"

namespace tssdn::sep {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::ExposedPerMessage: return "message";
    case Strategy::HiddenPerDomain: return "domain";
    case Strategy::HiddenPerTopic: return "topic";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "message" || s == "exposed") return Strategy::ExposedPerMessage;
  if (s == "domain" || s == "hidden-domain") return Strategy::HiddenPerDomain;
  if (s == "topic" || s == "hidden-topic") return Strategy::HiddenPerTopic;
  throw Error(Errc::Parse, "unknown strategy '" + s + "'");
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Legitimate: return "legitimate";
    case Verdict::Oversupplied: return "oversupplied";
    case Verdict::Permitted: return "permitted";
    case Verdict::Forbidden: return "forbidden";
  }
  return "?";
}

AddressOf index_addressing(const net::CommunicationMatrix& m) {
  return [&m](const std::string& zc) {
    const auto n = static_cast<std::uint32_t>(m.zone_index(zc) + 1);
    return ZoneAddress{net::MacAddr{0x020000000100ULL | n}, net::Ipv4Addr{(10u << 24) | (1u << 8) | n}};
  };
}

// ---- embedding ----------------------------------------------------------------------------

Embedder::Embedder(const net::CommunicationMatrix& m, Strategy s, Layout layout, AddressOf addr)
    : m_(m), strategy_(s), layout_(layout), addr_(addr ? std::move(addr) : index_addressing(m)) {}

net::HeaderTuple Embedder::embed(const net::ControlFlow& cf) const { return embed_from(cf, cf.sender_zc); }

net::HeaderTuple Embedder::embed_from(const net::ControlFlow& cf, const std::string& zc) const {
  const auto src = addr_(zc);
  net::HeaderTuple h;
  h.src_mac = src.mac;
  h.vlan_id = static_cast<std::uint16_t>(m_.domain_index(cf.domain));
  h.pcp = static_cast<std::uint8_t>(cf.priority & 7);
  if (strategy_ == Strategy::ExposedPerMessage) {
    h.dst_mac = net::MacAddr{layout_.exposed_mac_base | (cf.cf_id & 0xFFFFFF)};
    h.ethertype = layout_.exposed_ethertype;
    return h;
  }
  const std::uint32_t group = strategy_ == Strategy::HiddenPerDomain
                                  ? layout_.group_ip_base | static_cast<std::uint32_t>(m_.domain_index(cf.domain))
                                  : layout_.topic_ip_base | static_cast<std::uint32_t>(m_.topic_index(cf.topic));
  h.dst_ip = net::Ipv4Addr{group};
  h.dst_mac = net::multicast_mac_for(*h.dst_ip);
  h.ethertype = net::ethertype::kIpv4;
  h.src_ip = src.ip;
  h.ip_proto = net::ipproto::kUdp;
  h.src_port = layout_.udp_port;
  h.dst_port = layout_.udp_port;
  // Class selector code point; the PCP is its top three bits.
  h.dscp = static_cast<std::uint8_t>((cf.priority & 7) << 3);
  h.pcp = static_cast<std::uint8_t>(*h.dscp >> 3);
  return h;
}

// ---- network flows ------------------------------------------------------------------------

std::vector<NetworkFlow> derive_network_flows(const net::CommunicationMatrix& m, const Embedder& e) {
  std::map<std::pair<std::string, net::HeaderTuple>, NetworkFlow> by_key;
  for (const auto& cf : net::backbone_flows(m)) {
    auto h = e.embed(cf);
    auto& nf = by_key[{cf.sender_zc, h}];
    nf.match = h;
    nf.source_zc = cf.sender_zc;
    nf.member_cfs.insert(cf.cf_id);
    for (const auto& zc : cf.receiver_zcs())
      if (zc != cf.sender_zc) nf.dest_zcs.insert(zc);
  }
  std::vector<NetworkFlow> out;
  out.reserve(by_key.size());
  for (auto& [k, nf] : by_key) out.push_back(std::move(nf));
  std::sort(out.begin(), out.end(),
            [](const NetworkFlow& a, const NetworkFlow& b) { return *a.member_cfs.begin() < *b.member_cfs.begin(); });
  return out;
}

SeparationMetrics separation_metrics(const std::vector<NetworkFlow>& nfs) {
  SeparationMetrics r;
  r.nf_count = nfs.size();
  if (nfs.empty()) return r;
  r.min_cfs = nfs.front().member_cfs.size();
  std::size_t total = 0;
  for (const auto& nf : nfs) {
    const auto n = nf.member_cfs.size();
    total += n;
    r.min_cfs = std::min(r.min_cfs, n);
    r.max_cfs = std::max(r.max_cfs, n);
    if (n > 1) ++r.nfs_multi;
    ++r.dest_histogram[nf.dest_zcs.size()];
  }
  r.avg_cfs = static_cast<double>(total) / static_cast<double>(nfs.size());
  return r;
}

std::vector<PathVerdict> classify_paths(const net::CommunicationMatrix& m, const Embedder& e,
                                        const std::vector<NetworkFlow>& nfs) {
  // Installed rules: (ingress ZC, tuple) -> destinations.
  std::map<std::pair<std::string, net::HeaderTuple>, const NetworkFlow*> rules;
  for (const auto& nf : nfs) rules[{nf.source_zc, nf.match}] = &nf;

  const auto flows = net::backbone_flows(m);
  std::vector<PathVerdict> out;
  for (const auto& src : m.zones()) {
    for (const auto& dst : m.zones()) {
      if (src == dst) continue;
      for (const auto& cf : flows) {
        const auto it = rules.find({src, e.embed_from(cf, src)});
        const bool carried = it != rules.end() && it->second->dest_zcs.count(dst) > 0;
        Verdict v = Verdict::Forbidden;
        if (cf.sender_zc == src) {
          if (cf.receiver_zcs().count(dst)) v = Verdict::Legitimate;
          else if (carried) v = Verdict::Oversupplied;
        } else if (carried) {
          v = Verdict::Permitted;
        }
        out.push_back(PathVerdict{src, dst, cf.cf_id, v});
      }
    }
  }
  return out;
}

// ---- aggregation --------------------------------------------------------------------------

int frame_bytes(const Layout& l, Strategy s, const std::vector<int>& payloads) {
  int body = 0;
  if (s == Strategy::ExposedPerMessage) {
    for (int p : payloads) body += p;
    return std::max(net::kMinFrameBytes, l.eth_header + l.vlan_tag + body + l.fcs);
  }
  for (int p : payloads) body += l.record_header + p;
  return std::max(net::kMinFrameBytes, l.eth_header + l.vlan_tag + l.ip_header + l.udp_header + body + l.fcs);
}

AggregationResult aggregation_model(const net::CommunicationMatrix& m, const Embedder& e, std::int64_t interval_us,
                                    std::int64_t horizon_us) {
  if (interval_us < 0) throw Error(Errc::Parse, "negative aggregation interval");
  if (horizon_us <= 0) throw Error(Errc::Parse, "non-positive horizon");
  if (interval_us > 0 && e.strategy() == Strategy::ExposedPerMessage)
    throw Error(Errc::AggregationWithExposed, "exposed embedding carries one message per frame");

  const auto& l = e.layout();
  const int max_records_bytes = net::kMaxFrameBytes - (l.eth_header + l.vlan_tag + l.ip_header + l.udp_header + l.fcs);
  std::map<std::uint32_t, const net::ControlFlow*> by_id;
  for (const auto& cf : m.flows()) by_id[cf.cf_id] = &cf;

  AggregationResult r;
  std::int64_t total_bytes = 0;
  const double horizon_s = static_cast<double>(horizon_us) / 1e6;
  auto emit = [&](const NetworkFlow& nf, const std::vector<int>& payloads) {
    const int fb = frame_bytes(l, e.strategy(), payloads);
    ++r.frames;
    total_bytes += fb;
    const double bits = static_cast<double>(fb + l.preamble_ifg) * 8.0;
    r.sent_by_zc[nf.source_zc] += bits;
    for (const auto& d : nf.dest_zcs) r.received_by_zc[d] += bits;
  };

  for (const auto& nf : derive_network_flows(m, e)) {
    // (time, cf_id, payload) of every message in the horizon.
    std::vector<std::tuple<std::int64_t, std::uint32_t, int>> msgs;
    for (auto id : nf.member_cfs) {
      const auto& cf = *by_id.at(id);
      for (std::int64_t t = 0; t < horizon_us; t += cf.period_us) msgs.emplace_back(t, id, cf.payload_bytes);
    }
    std::sort(msgs.begin(), msgs.end());
    if (interval_us == 0) {
      for (const auto& [t, id, p] : msgs) emit(nf, {p});
      continue;
    }
    std::vector<int> pending;
    int used = 0;
    std::int64_t bucket = -1;
    for (const auto& [t, id, p] : msgs) {
      const std::int64_t b = t / interval_us;
      const int need = l.record_header + p;
      if (!pending.empty() && (b != bucket || used + need > max_records_bytes)) {
        emit(nf, pending);
        pending.clear();
        used = 0;
      }
      bucket = b;
      pending.push_back(p);
      used += need;
    }
    if (!pending.empty()) emit(nf, pending);
  }

  for (auto& [zc, bits] : r.sent_by_zc) {
    bits /= horizon_s;
    r.sent_bw_bps += bits;
  }
  for (auto& [zc, bits] : r.received_by_zc) {
    bits /= horizon_s;
    r.received_bw_bps += bits;
  }
  if (r.frames > 0) r.avg_frame_bytes = static_cast<double>(total_bytes) / static_cast<double>(r.frames);
  return r;
}

// ---- reports ------------------------------------------------------------------------------

void write_separation_csv(std::ostream& out, const std::vector<std::pair<Strategy, SeparationMetrics>>& rows) {
  out << "strategy,nf_count,nfs_multi,min_cfs,avg_cfs,max_cfs\n";
  for (const auto& [s, r] : rows) {
    out << strategy_name(s) << ',' << r.nf_count << ',' << r.nfs_multi << ',' << r.min_cfs << ',' << std::fixed
        << std::setprecision(2) << r.avg_cfs << std::defaultfloat << ',' << r.max_cfs << '\n';
  }
}

void write_classification_csv(std::ostream& out, Strategy s, const std::vector<PathVerdict>& rows, bool header) {
  if (header) out << "strategy,src_zc,dst_zc,cf_id,verdict\n";
  for (const auto& v : rows)
    out << strategy_name(s) << ',' << v.src_zc << ',' << v.dst_zc << ',' << v.cf_id << ',' << verdict_name(v.verdict)
        << '\n';
}

void write_aggregation_csv(std::ostream& out, const std::vector<AggregationRow>& rows) {
  out << "strategy,interval_us,avg_frame_bytes,sent_bw_bps,received_bw_bps\n";
  for (const auto& row : rows) {
    const auto& r = row.result;
    out << strategy_name(row.strategy) << ',' << row.interval_us << ',' << std::fixed << std::setprecision(2)
        << r.avg_frame_bytes << ',' << std::setprecision(0) << r.sent_bw_bps << ',' << r.received_bw_bps
        << std::defaultfloat << std::setprecision(6) << '\n';
  }
}

}  // namespace tssdn::sep
