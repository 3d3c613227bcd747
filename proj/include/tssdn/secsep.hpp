#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "tssdn/netmodel.hpp"

namespace tssdn::sep {

enum class Strategy { ExposedPerMessage, HiddenPerDomain, HiddenPerTopic };

const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& s);
inline constexpr Strategy kAllStrategies[] = {Strategy::ExposedPerMessage, Strategy::HiddenPerTopic,
                                              Strategy::HiddenPerDomain};

// Addressing and framing constants shared by embedding and the bandwidth model.
struct Layout {
  std::uint64_t exposed_mac_base = 0x03'00'00'00'00'00ULL;  // locally administered multicast
  std::uint16_t exposed_ethertype = 0x88B5;
  std::uint32_t group_ip_base = (239u << 24) | (1u << 16);  // 239.1.0.0
  std::uint32_t topic_ip_base = (239u << 24) | (2u << 16);  // 239.2.0.0
  std::uint16_t udp_port = 30490;
  int eth_header = 14;
  int vlan_tag = 4;
  int fcs = 4;
  int ip_header = 20;
  int udp_header = 8;
  int record_header = 5;  // 4-byte CF id + 1-byte length
  int preamble_ifg = 20;  // preamble + SFD + inter-frame gap on the wire
};

struct ZoneAddress {
  net::MacAddr mac;
  net::Ipv4Addr ip;
};
using AddressOf = std::function<ZoneAddress(const std::string& zc)>;

// 02:00:00:00:01:<n> / 10.0.1.<n> with n the 1-based zone index.
AddressOf index_addressing(const net::CommunicationMatrix& m);

class Embedder {
 public:
  Embedder(const net::CommunicationMatrix& m, Strategy s, Layout layout = {}, AddressOf addr = {});

  // Tuple of the CF as its own sender ZC would send it.
  net::HeaderTuple embed(const net::ControlFlow& cf) const;
  // Tuple of the CF if `zc` sent it instead.
  net::HeaderTuple embed_from(const net::ControlFlow& cf, const std::string& zc) const;

  Strategy strategy() const { return strategy_; }
  const Layout& layout() const { return layout_; }

 private:
  const net::CommunicationMatrix& m_;
  Strategy strategy_;
  Layout layout_;
  AddressOf addr_;
};

struct NetworkFlow {
  net::HeaderTuple match;
  std::string source_zc;
  std::set<std::string> dest_zcs;
  std::set<std::uint32_t> member_cfs;
};

// Backbone CFs grouped by (sender ZC, tuple), ordered by smallest member id.
std::vector<NetworkFlow> derive_network_flows(const net::CommunicationMatrix& m, const Embedder& e);

struct SeparationMetrics {
  std::size_t nf_count = 0;
  std::size_t nfs_multi = 0;
  std::size_t min_cfs = 0;
  double avg_cfs = 0;
  std::size_t max_cfs = 0;
  std::map<std::size_t, std::size_t> dest_histogram;  // destination ZC count -> NFs
};

SeparationMetrics separation_metrics(const std::vector<NetworkFlow>& nfs);

enum class Verdict { Legitimate, Oversupplied, Permitted, Forbidden };
const char* verdict_name(Verdict v);

struct PathVerdict {
  std::string src_zc;
  std::string dst_zc;
  std::uint32_t cf_id = 0;
  Verdict verdict = Verdict::Forbidden;
};

// Every (src_zc, dst_zc != src_zc, backbone CF), in zone then cf order.
std::vector<PathVerdict> classify_paths(const net::CommunicationMatrix& m, const Embedder& e,
                                        const std::vector<NetworkFlow>& nfs);

struct AggregationResult {
  double avg_frame_bytes = 0;
  std::int64_t frames = 0;
  double sent_bw_bps = 0;
  double received_bw_bps = 0;
  std::map<std::string, double> sent_by_zc;
  std::map<std::string, double> received_by_zc;
};

// Messages of every backbone CF from t=0 with their period over `horizon_us`,
// packed per NF into frames released at interval ends or when full. interval 0
// sends one frame per message. Throws AggregationWithExposed for an exposed
// strategy with a non-zero interval.
AggregationResult aggregation_model(const net::CommunicationMatrix& m, const Embedder& e, std::int64_t interval_us,
                                    std::int64_t horizon_us = 1'000'000);

// Frame size (no preamble) of one tunnel or exposed frame with the given records.
int frame_bytes(const Layout& l, Strategy s, const std::vector<int>& payloads);

void write_separation_csv(std::ostream& out, const std::vector<std::pair<Strategy, SeparationMetrics>>& rows);
void write_classification_csv(std::ostream& out, Strategy s, const std::vector<PathVerdict>& rows, bool header = true);
struct AggregationRow {
  Strategy strategy;
  std::int64_t interval_us = 0;
  AggregationResult result;
};
void write_aggregation_csv(std::ostream& out, const std::vector<AggregationRow>& rows);

}  // namespace tssdn::sep
