#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "tssdn/error.hpp"
#include "oracles.hpp"
#include "tssdn/secsep.hpp"

using namespace tssdn;
using namespace tssdn::sep;
using oracle::crossing;
using oracle::key_of;
using oracle::oracle_nfs;
using oracle::oracle_verdict;

namespace {

net::CommunicationMatrix load(const std::string& name) {
  return net::CommunicationMatrix::load(std::string(TSSDN_SOURCE_DIR) + "/scenarios/matrices/" + name);
}

// Random matrix: every topic belongs to one domain; some flows stay local.
net::CommunicationMatrix random_matrix(std::mt19937_64& rng) {
  const int zones = 2 + static_cast<int>(rng() % 4);
  const int domains = 1 + static_cast<int>(rng() % 3);
  const int topics = domains + static_cast<int>(rng() % 4);
  const int flows = 1 + static_cast<int>(rng() % 25);
  const std::int64_t periods[] = {1000, 5000, 10000, 20000, 100000};
  net::CommunicationMatrix m;
  for (int i = 0; i < flows; ++i) {
    net::ControlFlow cf;
    cf.cf_id = static_cast<std::uint32_t>(i + 1);
    const int z = static_cast<int>(rng() % zones);
    cf.sender_zc = "Z" + std::to_string(z);
    cf.sender_ecu = "E" + std::to_string(rng() % 6);
    const int t = static_cast<int>(rng() % topics);
    cf.topic = "t" + std::to_string(t);
    cf.domain = "d" + std::to_string(t % domains);
    cf.period_us = periods[rng() % 5];
    cf.payload_bytes = 1 + static_cast<int>(rng() % 64);
    cf.priority = static_cast<int>(rng() % 8);
    const int nrx = 1 + static_cast<int>(rng() % zones);
    std::set<int> rz;
    for (int r = 0; r < nrx; ++r) rz.insert(static_cast<int>(rng() % zones));
    for (int r : rz) cf.receivers.push_back({"R" + std::to_string(r), "Z" + std::to_string(r)});
    m.add(cf);
  }
  return m;
}

// Frames of one NF over the horizon, packing per interval bucket up to `cap` record bytes.
std::vector<std::vector<int>> oracle_frames(const net::CommunicationMatrix& m, const std::set<std::uint32_t>& members,
                                            std::int64_t interval, std::int64_t horizon, int cap) {
  std::map<std::int64_t, std::vector<std::pair<std::uint32_t, int>>> by_time;
  for (const auto& cf : m.flows())
    if (members.count(cf.cf_id))
      for (std::int64_t t = 0; t < horizon; t += cf.period_us) by_time[t].push_back({cf.cf_id, cf.payload_bytes});
  std::vector<std::vector<int>> frames;
  if (interval == 0) {
    for (auto& [t, v] : by_time) {
      std::sort(v.begin(), v.end());
      for (const auto& [id, p] : v) frames.push_back({p});
    }
    return frames;
  }
  std::map<std::int64_t, std::vector<std::pair<std::uint32_t, int>>> buckets;
  for (auto& [t, v] : by_time) {
    std::sort(v.begin(), v.end());
    for (const auto& x : v) buckets[t / interval].push_back(x);
  }
  for (const auto& [b, v] : buckets) {
    std::vector<int> cur;
    int used = 0;
    for (const auto& [id, p] : v) {
      if (!cur.empty() && used + 5 + p > cap) {
        frames.push_back(cur);
        cur.clear();
        used = 0;
      }
      cur.push_back(p);
      used += 5 + p;
    }
    if (!cur.empty()) frames.push_back(cur);
  }
  return frames;
}

int oracle_frame_bytes(Strategy s, const std::vector<int>& payloads) {
  int sum = 0;
  for (int p : payloads) sum += p;
  const int raw = s == Strategy::ExposedPerMessage ? 14 + 4 + sum + 4
                                                  : 14 + 4 + 20 + 8 + sum + 5 * static_cast<int>(payloads.size()) + 4;
  return std::max(64, raw);
}

}  // namespace

// ---- embedding ------------------------------------------------------------------------------

TEST(Embedding, ExposedCarriesFlowIdInDestination) {
  const auto m = load("zonal12.csv");
  const Embedder e(m, Strategy::ExposedPerMessage);
  const auto& cf = m.flows()[2];
  const auto h = e.embed(cf);
  EXPECT_EQ(h.dst_mac.value, 0x030000000000ULL | cf.cf_id);
  EXPECT_EQ(h.ethertype, 0x88B5);
  EXPECT_EQ(h.pcp, cf.priority);
  EXPECT_EQ(h.vlan_id, m.domain_index(cf.domain));
  EXPECT_FALSE(h.dst_ip.has_value());
  EXPECT_TRUE(h.valid());
}

TEST(Embedding, HiddenUsesGroupAddressAndClassSelector) {
  const auto m = load("zonal12.csv");
  const auto& cf = m.flows()[0];
  const auto d = Embedder(m, Strategy::HiddenPerDomain).embed(cf);
  const auto t = Embedder(m, Strategy::HiddenPerTopic).embed(cf);
  EXPECT_EQ(d.dst_ip->str(), "239.1.0." + std::to_string(m.domain_index(cf.domain)));
  EXPECT_EQ(t.dst_ip->str(), "239.2.0." + std::to_string(m.topic_index(cf.topic)));
  EXPECT_EQ(d.dst_mac, net::multicast_mac_for(*d.dst_ip));
  EXPECT_EQ(d.dscp, cf.priority << 3);
  EXPECT_EQ(d.pcp, *d.dscp >> 3);
  EXPECT_EQ(d.src_port, 30490);
  EXPECT_EQ(d.dst_port, 30490);
  EXPECT_EQ(d.src_ip->str(), "10.0.1." + std::to_string(m.zone_index(cf.sender_zc) + 1));
  EXPECT_TRUE(d.valid());
}

TEST(Embedding, StrategyNames) {
  for (auto s : kAllStrategies) EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  EXPECT_EQ(parse_strategy("hidden-topic"), Strategy::HiddenPerTopic);
  EXPECT_THROW(parse_strategy("nope"), Error);
}

// ---- network flows --------------------------------------------------------------------------

TEST(NetworkFlows, ReferenceMatrix) {
  const auto m = load("mixed10.csv");
  const auto msg = separation_metrics(derive_network_flows(m, Embedder(m, Strategy::ExposedPerMessage)));
  EXPECT_EQ(msg.nf_count, 7u);
  EXPECT_EQ(msg.nfs_multi, 0u);
  EXPECT_EQ(msg.max_cfs, 1u);
  // 101/110 and 106/107 share sender, topic and priority.
  const auto topic = derive_network_flows(m, Embedder(m, Strategy::HiddenPerTopic));
  EXPECT_EQ(topic.size(), 5u);
  EXPECT_EQ(topic[0].member_cfs, (std::set<std::uint32_t>{101, 110}));
  EXPECT_EQ(topic[0].dest_zcs, (std::set<std::string>{"ZB", "ZC"}));
}

TEST(NetworkFlows, SingletonTopicsMatchExposedCount) {
  net::CommunicationMatrix m;
  for (std::uint32_t i = 1; i <= 5; ++i)
    m.add({i, "E", "ZA", {{"R", "ZB"}}, "d", "t" + std::to_string(i), 10000, 8, 3});
  EXPECT_EQ(derive_network_flows(m, Embedder(m, Strategy::HiddenPerTopic)).size(), 5u);
  EXPECT_EQ(derive_network_flows(m, Embedder(m, Strategy::HiddenPerDomain)).size(), 1u);
}

TEST(NetworkFlows, MatchOracleOnRandomMatrices) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 150; ++i) {
    const auto m = random_matrix(rng);
    for (auto s : kAllStrategies) {
      const auto nfs = derive_network_flows(m, Embedder(m, s));
      const auto want = oracle_nfs(m, s);
      ASSERT_EQ(nfs.size(), want.size()) << "case " << i << " " << strategy_name(s);
      std::set<std::set<std::uint32_t>> got_members, want_members;
      for (const auto& nf : nfs) got_members.insert(nf.member_cfs);
      for (const auto& [k, nf] : want) want_members.insert(nf.members);
      EXPECT_EQ(got_members, want_members);
      for (const auto& nf : nfs) {
        const auto& ref = want.at(key_of(s, *std::find_if(m.flows().begin(), m.flows().end(),
                                                          [&](const auto& c) { return c.cf_id == *nf.member_cfs.begin(); }),
                                         nf.source_zc));
        EXPECT_EQ(nf.dest_zcs, ref.dests);
      }
      // Every backbone CF lands in exactly one NF.
      std::size_t total = 0;
      for (const auto& nf : nfs) total += nf.member_cfs.size();
      EXPECT_EQ(total, crossing(m).size());
    }
  }
}

TEST(NetworkFlows, Metrics) {
  std::vector<NetworkFlow> nfs(3);
  nfs[0].member_cfs = {1};
  nfs[1].member_cfs = {2, 3, 4};
  nfs[2].member_cfs = {5, 6};
  nfs[0].dest_zcs = {"a"};
  nfs[1].dest_zcs = {"a", "b"};
  nfs[2].dest_zcs = {"b"};
  const auto r = separation_metrics(nfs);
  EXPECT_EQ(r.nf_count, 3u);
  EXPECT_EQ(r.nfs_multi, 2u);
  EXPECT_EQ(r.min_cfs, 1u);
  EXPECT_EQ(r.max_cfs, 3u);
  EXPECT_DOUBLE_EQ(r.avg_cfs, 2.0);
  EXPECT_EQ(r.dest_histogram, (std::map<std::size_t, std::size_t>{{1, 2}, {2, 1}}));
  EXPECT_EQ(separation_metrics({}).nf_count, 0u);
}

// ---- classification -----------------------------------------------------------------------

TEST(Classification, TotalAndMatchesOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto m = random_matrix(rng);
    const auto bb = crossing(m);
    for (auto s : kAllStrategies) {
      const Embedder e(m, s);
      const auto rows = classify_paths(m, e, derive_network_flows(m, e));
      const std::size_t z = m.zones().size();
      ASSERT_EQ(rows.size(), z * (z - 1) * bb.size());
      std::set<std::tuple<std::string, std::string, std::uint32_t>> seen;
      for (const auto& r : rows) {
        EXPECT_TRUE(seen.insert({r.src_zc, r.dst_zc, r.cf_id}).second);
        const auto& cf = *std::find_if(bb.begin(), bb.end(), [&](const auto& c) { return c.cf_id == r.cf_id; });
        EXPECT_EQ(r.verdict, oracle_verdict(m, s, r.src_zc, r.dst_zc, cf))
            << "case " << i << " " << strategy_name(s) << " " << r.src_zc << "->" << r.dst_zc << " cf " << r.cf_id;
      }
    }
  }
}

TEST(Classification, CoarserEmbeddingNeverPermitsLess) {
  std::mt19937_64 rng(9);
  auto loose = [](const net::CommunicationMatrix& m, Strategy s) {
    const Embedder e(m, s);
    std::set<std::tuple<std::string, std::string, std::uint32_t>> out;
    for (const auto& r : classify_paths(m, e, derive_network_flows(m, e)))
      if (r.verdict == Verdict::Permitted || r.verdict == Verdict::Oversupplied) out.insert({r.src_zc, r.dst_zc, r.cf_id});
    return out;
  };
  for (int i = 0; i < 100; ++i) {
    const auto m = random_matrix(rng);
    const auto msg = loose(m, Strategy::ExposedPerMessage);
    const auto topic = loose(m, Strategy::HiddenPerTopic);
    const auto domain = loose(m, Strategy::HiddenPerDomain);
    EXPECT_TRUE(msg.empty());
    EXPECT_TRUE(std::includes(domain.begin(), domain.end(), topic.begin(), topic.end())) << "case " << i;
  }
}

// ---- aggregation -----------------------------------------------------------------------------

TEST(Aggregation, FrameSizes) {
  const Layout l;
  EXPECT_EQ(frame_bytes(l, Strategy::ExposedPerMessage, {8}), 64);
  EXPECT_EQ(frame_bytes(l, Strategy::ExposedPerMessage, {64}), 86);
  EXPECT_EQ(frame_bytes(l, Strategy::HiddenPerDomain, {8}), 64);
  EXPECT_EQ(frame_bytes(l, Strategy::HiddenPerDomain, {8, 8}), 76);
  EXPECT_EQ(frame_bytes(l, Strategy::HiddenPerTopic, {64}), oracle_frame_bytes(Strategy::HiddenPerTopic, {64}));
}

TEST(Aggregation, Errors) {
  const auto m = load("zonal12.csv");
  const Embedder exposed(m, Strategy::ExposedPerMessage);
  try {
    aggregation_model(m, exposed, 10000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AggregationWithExposed);
  }
  EXPECT_NO_THROW(aggregation_model(m, exposed, 0));
  EXPECT_THROW(aggregation_model(m, Embedder(m, Strategy::HiddenPerDomain), -1), Error);
}

TEST(Aggregation, MatchesOracleOnRandomMatrices) {
  std::mt19937_64 rng(13);
  const std::int64_t intervals[] = {0, 1000, 10000, 50000};
  for (int i = 0; i < 100; ++i) {
    const auto m = random_matrix(rng);
    for (auto s : kAllStrategies) {
      for (auto iv : intervals) {
        if (s == Strategy::ExposedPerMessage && iv > 0) continue;
        const auto r = aggregation_model(m, Embedder(m, s), iv);
        std::int64_t frames = 0, bytes = 0;
        double sent = 0, recv = 0;
        for (const auto& [k, nf] : oracle_nfs(m, s)) {
          for (const auto& f : oracle_frames(m, nf.members, iv, 1'000'000, 1522 - 50)) {
            const int fb = oracle_frame_bytes(s, f);
            ++frames;
            bytes += fb;
            sent += (fb + 20) * 8.0;
            recv += (fb + 20) * 8.0 * static_cast<double>(nf.dests.size());
          }
        }
        ASSERT_EQ(r.frames, frames) << "case " << i << " " << strategy_name(s) << " " << iv;
        EXPECT_NEAR(r.avg_frame_bytes, frames ? static_cast<double>(bytes) / static_cast<double>(frames) : 0.0, 1e-9);
        EXPECT_NEAR(r.sent_bw_bps, sent, 1e-6);
        EXPECT_NEAR(r.received_bw_bps, recv, 1e-6);
      }
    }
  }
}

TEST(Aggregation, LongerIntervalsNeverAddFrames) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const auto m = random_matrix(rng);
    const Embedder e(m, Strategy::HiddenPerDomain);
    std::int64_t prev = aggregation_model(m, e, 0).frames;
    for (std::int64_t iv : {1000, 10000, 100000}) {
      const auto f = aggregation_model(m, e, iv).frames;
      EXPECT_LE(f, prev) << "case " << i << " interval " << iv;
      prev = f;
    }
  }
}

TEST(Aggregation, FullFramesSplit) {
  net::CommunicationMatrix m;
  for (std::uint32_t i = 1; i <= 30; ++i) m.add({i, "E", "ZA", {{"R", "ZB"}}, "d", "t", 1'000'000, 60, 3});
  const auto r = aggregation_model(m, Embedder(m, Strategy::HiddenPerDomain), 10000);
  // 30 records of 65 bytes against 1472 bytes of room: 22 + 8.
  EXPECT_EQ(r.frames, 2);
}

// ---- reports ---------------------------------------------------------------------------------

TEST(Reports, SeparationCsv) {
  SeparationMetrics s;
  s.nf_count = 3;
  s.nfs_multi = 1;
  s.min_cfs = 1;
  s.avg_cfs = 4.0 / 3.0;
  s.max_cfs = 2;
  std::ostringstream os;
  write_separation_csv(os, {{Strategy::HiddenPerTopic, s}});
  EXPECT_EQ(os.str(), "strategy,nf_count,nfs_multi,min_cfs,avg_cfs,max_cfs\ntopic,3,1,1,1.33,2\n");
}

TEST(Reports, ClassificationCsv) {
  std::ostringstream os;
  write_classification_csv(os, Strategy::HiddenPerDomain, {{"ZA", "ZB", 7, Verdict::Permitted}});
  EXPECT_EQ(os.str(), "strategy,src_zc,dst_zc,cf_id,verdict\ndomain,ZA,ZB,7,permitted\n");
}
