#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "tssdn/attacksim.hpp"
#include "tssdn/error.hpp"

using namespace tssdn;
using namespace tssdn::atk;

namespace {

const std::string kDir = std::string(TSSDN_SOURCE_DIR) + "/scenarios/";

const Fixture& fixture() {
  static const Fixture fx = Fixture::load(kDir + "attack/backbone.json");
  return fx;
}

AttackOptions with_acl() {
  AttackOptions o;
  o.access = AccessControl::On;
  return o;
}

std::set<std::uint16_t> listening(const std::set<std::uint16_t>& open, const std::vector<std::uint16_t>& probed) {
  std::set<std::uint16_t> out;
  for (auto p : probed)
    if (open.count(p)) out.insert(p);
  return out;
}

}  // namespace

TEST(Fixture, LoadsBackbone) {
  const auto& fx = fixture();
  EXPECT_EQ(fx.attacker, "GW");
  EXPECT_EQ(fx.target, "HPC");
  EXPECT_EQ(fx.zones.size(), 4u);
  std::size_t hosts = 0;
  for (const auto& n : fx.topo.nodes()) hosts += n.kind == net::NodeKind::Host;
  EXPECT_EQ(fx.scan_candidates.size(), hosts - 1 + 4);
  EXPECT_EQ(fx.acl.fallback(), ctl::Verdict::Deny);
}

TEST(Fixture, RejectsBadInput) {
  EXPECT_THROW(Fixture::from_json("{"), Error);
  EXPECT_THROW(Fixture::from_json(R"({"switches":["S"],"hosts":[{"id":"A","switch":"S"}],"attacker":"X",
                                      "target":"A","zones":[]})"),
               Error);
}

// ---- host scan -----------------------------------------------------------------------------

TEST(HostScan, FindsEveryHostWithoutAccessControl) {
  const auto& fx = fixture();
  const auto r = run_host_scan(fx, {});
  std::set<std::string> want;
  for (const auto& n : fx.topo.nodes())
    if (n.kind == net::NodeKind::Host && n.id != fx.attacker) want.insert(n.id);
  EXPECT_EQ(r.hosts_discovered, want);
  EXPECT_EQ(r.sent, fx.scan_candidates.size());
}

TEST(HostScan, ArpAllowedStillDiscovers) {
  const auto r = run_host_scan(fixture(), with_acl());
  EXPECT_EQ(r.hosts_discovered.size(), 11u);
  EXPECT_GT(r.to_controller, 0u);
}

TEST(HostScan, ArpDeniedFindsNothing) {
  auto o = with_acl();
  o.acl = ctl::AclPolicy::load(kDir + "attack/deny_arp.acl");
  const auto r = run_host_scan(fixture(), o);
  EXPECT_TRUE(r.hosts_discovered.empty());
  EXPECT_EQ(r.to_controller, r.sent);
}

// ---- port scan -----------------------------------------------------------------------------

TEST(PortScan, OpenPortsWithoutAccessControl) {
  const auto& fx = fixture();
  const auto r = run_port_scan(fx, {});
  EXPECT_EQ(r.tcp_open, listening(fx.tcp_listen, fx.probe_ports));
  EXPECT_EQ(r.udp_open, listening(fx.udp_listen, fx.probe_ports));
  EXPECT_EQ(r.sent, 2 * fx.probe_ports.size());
}

TEST(PortScan, RandomServiceSetsAreFound) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 20; ++i) {
    Fixture fx = fixture();
    fx.tcp_listen.clear();
    fx.udp_listen.clear();
    for (auto p : fx.probe_ports) {
      if (rng() % 2) fx.tcp_listen.insert(p);
      if (rng() % 2) fx.udp_listen.insert(p);
    }
    const auto r = run_port_scan(fx, {});
    EXPECT_EQ(r.tcp_open, fx.tcp_listen) << i;
    EXPECT_EQ(r.udp_open, fx.udp_listen) << i;
  }
}

TEST(PortScan, AccessControlHidesServices) {
  const auto r = run_port_scan(fixture(), with_acl());
  EXPECT_TRUE(r.tcp_open.empty());
  EXPECT_TRUE(r.udp_open.empty());
  EXPECT_EQ(r.delivered.count("HPC") ? r.delivered.at("HPC") : 0u, 0u);
}

TEST(PortScan, ForgedAllowedTupleGetsThrough) {
  auto o = with_acl();
  o.forged = ForgedProbe{net::Ipv4Addr::parse("10.0.0.8"), 40000, 443};
  const auto r = run_port_scan(fixture(), o);
  EXPECT_EQ(r.tcp_open, (std::set<std::uint16_t>{443}));
  EXPECT_TRUE(r.udp_open.empty());
}

// ---- SYN flood -----------------------------------------------------------------------------

TEST(SynFlood, ReachesTargetWithoutAccessControl) {
  AttackOptions o;
  o.syn_count = 300;
  const auto r = run_syn_flood(fixture(), o);
  EXPECT_EQ(r.sent, 300u);
  EXPECT_EQ(r.delivered.at("HPC"), 300u);
  EXPECT_EQ(r.to_controller, 0u);
}

TEST(SynFlood, AccessControlDivertsToController) {
  auto o = with_acl();
  o.syn_count = 300;
  const auto r = run_syn_flood(fixture(), o);
  EXPECT_EQ(r.delivered.count("HPC") ? r.delivered.at("HPC") : 0u, 0u);
  // Each SYN uses a fresh source port, so none hits an installed rule.
  EXPECT_EQ(r.to_controller, 300u);
}

// ---- traces & replay -------------------------------------------------------------------------

TEST(Trace, RoundTrip) {
  const auto m = net::CommunicationMatrix::load(kDir + "matrices/vehicle4.csv");
  for (auto s : sep::kAllStrategies) {
    const sep::Embedder e(m, s, {}, topology_addressing(fixture().topo));
    const auto rows = generate_trace(m, e, "FL", 200'000);
    std::stringstream ss;
    write_trace(ss, rows);
    const auto back = parse_trace(ss);
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EXPECT_EQ(back[i].rel_t_us, rows[i].rel_t_us);
      EXPECT_EQ(back[i].headers, rows[i].headers) << i;
      EXPECT_EQ(back[i].wire_bytes, rows[i].wire_bytes);
    }
  }
}

TEST(Trace, ErrorsNameTheRow) {
  std::istringstream in(std::string(kTraceHeader) + "\n0,01:00:5e:00:00:01,02:00:00:00:00:01,0x0800,,0,,,,,64\nx\n");
  try {
    parse_trace(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
  std::istringstream bad("a,b\n");
  EXPECT_THROW(parse_trace(bad), Error);
}

TEST(Trace, GeneratedCountsFollowPeriods) {
  const auto m = net::CommunicationMatrix::load(kDir + "matrices/vehicle4.csv");
  const sep::Embedder e(m, sep::Strategy::ExposedPerMessage);
  std::size_t want = 0;
  for (const auto& cf : net::backbone_flows(m))
    if (cf.sender_zc == "FL") want += static_cast<std::size_t>((1'000'000 + cf.period_us - 1) / cf.period_us);
  const auto rows = generate_trace(m, e, "FL", 1'000'000);
  EXPECT_EQ(rows.size(), want);
  EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end(),
                             [](const TraceRow& a, const TraceRow& b) { return a.rel_t_us < b.rel_t_us; }));
}

class Replay : public ::testing::TestWithParam<sep::Strategy> {};

TEST_P(Replay, DeliveryFollowsEmbedding) {
  const auto& fx = fixture();
  const auto m = net::CommunicationMatrix::load(kDir + "matrices/vehicle4.csv");
  const sep::Embedder e(m, GetParam(), {}, topology_addressing(fx.topo));
  const auto trace = generate_trace(m, e, "FL", 300'000);

  // Oracle: hidden groups reach every zone; exposed groups only the CF's receivers.
  std::map<std::string, std::uint64_t> want;
  for (const auto& z : fx.zones) want[z] = 0;
  for (const auto& row : trace) {
    for (const auto& cf : net::backbone_flows(m)) {
      if (cf.sender_zc != "FL" || e.embed(cf) != row.headers) continue;
      for (const auto& z : fx.zones)
        if (GetParam() != sep::Strategy::ExposedPerMessage || cf.receiver_zcs().count(z)) ++want[z];
      break;
    }
  }

  for (auto pol : {netsim::MulticastPolicy::Drop, netsim::MulticastPolicy::Broadcast}) {
    AttackOptions o;
    o.policy = pol;
    const auto r = run_replay(fx, o, trace, m, e);
    EXPECT_EQ(r.sent, trace.size());
    for (const auto& z : fx.zones)
      EXPECT_EQ(r.delivered.count(z) ? r.delivered.at(z) : 0u, want[z]) << z << " " << policy_name(pol);
  }

  const auto on = run_replay(fx, with_acl(), trace, m, e);
  for (const auto& z : fx.zones) EXPECT_EQ(on.delivered.count(z) ? on.delivered.at(z) : 0u, 0u) << z;
  EXPECT_EQ(on.to_controller, trace.size());
}

INSTANTIATE_TEST_SUITE_P(Embeddings, Replay,
                         ::testing::Values(sep::Strategy::ExposedPerMessage, sep::Strategy::HiddenPerDomain,
                                           sep::Strategy::HiddenPerTopic),
                         [](const auto& info) { return std::string(sep::strategy_name(info.param)); });

TEST(Report, CsvRows) {
  AttackReport r;
  r.kind = AttackKind::PortScan;
  r.sent = 36;
  r.tcp_open = {22, 80};
  std::ostringstream os;
  write_report_csv(os, {r});
  const auto s = os.str();
  EXPECT_EQ(s.rfind("attack,access_control,multicast_policy,metric,value\n", 0), 0u);
  EXPECT_NE(s.find(",tcp_ports,2\n"), std::string::npos) << s;
}
