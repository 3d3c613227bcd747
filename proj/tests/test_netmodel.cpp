#include <gtest/gtest.h>

#include <sstream>

#include "tssdn/error.hpp"
#include "tssdn/netmodel.hpp"

using namespace tssdn;
using namespace tssdn::net;

namespace {

const std::string kHeader = CommunicationMatrix::kHeader;

CommunicationMatrix parse(const std::string& body) {
  std::istringstream in(kHeader + "\n" + body);
  return CommunicationMatrix::parse(in);
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::Usage;
}

}  // namespace

TEST(Matrix, RowMapsFields) {
  const auto m = parse("7,ecu_a,ZC_FL,ecu_b@ZC_FR,chassis,steering,10000,8,6\n");
  ASSERT_EQ(m.flows().size(), 1u);
  const auto& cf = m.flows()[0];
  EXPECT_EQ(cf.cf_id, 7u);
  EXPECT_EQ(cf.sender_ecu, "ecu_a");
  EXPECT_EQ(cf.sender_zc, "ZC_FL");
  ASSERT_EQ(cf.receivers.size(), 1u);
  EXPECT_EQ(cf.receivers[0], (Receiver{"ecu_b", "ZC_FR"}));
  EXPECT_EQ(cf.domain, "chassis");
  EXPECT_EQ(cf.topic, "steering");
  EXPECT_EQ(cf.period_us, 10000);
  EXPECT_EQ(cf.payload_bytes, 8);
  EXPECT_EQ(cf.priority, 6);
}

TEST(Matrix, DuplicateIdRejected) {
  EXPECT_EQ(code_of([] {
              parse("7,a,Z1,b@Z2,d,t,10,8,1\n7,c,Z1,b@Z2,d,t,10,8,1\n");
            }),
            Errc::DuplicateId);
}

TEST(Matrix, MalformedRowReportsRow) {
  try {
    parse("1,a,Z1,b@Z2,d,t,10,8,1\n2,a,Z1,b@Z2,d,t,ten,8,1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Parse);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(Matrix, UnknownZoneWhenZonesDeclared) {
  std::istringstream in(kHeader + "\n1,a,Z1,b@Z9,d,t,10,8,1\n");
  EXPECT_EQ(code_of([&] { CommunicationMatrix::parse(in, std::vector<std::string>{"Z1", "Z2"}); }), Errc::UnknownZone);
}

TEST(Matrix, TopicBelongsToOneDomain) {
  EXPECT_EQ(code_of([] { parse("1,a,Z1,b@Z2,d1,t,10,8,1\n2,a,Z1,b@Z2,d2,t,10,8,1\n"); }), Errc::Parse);
}

TEST(Matrix, LocalFlowsExcludedFromBackbone) {
  const auto m = parse("1,a,Z1,b@Z1;c@Z1,d,t,10,8,1\n2,a,Z1,b@Z2;c@Z3,d,t,10,8,1\n");
  const auto bb = backbone_flows(m);
  ASSERT_EQ(bb.size(), 1u);
  EXPECT_EQ(bb[0].cf_id, 2u);
  EXPECT_FALSE(m.flows()[0].crosses_backbone());
}

TEST(Matrix, FixtureWithThreeLocalFlows) {
  const auto m = CommunicationMatrix::load(std::string(TSSDN_SOURCE_DIR) + "/scenarios/matrices/mixed10.csv");
  EXPECT_EQ(m.flows().size(), 10u);
  // Counted by hand: 102, 104 and 108 stay inside their zone.
  EXPECT_EQ(backbone_flows(m).size(), 7u);
}

TEST(Matrix, BackboneFlowsSortedById) {
  const auto m = parse("9,a,Z1,b@Z2,d,t,10,8,1\n3,a,Z2,b@Z1,d,t,10,8,1\n5,a,Z1,b@Z1,d,t,10,8,1\n");
  const auto bb = backbone_flows(m);
  ASSERT_EQ(bb.size(), 2u);
  EXPECT_EQ(bb[0].cf_id, 3u);
  EXPECT_EQ(bb[1].cf_id, 9u);
}

TEST(Matrix, RoundTrip) {
  const auto m = CommunicationMatrix::load(std::string(TSSDN_SOURCE_DIR) + "/scenarios/matrices/zonal12.csv");
  std::ostringstream out;
  m.write(out);
  std::istringstream in(out.str());
  EXPECT_EQ(CommunicationMatrix::parse(in), m);
}

TEST(Frame, TransmissionTime) {
  EXPECT_EQ(transmission_time(64, 100'000'000), 5'760);
  EXPECT_EQ(transmission_time(1522, 100'000'000), 122'400);
}

TEST(Frame, WireBytesClamped) {
  EXPECT_EQ(wire_bytes_for(18, 8), kMinFrameBytes);
  EXPECT_EQ(wire_bytes_for(18, 2000), kMaxFrameBytes);
  EXPECT_EQ(wire_bytes_for(18, 100), 118);
}

TEST(Headers, L4RequiresL3) {
  HeaderTuple h;
  h.src_port = 10;
  EXPECT_FALSE(h.valid());
  h.src_ip = Ipv4Addr::parse("10.0.0.1");
  h.dst_ip = Ipv4Addr::parse("10.0.0.2");
  EXPECT_TRUE(h.valid());
  h.pcp = 8;
  EXPECT_FALSE(h.valid());
}

TEST(Headers, PatternParseAndMatch) {
  const auto p = HeaderPattern::parse("ethertype=arp;src_ip=10.0.0.1");
  HeaderTuple h;
  h.ethertype = ethertype::kArp;
  h.src_ip = Ipv4Addr::parse("10.0.0.1");
  EXPECT_TRUE(p.matches(h));
  h.src_ip = Ipv4Addr::parse("10.0.0.2");
  EXPECT_FALSE(p.matches(h));
  EXPECT_EQ(code_of([] { HeaderPattern::parse("colour=blue"); }), Errc::Parse);
}

TEST(Addresses, MacAndIpRoundTrip) {
  EXPECT_EQ(MacAddr::parse("01:00:5e:01:02:03").str(), "01:00:5e:01:02:03");
  EXPECT_EQ(Ipv4Addr::parse("239.1.0.2").str(), "239.1.0.2");
  EXPECT_TRUE(MacAddr::parse("01:00:5e:01:02:03").is_multicast());
  EXPECT_EQ(multicast_mac_for(Ipv4Addr::parse("239.129.0.2")).str(), "01:00:5e:01:00:02");
}

TEST(Topology, HostNeedsExactlyOneLink) {
  Topology t;
  t.add_node("A", NodeKind::Host);
  t.add_node("S", NodeKind::Switch);
  t.add_node("T", NodeKind::Switch);
  t.add_link("A", "S");
  t.add_link("S", "T");
  EXPECT_NO_THROW(t.validate());
  t.add_link("A", "T");
  EXPECT_EQ(code_of([&] { t.validate(); }), Errc::InvalidTopology);
}

TEST(Topology, DisconnectedRejected) {
  Topology t;
  t.add_node("A", NodeKind::Host);
  t.add_node("S", NodeKind::Switch);
  t.add_node("B", NodeKind::Host);
  t.add_node("T", NodeKind::Switch);
  t.add_link("A", "S");
  t.add_link("B", "T");
  EXPECT_EQ(code_of([&] { t.validate(); }), Errc::InvalidTopology);
}

TEST(Topology, PortsFollowLinkOrder) {
  Topology t;
  t.add_node("S", NodeKind::Switch);
  t.add_node("A", NodeKind::Host);
  t.add_node("B", NodeKind::Host);
  t.add_link("S", "A");
  t.add_link("B", "S");
  EXPECT_EQ(t.port_towards("S", "A"), 1);
  EXPECT_EQ(t.port_towards("S", "B"), 2);
  EXPECT_EQ(t.peer("S", 2).node, "B");
  EXPECT_EQ(t.shortest_path("A", "B"), (std::vector<std::string>{"A", "S", "B"}));
}
