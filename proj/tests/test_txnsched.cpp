#include <gtest/gtest.h>

#include <sstream>

#include "tssdn/error.hpp"
#include "tssdn/txnsched.hpp"

using namespace tssdn;
using namespace tssdn::txn;

namespace {

net::Topology line() {
  net::Topology t;
  t.add_node("SwA", net::NodeKind::Switch);
  t.add_node("SwB", net::NodeKind::Switch);
  t.add_node("H1", net::NodeKind::Host);
  t.add_node("H2", net::NodeKind::Host);
  t.add_link("SwA", "SwB");
  t.add_link("H1", "SwA");
  t.add_link("H2", "SwB");
  return t;
}

const auto kK = bounds::TimingConstants::for_link(100'000'000);

bounds::SyncFlow flow(const std::string& id, SimTime offset) {
  bounds::SyncFlow f;
  f.id = id;
  f.path = {"H1", "SwA", "SwB", "H2"};
  f.offset = offset;
  return f;
}

bounds::SlotPlan plan(std::vector<bounds::SyncFlow> flows) { return bounds::place_slots(flows, line(), kK).plan; }

struct Bench {
  sim::Kernel k;
  DirectTransport tr{k, 50 * kNsPerUs};
  Coordinator c;
  std::map<std::string, ManagedDevice> devs;

  explicit Bench(CoordinatorParams p = {}) : c(k, tr, p) {
    tr.attach(c);
    for (const auto* id : {"H1", "SwA", "SwB"}) {
      auto [it, _] = devs.emplace(id, ManagedDevice(id));
      tr.add_device(it->second);
    }
  }
};

}  // namespace

// ---- planning -------------------------------------------------------------------------

TEST(CommitOrder, AddAndShiftLaterRunBackwards) {
  const std::vector<std::string> p{"a", "b", "c"};
  EXPECT_EQ(commit_order(OpKind::AddSlot, p), (std::vector<std::string>{"c", "b", "a"}));
  EXPECT_EQ(commit_order(OpKind::ShiftLater, p), (std::vector<std::string>{"c", "b", "a"}));
  EXPECT_EQ(commit_order(OpKind::RemoveSlot, p), p);
  EXPECT_EQ(commit_order(OpKind::ShiftEarlier, p), p);
}

TEST(PlanUpdate, ClassifiesEachFlow) {
  const auto cur = plan({flow("A", 0), flow("B", 400'000), flow("C", 600'000)});
  const auto tgt = plan({flow("A", 100'000), flow("B", 300'000), flow("D", 800'000)});
  const auto ops = plan_update(cur, tgt);
  ASSERT_EQ(ops.size(), 4u);
  EXPECT_EQ(ops[0].flow, "A");
  EXPECT_EQ(ops[0].kind, OpKind::ShiftLater);
  EXPECT_EQ(ops[1].kind, OpKind::ShiftEarlier);
  EXPECT_EQ(ops[2].kind, OpKind::RemoveSlot);
  EXPECT_EQ(ops[3].kind, OpKind::AddSlot);
  EXPECT_EQ(ops[3].path, (std::vector<std::string>{"H1", "SwA", "SwB"}));
  EXPECT_EQ(ops[3].required_order(), (std::vector<std::string>{"SwB", "SwA", "H1"}));
}

TEST(PlanUpdate, IdenticalPlansNeedNothing) {
  const auto p = plan({flow("A", 0)});
  EXPECT_TRUE(plan_update(p, p).empty());
}

TEST(PlanUpdate, OverlapWithRetainedSlotUnrealizable) {
  const auto cur = plan({flow("A", 0), flow("B", 500'000)});
  auto tgt = cur;  // A moved onto B's slots; B left untouched
  for (auto& w : tgt.windows)
    if (w.flow == "A") w.start += 500'000;
  try {
    plan_update(cur, tgt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Unrealizable);
  }
}

TEST(MergedOrder, OpposingOpsConflict) {
  const auto cur = plan({flow("A", 0), flow("B", 400'000)});
  const auto tgt = plan({flow("A", 100'000), flow("B", 300'000)});
  const auto ops = plan_update(cur, tgt);
  EXPECT_FALSE(merged_order(ops).has_value());
  const auto groups = split_transaction(ops);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].sequence, (std::vector<std::string>{"SwB", "SwA", "H1"}));
  EXPECT_EQ(groups[1].sequence, (std::vector<std::string>{"H1", "SwA", "SwB"}));
}

TEST(MergedOrder, CompatibleOpsShareGroup) {
  const auto cur = plan({flow("A", 0), flow("B", 400'000)});
  const auto tgt = plan({flow("A", 100'000), flow("B", 500'000)});
  const auto groups = split_transaction(plan_update(cur, tgt));
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].ops.size(), 2u);
}

TEST(ApplyOps, ReplacesOnlyListedFlows) {
  const auto cur = plan({flow("A", 0), flow("B", 400'000)});
  const auto tgt = plan({flow("A", 100'000), flow("B", 300'000)});
  const auto ops = plan_update(cur, tgt);
  const auto mid = apply_ops(cur, tgt, {ops[0]});
  EXPECT_EQ(mid.windows_of("A"), tgt.windows_of("A"));
  EXPECT_EQ(mid.windows_of("B"), cur.windows_of("B"));
}

TEST(DeviceConfigs, DroppedPortFallsBackOpen) {
  const auto cur = plan({flow("A", 0)});
  const auto cfg = device_configs(bounds::SlotPlan{}, cur);
  ASSERT_EQ(cfg.size(), 3u);
  for (const auto& [d, c] : cfg)
    for (const auto& [p, g] : c.ports) EXPECT_EQ(g.gates_at(123), 0xFF) << d;
}

TEST(PickCommitTime, BoundaryAndBusySpans) {
  const SimTime P = kNsPerMs;
  EXPECT_EQ(Coordinator::pick_commit_time(0, P, {}), 0);
  EXPECT_EQ(Coordinator::pick_commit_time(1, P, {}), P);
  EXPECT_EQ(Coordinator::pick_commit_time(3 * P, P, {}), 3 * P);
  // A window wrapping over the boundary pushes the commit to its end.
  EXPECT_EQ(Coordinator::pick_commit_time(1, P, {{900'000, 1'100'000}}), P + 100'000);
  // A window starting at the boundary does not contain it.
  EXPECT_EQ(Coordinator::pick_commit_time(1, P, {{0, 50'000}}), P);
}

// ---- devices --------------------------------------------------------------------------

TEST(ManagedDevice, LockIsExclusive) {
  ManagedDevice d("SwA");
  EXPECT_TRUE(d.lock(1));
  EXPECT_TRUE(d.lock(1));
  EXPECT_FALSE(d.lock(2));
  EXPECT_FALSE(d.unlock(2));
  EXPECT_TRUE(d.unlock(1));
  EXPECT_TRUE(d.lock(2));
}

TEST(ManagedDevice, EditValidatesAgainstSlice) {
  const auto p = plan({flow("A", 0)});
  const auto cfg = device_configs(p, {});
  bounds::SlotPlan slice = p;
  slice.windows.clear();
  for (const auto& w : p.windows)
    if (w.device == "SwA") slice.windows.push_back(w);

  ManagedDevice d("SwA");
  EXPECT_FALSE(d.edit(1, cfg.at("SwA"), slice).ok());  // not locked
  ASSERT_TRUE(d.lock(1));
  DeviceConfig open;
  open.ports[slice.windows[0].port] = dp::GateControlList::all_open(kNsPerMs);
  EXPECT_FALSE(d.edit(1, open, slice).ok());
  EXPECT_FALSE(d.candidate().has_value());
  EXPECT_TRUE(d.edit(1, cfg.at("SwA"), slice).ok());
  EXPECT_FALSE(d.commit(2));
  EXPECT_TRUE(d.commit(1));
  EXPECT_EQ(d.running(), cfg.at("SwA"));
}

// ---- coordinator ------------------------------------------------------------------------

TEST(Coordinator, SynchronousCommitIsSimultaneous) {
  Bench b;
  const auto cur = plan({});
  const auto tgt = plan({flow("A", 200'000)});
  auto t = make_transaction(1, "add", Strategy::Synchronous, plan_update(cur, tgt), cur, tgt);
  EXPECT_EQ(t.devices, (std::vector<std::string>{"H1", "SwA", "SwB"}));
  b.c.submit(t);
  b.k.run_until(20 * kNsPerMs);

  ASSERT_EQ(b.c.outcomes().size(), 1u);
  const auto& o = b.c.outcomes()[0];
  EXPECT_TRUE(o.committed);
  EXPECT_EQ(o.lock_sequence, t.devices);
  EXPECT_EQ(o.first_commit, o.last_commit);
  EXPECT_EQ(o.first_commit % kNsPerMs, 0);
  for (auto& [id, d] : b.devs) {
    ASSERT_EQ(d.commit_times.size(), 1u);
    EXPECT_EQ(d.commit_times[0], o.first_commit);
    EXPECT_EQ(d.running(), t.candidates.at(id));
    EXPECT_FALSE(d.lock_owner().has_value());
  }
}

TEST(Coordinator, OrderedCommitFollowsSequence) {
  Bench b({kNsPerMs, 300 * kNsPerUs});
  const auto cur = plan({});
  const auto tgt = plan({flow("A", 200'000)});
  b.c.submit(make_transaction(1, "add", Strategy::Ordered, plan_update(cur, tgt), cur, tgt));
  b.k.run_until(20 * kNsPerMs);
  ASSERT_TRUE(b.c.outcomes().at(0).committed);
  const SimTime h1 = b.devs.at("H1").commit_times.at(0);
  const SimTime a = b.devs.at("SwA").commit_times.at(0);
  const SimTime s = b.devs.at("SwB").commit_times.at(0);
  EXPECT_EQ(s % kNsPerMs, 350 * kNsPerUs);  // phase plus one-way latency
  EXPECT_EQ(a - s, 100 * kNsPerUs);  // one round trip per device
  EXPECT_EQ(h1 - a, 100 * kNsPerUs);
}

TEST(Coordinator, EditFailureRollsBackEverything) {
  Bench b;
  const auto cur = plan({});
  const auto tgt = plan({flow("A", 200'000)});
  auto t = make_transaction(1, "add", Strategy::Synchronous, plan_update(cur, tgt), cur, tgt);
  t.candidates["SwB"] = DeviceConfig{};  // misses the slot the slice requires
  b.c.submit(t);
  b.k.run_until(20 * kNsPerMs);
  const auto& o = b.c.outcomes().at(0);
  EXPECT_FALSE(o.committed);
  EXPECT_EQ(o.failed_device, "SwB");
  for (auto& [id, d] : b.devs) {
    EXPECT_TRUE(d.commit_times.empty()) << id;
    EXPECT_EQ(d.running(), DeviceConfig{}) << id;
    EXPECT_FALSE(d.candidate().has_value()) << id;
    EXPECT_FALSE(d.lock_owner().has_value()) << id;
  }
}

TEST(Coordinator, LockRefusalReleasesPrefix) {
  Bench b;
  ASSERT_TRUE(b.devs.at("SwA").lock(99));
  const auto cur = plan({});
  const auto tgt = plan({flow("A", 200'000)});
  b.c.submit(make_transaction(1, "add", Strategy::Synchronous, plan_update(cur, tgt), cur, tgt));
  b.k.run_until(20 * kNsPerMs);
  const auto& o = b.c.outcomes().at(0);
  EXPECT_FALSE(o.committed);
  EXPECT_EQ(o.failed_device, "SwA");
  EXPECT_EQ(o.lock_sequence, (std::vector<std::string>{"H1"}));
  EXPECT_FALSE(b.devs.at("H1").lock_owner().has_value());
  EXPECT_EQ(b.devs.at("SwA").lock_owner(), 99u);
}

TEST(Coordinator, TransactionsRunInSubmissionOrder) {
  Bench b;
  const auto p0 = plan({});
  const auto p1 = plan({flow("A", 200'000)});
  const auto p2 = plan({flow("A", 300'000)});
  std::vector<std::uint64_t> done;
  b.c.submit(make_transaction(1, "first", Strategy::Synchronous, plan_update(p0, p1), p0, p1),
             [&](const Outcome& o) { done.push_back(o.txn); });
  b.c.submit(make_transaction(2, "second", Strategy::Synchronous, plan_update(p1, p2), p1, p2),
             [&](const Outcome& o) { done.push_back(o.txn); });
  EXPECT_TRUE(b.c.busy());
  b.k.run_until(50 * kNsPerMs);
  EXPECT_EQ(done, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_LT(b.c.outcomes()[0].finished, b.c.outcomes()[1].first_commit);
  EXPECT_EQ(b.devs.at("SwA").running(), device_configs(p2, p1).at("SwA"));
}

TEST(TxnLog, CsvEscapesDetail) {
  TxnLog log;
  log.add({3, Phase::Locked, "SwA", 1500, "a,b\nc"});
  std::ostringstream os;
  log.write_csv(os);
  EXPECT_EQ(os.str(), "txn_id,phase,device,t_us,detail\n3,Locked,SwA,1.500,a;b c\n");
}
