#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tssdn/controller.hpp"
#include "tssdn/dataplane.hpp"
#include "tssdn/desim.hpp"
#include "tssdn/netmodel.hpp"
#include "tssdn/txnsched.hpp"

namespace tssdn::netsim {

// Sdn: flow tables filled by the controller. Bridge: conventional learning
// switch with static FDB, group registration and local SRP handling.
enum class Mode { Sdn, Bridge };
enum class MulticastPolicy { Drop, Broadcast };

struct NetworkParams {
  Mode mode = Mode::Sdn;
  SimTime t_fwd = 3'000;
  SimTime ifg = 960;
  // Switch <-> controller flow control channel (packet-in, flow-mod, packet-out).
  SimTime ctrl_latency = 100 * kNsPerUs;
  // Device management channel used by configuration transactions.
  SimTime mgmt_latency = 200 * kNsPerUs;
  std::int64_t ctrl_bps = 100'000'000;
  int ctrl_msg_bytes = 128;
  SimTime ctrl_processing = 0;
  SimTime srp_processing = 0;
  MulticastPolicy unknown_multicast = MulticastPolicy::Drop;
  bool learning = true;
  bool prefill_fdb = true;
  bool trace = true;
};

// Copy-level frame accounting. Every copy that enters the network is
// originated (host send, packet-out) or replicated (multi-port forwarding);
// every copy leaves by delivery, drop or packet-in, or is still in flight.
struct Counters {
  std::uint64_t originated = 0;
  std::uint64_t replicated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t to_controller = 0;
};

class Network : public ctl::ControlIo, public txn::TxnTransport {
 public:
  using Receive = std::function<void(const std::string& host, const net::Frame& f, SimTime t)>;

  Network(sim::Kernel& kernel, net::Topology topo, NetworkParams params = {});
  ~Network() override;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  // ---- boot configuration --------------------------------------------------------------
  void install_static(const std::string& sw, dp::FlowRule rule);
  void set_ingress_filter(const net::PortRef& port, dp::IngressFilter filter);
  void set_gcl(const net::PortRef& port, dp::GateControlList gcl);
  // Group registration for every switch on the way to `host` (IGMP snooping result).
  void join_group(const std::string& host, net::MacAddr group);
  // Seals static tables. Sdn mode adds the SRP-to-controller static rule and
  // the table-miss-to-controller default in the dynamic table.
  void boot();
  bool booted() const { return booted_; }

  // ---- control plane ---------------------------------------------------------------------
  ctl::Controller& attach_controller(ctl::AclPolicy acl);
  ctl::Controller* controller() { return controller_.get(); }
  txn::Coordinator& attach_coordinator(txn::CoordinatorParams params);
  txn::Coordinator* coordinator() { return coordinator_.get(); }
  txn::ManagedDevice& device(const std::string& id);
  std::function<void(const std::string& device, SimTime t)> on_device_commit;

  void flow_mod(const std::string& sw, const dp::FlowRule& rule) override;
  void sr_mod(const std::string& sw, const dp::SrTableEntry& entry) override;
  void packet_out(const std::string& sw, const net::Frame& frame, const std::vector<int>& ports) override;

  void send(const std::string& device, txn::TxnMessage m) override;
  SimTime max_round_trip() const override;

  // ---- hosts -----------------------------------------------------------------------------
  // Assigns frame id and creation time, then queues the frame at the host port.
  std::uint64_t host_send(const std::string& host, net::Frame f);
  Receive on_receive;

  // ---- inspection ---------------------------------------------------------------------
  sim::Kernel& kernel() { return kernel_; }
  const net::Topology& topology() const { return topo_; }
  const NetworkParams& params() const { return params_; }
  const Counters& counters() const { return counters_; }
  // Copies queued at egress ports plus copies on a wire, in a pipeline or on
  // the control channel.
  std::uint64_t in_flight() const;
  dp::EgressPort& port(const net::PortRef& p);
  const dp::FlowTables& tables(const std::string& sw) const;
  const dp::SrTable& sr_table(const std::string& sw) const;
  std::uint64_t next_frame_id() const { return next_frame_id_; }

 private:
  struct Channel {
    SimTime free = 0;
  };
  struct BridgeStream {
    ctl::SrpMessage advertise;
    int talker_port = 0;
  };
  struct SwitchState {
    dp::FlowTables tables;
    dp::SrTable sr;
    std::map<int, dp::IngressFilter> filters;
    std::map<net::MacAddr, int> fdb;
    std::map<net::MacAddr, std::set<int>> groups;
    std::map<std::string, BridgeStream> srp;
    Channel to_ctrl, from_ctrl;
  };
  struct PortState {
    std::unique_ptr<dp::EgressPort> egress;
    std::optional<sim::EventHandle> wake;
    SimTime wake_at = 0;
  };

  bool is_switch(const std::string& id) const;
  SimTime channel_arrival(Channel& ch, SimTime latency);
  void trace(const std::string& node, int port, sim::TraceAction a, const net::Frame& f, std::string detail = {});

  void enqueue(const net::PortRef& p, net::Frame f);
  void kick(const net::PortRef& p, SimTime at);
  void service(const net::PortRef& p);
  void arrive(const std::string& node, int port, net::Frame f);
  void deliver(const std::string& host, int port, const net::Frame& f);
  void switch_receive(const std::string& sw, int port, net::Frame f);
  void forward(const std::string& sw, int in_port, const net::Frame& f, const std::vector<int>& ports);
  void drop(const std::string& node, int port, const net::Frame& f, sim::TraceAction a, std::string why);
  void to_controller(const std::string& sw, int port, const net::Frame& f);

  void sdn_receive(SwitchState& s, const std::string& sw, int in_port, const net::Frame& f);
  std::vector<int> bridge_ports(SwitchState& s, const std::string& sw, int in_port, const net::Frame& f,
                                std::string& why);
  void bridge_srp(const std::string& sw, int in_port, const net::Frame& f);
  void apply_cbs(const std::string& sw, const dp::SrTable& sr);
  std::vector<int> flood_ports(const std::string& sw, int in_port) const;

  sim::Kernel& kernel_;
  net::Topology topo_;
  NetworkParams params_;
  std::map<std::string, SwitchState> switches_;
  std::map<net::PortRef, PortState> ports_;
  std::map<std::string, std::unique_ptr<txn::ManagedDevice>> devices_;
  std::map<std::string, Channel> mgmt_down_, mgmt_up_;
  std::unique_ptr<ctl::Controller> controller_;
  std::unique_ptr<txn::Coordinator> coordinator_;
  Counters counters_;
  std::uint64_t in_transit_ = 0;
  std::uint64_t next_frame_id_ = 1;
  bool booted_ = false;
};

}  // namespace tssdn::netsim
