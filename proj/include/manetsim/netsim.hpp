#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "manetsim/core.hpp"
#include "manetsim/sender.hpp"

namespace manetsim {

struct LinkParams {
  double bandwidth_bps = 2e6;
  double propagation_delay = 0.001;
  double packet_error_rate = 0.0;

  double tx_delay(int size_bytes) const { return size_bytes * 8.0 / bandwidth_bps; }
};

// Per-node drop-tail FIFO, capacity counted in bytes.
class NodeQueue {
 public:
  explicit NodeQueue(int capacity_bytes = 50000) : capacity_(capacity_bytes) {}

  // Drop-tail: false when the packet would push occupancy past capacity.
  bool try_enqueue(const Packet& p);
  std::optional<Packet> pop();

  int occupancy_bytes() const { return occupancy_; }
  int capacity_bytes() const { return capacity_; }
  bool empty() const { return fifo_.empty(); }
  std::size_t size() const { return fifo_.size(); }
  void set_capacity(int capacity_bytes) { capacity_ = capacity_bytes; }

 private:
  int capacity_;
  int occupancy_ = 0;
  std::deque<Packet> fifo_;
};

struct Route {
  std::vector<int> nodes;

  int hop_count() const { return static_cast<int>(nodes.size()) - 1; }
  bool contains(int node) const;
  // Next node along the route; reverse = true walks dst -> src (acks).
  std::optional<int> next_hop(int node, bool reverse) const;
};

struct ScriptAction {
  enum class Kind { Break, Restore };
  SimTime time = 0.0;
  Kind kind = Kind::Break;
  Route route;  // Restore only
};

using RouteScript = std::vector<ScriptAction>;

struct Topology {
  int node_count = 0;
  int src = 0;
  int dst = 0;
  LinkParams link;
  Route initial_route;
  RouteScript script;
  std::set<std::pair<int, int>> links;  // undirected
};

// Linear chain of n_hops+1 nodes; data flows 0 -> n, acks reverse.
Topology build_chain(int n_hops, LinkParams link);

// Topology whose active route follows the script. The node set and link
// set are derived from the initial route plus every scripted route; all
// routes must share the same endpoints. Throws SimError on a malformed
// script (unknown nodes, non-increasing times, unbalanced break/restore).
Topology build_mobile(Route initial_route, RouteScript script, LinkParams link);

// Script sanity checks, shared by both builders.
void validate_script(const Topology& topo);

enum class DropSite { QueueFull, Lottery, Outage, Flush };

const char* to_string(DropSite s);

struct DropRecord {
  SimTime time = 0.0;
  int node = -1;
  int flow = 0;
  std::uint64_t seq = 0;
  PacketKind kind = PacketKind::Data;
  std::uint32_t attempt = 1;
  LossCause truth = LossCause::Congestion;
  DropSite site = DropSite::QueueFull;
  int occupancy_bytes = 0;  // QueueFull
  int capacity_bytes = 0;   // QueueFull
  double draw = 0.0;        // Lottery
  double per = 0.0;         // Lottery
};

struct DeliveryRecord {
  SimTime time = 0.0;
  int flow = 0;
  std::uint64_t seq = 0;
  std::uint32_t attempt = 1;
};

struct NetTraceRow {
  SimTime time = 0.0;
  std::string event_kind;
  int node = -1;
  std::uint64_t seq = 0;
  std::string detail;
};

// Cumulative-ack receiver. In-order data advances the cumulative ack;
// out-of-order or duplicate data repeats the highest in-order seq.
class Receiver {
 public:
  struct Config {
    int ack_size_bytes = 40;
    int initial_ttl = 64;
    double clock_offset = 0.0;
    bool delayed_ack = false;  // ack every 2nd in-order packet
  };

  Receiver(Config config, int flow) : config_(config), flow_(flow) {}

  // Returns the ack to send, if any (delayed-ack mode may suppress one).
  std::optional<Packet> on_data(const Packet& pkt, SimTime now);

  std::uint64_t highest_inorder() const { return highest_inorder_; }
  std::uint64_t acks_generated() const { return acks_generated_; }

 private:
  Packet make_ack(PacketKind kind, int data_hops, SimTime now);

  Config config_;
  int flow_;
  std::uint64_t highest_inorder_ = 0;
  std::set<std::uint64_t> buffer_;
  int delayed_pending_ = 0;
  std::uint64_t acks_generated_ = 0;
};

struct SimConfig {
  double duration = 60.0;
  std::uint64_t seed = 1;
  int packet_size_bytes = 1000;
  int ack_size_bytes = 40;
  int queue_capacity_bytes = 50000;
  int initial_ttl = 64;
  double receiver_clock_offset = 0.0;
  bool delayed_ack = false;
  double flow_stagger = 1.0;
  bool record_net_trace = false;
};

// Deterministic discrete-event simulator: one event loop, events ordered
// by (time, insertion sequence). Wireless drops are decided by a keyed
// hash of (seed, link, flow, seq, attempt, hop) so the same packet copy
// meets the same fate under every sender algorithm.
class Simulator {
 public:
  Simulator(Topology topo, SimConfig config);

  int add_flow(SenderConfig sender_config);
  void run();

  const std::vector<LossEvent>& loss_events() const { return loss_events_; }
  const std::vector<DropRecord>& drop_records() const { return drop_records_; }
  const std::vector<DeliveryRecord>& deliveries() const { return deliveries_; }
  const std::vector<NetTraceRow>& net_trace() const { return net_trace_; }
  std::uint64_t spurious_detections() const { return spurious_detections_; }

  const Sender& sender(int flow) const { return *flows_[flow].sender; }
  const Receiver& receiver(int flow) const { return *flows_[flow].receiver; }
  int flow_count() const { return static_cast<int>(flows_.size()); }

  // Distinct data sequences that reached the destination, all flows.
  std::uint64_t distinct_delivered() const;
  std::uint64_t distinct_delivered(int flow) const;

  // Copies of data packets still queued or in flight (conservation checks).
  std::uint64_t residual_data_copies() const;

  const Topology& topology() const { return topo_; }
  const SimConfig& config() const { return config_; }

 private:
  struct NodeState {
    NodeQueue queue{50000};
    bool busy = false;
  };

  struct FlowState {
    std::unique_ptr<Sender> sender;
    std::unique_ptr<Receiver> receiver;
    SimTime start_time = 0.0;
    std::unordered_set<std::uint64_t> delivered_seqs;
    std::map<std::uint64_t, SimTime> delivery_time;         // latest per seq
    std::map<std::uint64_t, DropRecord> last_data_drop;     // latest per seq
    std::optional<DropRecord> last_ack_drop;
    std::uint64_t ack_counter = 0;
  };

  struct EventRec {
    SimTime time;
    std::uint64_t order;
    std::function<void()> fn;
  };
  struct EventCmp {
    bool operator()(const EventRec& a, const EventRec& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.order > b.order;
    }
  };

  void schedule(SimTime t, std::function<void()> fn);
  void apply_sender_output(int flow, SenderOutput&& out);
  void enqueue_at(int node, Packet&& pkt);
  void try_transmit(int node);
  void on_arrival(std::uint64_t inflight_id);
  void deliver_data(Packet&& pkt);
  void deliver_ack(Packet&& pkt);
  void apply_script_action(const ScriptAction& action);
  void record_drop(const Packet& pkt, int node, DropSite site, LossCause truth,
                   int occupancy = 0, int capacity = 0, double draw = 0.0, double per = 0.0);
  void label_and_record(int flow, LossEvent ev);
  std::optional<int> route_next_hop(int node, const Packet& pkt) const;
  void trace(const char* kind, int node, std::uint64_t seq, std::string detail = {});

  Topology topo_;
  SimConfig config_;
  std::vector<NodeState> nodes_;
  std::vector<FlowState> flows_;
  std::optional<Route> active_route_;
  std::size_t next_script_index_ = 0;

  std::priority_queue<EventRec, std::vector<EventRec>, EventCmp> events_;
  std::uint64_t event_order_ = 0;
  SimTime now_ = 0.0;
  bool started_ = false;

  struct InFlight {
    Packet pkt;
    int to_node = -1;
  };
  std::unordered_map<std::uint64_t, InFlight> in_flight_;
  std::uint64_t next_inflight_id_ = 1;

  std::vector<LossEvent> loss_events_;
  std::vector<DropRecord> drop_records_;
  std::vector<DeliveryRecord> deliveries_;
  std::vector<NetTraceRow> net_trace_;
  std::uint64_t spurious_detections_ = 0;

  Rng stagger_rng_;
};

}  // namespace manetsim
