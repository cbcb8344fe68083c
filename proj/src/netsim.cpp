#include "manetsim/netsim.hpp"

#include <algorithm>
#include <cmath>

namespace manetsim {

bool NodeQueue::try_enqueue(const Packet& p) {
  if (occupancy_ + p.size_bytes > capacity_) return false;
  occupancy_ += p.size_bytes;
  fifo_.push_back(p);
  return true;
}

std::optional<Packet> NodeQueue::pop() {
  if (fifo_.empty()) return std::nullopt;
  Packet p = std::move(fifo_.front());
  fifo_.pop_front();
  occupancy_ -= p.size_bytes;
  return p;
}

bool Route::contains(int node) const {
  return std::find(nodes.begin(), nodes.end(), node) != nodes.end();
}

std::optional<int> Route::next_hop(int node, bool reverse) const {
  auto it = std::find(nodes.begin(), nodes.end(), node);
  if (it == nodes.end()) return std::nullopt;
  if (reverse) {
    if (it == nodes.begin()) return std::nullopt;
    return *(it - 1);
  }
  if (it + 1 == nodes.end()) return std::nullopt;
  return *(it + 1);
}

const char* to_string(DropSite s) {
  switch (s) {
    case DropSite::QueueFull: return "queue_full";
    case DropSite::Lottery: return "lottery";
    case DropSite::Outage: return "outage";
    case DropSite::Flush: return "flush";
  }
  return "?";
}

namespace {

void add_route_links(const Route& r, std::set<std::pair<int, int>>& links, int& max_node) {
  if (r.nodes.size() < 2) throw SimError("route must have at least two nodes");
  for (std::size_t i = 0; i + 1 < r.nodes.size(); ++i) {
    int a = r.nodes[i];
    int b = r.nodes[i + 1];
    if (a < 0 || b < 0) throw SimError("route references a negative node id");
    if (a == b) throw SimError("route repeats a node consecutively");
    links.insert({std::min(a, b), std::max(a, b)});
    max_node = std::max({max_node, a, b});
  }
}

}  // namespace

void validate_script(const Topology& topo) {
  bool route_active = true;  // the initial route
  SimTime last_time = -1.0;
  for (const auto& action : topo.script) {
    if (!(action.time > last_time)) {
      throw SimError("script times must be strictly increasing");
    }
    last_time = action.time;
    if (action.kind == ScriptAction::Kind::Break) {
      if (!route_active) throw SimError("script: break while no route is active");
      route_active = false;
    } else {
      if (route_active) throw SimError("script: restore while a route is active");
      if (action.route.nodes.size() < 2) throw SimError("script: restore without a route");
      if (action.route.nodes.front() != topo.src || action.route.nodes.back() != topo.dst) {
        throw SimError("script: restored route endpoints differ from the flow endpoints");
      }
      for (int n : action.route.nodes) {
        if (n < 0 || n >= topo.node_count) throw SimError("script references an unknown node");
      }
      route_active = true;
    }
  }
}

Topology build_chain(int n_hops, LinkParams link) {
  if (n_hops < 1) throw SimError("build_chain: need at least one hop");
  Topology t;
  t.link = link;
  t.node_count = n_hops + 1;
  t.src = 0;
  t.dst = n_hops;
  t.initial_route.nodes.resize(n_hops + 1);
  for (int i = 0; i <= n_hops; ++i) t.initial_route.nodes[i] = i;
  int max_node = 0;
  add_route_links(t.initial_route, t.links, max_node);
  return t;
}

Topology build_mobile(Route initial_route, RouteScript script, LinkParams link) {
  Topology t;
  t.link = link;
  if (initial_route.nodes.size() < 2) throw SimError("build_mobile: initial route too short");
  t.src = initial_route.nodes.front();
  t.dst = initial_route.nodes.back();
  int max_node = 0;
  add_route_links(initial_route, t.links, max_node);
  for (const auto& action : script) {
    if (action.kind == ScriptAction::Kind::Restore) {
      add_route_links(action.route, t.links, max_node);
    }
  }
  t.node_count = max_node + 1;
  t.initial_route = std::move(initial_route);
  t.script = std::move(script);
  validate_script(t);
  return t;
}

std::optional<Packet> Receiver::on_data(const Packet& pkt, SimTime now) {
  const int data_hops = std::max(1, config_.initial_ttl - pkt.ttl);
  if (pkt.seq == highest_inorder_ + 1) {
    ++highest_inorder_;
    while (buffer_.erase(highest_inorder_ + 1) > 0) ++highest_inorder_;
    if (config_.delayed_ack) {
      ++delayed_pending_;
      if (delayed_pending_ < 2) return std::nullopt;
      delayed_pending_ = 0;
    }
    return make_ack(PacketKind::Ack, data_hops, now);
  }
  if (pkt.seq > highest_inorder_ + 1) {
    buffer_.insert(pkt.seq);
  }
  // Out-of-order or duplicate arrival: repeat the cumulative ack at once.
  return make_ack(PacketKind::DupAck, data_hops, now);
}

Packet Receiver::make_ack(PacketKind kind, int data_hops, SimTime now) {
  Packet ack;
  ack.flow = flow_;
  ack.seq = highest_inorder_;
  ack.kind = kind;
  ack.size_bytes = config_.ack_size_bytes;
  ack.send_time = now;
  ack.ttl = config_.initial_ttl;
  ack.attempt = static_cast<std::uint32_t>(++acks_generated_);
  AckEcho echo;
  echo.acked_seq = highest_inorder_;
  echo.receiver_timestamp = now + config_.clock_offset;
  echo.hop_count = data_hops;
  ack.echo = echo;
  return ack;
}

Simulator::Simulator(Topology topo, SimConfig config)
    : topo_(std::move(topo)),
      config_(config),
      active_route_(topo_.initial_route),
      stagger_rng_(config.seed ^ 0xA5A5A5A5DEADBEEFULL) {
  validate_script(topo_);
  nodes_.resize(topo_.node_count);
  for (auto& n : nodes_) n.queue.set_capacity(config_.queue_capacity_bytes);
  for (const auto& action : topo_.script) {
    schedule(action.time, [this, action] { apply_script_action(action); });
  }
}

int Simulator::add_flow(SenderConfig sender_config) {
  if (started_) throw SimError("add_flow after run()");
  const int flow = static_cast<int>(flows_.size());
  FlowState fs;
  sender_config.packet_size_bytes = config_.packet_size_bytes;
  fs.sender = std::make_unique<Sender>(std::move(sender_config), flow);
  Receiver::Config rc;
  rc.ack_size_bytes = config_.ack_size_bytes;
  rc.initial_ttl = config_.initial_ttl;
  rc.clock_offset = config_.receiver_clock_offset;
  rc.delayed_ack = config_.delayed_ack;
  fs.receiver = std::make_unique<Receiver>(rc, flow);
  fs.start_time = config_.flow_stagger > 0.0
                      ? stagger_rng_.next_uniform() * config_.flow_stagger
                      : 0.0;
  flows_.push_back(std::move(fs));
  return flow;
}

void Simulator::schedule(SimTime t, std::function<void()> fn) {
  if (!(t >= now_) || !std::isfinite(t)) {
    throw std::logic_error("event scheduled in the past");
  }
  events_.push({t, event_order_++, std::move(fn)});
}

void Simulator::trace(const char* kind, int node, std::uint64_t seq, std::string detail) {
  if (!config_.record_net_trace) return;
  net_trace_.push_back({now_, kind, node, seq, std::move(detail)});
}

void Simulator::run() {
  started_ = true;
  for (int f = 0; f < static_cast<int>(flows_.size()); ++f) {
    schedule(flows_[f].start_time, [this, f] {
      apply_sender_output(f, flows_[f].sender->start(now_));
    });
  }
  while (!events_.empty()) {
    EventRec ev = events_.top();
    events_.pop();
    if (ev.time > config_.duration) break;
    now_ = ev.time;
    ev.fn();
  }
}

void Simulator::apply_sender_output(int flow, SenderOutput&& out) {
  for (const Transmission& tx : out.sends) {
    Packet p;
    p.flow = flow;
    p.seq = tx.seq;
    p.kind = PacketKind::Data;
    p.size_bytes = config_.packet_size_bytes;
    p.send_time = now_;
    p.ttl = config_.initial_ttl;
    p.attempt = static_cast<std::uint32_t>(tx.attempt);
    enqueue_at(topo_.src, std::move(p));
  }
  if (out.arm_timer_at) {
    const std::uint64_t epoch = flows_[flow].sender->timer_epoch();
    schedule(*out.arm_timer_at, [this, flow, epoch] {
      Sender& s = *flows_[flow].sender;
      if (s.timer_epoch() != epoch) return;  // superseded timer
      trace("timer", topo_.src, s.state().highest_acked + 1);
      SenderOutput next = s.on_timer_expiry(now_);
      if (next.loss) label_and_record(flow, *next.loss);
      apply_sender_output(flow, std::move(next));
    });
  }
}

void Simulator::enqueue_at(int node, Packet&& pkt) {
  NodeState& ns = nodes_[node];
  if (!ns.queue.try_enqueue(pkt)) {
    record_drop(pkt, node, DropSite::QueueFull, LossCause::Congestion,
                ns.queue.occupancy_bytes(), ns.queue.capacity_bytes());
    return;
  }
  trace("enqueue", node, pkt.seq, to_string(pkt.kind));
  try_transmit(node);
}

std::optional<int> Simulator::route_next_hop(int node, const Packet& pkt) const {
  if (!active_route_) return std::nullopt;
  return active_route_->next_hop(node, pkt.kind != PacketKind::Data);
}

void Simulator::try_transmit(int node) {
  NodeState& ns = nodes_[node];
  while (!ns.busy && !ns.queue.empty()) {
    Packet pkt = *ns.queue.pop();
    std::optional<int> nh = route_next_hop(node, pkt);
    if (!nh) {
      // No route through this node right now: the packet is lost to the
      // link failure.
      record_drop(pkt, node, DropSite::Outage, LossCause::LinkFailure);
      continue;
    }
    if (pkt.ttl <= 0) throw SimError("ttl exhausted; routing loop?");
    pkt.ttl -= 1;

    const double ser = topo_.link.tx_delay(pkt.size_bytes);
    ns.busy = true;
    schedule(now_ + ser, [this, node] {
      nodes_[node].busy = false;
      trace("tx_complete", node, 0);
      try_transmit(node);
    });

    const int hop_index = config_.initial_ttl - pkt.ttl;
    const std::uint64_t link_key =
        static_cast<std::uint64_t>(node) * 1024u + static_cast<std::uint64_t>(*nh);
    const std::uint64_t who =
        (static_cast<std::uint64_t>(pkt.flow) << 2) | static_cast<std::uint64_t>(pkt.kind);
    const double draw =
        keyed_uniform(config_.seed, link_key, who, pkt.seq,
                      (static_cast<std::uint64_t>(pkt.attempt) << 8) |
                          static_cast<std::uint64_t>(hop_index));
    trace("tx_start", node, pkt.seq, to_string(pkt.kind));
    if (draw < topo_.link.packet_error_rate) {
      record_drop(pkt, node, DropSite::Lottery, LossCause::WirelessError, 0, 0, draw,
                  topo_.link.packet_error_rate);
      return;
    }
    const std::uint64_t id = next_inflight_id_++;
    in_flight_.emplace(id, InFlight{std::move(pkt), *nh});
    schedule(now_ + ser + topo_.link.propagation_delay, [this, id] { on_arrival(id); });
    return;
  }
}

void Simulator::on_arrival(std::uint64_t inflight_id) {
  auto it = in_flight_.find(inflight_id);
  if (it == in_flight_.end()) return;  // flushed by a route break
  Packet pkt = std::move(it->second.pkt);
  const int node = it->second.to_node;
  in_flight_.erase(it);
  trace("arrival", node, pkt.seq, to_string(pkt.kind));

  if (pkt.kind == PacketKind::Data) {
    if (node == topo_.dst) {
      deliver_data(std::move(pkt));
      return;
    }
  } else if (node == topo_.src) {
    deliver_ack(std::move(pkt));
    return;
  }
  enqueue_at(node, std::move(pkt));
}

void Simulator::deliver_data(Packet&& pkt) {
  FlowState& fs = flows_[pkt.flow];
  deliveries_.push_back({now_, pkt.flow, pkt.seq, pkt.attempt});
  fs.delivered_seqs.insert(pkt.seq);
  fs.delivery_time[pkt.seq] = now_;
  trace("deliver", topo_.dst, pkt.seq);

  std::optional<Packet> ack = fs.receiver->on_data(pkt, now_);
  if (ack) enqueue_at(topo_.dst, std::move(*ack));
}

void Simulator::deliver_ack(Packet&& pkt) {
  FlowState& fs = flows_[pkt.flow];
  if (!pkt.echo) throw SimError("ack without echo");
  SenderOutput out = fs.sender->on_ack(*pkt.echo, pkt.kind, now_);
  if (out.loss) label_and_record(pkt.flow, *out.loss);
  apply_sender_output(pkt.flow, std::move(out));
}

void Simulator::apply_script_action(const ScriptAction& action) {
  if (action.kind == ScriptAction::Kind::Break) {
    if (!active_route_) throw SimError("script break while no route active");
    trace("script_break", -1, 0);
    const Route broken = *active_route_;
    active_route_.reset();
    // Everything in the air is lost with the route.
    for (auto& [id, inflight] : in_flight_) {
      record_drop(inflight.pkt, inflight.to_node, DropSite::Flush, LossCause::LinkFailure);
    }
    in_flight_.clear();
    // Interior nodes lose their queued packets; the endpoints keep theirs.
    for (std::size_t i = 1; i + 1 < broken.nodes.size(); ++i) {
      NodeState& ns = nodes_[broken.nodes[i]];
      while (auto pkt = ns.queue.pop()) {
        record_drop(*pkt, broken.nodes[i], DropSite::Flush, LossCause::LinkFailure);
      }
    }
  } else {
    if (active_route_) throw SimError("script restore while a route is active");
    trace("script_restore", -1, 0);
    active_route_ = action.route;
    for (int n = 0; n < topo_.node_count; ++n) try_transmit(n);
  }
}

void Simulator::record_drop(const Packet& pkt, int node, DropSite site, LossCause truth,
                            int occupancy, int capacity, double draw, double per) {
  DropRecord rec;
  rec.time = now_;
  rec.node = node;
  rec.flow = pkt.flow;
  rec.seq = pkt.seq;
  rec.kind = pkt.kind;
  rec.attempt = pkt.attempt;
  rec.truth = truth;
  rec.site = site;
  rec.occupancy_bytes = occupancy;
  rec.capacity_bytes = capacity;
  rec.draw = draw;
  rec.per = per;
  drop_records_.push_back(rec);
  trace("drop", node, pkt.seq, std::string(to_string(site)) + " " + to_string(truth));

  FlowState& fs = flows_[pkt.flow];
  if (pkt.kind == PacketKind::Data) {
    fs.last_data_drop[pkt.seq] = rec;
  } else {
    fs.last_ack_drop = rec;
  }
}

void Simulator::label_and_record(int flow, LossEvent ev) {
  FlowState& fs = flows_[flow];
  auto drop_it = fs.last_data_drop.find(ev.seq);
  auto delivered_it = fs.delivery_time.find(ev.seq);

  if (drop_it != fs.last_data_drop.end() &&
      (delivered_it == fs.delivery_time.end() ||
       drop_it->second.time > delivered_it->second)) {
    ev.truth = drop_it->second.truth;
  } else if (delivered_it != fs.delivery_time.end() && fs.last_ack_drop &&
             fs.last_ack_drop->time >= delivered_it->second) {
    // The data got through but the acknowledgment stream did not.
    ev.truth = fs.last_ack_drop->truth;
  } else {
    ++spurious_detections_;  // detection without a matching loss
    return;
  }
  loss_events_.push_back(std::move(ev));
}

std::uint64_t Simulator::distinct_delivered() const {
  std::uint64_t total = 0;
  for (const auto& fs : flows_) total += fs.delivered_seqs.size();
  return total;
}

std::uint64_t Simulator::distinct_delivered(int flow) const {
  return flows_[flow].delivered_seqs.size();
}

std::uint64_t Simulator::residual_data_copies() const {
  std::uint64_t n = 0;
  for (const auto& [id, inflight] : in_flight_) {
    if (inflight.pkt.kind == PacketKind::Data) ++n;
  }
  for (const auto& node : nodes_) {
    NodeQueue copy = node.queue;  // cheap at end of run
    while (auto p = copy.pop()) {
      if (p->kind == PacketKind::Data) ++n;
    }
  }
  return n;
}

}  // namespace manetsim
