#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "manetsim/core.hpp"
#include "manetsim/loss_classifier.hpp"
#include "manetsim/trip_time.hpp"

namespace manetsim {

// How the retransmission timeout is re-based when the sender decides the
// route has been rebuilt.
enum class RtoRecovery { None, Eq12, WelcomeEq2, AbraEq3 };

const char* to_string(RtoRecovery r);

struct RtoBounds {
  double rto_min = 0.2;
  double rto_max = 64.0;
};

// RTO_new = RTO_old * sqrt((EROTT_new / EROTT_old) * (Hop_old / Hop_new)),
// clamped into bounds. Throws std::domain_error on nonpositive inputs.
double adjust_rto_eq12(double rto_old, double erott_old, double erott_new, int hop_old,
                       int hop_new, const RtoBounds& bounds = {});

// RTO_new = RTO_old * RTT_new / RTT_old, clamped.
double adjust_rto_welcome(double rto_old, double rtt_old, double rtt_new,
                          const RtoBounds& bounds = {});

// RTO_new = RTO_old * (1 + (Last_srtt - Min_srtt) / (Max_srtt - Min_srtt)),
// clamped; a degenerate history (max == min) leaves the RTO unchanged.
double adjust_rto_abra(double rto_old, double last_srtt, double min_srtt, double max_srtt,
                       const RtoBounds& bounds = {});

struct FailureFlags {
  bool link_failure = false;
  bool route_recovery = false;
};

// What the sender remembers about the current route so it can compare a
// rebuilt route against it: the smoothed one-way delay, the RTO in force,
// and the hop count.
struct RouteSnapshot {
  double erott = 0.0;
  double rto = 0.0;
  int hop_count = 0;
  bool valid = false;
};

struct SenderState {
  double cwnd = 1.0;       // packets
  double ssthresh = 64.0;  // packets
  double rto = 1.0;        // seconds
  std::uint64_t next_seq = 1;
  std::uint64_t highest_acked = 0;
  int dup_ack_count = 0;
  int consecutive_timeouts = 0;
  FailureFlags flags;
  RouteSnapshot route_snapshot;
};

struct SenderConfig {
  std::string algorithm_id = "enhanced";
  ClassifierId classifier = ClassifierId::Enhanced;
  RtoRecovery recovery = RtoRecovery::Eq12;
  // Once the link-failure flag is set, further timeouts keep the current
  // RTO instead of doubling it. Off reproduces standard back-off.
  bool freeze_rto_on_failure = true;
  // Route-change duplicate acks (flag already set) skip the cwnd cut and
  // raise the recovery flag. Only the enhanced mechanism does this.
  bool dupack_recovery_rule = true;
  // Force every verdict to Congestion; used by the differential test
  // that pins the non-failure path to plain Reno behavior.
  bool force_congestion_verdict = false;
  double rto_initial = 1.0;
  RtoBounds bounds;
  double initial_cwnd = 1.0;
  double initial_ssthresh = 64.0;
  int packet_size_bytes = 1000;
  ClassifierParams classifier_params;
};

// Canonical presets for the algorithms the harness knows about.
SenderConfig make_algorithm_config(const std::string& algorithm_id);
std::vector<std::string> known_algorithm_ids();

struct Transmission {
  std::uint64_t seq = 0;
  bool retransmission = false;
  int attempt = 1;
};

// Everything one sender event wants the simulator to do.
struct SenderOutput {
  std::vector<Transmission> sends;
  std::optional<SimTime> arm_timer_at;  // replaces any armed timer
  bool cancel_timer = false;
  std::optional<LossEvent> loss;  // truth filled in by the caller
};

struct SenderTraceRow {
  SimTime time = 0.0;
  std::string event;  // send|retransmit|ack|dupack|timeout|fast_retransmit|recovery
  std::uint64_t seq = 0;
  double cwnd = 0.0;
  double ssthresh = 0.0;
  double rto = 0.0;
  double q = 0.0;
  bool link_failure = false;
  bool route_recovery = false;
};

// Recorded when a route-recovery adjustment fires; used by tests that pin
// the hop/delay ratios seen across scripted route changes.
struct RecoveryRecord {
  SimTime time = 0.0;
  RouteSnapshot old_snapshot;
  double erott_new = 0.0;
  double rtt_new = 0.0;
  int hop_new = 0;
  double rto_before = 0.0;
  double rto_after = 0.0;
};

// TCP-Reno-like sender (slow start, congestion avoidance, fast
// retransmit, timeout back-off) extended with a link-failure flag episode
// and a pluggable recovery-time RTO adjustment. The object is driven by
// three entry points (start / on_ack / on_timer_expiry) and communicates
// with the network purely through SenderOutput values.
class Sender {
 public:
  Sender(SenderConfig config, int flow_id);

  SenderOutput start(SimTime now);
  SenderOutput on_ack(const AckEcho& echo, PacketKind kind, SimTime now);
  SenderOutput on_timer_expiry(SimTime now);

  const SenderConfig& config() const { return config_; }
  const SenderState& state() const { return state_; }
  const ErottTracker& erott_tracker() const { return erott_; }
  const RttEstimator& rtt_estimator() const { return rtt_; }
  const std::vector<SenderTraceRow>& trace() const { return trace_; }
  const std::vector<TripSample>& samples() const { return samples_; }
  const std::vector<RecoveryRecord>& recoveries() const { return recoveries_; }
  double sum_rto() const { return sum_rto_; }
  std::uint64_t data_transmissions() const { return data_transmissions_; }
  int flow_id() const { return flow_id_; }
  double classifier_q() const { return classifier_->q_value(); }

  // Timer identity: a scheduled expiry is valid only if it carries the
  // current epoch.
  std::uint64_t timer_epoch() const { return timer_epoch_; }

 private:
  struct TxRecord {
    SimTime first_send = 0.0;
    SimTime last_send = 0.0;
    int attempts = 0;
  };

  void set_rto(double value);
  void transmit(SenderOutput& out, std::uint64_t seq, bool retransmission, SimTime now);
  void fill_window(SenderOutput& out, SimTime now);
  void arm_timer(SenderOutput& out, SimTime now);
  void handle_rtt_ending_ack(const AckEcho& echo, SimTime now);
  void complete_recovery(const TripSample& sample, double rott, double rtt, SimTime now);
  void on_triple_dup_ack(SenderOutput& out, SimTime now);
  std::optional<LossCause> decide(DetectionKind kind, const DetectionContext& ctx,
                                  double& q_out);
  void trace_event(SimTime now, const char* event, std::uint64_t seq);

  SenderConfig config_;
  int flow_id_;
  SenderState state_;
  ErottTracker erott_;
  RttEstimator rtt_;
  std::unique_ptr<Classifier> classifier_;

  std::map<std::uint64_t, TxRecord> tx_records_;
  bool timing_active_ = false;
  std::uint64_t timed_seq_ = 0;
  SimTime timed_send_time_ = 0.0;

  double route_rtt_old_ = 0.0;  // raw RTT saved alongside the route snapshot
  SimTime first_dup_time_ = 0.0;
  std::uint64_t timer_epoch_ = 0;
  bool timer_armed_ = false;

  double sum_rto_ = 0.0;
  std::uint64_t data_transmissions_ = 0;
  std::vector<SenderTraceRow> trace_;
  std::vector<TripSample> samples_;
  std::vector<RecoveryRecord> recoveries_;
};

}  // namespace manetsim
