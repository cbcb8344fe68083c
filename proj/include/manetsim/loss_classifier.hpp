#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>

#include "manetsim/core.hpp"
#include "manetsim/trip_time.hpp"

namespace manetsim {

struct QueueUsageParams {
  double alpha_ack = 0.8;      // weight of the instantaneous term on ack reception
  double alpha_timeout = 0.1;  // weight of the (zero) instantaneous term on timeout
  double threshold = 0.5;      // congested / non-congested boundary
};

// Scalar estimate of how occupied the intermediate queues are, driven by
// the smoothed one-way delay relative to its running extremes:
//   ack:     q <- a * clamp((erott - min) / max, 0, 1) + (1 - a) * q
//   timeout: q <- (1 - a_t) * q          (no ack, so the usage term is zero)
class QueueUsage {
 public:
  explicit QueueUsage(QueueUsageParams p = {}, double initial_q = 0.0)
      : q_(initial_q), params_(p) {}

  // No-op when max_erott is not yet meaningful (no samples on this route).
  void on_ack(double erott, double min_erott, double max_erott);
  void on_timeout();

  double q() const { return q_; }
  bool congested() const { return q_ >= params_.threshold; }
  const QueueUsageParams& params() const { return params_; }

 private:
  double q_;
  QueueUsageParams params_;
};

enum class ManetMode { Congested, NonCongested };

// Classifier output for one detection event. An empty cause means the
// algorithm abstained (it could not or would not classify this event).
struct ClassifierVerdict {
  std::optional<LossCause> cause;
  ManetMode manet_mode = ManetMode::NonCongested;
  double q_at_decision = 0.0;
};

// Threshold-based decision logic:
//   Timeout       & q >= threshold -> Congestion
//   Timeout       & q <  threshold -> LinkFailure
//   TripleDupAck  & failure flag   -> LinkFailure (route-change artifact)
//   TripleDupAck  & q >= threshold -> Congestion
//   TripleDupAck  & q <  threshold -> WirelessError
ClassifierVerdict enhanced_classify(DetectionKind detection, const QueueUsage& qu,
                                    bool failure_flag_set);

// Bounded history of raw RTT samples for the RTT-trend classifier.
struct WelcomeState {
  explicit WelcomeState(std::size_t window = 10) : window(window) {}
  void add(double rtt);
  std::size_t window;
  std::deque<double> rtt_history;
};

// True when the last `k` deltas of the history are all strictly positive
// (requires at least k+1 samples).
bool rtt_history_ascending(const WelcomeState& state, int k = 3);

// Ascending RTT trend -> Congestion; otherwise the detection kind decides:
// three duplicate acks -> WirelessError, timeout -> LinkFailure.
// Throws SimError on an empty history; callers default to Congestion.
LossCause welcome_classify(DetectionKind detection, const WelcomeState& state, int k = 3);

// Per-round jitter ratio:
//   Jr = ((R_newest - R_oldest) - (S_newest - S_oldest)) / (R_newest - R_oldest)
// Throws SimError when the receive span is zero.
double jtcp_jitter(SimTime oldest_send, SimTime newest_send, SimTime oldest_recv,
                   SimTime newest_recv);

// Congestion only when the jitter ratio exceeds 1/cwnd AND the three
// duplicate acks did not fit in one RTT; anything else is wireless.
LossCause jtcp_classify(double jr, int cwnd, bool acks_within_one_rtt);

// Two successive timeouts are read as route failure.
bool fixed_rto_detect(int consecutive_timeouts);

// max/min delay gap trigger; inoperable (false) until a minimum exists.
bool lda_rq_gap_trigger(double min_erott, double max_erott);
bool lda_rq_gap_trigger(const ErottTracker& tracker);

// ---------------------------------------------------------------------------
// Uniform stateful interface the sender drives. Feeds arrive in event
// order; on_detection is called once per loss-detection event after the
// per-kind state update (q decay on timeout happens in on_timeout_signal).

enum class ClassifierId { AlwaysCongestion, Enhanced, Welcome, Jtcp, FixedRto, LdaRq };

const char* to_string(ClassifierId id);

struct ClassifierParams {
  QueueUsageParams queue_usage;
  std::size_t welcome_window = 10;
  int welcome_ascending_k = 3;
  double erott_gain = 0.125;  // used by trackers owned by the sender
};

struct DetectionContext {
  bool failure_flag_set = false;
  int consecutive_timeouts = 0;  // including the current timeout
  double cwnd = 1.0;
  bool acks_within_one_rtt = false;  // valid for TripleDupAck only
  double srtt = 0.0;
};

class Classifier {
 public:
  virtual ~Classifier() = default;

  // Every new cumulative ack whose data send time is unambiguous.
  virtual void on_ack_echo(SimTime data_send_time, SimTime receiver_timestamp) {
    (void)data_send_time;
    (void)receiver_timestamp;
  }

  // An ack that ends an RTT measurement; trackers are already updated.
  virtual void on_trip_sample(const TripSample& sample, const ErottTracker& erott,
                              const RttEstimator& rtt) {
    (void)sample;
    (void)erott;
    (void)rtt;
  }

  // Retransmission timer expired (called before on_detection).
  virtual void on_timeout_signal() {}

  // The sender completed route recovery and reset its trackers.
  virtual void on_route_reset() {}

  virtual ClassifierVerdict on_detection(DetectionKind kind, const DetectionContext& ctx) = 0;

  virtual double q_value() const { return 0.0; }
};

std::unique_ptr<Classifier> make_classifier(ClassifierId id, const ClassifierParams& params);

}  // namespace manetsim
