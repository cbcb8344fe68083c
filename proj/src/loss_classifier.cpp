#include "manetsim/loss_classifier.hpp"

#include <algorithm>
#include <vector>

namespace manetsim {

void QueueUsage::on_ack(double erott, double min_erott, double max_erott) {
  if (!(max_erott > 0.0)) return;  // no usable extremes yet
  double inst = (erott - min_erott) / max_erott;
  inst = std::clamp(inst, 0.0, 1.0);
  q_ = params_.alpha_ack * inst + (1.0 - params_.alpha_ack) * q_;
}

void QueueUsage::on_timeout() { q_ = (1.0 - params_.alpha_timeout) * q_; }

ClassifierVerdict enhanced_classify(DetectionKind detection, const QueueUsage& qu,
                                    bool failure_flag_set) {
  ClassifierVerdict v;
  v.q_at_decision = qu.q();
  v.manet_mode = qu.congested() ? ManetMode::Congested : ManetMode::NonCongested;
  if (detection == DetectionKind::Timeout) {
    v.cause = qu.congested() ? LossCause::Congestion : LossCause::LinkFailure;
  } else {
    if (failure_flag_set) {
      v.cause = LossCause::LinkFailure;  // duplicate acks right after a break: route change
    } else {
      v.cause = qu.congested() ? LossCause::Congestion : LossCause::WirelessError;
    }
  }
  return v;
}

void WelcomeState::add(double rtt) {
  rtt_history.push_back(rtt);
  while (rtt_history.size() > window) rtt_history.pop_front();
}

bool rtt_history_ascending(const WelcomeState& state, int k) {
  const auto& h = state.rtt_history;
  if (k < 1 || h.size() < static_cast<std::size_t>(k) + 1) return false;
  for (std::size_t i = h.size() - k; i < h.size(); ++i) {
    if (!(h[i] > h[i - 1])) return false;
  }
  return true;
}

LossCause welcome_classify(DetectionKind detection, const WelcomeState& state, int k) {
  if (state.rtt_history.empty()) {
    throw SimError("welcome_classify: empty RTT history");
  }
  if (rtt_history_ascending(state, k)) return LossCause::Congestion;
  return detection == DetectionKind::TripleDupAck ? LossCause::WirelessError
                                                  : LossCause::LinkFailure;
}

double jtcp_jitter(SimTime oldest_send, SimTime newest_send, SimTime oldest_recv,
                   SimTime newest_recv) {
  const double recv_span = newest_recv - oldest_recv;
  if (!(recv_span > 0.0)) throw SimError("jtcp_jitter: zero receive span");
  const double send_span = newest_send - oldest_send;
  return (recv_span - send_span) / recv_span;
}

LossCause jtcp_classify(double jr, int cwnd, bool acks_within_one_rtt) {
  if (cwnd < 1) throw SimError("jtcp_classify: cwnd must be >= 1");
  if (jr > 1.0 / static_cast<double>(cwnd) && !acks_within_one_rtt) {
    return LossCause::Congestion;
  }
  return LossCause::WirelessError;
}

bool fixed_rto_detect(int consecutive_timeouts) { return consecutive_timeouts >= 2; }

bool lda_rq_gap_trigger(double min_erott, double max_erott) {
  if (!(min_erott > 0.0)) return false;
  return max_erott / min_erott > 3.0;
}

bool lda_rq_gap_trigger(const ErottTracker& tracker) {
  if (!tracker.has_samples()) return false;
  return lda_rq_gap_trigger(tracker.min_erott(), tracker.max_erott());
}

const char* to_string(ClassifierId id) {
  switch (id) {
    case ClassifierId::AlwaysCongestion: return "always_congestion";
    case ClassifierId::Enhanced: return "enhanced";
    case ClassifierId::Welcome: return "welcome";
    case ClassifierId::Jtcp: return "jtcp";
    case ClassifierId::FixedRto: return "fixed_rto";
    case ClassifierId::LdaRq: return "lda_rq";
  }
  return "?";
}

namespace {

class AlwaysCongestionClassifier final : public Classifier {
 public:
  ClassifierVerdict on_detection(DetectionKind, const DetectionContext&) override {
    ClassifierVerdict v;
    v.cause = LossCause::Congestion;
    return v;
  }
};

class EnhancedClassifier final : public Classifier {
 public:
  explicit EnhancedClassifier(const ClassifierParams& p) : qu_(p.queue_usage) {}

  void on_trip_sample(const TripSample&, const ErottTracker& erott,
                      const RttEstimator&) override {
    if (!erott.has_samples()) return;
    qu_.on_ack(erott.erott(), erott.min_erott(), erott.max_erott());
  }

  void on_timeout_signal() override { qu_.on_timeout(); }

  ClassifierVerdict on_detection(DetectionKind kind, const DetectionContext& ctx) override {
    return enhanced_classify(kind, qu_, ctx.failure_flag_set);
  }

  double q_value() const override { return qu_.q(); }

 private:
  QueueUsage qu_;
};

class WelcomeClassifier final : public Classifier {
 public:
  explicit WelcomeClassifier(const ClassifierParams& p)
      : state_(p.welcome_window), k_(p.welcome_ascending_k) {}

  void on_trip_sample(const TripSample& sample, const ErottTracker&,
                      const RttEstimator&) override {
    state_.add(compute_rtt(sample));
  }

  ClassifierVerdict on_detection(DetectionKind kind, const DetectionContext&) override {
    ClassifierVerdict v;
    if (state_.rtt_history.empty()) {
      v.cause = LossCause::Congestion;  // no history yet: conservative default
    } else {
      v.cause = welcome_classify(kind, state_, k_);
    }
    return v;
  }

 private:
  WelcomeState state_;
  int k_;
};

class JtcpClassifier final : public Classifier {
 public:
  void on_ack_echo(SimTime data_send_time, SimTime receiver_timestamp) override {
    round_pairs_.push_back({data_send_time, receiver_timestamp});
  }

  void on_trip_sample(const TripSample&, const ErottTracker&, const RttEstimator&) override {
    // Round boundary: fold the acks collected during this RTT into Jr.
    if (round_pairs_.size() >= 2) {
      const auto& oldest = round_pairs_.front();
      const auto& newest = round_pairs_.back();
      if (newest.recv > oldest.recv) {
        jr_ = jtcp_jitter(oldest.send, newest.send, oldest.recv, newest.recv);
      }
    }
    round_pairs_.clear();
  }

  void on_route_reset() override { round_pairs_.clear(); }

  ClassifierVerdict on_detection(DetectionKind kind, const DetectionContext& ctx) override {
    ClassifierVerdict v;
    if (kind == DetectionKind::Timeout) {
      v.cause = LossCause::Congestion;
    } else {
      const int cwnd = std::max(1, static_cast<int>(ctx.cwnd));
      v.cause = jtcp_classify(jr_, cwnd, ctx.acks_within_one_rtt);
    }
    return v;
  }

 private:
  struct Pair {
    SimTime send;
    SimTime recv;
  };
  std::vector<Pair> round_pairs_;
  double jr_ = 0.0;
};

class FixedRtoClassifier final : public Classifier {
 public:
  ClassifierVerdict on_detection(DetectionKind kind, const DetectionContext& ctx) override {
    ClassifierVerdict v;
    if (kind == DetectionKind::Timeout && fixed_rto_detect(ctx.consecutive_timeouts)) {
      v.cause = LossCause::LinkFailure;
    } else {
      v.cause = LossCause::Congestion;
    }
    return v;
  }
};

// Implemented up to its trigger condition: before the max/min gap exceeds
// three the algorithm abstains; afterwards duplicate-ack losses are split
// by queue usage and timeouts fall back to the congestion assumption
// (this scheme has no link-failure verdict at all).
class LdaRqClassifier final : public Classifier {
 public:
  explicit LdaRqClassifier(const ClassifierParams& p) : qu_(p.queue_usage) {}

  void on_trip_sample(const TripSample&, const ErottTracker& erott,
                      const RttEstimator&) override {
    if (!erott.has_samples()) return;
    qu_.on_ack(erott.erott(), erott.min_erott(), erott.max_erott());
    if (lda_rq_gap_trigger(erott)) triggered_ = true;
  }

  void on_timeout_signal() override { qu_.on_timeout(); }

  ClassifierVerdict on_detection(DetectionKind kind, const DetectionContext&) override {
    ClassifierVerdict v;
    v.q_at_decision = qu_.q();
    v.manet_mode = qu_.congested() ? ManetMode::Congested : ManetMode::NonCongested;
    if (!triggered_) return v;  // abstain
    if (kind == DetectionKind::Timeout) {
      v.cause = LossCause::Congestion;
    } else {
      v.cause = qu_.congested() ? LossCause::Congestion : LossCause::WirelessError;
    }
    return v;
  }

  double q_value() const override { return qu_.q(); }

 private:
  QueueUsage qu_;
  bool triggered_ = false;
};

}  // namespace

std::unique_ptr<Classifier> make_classifier(ClassifierId id, const ClassifierParams& params) {
  switch (id) {
    case ClassifierId::AlwaysCongestion: return std::make_unique<AlwaysCongestionClassifier>();
    case ClassifierId::Enhanced: return std::make_unique<EnhancedClassifier>(params);
    case ClassifierId::Welcome: return std::make_unique<WelcomeClassifier>(params);
    case ClassifierId::Jtcp: return std::make_unique<JtcpClassifier>();
    case ClassifierId::FixedRto: return std::make_unique<FixedRtoClassifier>();
    case ClassifierId::LdaRq: return std::make_unique<LdaRqClassifier>(params);
  }
  throw SimError("unknown classifier id");
}

}  // namespace manetsim
