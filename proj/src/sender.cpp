#include "manetsim/sender.hpp"

#include <algorithm>
#include <cmath>

namespace manetsim {

const char* to_string(RtoRecovery r) {
  switch (r) {
    case RtoRecovery::None: return "none";
    case RtoRecovery::Eq12: return "eq12";
    case RtoRecovery::WelcomeEq2: return "welcome_eq2";
    case RtoRecovery::AbraEq3: return "abra_eq3";
  }
  return "?";
}

double adjust_rto_eq12(double rto_old, double erott_old, double erott_new, int hop_old,
                       int hop_new, const RtoBounds& bounds) {
  if (!(rto_old > 0.0) || !(erott_old > 0.0) || !(erott_new > 0.0) || hop_old < 1 ||
      hop_new < 1) {
    throw std::domain_error("adjust_rto_eq12: inputs must be positive");
  }
  const double factor =
      std::sqrt((erott_new / erott_old) * (static_cast<double>(hop_old) / hop_new));
  return std::clamp(rto_old * factor, bounds.rto_min, bounds.rto_max);
}

double adjust_rto_welcome(double rto_old, double rtt_old, double rtt_new,
                          const RtoBounds& bounds) {
  if (!(rto_old > 0.0) || !(rtt_old > 0.0) || !(rtt_new > 0.0)) {
    throw std::domain_error("adjust_rto_welcome: inputs must be positive");
  }
  return std::clamp(rto_old * (rtt_new / rtt_old), bounds.rto_min, bounds.rto_max);
}

double adjust_rto_abra(double rto_old, double last_srtt, double min_srtt, double max_srtt,
                       const RtoBounds& bounds) {
  if (!(rto_old > 0.0) || last_srtt < 0.0 || min_srtt < 0.0 || max_srtt < 0.0) {
    throw std::domain_error("adjust_rto_abra: inputs must be positive");
  }
  if (last_srtt < min_srtt || last_srtt > max_srtt) {
    throw std::domain_error("adjust_rto_abra: last_srtt outside [min, max]");
  }
  double factor = 1.0;
  if (max_srtt > min_srtt) {
    factor = 1.0 + (last_srtt - min_srtt) / (max_srtt - min_srtt);
  }
  return std::clamp(rto_old * factor, bounds.rto_min, bounds.rto_max);
}

SenderConfig make_algorithm_config(const std::string& algorithm_id) {
  SenderConfig c;
  c.algorithm_id = algorithm_id;
  if (algorithm_id == "enhanced") {
    c.classifier = ClassifierId::Enhanced;
    c.recovery = RtoRecovery::Eq12;
    c.freeze_rto_on_failure = true;
    c.dupack_recovery_rule = true;
  } else if (algorithm_id == "reno") {
    c.classifier = ClassifierId::AlwaysCongestion;
    c.recovery = RtoRecovery::None;
    c.freeze_rto_on_failure = false;
    c.dupack_recovery_rule = false;
  } else if (algorithm_id == "welcome") {
    c.classifier = ClassifierId::Welcome;
    c.recovery = RtoRecovery::WelcomeEq2;
    c.freeze_rto_on_failure = false;
    c.dupack_recovery_rule = false;
  } else if (algorithm_id == "jtcp") {
    c.classifier = ClassifierId::Jtcp;
    c.recovery = RtoRecovery::None;
    c.freeze_rto_on_failure = false;
    c.dupack_recovery_rule = false;
  } else if (algorithm_id == "fixed_rto") {
    c.classifier = ClassifierId::FixedRto;
    c.recovery = RtoRecovery::None;
    c.freeze_rto_on_failure = true;
    c.dupack_recovery_rule = false;
  } else if (algorithm_id == "lda_rq") {
    c.classifier = ClassifierId::LdaRq;
    c.recovery = RtoRecovery::None;
    c.freeze_rto_on_failure = false;
    c.dupack_recovery_rule = false;
  } else {
    throw SimError("unknown algorithm id: " + algorithm_id);
  }
  return c;
}

std::vector<std::string> known_algorithm_ids() {
  return {"enhanced", "reno", "fixed_rto", "welcome", "jtcp", "lda_rq"};
}

Sender::Sender(SenderConfig config, int flow_id)
    : config_(std::move(config)),
      flow_id_(flow_id),
      erott_(config_.classifier_params.erott_gain),
      classifier_(make_classifier(config_.classifier, config_.classifier_params)) {
  state_.cwnd = std::max(1.0, config_.initial_cwnd);
  state_.ssthresh = std::max(2.0, config_.initial_ssthresh);
  state_.rto = std::clamp(config_.rto_initial, config_.bounds.rto_min, config_.bounds.rto_max);
}

void Sender::set_rto(double value) {
  state_.rto = std::clamp(value, config_.bounds.rto_min, config_.bounds.rto_max);
}

void Sender::trace_event(SimTime now, const char* event, std::uint64_t seq) {
  trace_.push_back({now, event, seq, state_.cwnd, state_.ssthresh, state_.rto,
                    classifier_->q_value(), state_.flags.link_failure,
                    state_.flags.route_recovery});
}

void Sender::transmit(SenderOutput& out, std::uint64_t seq, bool retransmission, SimTime now) {
  TxRecord& rec = tx_records_[seq];
  rec.attempts += 1;
  rec.last_send = now;
  if (rec.attempts == 1) rec.first_send = now;
  out.sends.push_back({seq, retransmission, rec.attempts});

  if (!retransmission && !timing_active_) {
    timing_active_ = true;
    timed_seq_ = seq;
    timed_send_time_ = now;
  }
  // Karn: a retransmitted packet can no longer yield a clean sample.
  if (retransmission && timing_active_ && timed_seq_ == seq) {
    timing_active_ = false;
  }

  sum_rto_ += state_.rto;
  data_transmissions_ += 1;
  trace_event(now, retransmission ? "retransmit" : "send", seq);
}

void Sender::fill_window(SenderOutput& out, SimTime now) {
  const auto window = static_cast<std::uint64_t>(std::max(1.0, std::floor(state_.cwnd)));
  while (state_.next_seq <= state_.highest_acked + window) {
    transmit(out, state_.next_seq, false, now);
    ++state_.next_seq;
  }
}

void Sender::arm_timer(SenderOutput& out, SimTime now) {
  ++timer_epoch_;
  if (state_.next_seq > state_.highest_acked + 1) {
    timer_armed_ = true;
    out.arm_timer_at = now + state_.rto;
    out.cancel_timer = false;
  } else {
    timer_armed_ = false;
    out.arm_timer_at.reset();
    out.cancel_timer = true;
  }
}

SenderOutput Sender::start(SimTime now) {
  SenderOutput out;
  fill_window(out, now);
  arm_timer(out, now);
  return out;
}

std::optional<LossCause> Sender::decide(DetectionKind kind, const DetectionContext& ctx,
                                        double& q_out) {
  ClassifierVerdict v = classifier_->on_detection(kind, ctx);
  q_out = v.q_at_decision;
  if (config_.force_congestion_verdict) return LossCause::Congestion;
  return v.cause;
}

SenderOutput Sender::on_ack(const AckEcho& echo, PacketKind kind, SimTime now) {
  (void)kind;
  SenderOutput out;
  if (echo.acked_seq >= state_.next_seq) {
    throw SimError("ack for a sequence number that was never sent");
  }

  if (echo.acked_seq > state_.highest_acked) {
    state_.highest_acked = echo.acked_seq;
    state_.dup_ack_count = 0;
    state_.consecutive_timeouts = 0;

    if (state_.cwnd < state_.ssthresh) {
      state_.cwnd += 1.0;  // slow start
    } else {
      state_.cwnd += 1.0 / state_.cwnd;  // congestion avoidance
    }

    auto acked_it = tx_records_.find(echo.acked_seq);
    if (acked_it != tx_records_.end() && acked_it->second.attempts == 1) {
      classifier_->on_ack_echo(acked_it->second.first_send, echo.receiver_timestamp);
    }

    if (timing_active_ && echo.acked_seq >= timed_seq_) {
      timing_active_ = false;
      auto timed_it = tx_records_.find(timed_seq_);
      if (timed_it != tx_records_.end() && timed_it->second.attempts == 1) {
        handle_rtt_ending_ack(echo, now);
      }
    }

    tx_records_.erase(tx_records_.begin(), tx_records_.upper_bound(echo.acked_seq));
    trace_event(now, "ack", echo.acked_seq);
    fill_window(out, now);
    arm_timer(out, now);
  } else if (echo.acked_seq == state_.highest_acked) {
    state_.dup_ack_count += 1;
    if (state_.dup_ack_count == 1) first_dup_time_ = now;
    trace_event(now, "dupack", echo.acked_seq);
    if (state_.dup_ack_count == 3) {
      on_triple_dup_ack(out, now);
      out.loss->time = now;
    }
  }
  // acked_seq < highest_acked: stale ack, nothing to do
  return out;
}

void Sender::handle_rtt_ending_ack(const AckEcho& echo, SimTime now) {
  TripSample sample;
  sample.seq = timed_seq_;
  sample.send_time = timed_send_time_;
  sample.receiver_timestamp = echo.receiver_timestamp;
  sample.ack_arrival_time = now;
  sample.hop_count = std::max(1, echo.hop_count);

  const double rott = compute_rott(sample);
  const double rtt = compute_rtt(sample);
  samples_.push_back(sample);

  erott_.add_sample(rott);
  rtt_.add_sample(rtt);
  classifier_->on_trip_sample(sample, erott_, rtt_);

  if (!state_.flags.link_failure) {
    set_rto(rtt_.rto(config_.bounds.rto_min, config_.bounds.rto_max));
    state_.route_snapshot = {erott_.erott(), state_.rto, sample.hop_count, true};
    route_rtt_old_ = rtt;
  } else {
    complete_recovery(sample, rott, rtt, now);
  }
}

void Sender::complete_recovery(const TripSample& sample, double rott, double rtt,
                               SimTime now) {
  state_.flags.route_recovery = true;

  RecoveryRecord rec;
  rec.time = now;
  rec.old_snapshot = state_.route_snapshot;
  rec.erott_new = rott;
  rec.rtt_new = rtt;
  rec.hop_new = sample.hop_count;
  rec.rto_before = state_.rto;

  const RouteSnapshot& snap = state_.route_snapshot;
  switch (config_.recovery) {
    case RtoRecovery::Eq12:
      if (snap.valid && snap.erott > 0.0 && rott > 0.0) {
        set_rto(adjust_rto_eq12(snap.rto, snap.erott, rott, snap.hop_count,
                                sample.hop_count, config_.bounds));
      } else {
        set_rto(rtt_.rto(config_.bounds.rto_min, config_.bounds.rto_max));
      }
      break;
    case RtoRecovery::WelcomeEq2:
      if (snap.valid && route_rtt_old_ > 0.0 && rtt > 0.0) {
        set_rto(adjust_rto_welcome(snap.rto, route_rtt_old_, rtt, config_.bounds));
      } else {
        set_rto(rtt_.rto(config_.bounds.rto_min, config_.bounds.rto_max));
      }
      break;
    case RtoRecovery::AbraEq3:
      if (snap.valid && rtt_.has_samples()) {
        set_rto(adjust_rto_abra(snap.rto, rtt_.last_srtt(), rtt_.min_srtt(),
                                rtt_.max_srtt(), config_.bounds));
      }
      break;
    case RtoRecovery::None:
      set_rto(rtt_.rto(config_.bounds.rto_min, config_.bounds.rto_max));
      break;
  }

  erott_.reset_for_new_route();
  classifier_->on_route_reset();

  rec.rto_after = state_.rto;
  recoveries_.push_back(rec);
  trace_event(now, "recovery", sample.seq);

  state_.flags = FailureFlags{};  // both cleared together
  state_.route_snapshot = {rott, state_.rto, sample.hop_count, true};
  route_rtt_old_ = rtt;
}

SenderOutput Sender::on_timer_expiry(SimTime now) {
  SenderOutput out;
  timer_armed_ = false;
  if (state_.next_seq <= state_.highest_acked + 1) {
    return out;  // nothing outstanding
  }

  state_.consecutive_timeouts += 1;
  state_.dup_ack_count = 0;
  classifier_->on_timeout_signal();

  DetectionContext ctx;
  ctx.failure_flag_set = state_.flags.link_failure;
  ctx.consecutive_timeouts = state_.consecutive_timeouts;
  ctx.cwnd = state_.cwnd;
  ctx.srtt = rtt_.srtt();

  double q = 0.0;
  const std::optional<LossCause> verdict = decide(DetectionKind::Timeout, ctx, q);

  const std::uint64_t lost_seq = state_.highest_acked + 1;

  if (state_.flags.link_failure) {
    // Failure mode: keep probing with the frozen RTO (or keep backing off
    // when the freeze is disabled).
    if (!config_.freeze_rto_on_failure) set_rto(state_.rto * 2.0);
  } else if (verdict == LossCause::LinkFailure) {
    state_.flags.link_failure = true;
    state_.cwnd = 1.0;
    if (!config_.freeze_rto_on_failure) set_rto(state_.rto * 2.0);
  } else if (verdict == LossCause::WirelessError) {
    set_rto(state_.rto * 2.0);  // timer conservatism, no rate reduction
  } else {
    // Congestion verdict or abstention: standard Reno timeout response.
    state_.ssthresh = std::max(state_.cwnd / 2.0, 2.0);
    state_.cwnd = 1.0;
    set_rto(state_.rto * 2.0);
  }

  LossEvent loss;
  loss.algorithm_id = config_.algorithm_id;
  loss.flow = flow_id_;
  loss.seq = lost_seq;
  loss.time = now;
  loss.detection = DetectionKind::Timeout;
  loss.verdict = verdict;
  loss.q_at_decision = q;
  out.loss = loss;

  transmit(out, lost_seq, true, now);
  trace_event(now, "timeout", lost_seq);
  arm_timer(out, now);
  return out;
}

void Sender::on_triple_dup_ack(SenderOutput& out, SimTime now) {
  DetectionContext ctx;
  ctx.failure_flag_set = state_.flags.link_failure;
  ctx.consecutive_timeouts = state_.consecutive_timeouts;
  ctx.cwnd = state_.cwnd;
  ctx.srtt = rtt_.srtt();
  ctx.acks_within_one_rtt =
      rtt_.has_samples() && (now - first_dup_time_) <= rtt_.srtt();

  double q = 0.0;
  std::optional<LossCause> verdict;

  const std::uint64_t lost_seq = state_.highest_acked + 1;

  if (state_.flags.link_failure && config_.dupack_recovery_rule) {
    // Duplicate acks while the failure flag is set prove a route exists:
    // treat the gap as a route-change artifact and keep the window.
    state_.flags.route_recovery = true;
    verdict = decide(DetectionKind::TripleDupAck, ctx, q);
  } else {
    verdict = decide(DetectionKind::TripleDupAck, ctx, q);
    if (verdict == LossCause::WirelessError || verdict == LossCause::LinkFailure) {
      // retransmit without rate reduction
    } else {
      // Congestion verdict or abstention: fast recovery, simple variant.
      state_.ssthresh = std::max(state_.cwnd / 2.0, 2.0);
      state_.cwnd = state_.ssthresh;
    }
  }

  LossEvent loss;
  loss.algorithm_id = config_.algorithm_id;
  loss.flow = flow_id_;
  loss.seq = lost_seq;
  loss.time = now;
  loss.detection = DetectionKind::TripleDupAck;
  loss.verdict = verdict;
  loss.q_at_decision = q;
  out.loss = loss;

  transmit(out, lost_seq, true, now);
  trace_event(now, "fast_retransmit", lost_seq);
  arm_timer(out, now);
}

}  // namespace manetsim
