#pragma once

#include <cstdint>

#include "manetsim/core.hpp"

namespace manetsim {

// One completed round of measurement for a data packet: when the sender
// transmitted it, when it reached the receiver (echoed back on the ack),
// and when the ack came home.
struct TripSample {
  std::uint64_t seq = 0;
  SimTime send_time = 0.0;
  SimTime receiver_timestamp = 0.0;
  SimTime ack_arrival_time = 0.0;
  int hop_count = 1;
};

// Forward-path delay only. Throws SimError on a negative difference,
// which would indicate a broken sample, not a network condition.
double compute_rott(const TripSample& s);

// Full round-trip delay.
double compute_rtt(const TripSample& s);

// Smoothed relative one-way trip time with its running extremes. The
// minimum stands in for empty intermediate queues, the maximum for full
// ones; both reset only when the route changes.
class ErottTracker {
 public:
  explicit ErottTracker(double gain = 0.125) : gain_(gain) {}

  // First sample seeds erott = min = max; later samples blend into the
  // EWMA and widen the extremes.
  void add_sample(double rott);

  // Forget everything about the old route. The next sample re-seeds.
  void reset_for_new_route();

  bool has_samples() const { return sample_count_ > 0; }
  double erott() const { return erott_; }
  double min_erott() const { return min_erott_; }
  double max_erott() const { return max_erott_; }
  std::uint64_t sample_count() const { return sample_count_; }
  double gain() const { return gain_; }

 private:
  double gain_;
  double erott_ = 0.0;
  double min_erott_ = 0.0;
  double max_erott_ = 0.0;
  std::uint64_t sample_count_ = 0;
};

// Standard smoothed RTT (RFC 6298 gains: 1/8 for SRTT, 1/4 for RTTVAR),
// extended with the running min/max/last of SRTT that the history-based
// RTO adjustment rules consume.
class RttEstimator {
 public:
  void add_sample(double rtt);
  void reset();

  bool has_samples() const { return sample_count_ > 0; }
  double srtt() const { return srtt_; }
  double rttvar() const { return rttvar_; }
  double last_srtt() const { return last_srtt_; }
  double min_srtt() const { return min_srtt_; }
  double max_srtt() const { return max_srtt_; }
  std::uint64_t sample_count() const { return sample_count_; }

  // srtt + 4*rttvar, clamped into [rto_min, rto_max].
  double rto(double rto_min, double rto_max) const;

 private:
  double srtt_ = 0.0;
  double rttvar_ = 0.0;
  double last_srtt_ = 0.0;
  double min_srtt_ = 0.0;
  double max_srtt_ = 0.0;
  std::uint64_t sample_count_ = 0;
};

}  // namespace manetsim
