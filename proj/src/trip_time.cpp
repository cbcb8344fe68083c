#include "manetsim/trip_time.hpp"

#include <algorithm>

namespace manetsim {

double compute_rott(const TripSample& s) {
  const double rott = s.receiver_timestamp - s.send_time;
  if (rott < 0.0) {
    throw SimError("malformed trip sample: receiver timestamp precedes send time");
  }
  return rott;
}

double compute_rtt(const TripSample& s) {
  const double rtt = s.ack_arrival_time - s.send_time;
  if (rtt < 0.0) {
    throw SimError("malformed trip sample: ack arrival precedes send time");
  }
  return rtt;
}

void ErottTracker::add_sample(double rott) {
  if (rott < 0.0) throw SimError("negative rott sample");
  if (sample_count_ == 0) {
    erott_ = min_erott_ = max_erott_ = rott;
  } else {
    erott_ = (1.0 - gain_) * erott_ + gain_ * rott;
    min_erott_ = std::min(min_erott_, rott);
    max_erott_ = std::max(max_erott_, rott);
  }
  ++sample_count_;
}

void ErottTracker::reset_for_new_route() {
  erott_ = min_erott_ = max_erott_ = 0.0;
  sample_count_ = 0;
}

void RttEstimator::add_sample(double rtt) {
  if (rtt < 0.0) throw SimError("negative rtt sample");
  if (sample_count_ == 0) {
    srtt_ = rtt;
    rttvar_ = rtt / 2.0;
  } else {
    // RTTVAR before SRTT, per RFC 6298.
    rttvar_ = 0.75 * rttvar_ + 0.25 * std::abs(srtt_ - rtt);
    srtt_ = 0.875 * srtt_ + 0.125 * rtt;
  }
  last_srtt_ = srtt_;
  if (sample_count_ == 0) {
    min_srtt_ = max_srtt_ = srtt_;
  } else {
    min_srtt_ = std::min(min_srtt_, srtt_);
    max_srtt_ = std::max(max_srtt_, srtt_);
  }
  ++sample_count_;
}

void RttEstimator::reset() { *this = RttEstimator(); }

double RttEstimator::rto(double rto_min, double rto_max) const {
  return std::clamp(srtt_ + 4.0 * rttvar_, rto_min, rto_max);
}

}  // namespace manetsim
