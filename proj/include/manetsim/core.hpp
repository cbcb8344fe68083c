#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace manetsim {

// Simulated time in seconds. One global clock drives the whole simulation;
// values are finite and nondecreasing along any event trace.
using SimTime = double;

enum class PacketKind { Data, Ack, DupAck };

// Ground-truth / classifier loss categories.
enum class LossCause { Congestion, WirelessError, LinkFailure };

// How the sender noticed a loss.
enum class DetectionKind { Timeout, TripleDupAck };

const char* to_string(PacketKind k);
const char* to_string(LossCause c);
const char* to_string(DetectionKind d);

std::optional<LossCause> loss_cause_from_string(const std::string& s);
std::optional<DetectionKind> detection_kind_from_string(const std::string& s);

// Transport-visible information echoed back on every acknowledgment:
// the cumulative ack number, the receiver-side arrival timestamp of the
// data packet that triggered the ack, and the hop count that packet
// traversed (derived from the TTL decrement).
struct AckEcho {
  std::uint64_t acked_seq = 0;
  SimTime receiver_timestamp = 0.0;
  int hop_count = 1;
};

struct Packet {
  int flow = 0;
  std::uint64_t seq = 0;
  PacketKind kind = PacketKind::Data;
  int size_bytes = 1000;
  SimTime send_time = 0.0;
  int ttl = 64;                   // hop budget, decremented per forwarding hop
  std::uint32_t attempt = 1;      // 1 = original transmission, >1 = retransmission
  std::optional<AckEcho> echo;    // present on Ack/DupAck
};

// One detected loss: what the sender's classifier said versus what the
// simulator knows actually happened. `verdict` is empty when the
// algorithm abstained from classifying the event.
struct LossEvent {
  std::string algorithm_id;
  int flow = 0;
  std::uint64_t seq = 0;
  SimTime time = 0.0;
  DetectionKind detection = DetectionKind::Timeout;
  std::optional<LossCause> verdict;
  LossCause truth = LossCause::Congestion;
  double q_at_decision = 0.0;
};

// SplitMix64: tiny, portable, explicitly documented state transition
// (state += GOLDEN_GAMMA; output = finalizer(state)). Identical seeds
// yield identical draw sequences on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Uniform in [0,1), 53 random mantissa bits.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

 private:
  std::uint64_t state_;
};

// Stateless keyed draw. Used for per-transmission wireless error lotteries
// so that the same (seed, link, flow, seq, attempt) tuple sees the same
// fate under every sender algorithm, independent of event timing.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                            std::uint64_t c, std::uint64_t d) {
  std::uint64_t h = Rng::mix(seed + 0x9E3779B97F4A7C15ULL);
  h = Rng::mix(h ^ (a + 0xBF58476D1CE4E5B9ULL));
  h = Rng::mix(h ^ (b + 0x94D049BB133111EBULL));
  h = Rng::mix(h ^ (c + 0x2545F4914F6CDD1DULL));
  h = Rng::mix(h ^ (d + 0xD6E8FEB86659FD93ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Thrown on malformed inputs that indicate a simulator bug rather than a
// recoverable condition.
struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace manetsim
