#include "manetsim/core.hpp"

namespace manetsim {

const char* to_string(PacketKind k) {
  switch (k) {
    case PacketKind::Data: return "data";
    case PacketKind::Ack: return "ack";
    case PacketKind::DupAck: return "dupack";
  }
  return "?";
}

const char* to_string(LossCause c) {
  switch (c) {
    case LossCause::Congestion: return "congestion";
    case LossCause::WirelessError: return "wireless";
    case LossCause::LinkFailure: return "link_failure";
  }
  return "?";
}

const char* to_string(DetectionKind d) {
  switch (d) {
    case DetectionKind::Timeout: return "timeout";
    case DetectionKind::TripleDupAck: return "triple_dupack";
  }
  return "?";
}

std::optional<LossCause> loss_cause_from_string(const std::string& s) {
  if (s == "congestion") return LossCause::Congestion;
  if (s == "wireless") return LossCause::WirelessError;
  if (s == "link_failure") return LossCause::LinkFailure;
  return std::nullopt;
}

std::optional<DetectionKind> detection_kind_from_string(const std::string& s) {
  if (s == "timeout") return DetectionKind::Timeout;
  if (s == "triple_dupack") return DetectionKind::TripleDupAck;
  return std::nullopt;
}

}  // namespace manetsim
