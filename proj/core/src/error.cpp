#include "lidarint/error.hpp"

namespace lidarint {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::format: return "format";
    case ErrorKind::io: return "io";
    case ErrorKind::contract: return "contract";
    case ErrorKind::gate: return "gate";
    case ErrorKind::grazing_angle: return "grazing_angle";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::fit_rejected: return "fit_rejected";
    case ErrorKind::training_diverged: return "training_diverged";
    case ErrorKind::model_corrupt: return "model_corrupt";
    case ErrorKind::internal: return "internal";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

}  // namespace lidarint
