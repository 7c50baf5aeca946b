#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lidarint {

/// Broad category of a failure. The CLI maps `internal` to exit code 1 and
/// every other kind to exit code 2 (bad input or bad usage).
enum class ErrorKind {
  format,             // malformed file contents
  io,                 // open/read/write/rename failure
  contract,           // caller violated a documented precondition
  gate,               // value outside the range gate
  grazing_angle,      // incidence angle beyond the configured maximum
  precondition,       // pipeline used in the wrong order (e.g. Velodyne scan)
  insufficient_data,  // not enough samples to build a statistic
  fit_rejected,       // a fitted curve violates its own invariants
  training_diverged,  // non-finite loss during training
  model_corrupt,      // non-finite parameters in a loaded or trained model
  internal,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error(ErrorKind::format, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& message) : Error(ErrorKind::contract, message) {}
};

class GateError : public Error {
 public:
  explicit GateError(const std::string& message) : Error(ErrorKind::gate, message) {}
};

class GrazingAngleError : public Error {
 public:
  explicit GrazingAngleError(const std::string& message)
      : Error(ErrorKind::grazing_angle, message) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& message)
      : Error(ErrorKind::precondition, message) {}
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& message)
      : Error(ErrorKind::insufficient_data, message) {}
};

class FitRejectedError : public Error {
 public:
  explicit FitRejectedError(const std::string& message)
      : Error(ErrorKind::fit_rejected, message) {}
};

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(int epoch, const std::string& message)
      : Error(ErrorKind::training_diverged, message), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class ModelCorruptError : public Error {
 public:
  explicit ModelCorruptError(const std::string& message)
      : Error(ErrorKind::model_corrupt, message) {}
};

}  // namespace lidarint
