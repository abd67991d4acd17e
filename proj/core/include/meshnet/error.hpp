#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace meshnet {

enum class ErrorCode {
  Parse,
  IndexOutOfRange,
  NonManifoldEdge,
  NonManifoldVertex,
  InconsistentOrientation,
  IsolatedVertex,
  DegenerateFace,
  DegenerateNormal,
  UndefinedLogarithm,
  FrameConstruction,
  AmbiguousTransport,
  ZeroDistance,
  TypeMismatch,
  FrameBindingMismatch,
  EmptyNeighborhood,
  CountMismatch,
  DimensionMismatch,
  ResidualTypeMismatch,
  NonScalarLoss,
  DoubleBackward,
  InvalidTarget,
  Config,
  UnknownConfigKey,
  CheckpointMismatch,
  Divergence,
  EmptyDataset,
  Io,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace meshnet
