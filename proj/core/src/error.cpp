#include "meshnet/error.hpp"

namespace meshnet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "parse";
    case ErrorCode::IndexOutOfRange: return "index_out_of_range";
    case ErrorCode::NonManifoldEdge: return "non_manifold_edge";
    case ErrorCode::NonManifoldVertex: return "non_manifold_vertex";
    case ErrorCode::InconsistentOrientation: return "inconsistent_orientation";
    case ErrorCode::IsolatedVertex: return "isolated_vertex";
    case ErrorCode::DegenerateFace: return "degenerate_face";
    case ErrorCode::DegenerateNormal: return "degenerate_normal";
    case ErrorCode::UndefinedLogarithm: return "undefined_logarithm";
    case ErrorCode::FrameConstruction: return "frame_construction";
    case ErrorCode::AmbiguousTransport: return "ambiguous_transport";
    case ErrorCode::ZeroDistance: return "zero_distance";
    case ErrorCode::TypeMismatch: return "type_mismatch";
    case ErrorCode::FrameBindingMismatch: return "frame_binding_mismatch";
    case ErrorCode::EmptyNeighborhood: return "empty_neighborhood";
    case ErrorCode::CountMismatch: return "count_mismatch";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::ResidualTypeMismatch: return "residual_type_mismatch";
    case ErrorCode::NonScalarLoss: return "non_scalar_loss";
    case ErrorCode::DoubleBackward: return "double_backward";
    case ErrorCode::InvalidTarget: return "invalid_target";
    case ErrorCode::Config: return "config";
    case ErrorCode::UnknownConfigKey: return "unknown_config_key";
    case ErrorCode::CheckpointMismatch: return "checkpoint_mismatch";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::EmptyDataset: return "empty_dataset";
    case ErrorCode::Io: return "io";
    case ErrorCode::InvalidArgument: return "invalid_argument";
  }
  return "unknown";
}

}  // namespace meshnet
