#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "meshnet/autodiff.hpp"
#include "meshnet/mesh.hpp"
#include "meshnet/representations.hpp"
#include "meshnet/tangent.hpp"

namespace meshnet {

/// Per-vertex coordinates of a typed feature, valid in the gauge identified
/// by `binding` (kAnyFrame for purely scalar fields).
struct GeometricFeatureField {
  FeatureType type;
  Tensor values;  // vertex_count x type.dim()
  FrameId binding = kAnyFrame;

  /// Throws DimensionMismatch when values do not match the type.
  void validate() const;
};

/// Coordinates after rotating every gauge by angles[p]: f_p -> rho(-g_p) f_p.
GeometricFeatureField regauge(const GeometricFeatureField& field, std::span<const double> angles,
                              FrameId new_binding);

struct RelTanConfig {
  std::vector<double> powers{0.7};
  /// Extension: put |v_p| in the otherwise-zero scalar slot.
  bool scalar_norm = false;
};

enum class FeatureFamily { Xyz, Get, RelTan };

FeatureFamily parse_feature_family(std::string_view name);
std::string_view to_string(FeatureFamily family);
FeatureType feature_type(FeatureFamily family, const RelTanConfig& reltan);

/// Ambient 3D relative tangent vector at p for relative power r.
Vec3 reltan_vector(const Mesh& mesh, const std::vector<Vec3>& normals, std::size_t p, double r);

/// One (rho0 + rho1) group per relative power, in list order.
GeometricFeatureField reltan_features(const Mesh& mesh, const FrameField& frames,
                                      const RelTanConfig& cfg);
/// Position in the local frame: rho0 = <p, n_p>, rho1 = (<p, e1>, <p, e2>).
GeometricFeatureField get_features(const Mesh& mesh, const FrameField& frames);
/// Raw coordinates as three scalar channels.
GeometricFeatureField xyz_features(const Mesh& mesh);

GeometricFeatureField compute_features(FeatureFamily family, const Mesh& mesh,
                                       const FrameField& frames, const RelTanConfig& reltan);

/// Ambient vector e1 * x + e2 * y rebuilt from the rho1 slot of the given
/// irrep, one per vertex.
std::vector<Vec3> tangent_vectors(const GeometricFeatureField& field, const FrameField& frames,
                                  std::size_t irrep);

enum class RadialDistribution { HalfNormal, PointMass };

struct ScalingStatistics {
  double normalized = 0.0;    // E |v|^2 with the N^{-3/2} factor
  double unnormalized = 0.0;  // E |v|^2 without it
};

/// Monte-Carlo second moment of a relative tangent vector built from N
/// i.i.d. neighbors with uniform tangent directions and the given radial law.
ScalingStatistics reltan_scaling_statistics(int degree, std::size_t samples, std::uint64_t seed,
                                            double r = 0.7,
                                            RadialDistribution radial = RadialDistribution::HalfNormal);

}  // namespace meshnet
