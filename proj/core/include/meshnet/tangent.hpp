#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "meshnet/mesh.hpp"

namespace meshnet {

using FrameId = std::uint64_t;

/// Binding value meaning "valid under any gauge" (pure scalar fields).
inline constexpr FrameId kAnyFrame = 0;

/// Fresh identifier for a newly created frame field.
FrameId next_frame_id();

/// Per-vertex orthonormal gauge (e1, e2) with normal n; (e1, e2, n) is
/// positively oriented.
struct FrameField {
  std::vector<Vec3> normals;
  std::vector<Vec3> e1;
  std::vector<Vec3> e2;
  FrameId id = kAnyFrame;

  std::size_t size() const noexcept { return normals.size(); }
};

/// Directed message edges q -> p grouped by receiving vertex p (CSR).
/// Edge order inside a group follows the mesh's stored neighbor order.
struct TransportData {
  std::size_t vertex_count = 0;
  std::vector<std::size_t> offsets{0};  // size vertex_count + 1
  std::vector<std::size_t> target;      // p of every edge
  std::vector<std::size_t> source;      // q of every edge
  std::vector<double> theta;            // theta_pq in (-pi, pi]
  std::vector<double> transport;        // g_{q->p} in (-pi, pi]
  FrameId binding = kAnyFrame;

  std::size_t edge_count() const noexcept { return source.size(); }
  std::size_t degree(std::size_t p) const { return offsets[p + 1] - offsets[p]; }

  /// Throws DimensionMismatch when the arrays are inconsistent.
  void validate() const;
};

/// Angle wrapped to (-pi, pi].
double wrap_angle(double angle);
/// Absolute difference of two angles modulo 2 pi, in [0, pi].
double angle_distance(double a, double b);

/// I - n n^T.
Mat3 tangent_projector(const Vec3& normal);

/// Norm-preserving discrete logarithmic map of q into the tangent plane at p.
Vec3 log_map(const Vec3& p, const Vec3& q, const Vec3& normal_p);

/// Frames whose first axis points at the first neighbor (stored order)
/// with a defined logarithm.
FrameField build_frames(const Mesh& mesh, const std::vector<Vec3>& normals);
/// Frames whose first axis points at reference_neighbor[p], which must be a
/// neighbor of p.
FrameField build_frames(const Mesh& mesh, const std::vector<Vec3>& normals,
                        std::span<const std::size_t> reference_neighbor);

double theta_angle(const Vec3& p, const Vec3& q, const Vec3& normal_p, const Vec3& e1_p,
                   const Vec3& e2_p);

/// Rotation taking n_q to n_p about the axis n_q x n_p (identity when the
/// normals coincide). Throws AmbiguousTransport for antipodal normals.
Mat3 normal_alignment_rotation(const Vec3& normal_q, const Vec3& normal_p);

/// Angle of the aligned first gauge axis of q measured in the gauge of p:
/// g = atan2((R e_q1)^T e_p2, (R e_q1)^T e_p1). Features transported from q
/// to p are expressed in p's gauge as rho(g) f_q.
double transport_angle(const Vec3& normal_q, const Vec3& e1_q, const Vec3& normal_p,
                       const Vec3& e1_p, const Vec3& e2_p);
double transport_angle(const FrameField& frames, std::size_t q, std::size_t p);

TransportData build_transport(const Mesh& mesh, const FrameField& frames);

/// Rotates every gauge by its angle: e1' = cos g e1 + sin g e2, e2' = n x e1'.
FrameField regauge(const FrameField& frames, std::span<const double> angles);

/// Mesh together with its normals, first-neighbor gauges and transport.
struct SurfaceGeometry {
  Mesh mesh;
  FrameField frames;
  TransportData transport;
};

SurfaceGeometry prepare_geometry(Mesh mesh);
SurfaceGeometry prepare_geometry(Mesh mesh, FrameField frames);
SurfaceGeometry regauge(const SurfaceGeometry& geometry, std::span<const double> angles);

}  // namespace meshnet
