#include "meshnet/tangent.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "meshnet/error.hpp"

namespace meshnet {

namespace {

constexpr double kLogTolerance = 1e-12;
constexpr double kAntipodalThreshold = -1.0 + 1e-8;

}  // namespace

FrameId next_frame_id() {
  static std::atomic<FrameId> counter{1};
  return counter.fetch_add(1);
}

void TransportData::validate() const {
  const std::size_t e = source.size();
  if (offsets.size() != vertex_count + 1 || offsets.front() != 0 || offsets.back() != e ||
      target.size() != e || theta.size() != e || transport.size() != e) {
    throw Error(ErrorCode::DimensionMismatch, "transport data arrays are inconsistent");
  }
  for (std::size_t p = 0; p < vertex_count; ++p) {
    for (std::size_t k = offsets[p]; k < offsets[p + 1]; ++k) {
      if (target[k] != p || source[k] >= vertex_count) {
        throw Error(ErrorCode::DimensionMismatch, "transport edge " + std::to_string(k) +
                                                      " is not grouped by its target vertex");
      }
    }
  }
}

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::remainder(angle, two_pi);  // [-pi, pi]
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

double angle_distance(double a, double b) { return std::abs(wrap_angle(a - b)); }

Mat3 tangent_projector(const Vec3& normal) {
  return Mat3::Identity() - normal * normal.transpose();
}

Vec3 log_map(const Vec3& p, const Vec3& q, const Vec3& normal_p) {
  const Vec3 d = q - p;
  const double length = d.norm();
  const Vec3 tangent = d - normal_p * normal_p.dot(d);
  const double tangent_length = tangent.norm();
  if (!(tangent_length > kLogTolerance * length)) {
    throw Error(ErrorCode::UndefinedLogarithm,
                "logarithmic map undefined: neighbor offset is parallel to the normal");
  }
  return (length / tangent_length) * tangent;
}

namespace {

FrameField frames_from_reference(const Mesh& mesh, const std::vector<Vec3>& normals,
                                 std::span<const std::size_t> reference) {
  FrameField frames;
  frames.normals = normals;
  frames.e1.resize(mesh.vertex_count());
  frames.e2.resize(mesh.vertex_count());
  for (std::size_t p = 0; p < mesh.vertex_count(); ++p) {
    const Vec3 v = log_map(mesh.position(p), mesh.position(reference[p]), normals[p]);
    frames.e1[p] = v.normalized();
    frames.e2[p] = normals[p].cross(frames.e1[p]);
  }
  frames.id = next_frame_id();
  return frames;
}

}  // namespace

FrameField build_frames(const Mesh& mesh, const std::vector<Vec3>& normals) {
  if (normals.size() != mesh.vertex_count()) {
    throw Error(ErrorCode::CountMismatch, "build_frames: one normal per vertex required");
  }
  std::vector<std::size_t> reference(mesh.vertex_count());
  for (std::size_t p = 0; p < mesh.vertex_count(); ++p) {
    bool found = false;
    for (std::size_t q : mesh.neighbors(p)) {
      const Vec3 d = mesh.position(q) - mesh.position(p);
      const Vec3 t = d - normals[p] * normals[p].dot(d);
      if (t.norm() > kLogTolerance * d.norm()) {
        reference[p] = q;
        found = true;
        break;
      }
    }
    if (!found) {
      throw Error(ErrorCode::FrameConstruction,
                  "vertex " + std::to_string(p) +
                      ": every neighbor offset is parallel to the normal");
    }
  }
  return frames_from_reference(mesh, normals, reference);
}

FrameField build_frames(const Mesh& mesh, const std::vector<Vec3>& normals,
                        std::span<const std::size_t> reference_neighbor) {
  if (normals.size() != mesh.vertex_count() ||
      reference_neighbor.size() != mesh.vertex_count()) {
    throw Error(ErrorCode::CountMismatch, "build_frames: one normal and reference per vertex");
  }
  for (std::size_t p = 0; p < mesh.vertex_count(); ++p) {
    bool adjacent = false;
    for (std::size_t q : mesh.neighbors(p)) adjacent = adjacent || q == reference_neighbor[p];
    if (!adjacent) {
      throw Error(ErrorCode::FrameConstruction,
                  "vertex " + std::to_string(p) + ": reference " +
                      std::to_string(reference_neighbor[p]) + " is not a neighbor");
    }
  }
  try {
    return frames_from_reference(mesh, normals, reference_neighbor);
  } catch (const Error& e) {
    throw Error(ErrorCode::FrameConstruction, e.what());
  }
}

double theta_angle(const Vec3& p, const Vec3& q, const Vec3& normal_p, const Vec3& e1_p,
                   const Vec3& e2_p) {
  const Vec3 v = log_map(p, q, normal_p);
  return wrap_angle(std::atan2(e2_p.dot(v), e1_p.dot(v)));
}

Mat3 normal_alignment_rotation(const Vec3& normal_q, const Vec3& normal_p) {
  const double c = normal_q.dot(normal_p);
  if (c < kAntipodalThreshold) {
    throw Error(ErrorCode::AmbiguousTransport, "antipodal normals: transport is ambiguous");
  }
  // Rodrigues with k = n_q x n_p = sin(phi) * axis:
  // R = c I + [k]_x + k k^T / (1 + c).
  const Vec3 k = normal_q.cross(normal_p);
  Mat3 skew;
  skew << 0.0, -k.z(), k.y(),
          k.z(), 0.0, -k.x(),
          -k.y(), k.x(), 0.0;
  return c * Mat3::Identity() + skew + (k * k.transpose()) / (1.0 + c);
}

double transport_angle(const Vec3& normal_q, const Vec3& e1_q, const Vec3& normal_p,
                       const Vec3& e1_p, const Vec3& e2_p) {
  const Vec3 aligned = normal_alignment_rotation(normal_q, normal_p) * e1_q;
  return wrap_angle(std::atan2(aligned.dot(e2_p), aligned.dot(e1_p)));
}

double transport_angle(const FrameField& frames, std::size_t q, std::size_t p) {
  return transport_angle(frames.normals[q], frames.e1[q], frames.normals[p], frames.e1[p],
                         frames.e2[p]);
}

TransportData build_transport(const Mesh& mesh, const FrameField& frames) {
  if (frames.size() != mesh.vertex_count()) {
    throw Error(ErrorCode::CountMismatch, "build_transport: frame field size mismatch");
  }
  TransportData t;
  t.vertex_count = mesh.vertex_count();
  t.binding = frames.id;
  t.offsets.assign(1, 0);
  for (std::size_t p = 0; p < mesh.vertex_count(); ++p) {
    for (std::size_t q : mesh.neighbors(p)) {
      t.target.push_back(p);
      t.source.push_back(q);
      t.theta.push_back(theta_angle(mesh.position(p), mesh.position(q), frames.normals[p],
                                    frames.e1[p], frames.e2[p]));
      t.transport.push_back(transport_angle(frames, q, p));
    }
    t.offsets.push_back(t.source.size());
  }
  return t;
}

FrameField regauge(const FrameField& frames, std::span<const double> angles) {
  if (angles.size() != frames.size()) {
    throw Error(ErrorCode::CountMismatch, "regauge: one angle per vertex required");
  }
  FrameField out;
  out.normals = frames.normals;
  out.e1.resize(frames.size());
  out.e2.resize(frames.size());
  for (std::size_t p = 0; p < frames.size(); ++p) {
    const double c = std::cos(angles[p]);
    const double s = std::sin(angles[p]);
    out.e1[p] = c * frames.e1[p] + s * frames.e2[p];
    out.e2[p] = out.normals[p].cross(out.e1[p]);
  }
  out.id = next_frame_id();
  return out;
}

SurfaceGeometry prepare_geometry(Mesh mesh) {
  FrameField frames = build_frames(mesh, vertex_normals(mesh));
  return prepare_geometry(std::move(mesh), std::move(frames));
}

SurfaceGeometry prepare_geometry(Mesh mesh, FrameField frames) {
  TransportData transport = build_transport(mesh, frames);
  return SurfaceGeometry{std::move(mesh), std::move(frames), std::move(transport)};
}

SurfaceGeometry regauge(const SurfaceGeometry& geometry, std::span<const double> angles) {
  return prepare_geometry(geometry.mesh, regauge(geometry.frames, angles));
}

}  // namespace meshnet
