#include "meshnet/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Geometry>

#include "meshnet/error.hpp"

namespace meshnet {

void AmbientTransform::validate() const {
  if (!(scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "scale must be positive");
  const double orth = (rotation.transpose() * rotation - Mat3::Identity()).norm();
  if (orth > 1e-10 || rotation.determinant() < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "rotation must be a proper orthogonal matrix");
  }
}

Permutation::Permutation(std::vector<std::size_t> map) : map_(std::move(map)) {
  inverse_.assign(map_.size(), map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) {
    if (map_[i] >= map_.size() || inverse_[map_[i]] != map_.size()) {
      throw Error(ErrorCode::InvalidArgument, "not a permutation");
    }
    inverse_[map_[i]] = i;
  }
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<std::size_t> map(n);
  std::iota(map.begin(), map.end(), std::size_t{0});
  return Permutation(std::move(map));
}

Mesh apply_ambient(const Mesh& mesh, const AmbientTransform& t) {
  t.validate();
  std::vector<Vec3> pos;
  pos.reserve(mesh.vertex_count());
  for (const Vec3& p : mesh.vertices()) pos.push_back(t.apply(p));
  return mesh.with_positions(std::move(pos));
}

Mesh apply_permutation(const Mesh& mesh, const Permutation& perm) {
  if (perm.size() != mesh.vertex_count()) {
    throw Error(ErrorCode::CountMismatch, "permutation size differs from vertex count");
  }
  std::vector<Vec3> pos(mesh.vertex_count());
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) pos[perm(i)] = mesh.position(i);
  std::vector<Face> faces = mesh.faces();
  for (Face& f : faces) {
    for (std::size_t& v : f) v = perm(v);
  }
  return Mesh(std::move(pos), std::move(faces));
}

FrameField pushforward_frames(const FrameField& frames, const Mat3& rotation) {
  FrameField out;
  out.normals.reserve(frames.size());
  out.e1.reserve(frames.size());
  out.e2.reserve(frames.size());
  for (std::size_t p = 0; p < frames.size(); ++p) {
    out.normals.push_back(rotation * frames.normals[p]);
    out.e1.push_back(rotation * frames.e1[p]);
    out.e2.push_back(rotation * frames.e2[p]);
  }
  out.id = next_frame_id();
  return out;
}

FrameField permute_frames(const FrameField& frames, const Permutation& perm) {
  if (perm.size() != frames.size()) {
    throw Error(ErrorCode::CountMismatch, "permutation size differs from frame count");
  }
  FrameField out;
  out.normals.resize(frames.size());
  out.e1.resize(frames.size());
  out.e2.resize(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out.normals[perm(i)] = frames.normals[i];
    out.e1[perm(i)] = frames.e1[i];
    out.e2[perm(i)] = frames.e2[i];
  }
  out.id = next_frame_id();
  return out;
}

GeometricFeatureField pushforward_features(const GeometricFeatureField& field, FrameId binding) {
  return {field.type, field.values, field.type.is_scalar() ? kAnyFrame : binding};
}

Tensor permute_rows(const Tensor& rows, const Permutation& perm) {
  if (static_cast<std::size_t>(rows.rows()) != perm.size()) {
    throw Error(ErrorCode::CountMismatch, "permutation size differs from row count");
  }
  Tensor out(rows.rows(), rows.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.row(static_cast<long>(perm(i))) = rows.row(static_cast<long>(i));
  }
  return out;
}

GeometricFeatureField permute_features(const GeometricFeatureField& field, const Permutation& perm) {
  return {field.type, permute_rows(field.values, perm), field.binding};
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(normal(rng), normal(rng), normal(rng), normal(rng));
  } while (q.norm() < 1e-12);
  q.normalize();
  return q.toRotationMatrix();
}

Permutation random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> map(n);
  std::iota(map.begin(), map.end(), std::size_t{0});
  std::shuffle(map.begin(), map.end(), rng);
  return Permutation(std::move(map));
}

std::vector<double> random_gauge(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-std::numbers::pi, std::numbers::pi);
  std::vector<double> out(n);
  for (double& g : out) g = wrap_angle(dist(rng));
  return out;
}

AmbientTransform random_ambient(std::mt19937_64& rng, const TransformRanges& ranges) {
  if (!(ranges.scale_min > 0.0) || ranges.scale_max < ranges.scale_min) {
    throw Error(ErrorCode::Config, "scale range must satisfy 0 < scale_min <= scale_max");
  }
  AmbientTransform t;
  t.rotation = random_rotation(rng);
  std::uniform_real_distribution<double> coord(-ranges.translation, ranges.translation);
  t.translation = Vec3(coord(rng), coord(rng), coord(rng));
  std::uniform_real_distribution<double> log_scale(std::log(ranges.scale_min),
                                                   std::log(ranges.scale_max));
  t.scale = std::clamp(std::exp(log_scale(rng)), ranges.scale_min, ranges.scale_max);
  return t;
}

TransformSuite random_transform_suite(std::size_t vertex_count, std::uint64_t seed,
                                      const TransformRanges& ranges) {
  std::mt19937_64 rng(seed);
  TransformSuite suite;
  suite.gauge = random_gauge(vertex_count, rng);
  suite.ambient = random_ambient(rng, ranges);
  suite.perm = random_permutation(vertex_count, rng);
  return suite;
}

}  // namespace meshnet
