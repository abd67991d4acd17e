#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "meshnet/autodiff.hpp"
#include "meshnet/features.hpp"
#include "meshnet/mesh.hpp"
#include "meshnet/tangent.hpp"

namespace meshnet {

/// p -> scale * rotation * p + translation.
struct AmbientTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  static AmbientTransform rotation_only(const Mat3& r) { return {r, Vec3::Zero(), 1.0}; }
  static AmbientTransform translation_only(const Vec3& x) { return {Mat3::Identity(), x, 1.0}; }
  static AmbientTransform scale_only(double s) { return {Mat3::Identity(), Vec3::Zero(), s}; }

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  /// Throws InvalidArgument unless rotation is in SO(3) and scale > 0.
  void validate() const;
};

/// Vertex relabeling: old index i becomes new index map[i].
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<std::size_t> map);

  static Permutation identity(std::size_t n);

  std::size_t size() const noexcept { return map_.size(); }
  std::size_t operator()(std::size_t old_index) const { return map_[old_index]; }
  std::size_t inverse(std::size_t new_index) const { return inverse_[new_index]; }
  const std::vector<std::size_t>& map() const noexcept { return map_; }
  Permutation inverted() const { return Permutation(inverse_); }

 private:
  std::vector<std::size_t> map_;
  std::vector<std::size_t> inverse_;
};

Mesh apply_ambient(const Mesh& mesh, const AmbientTransform& t);
/// Relabels vertices; faces keep their order and winding.
Mesh apply_permutation(const Mesh& mesh, const Permutation& perm);

/// Frames carried along by the rotation; translations and scalings leave
/// frames unchanged, so only the rotation matters.
FrameField pushforward_frames(const FrameField& frames, const Mat3& rotation);
FrameField permute_frames(const FrameField& frames, const Permutation& perm);

/// Coordinates are copied verbatim; only the binding changes.
GeometricFeatureField pushforward_features(const GeometricFeatureField& field, FrameId binding);
GeometricFeatureField permute_features(const GeometricFeatureField& field, const Permutation& perm);

/// Row perm(i) of the result is row i of the input.
Tensor permute_rows(const Tensor& rows, const Permutation& perm);

struct TransformRanges {
  double translation = 10.0;  // each coordinate uniform in [-t, t]
  double scale_min = 0.1;     // log-uniform in [scale_min, scale_max]
  double scale_max = 10.0;
};

struct TransformSuite {
  std::vector<double> gauge;  // one angle per vertex, uniform in (-pi, pi]
  AmbientTransform ambient;
  Permutation perm;
};

/// Uniform rotation from a normalised Gaussian quaternion.
Mat3 random_rotation(std::mt19937_64& rng);
Permutation random_permutation(std::size_t n, std::mt19937_64& rng);
std::vector<double> random_gauge(std::size_t n, std::mt19937_64& rng);
AmbientTransform random_ambient(std::mt19937_64& rng, const TransformRanges& ranges = {});

TransformSuite random_transform_suite(std::size_t vertex_count, std::uint64_t seed,
                                      const TransformRanges& ranges = {});

}  // namespace meshnet
