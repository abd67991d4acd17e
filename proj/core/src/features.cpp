#include "meshnet/features.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "meshnet/error.hpp"

namespace meshnet {

void GeometricFeatureField::validate() const {
  if (values.cols() != static_cast<long>(type.dim())) {
    throw Error(ErrorCode::DimensionMismatch,
                "feature field has " + std::to_string(values.cols()) + " columns, type " +
                    type.to_string() + " needs " + std::to_string(type.dim()));
  }
}

GeometricFeatureField regauge(const GeometricFeatureField& field, std::span<const double> angles,
                              FrameId new_binding) {
  if (static_cast<long>(angles.size()) != field.values.rows()) {
    throw Error(ErrorCode::CountMismatch, "regauge: one angle per vertex required");
  }
  GeometricFeatureField out{field.type, field.values, field.type.is_scalar() ? kAnyFrame : new_binding};
  for (long p = 0; p < out.values.rows(); ++p) {
    rotate_coordinates(field.type, -angles[static_cast<std::size_t>(p)],
                       {out.values.row(p).data(), static_cast<std::size_t>(out.values.cols())});
  }
  return out;
}

FeatureFamily parse_feature_family(std::string_view name) {
  if (name == "xyz") return FeatureFamily::Xyz;
  if (name == "get") return FeatureFamily::Get;
  if (name == "reltan") return FeatureFamily::RelTan;
  throw Error(ErrorCode::Config, "unknown feature family '" + std::string(name) + "'");
}

std::string_view to_string(FeatureFamily family) {
  switch (family) {
    case FeatureFamily::Xyz: return "xyz";
    case FeatureFamily::Get: return "get";
    case FeatureFamily::RelTan: return "reltan";
  }
  return "?";
}

FeatureType feature_type(FeatureFamily family, const RelTanConfig& reltan) {
  switch (family) {
    case FeatureFamily::Xyz: return FeatureType({0, 0, 0});
    case FeatureFamily::Get: return FeatureType({0, 1});
    case FeatureFamily::RelTan: return FeatureType({0, 1}).repeated(reltan.powers.size());
  }
  return {};
}

Vec3 reltan_vector(const Mesh& mesh, const std::vector<Vec3>& normals, std::size_t p, double r) {
  const auto nbrs = mesh.neighbors(p);
  const Vec3& x = mesh.position(p);
  if (nbrs.empty()) {
    throw Error(ErrorCode::EmptyNeighborhood, "vertex " + std::to_string(p) + " has no neighbors");
  }
  // Weight of q is (sum_q' d_q'^(r-1)) / d_q^(r-1).
  double total = 0.0;
  for (std::size_t q : nbrs) {
    const double d = (mesh.position(q) - x).norm();
    if (d == 0.0) {
      throw Error(ErrorCode::ZeroDistance, "vertices " + std::to_string(p) + " and " +
                                               std::to_string(q) + " coincide");
    }
    total += std::pow(d, r - 1.0);
  }
  const Mat3 proj = tangent_projector(normals[p]);
  Vec3 v = Vec3::Zero();
  for (std::size_t q : nbrs) {
    const Vec3 diff = mesh.position(q) - x;
    const double d = diff.norm();
    v += (proj * (diff / d)) * (total / std::pow(d, r - 1.0));
  }
  const double n = static_cast<double>(nbrs.size());
  return v / (n * std::sqrt(n));
}

GeometricFeatureField reltan_features(const Mesh& mesh, const FrameField& frames,
                                      const RelTanConfig& cfg) {
  if (cfg.powers.empty()) throw Error(ErrorCode::Config, "reltan needs at least one relative power");
  if (frames.size() != mesh.vertex_count()) {
    throw Error(ErrorCode::CountMismatch, "reltan_features: frame field size mismatch");
  }
  GeometricFeatureField out{feature_type(FeatureFamily::RelTan, cfg),
                            Tensor::Zero(static_cast<long>(mesh.vertex_count()),
                                         static_cast<long>(3 * cfg.powers.size())),
                            frames.id};
  for (std::size_t p = 0; p < mesh.vertex_count(); ++p) {
    for (std::size_t k = 0; k < cfg.powers.size(); ++k) {
      const Vec3 v = reltan_vector(mesh, frames.normals, p, cfg.powers[k]);
      const long row = static_cast<long>(p);
      const long col = static_cast<long>(3 * k);
      out.values(row, col) = cfg.scalar_norm ? v.norm() : 0.0;
      out.values(row, col + 1) = frames.e1[p].dot(v);
      out.values(row, col + 2) = frames.e2[p].dot(v);
    }
  }
  return out;
}

GeometricFeatureField get_features(const Mesh& mesh, const FrameField& frames) {
  if (frames.size() != mesh.vertex_count()) {
    throw Error(ErrorCode::CountMismatch, "get_features: frame field size mismatch");
  }
  GeometricFeatureField out{FeatureType({0, 1}),
                            Tensor(static_cast<long>(mesh.vertex_count()), 3), frames.id};
  for (std::size_t p = 0; p < mesh.vertex_count(); ++p) {
    const Vec3& x = mesh.position(p);
    out.values.row(static_cast<long>(p)) << x.dot(frames.normals[p]), x.dot(frames.e1[p]),
        x.dot(frames.e2[p]);
  }
  return out;
}

GeometricFeatureField xyz_features(const Mesh& mesh) {
  GeometricFeatureField out{FeatureType({0, 0, 0}),
                            Tensor(static_cast<long>(mesh.vertex_count()), 3), kAnyFrame};
  for (std::size_t p = 0; p < mesh.vertex_count(); ++p) {
    out.values.row(static_cast<long>(p)) = mesh.position(p).transpose();
  }
  return out;
}

GeometricFeatureField compute_features(FeatureFamily family, const Mesh& mesh,
                                       const FrameField& frames, const RelTanConfig& reltan) {
  switch (family) {
    case FeatureFamily::Xyz: return xyz_features(mesh);
    case FeatureFamily::Get: return get_features(mesh, frames);
    case FeatureFamily::RelTan: return reltan_features(mesh, frames, reltan);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown feature family");
}

std::vector<Vec3> tangent_vectors(const GeometricFeatureField& field, const FrameField& frames,
                                  std::size_t irrep) {
  if (irrep >= field.type.irrep_count() || field.type.orders()[irrep] != 1) {
    throw Error(ErrorCode::TypeMismatch, "tangent_vectors: irrep " + std::to_string(irrep) +
                                             " of " + field.type.to_string() + " is not rho1");
  }
  const long off = static_cast<long>(field.type.offset(irrep));
  std::vector<Vec3> out(frames.size());
  for (std::size_t p = 0; p < frames.size(); ++p) {
    const long row = static_cast<long>(p);
    out[p] = field.values(row, off) * frames.e1[p] + field.values(row, off + 1) * frames.e2[p];
  }
  return out;
}

ScalingStatistics reltan_scaling_statistics(int degree, std::size_t samples, std::uint64_t seed,
                                            double r, RadialDistribution radial) {
  if (degree < 2) throw Error(ErrorCode::InvalidArgument, "degree must be >= 2");
  if (samples == 0) throw Error(ErrorCode::InvalidArgument, "samples must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  const auto n = static_cast<std::size_t>(degree);
  std::vector<double> dist(n);
  std::vector<double> phi(n);
  double acc = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double total = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      double d = 1.0;
      if (radial == RadialDistribution::HalfNormal) {
        do {
          d = std::abs(normal(rng));
        } while (d == 0.0);
      }
      dist[q] = d;
      phi[q] = angle(rng);
      total += std::pow(d, r - 1.0);
    }
    double x = 0.0;
    double y = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      const double w = total / std::pow(dist[q], r - 1.0);
      x += w * std::cos(phi[q]);
      y += w * std::sin(phi[q]);
    }
    acc += x * x + y * y;
  }
  const double unnormalized = acc / static_cast<double>(samples);
  const double nd = static_cast<double>(degree);
  return {unnormalized / (nd * nd * nd), unnormalized};
}

}  // namespace meshnet
