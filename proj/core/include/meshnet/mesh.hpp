#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace meshnet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<std::size_t, 3>;

/// Indexed, consistently oriented triangle mesh.
///
/// Construction validates the connectivity (index range, degenerate index
/// triples, edge manifoldness, orientation, vertex fans) and builds the
/// per-vertex neighbor lists. Neighbors of a vertex are stored in the
/// counter-clockwise order of its face fan. Interior fans start at the
/// second vertex of the first incident face in face-list order; boundary
/// fans start at the open end. The start therefore depends only on face
/// order and geometry, never on vertex labels.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t face_count() const noexcept { return faces_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }

  const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
  const Vec3& position(std::size_t v) const { return vertices_[v]; }
  const std::vector<Face>& faces() const noexcept { return faces_; }

  std::span<const std::size_t> neighbors(std::size_t v) const {
    return {neighbors_.data() + neighbor_offsets_[v],
            neighbor_offsets_[v + 1] - neighbor_offsets_[v]};
  }
  std::size_t degree(std::size_t v) const {
    return neighbor_offsets_[v + 1] - neighbor_offsets_[v];
  }
  std::span<const std::size_t> incident_faces(std::size_t v) const {
    return {incident_.data() + incident_offsets_[v],
            incident_offsets_[v + 1] - incident_offsets_[v]};
  }
  bool is_boundary(std::size_t v) const { return boundary_[v] != 0; }

  /// Same connectivity, new positions.
  Mesh with_positions(std::vector<Vec3> positions) const;

 private:
  void build();

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<std::size_t> neighbor_offsets_{0};
  std::vector<std::size_t> neighbors_;
  std::vector<std::size_t> incident_offsets_{0};
  std::vector<std::size_t> incident_;
  std::vector<std::uint8_t> boundary_;
  std::size_t edge_count_ = 0;
};

struct FaceGeometry {
  std::vector<Vec3> normals;
  std::vector<double> areas;
};

enum class MeshFormat { Off, Obj };

Mesh load_mesh(const std::filesystem::path& path, MeshFormat format);
/// Format chosen from the file extension (.off / .obj).
Mesh load_mesh(const std::filesystem::path& path);
Mesh parse_off(std::string_view text);
Mesh parse_obj(std::string_view text);

/// Writes shortest round-trip decimal representations, so
/// load_mesh(save_mesh(m)) reproduces positions bit for bit.
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);
std::string to_off(const Mesh& mesh);

FaceGeometry face_geometry(const Mesh& mesh);

/// Area-weighted vertex normals.
std::vector<Vec3> vertex_normals(const Mesh& mesh, const FaceGeometry& fg);
std::vector<Vec3> vertex_normals(const Mesh& mesh);

Mesh make_icosphere(int subdivisions);
Mesh make_grid_patch(int rows, int cols, double height_noise_amplitude,
                     std::uint64_t rng_seed);

}  // namespace meshnet
