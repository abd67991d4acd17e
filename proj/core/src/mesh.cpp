#include "meshnet/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>
#include <utility>

#include <Eigen/Geometry>

#include "meshnet/error.hpp"

namespace meshnet {

namespace {

std::uint64_t edge_key(std::size_t a, std::size_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

std::string edge_name(std::size_t a, std::size_t b) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  build();
}

Mesh Mesh::with_positions(std::vector<Vec3> positions) const {
  if (positions.size() != vertices_.size()) {
    throw Error(ErrorCode::CountMismatch, "with_positions: expected " +
                                              std::to_string(vertices_.size()) +
                                              " positions, got " +
                                              std::to_string(positions.size()));
  }
  Mesh copy = *this;
  copy.vertices_ = std::move(positions);
  return copy;
}

void Mesh::build() {
  const std::size_t nv = vertices_.size();
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    for (std::size_t idx : faces_[f]) {
      if (idx >= nv) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "face " + std::to_string(f) + " references vertex " +
                        std::to_string(idx) + " but the mesh has " +
                        std::to_string(nv) + " vertices");
      }
    }
    const Face& t = faces_[f];
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw Error(ErrorCode::DegenerateFace,
                  "face " + std::to_string(f) + " repeats a vertex index");
    }
  }

  // Undirected usage first, then direction.
  std::unordered_map<std::uint64_t, int> undirected;
  std::unordered_map<std::uint64_t, std::size_t> directed;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const std::size_t a = faces_[f][k];
      const std::size_t b = faces_[f][(k + 1) % 3];
      const int uses = ++undirected[edge_key(std::min(a, b), std::max(a, b))];
      if (uses > 2) {
        throw Error(ErrorCode::NonManifoldEdge,
                    "edge " + edge_name(std::min(a, b), std::max(a, b)) +
                        " is shared by more than two faces");
      }
    }
  }
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const std::size_t a = faces_[f][k];
      const std::size_t b = faces_[f][(k + 1) % 3];
      auto [it, inserted] = directed.emplace(edge_key(a, b), f);
      if (!inserted) {
        throw Error(ErrorCode::InconsistentOrientation,
                    "edge " + edge_name(a, b) + " has the same direction in faces " +
                        std::to_string(it->second) + " and " + std::to_string(f));
      }
    }
  }
  edge_count_ = undirected.size();

  // Incident faces in face-list order.
  std::vector<std::size_t> counts(nv, 0);
  for (const Face& t : faces_) {
    for (std::size_t v : t) ++counts[v];
  }
  incident_offsets_.assign(nv + 1, 0);
  for (std::size_t v = 0; v < nv; ++v) {
    if (counts[v] == 0) {
      throw Error(ErrorCode::IsolatedVertex,
                  "vertex " + std::to_string(v) + " has no incident face");
    }
    incident_offsets_[v + 1] = incident_offsets_[v] + counts[v];
  }
  incident_.assign(incident_offsets_[nv], 0);
  std::vector<std::size_t> fill(incident_offsets_.begin(), incident_offsets_.end() - 1);
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    for (std::size_t v : faces_[f]) incident_[fill[v]++] = f;
  }

  // Counter-clockwise fans: every incident face (p, b, c) maps b -> c.
  neighbor_offsets_.assign(1, 0);
  neighbors_.clear();
  boundary_.assign(nv, 0);
  for (std::size_t p = 0; p < nv; ++p) {
    std::map<std::size_t, std::size_t> next;  // b -> c
    std::map<std::size_t, int> incoming;
    std::size_t first_b = 0;
    bool have_first = false;
    for (std::size_t f : incident_faces(p)) {
      const Face& t = faces_[f];
      int k = 0;
      while (t[k] != p) ++k;
      const std::size_t b = t[(k + 1) % 3];
      const std::size_t c = t[(k + 2) % 3];
      next[b] = c;
      ++incoming[c];
      if (!have_first) {
        first_b = b;
        have_first = true;
      }
    }
    std::vector<std::size_t> starts;
    for (const auto& [b, c] : next) {
      if (incoming.find(b) == incoming.end()) starts.push_back(b);
    }
    if (starts.size() > 1) {
      throw Error(ErrorCode::NonManifoldVertex,
                  "vertex " + std::to_string(p) + " has " +
                      std::to_string(starts.size()) + " disconnected face fans");
    }
    const bool open = !starts.empty();
    std::size_t cur = open ? starts.front() : first_b;
    std::size_t visited = 0;
    const std::size_t fan_size = next.size();
    while (true) {
      neighbors_.push_back(cur);
      auto it = next.find(cur);
      if (it == next.end()) break;  // open end reached
      ++visited;
      cur = it->second;
      if (!open && cur == first_b) break;
      if (visited > fan_size) break;
    }
    if (visited != fan_size) {
      throw Error(ErrorCode::NonManifoldVertex,
                  "vertex " + std::to_string(p) + " has more than one face fan");
    }
    boundary_[p] = open ? 1 : 0;
    neighbor_offsets_.push_back(neighbors_.size());
  }
}

// ---------------------------------------------------------------------------
// I/O

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Non-empty, comment-stripped lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::vector<std::string_view>>> tokenized_lines(
    std::string_view text) {
  std::vector<std::pair<std::size_t, std::vector<std::string_view>>> lines;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tokens = split_ws(line);
    if (!tokens.empty()) lines.emplace_back(lineno, std::move(tokens));
    if (end == text.size()) break;
    pos = end + 1;
  }
  return lines;
}

double parse_double(std::string_view tok, std::size_t lineno) {
  double value = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) +
                                      ": expected a number, got '" + std::string(tok) + "'");
  }
  return value;
}

long long parse_int(std::string_view tok, std::size_t lineno) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) +
                                      ": expected an integer, got '" + std::string(tok) + "'");
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t checked_index(long long idx, std::size_t face, std::size_t nv) {
  if (idx < 0 || static_cast<unsigned long long>(idx) >= nv) {
    throw Error(ErrorCode::IndexOutOfRange,
                "face " + std::to_string(face) + " references vertex " +
                    std::to_string(idx) + " but the mesh has " + std::to_string(nv) +
                    " vertices");
  }
  return static_cast<std::size_t>(idx);
}

}  // namespace

Mesh parse_off(std::string_view text) {
  auto lines = tokenized_lines(text);
  std::size_t li = 0;
  auto need = [&](const char* what) -> const auto& {
    if (li >= lines.size()) throw Error(ErrorCode::Parse, std::string("unexpected end of file, expected ") + what);
    return lines[li++];
  };
  auto header = need("OFF header");
  std::vector<std::string_view> counts(header.second.begin(), header.second.end());
  if (counts.front() != "OFF") {
    throw Error(ErrorCode::Parse, "line " + std::to_string(header.first) + ": missing OFF header");
  }
  counts.erase(counts.begin());
  std::size_t count_line = header.first;
  if (counts.empty()) {
    const auto& c = need("vertex/face counts");
    counts = c.second;
    count_line = c.first;
  }
  if (counts.size() < 2) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(count_line) + ": expected 'V F E'");
  }
  const long long nv = parse_int(counts[0], count_line);
  const long long nf = parse_int(counts[1], count_line);
  if (nv < 0 || nf < 0) throw Error(ErrorCode::Parse, "negative element counts");

  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i) {
    const auto& [lineno, tok] = need("vertex line");
    if (tok.size() < 3) throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": vertex needs 3 coordinates");
    vertices.emplace_back(parse_double(tok[0], lineno), parse_double(tok[1], lineno),
                          parse_double(tok[2], lineno));
  }
  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(nf));
  for (long long f = 0; f < nf; ++f) {
    const auto& [lineno, tok] = need("face line");
    const long long n = parse_int(tok[0], lineno);
    if (n != 3) throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": only triangular faces are supported");
    if (tok.size() < 4) throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": face needs 3 indices");
    const auto fi = static_cast<std::size_t>(f);
    const auto n_v = static_cast<std::size_t>(nv);
    faces.push_back({checked_index(parse_int(tok[1], lineno), fi, n_v),
                     checked_index(parse_int(tok[2], lineno), fi, n_v),
                     checked_index(parse_int(tok[3], lineno), fi, n_v)});
  }
  return Mesh(std::move(vertices), std::move(faces));
}

Mesh parse_obj(std::string_view text) {
  std::vector<Vec3> vertices;
  std::vector<std::array<long long, 3>> raw_faces;
  std::vector<std::size_t> face_lines;
  for (const auto& [lineno, tok] : tokenized_lines(text)) {
    if (tok[0] == "v") {
      if (tok.size() < 4) throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": vertex needs 3 coordinates");
      vertices.emplace_back(parse_double(tok[1], lineno), parse_double(tok[2], lineno),
                            parse_double(tok[3], lineno));
    } else if (tok[0] == "f") {
      if (tok.size() != 4) throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": only triangular faces are supported");
      std::array<long long, 3> idx{};
      for (int k = 0; k < 3; ++k) {
        std::string_view ref = tok[k + 1];
        ref = ref.substr(0, ref.find('/'));
        long long value = parse_int(ref, lineno);
        // OBJ indices are 1-based; negative values are relative to the end.
        idx[k] = value > 0 ? value - 1 : static_cast<long long>(vertices.size()) + value;
      }
      raw_faces.push_back(idx);
      face_lines.push_back(lineno);
    }
    // vt, vn, g, o, s, usemtl, mtllib: ignored
  }
  std::vector<Face> faces;
  faces.reserve(raw_faces.size());
  for (std::size_t f = 0; f < raw_faces.size(); ++f) {
    faces.push_back({checked_index(raw_faces[f][0], f, vertices.size()),
                     checked_index(raw_faces[f][1], f, vertices.size()),
                     checked_index(raw_faces[f][2], f, vertices.size())});
  }
  return Mesh(std::move(vertices), std::move(faces));
}

Mesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  const std::string text = read_file(path);
  return format == MeshFormat::Off ? parse_off(text) : parse_obj(text);
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".off") return load_mesh(path, MeshFormat::Off);
  if (ext == ".obj") return load_mesh(path, MeshFormat::Obj);
  throw Error(ErrorCode::Parse, "unknown mesh extension '" + ext + "' for " + path.string());
}

namespace {

void append_double(std::string& out, double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

}  // namespace

std::string to_off(const Mesh& mesh) {
  std::string out = "OFF\n";
  out += std::to_string(mesh.vertex_count()) + " " + std::to_string(mesh.face_count()) + " " +
         std::to_string(mesh.edge_count()) + "\n";
  for (const Vec3& p : mesh.vertices()) {
    append_double(out, p.x());
    out += ' ';
    append_double(out, p.y());
    out += ' ';
    append_double(out, p.z());
    out += '\n';
  }
  for (const Face& f : mesh.faces()) {
    out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " + std::to_string(f[2]) + "\n";
  }
  return out;
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_off(mesh);
}

// ---------------------------------------------------------------------------
// Geometry

FaceGeometry face_geometry(const Mesh& mesh) {
  FaceGeometry fg;
  fg.normals.reserve(mesh.face_count());
  fg.areas.reserve(mesh.face_count());
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const Face& t = mesh.faces()[f];
    const Vec3 e1 = mesh.position(t[1]) - mesh.position(t[0]);
    const Vec3 e2 = mesh.position(t[2]) - mesh.position(t[0]);
    const Vec3 cross = e1.cross(e2);
    const double norm = cross.norm();
    if (!(norm > 1e-14 * e1.norm() * e2.norm()) || norm == 0.0) {
      throw Error(ErrorCode::DegenerateFace, "face " + std::to_string(f) + " has zero area");
    }
    fg.normals.push_back(cross / norm);
    fg.areas.push_back(0.5 * norm);
  }
  return fg;
}

std::vector<Vec3> vertex_normals(const Mesh& mesh, const FaceGeometry& fg) {
  std::vector<Vec3> normals(mesh.vertex_count(), Vec3::Zero());
  for (std::size_t p = 0; p < mesh.vertex_count(); ++p) {
    Vec3 sum = Vec3::Zero();
    double total_area = 0.0;
    for (std::size_t f : mesh.incident_faces(p)) {
      sum += fg.areas[f] * fg.normals[f];
      total_area += fg.areas[f];
    }
    const double norm = sum.norm();
    if (!(norm > 1e-14 * total_area)) {
      throw Error(ErrorCode::DegenerateNormal,
                  "vertex " + std::to_string(p) + " has a vanishing area-weighted normal");
    }
    normals[p] = sum / norm;
  }
  return normals;
}

std::vector<Vec3> vertex_normals(const Mesh& mesh) {
  return vertex_normals(mesh, face_geometry(mesh));
}

// ---------------------------------------------------------------------------
// Generators

Mesh make_icosphere(int subdivisions) {
  if (subdivisions < 0) {
    throw Error(ErrorCode::InvalidArgument, "icosphere subdivisions must be >= 0");
  }
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  };
  for (Vec3& p : v) p.normalize();
  std::vector<Face> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  for (int s = 0; s < subdivisions; ++s) {
    std::unordered_map<std::uint64_t, std::size_t> midpoint;
    auto mid = [&](std::size_t a, std::size_t b) {
      const std::uint64_t key = edge_key(std::min(a, b), std::max(a, b));
      if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      v.push_back((0.5 * (v[a] + v[b])).normalized());
      midpoint.emplace(key, v.size() - 1);
      return v.size() - 1;
    };
    std::vector<Face> refined;
    refined.reserve(faces.size() * 4);
    for (const Face& f : faces) {
      const std::size_t ab = mid(f[0], f[1]);
      const std::size_t bc = mid(f[1], f[2]);
      const std::size_t ca = mid(f[2], f[0]);
      refined.push_back({f[0], ab, ca});
      refined.push_back({f[1], bc, ab});
      refined.push_back({f[2], ca, bc});
      refined.push_back({ab, bc, ca});
    }
    faces = std::move(refined);
  }
  return Mesh(std::move(v), std::move(faces));
}

Mesh make_grid_patch(int rows, int cols, double height_noise_amplitude, std::uint64_t rng_seed) {
  if (rows < 2 || cols < 2) {
    throw Error(ErrorCode::InvalidArgument, "grid patch needs rows >= 2 and cols >= 2");
  }
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Vec3> v;
  v.reserve(static_cast<std::size_t>(rows * cols));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double h = height_noise_amplitude == 0.0 ? 0.0 : height_noise_amplitude * unit(rng);
      v.emplace_back(static_cast<double>(j), static_cast<double>(i), h);
    }
  }
  auto id = [cols](int i, int j) { return static_cast<std::size_t>(i * cols + j); };
  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(2 * (rows - 1) * (cols - 1)));
  for (int i = 0; i + 1 < rows; ++i) {
    for (int j = 0; j + 1 < cols; ++j) {
      // Counter-clockwise seen from +z.
      faces.push_back({id(i, j), id(i, j + 1), id(i + 1, j + 1)});
      faces.push_back({id(i, j), id(i + 1, j + 1), id(i + 1, j)});
    }
  }
  return Mesh(std::move(v), std::move(faces));
}

}  // namespace meshnet
