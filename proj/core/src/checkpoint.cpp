#include "meshnet/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "meshnet/error.hpp"

namespace meshnet {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'E', 'S', 'H', 'N', 'E', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".json";
  return p;
}

nlohmann::json checkpoint_layout(const Model& model) {
  nlohmann::json params = nlohmann::json::array();
  std::size_t offset = 0;
  for (const Parameter* p : model.parameters()) {
    params.push_back({{"name", p->name},
                      {"shape", {p->value.rows(), p->value.cols()}},
                      {"offset", offset}});
    offset += p->size();
  }
  return {{"format", "MESHNET1"},
          {"config_hash", model.config().hash()},
          {"value_count", offset},
          {"parameters", params}};
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic.data(), kMagic.size());
  write_u64(out, model.config().hash());
  write_u64(out, model.parameter_count());
  for (const Parameter* p : model.parameters()) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint '" + path.string() + "'");

  std::ofstream side(sidecar_path(path));
  if (!side) throw Error(ErrorCode::Io, "cannot write checkpoint sidecar for '" + path.string() + "'");
  side << checkpoint_layout(model).dump(2) << '\n';
}

void load_checkpoint(Model& model, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) {
    throw Error(ErrorCode::CheckpointMismatch, "'" + path.string() + "' is not a meshnet checkpoint");
  }
  const std::uint64_t hash = read_u64(in);
  const std::uint64_t count = read_u64(in);
  if (!in) throw Error(ErrorCode::CheckpointMismatch, "truncated checkpoint header");
  if (hash != model.config().hash()) {
    throw Error(ErrorCode::CheckpointMismatch, "checkpoint was written for a different model config");
  }
  if (count != model.parameter_count()) {
    throw Error(ErrorCode::CheckpointMismatch, "checkpoint holds " + std::to_string(count) +
                                                   " values, model has " +
                                                   std::to_string(model.parameter_count()));
  }
  for (Parameter* p : model.parameters()) {
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->size() * sizeof(double)));
  }
  if (!in) throw Error(ErrorCode::CheckpointMismatch, "truncated checkpoint payload");
}

}  // namespace meshnet
