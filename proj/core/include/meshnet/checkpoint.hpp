#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "meshnet/model.hpp"

namespace meshnet {

/// Binary layout: 8-byte magic "MESHNET1", little-endian uint64 config
/// hash, uint64 value count, then the parameter values as little-endian
/// doubles in Model::parameters() order (row-major within a parameter).
/// A JSON sidecar `<path>.json` lists each parameter's name and shape.
void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Throws CheckpointMismatch when the stored hash or value count differs
/// from the model's.
void load_checkpoint(Model& model, const std::filesystem::path& path);

nlohmann::json checkpoint_layout(const Model& model);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace meshnet
