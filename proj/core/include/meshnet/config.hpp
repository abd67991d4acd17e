#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "meshnet/model.hpp"
#include "meshnet/transforms.hpp"

namespace meshnet {

/// Flat `key = value` text with `[section]` headers. Keys before the first
/// header are top-level; the rest are stored as "section.key". `#` and `;`
/// start comments.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text);
  static ConfigFile load(const std::filesystem::path& path);

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& at(const std::string& key) const { return entries_.at(key); }
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

 private:
  std::map<std::string, std::string> entries_;
};

struct DataConfig {
  /// segmentation | classification | files
  std::string kind = "segmentation";
  int train_meshes = 8;
  int test_meshes = 4;
  int subdivisions = 1;
  double template_noise = 0.15;
  double jitter = 0.01;
  int grid_rows = 6;
  int grid_cols = 7;
  double grid_noise = 0.1;
  /// Mesh files used by kind = files (eqgap only; no labels).
  std::vector<std::string> files;
};

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.01;
  int batch_size = 1;
  std::string checkpoint = "model.bin";
};

struct EqGapConfig {
  int meshes = 20;
  std::vector<std::string> families{"gauge", "rot_tr_scale", "rotation", "translation", "scaling", "perm"};
};

struct EvalConfig {
  std::string checkpoint = "model.bin";
  std::vector<std::string> families{"gauge", "rot_tr_scale", "perm"};
};

struct TimeConfig {
  int rows = 16;
  int cols = 16;
  int repetitions = 20;
  int warmup = 3;
  std::string layers = "gem,eman";
};

struct MeshConfig {
  /// icosphere | grid_patch | file
  std::string kind = "icosphere";
  int subdivisions = 1;
  int rows = 4;
  int cols = 4;
  double noise = 0.0;
  std::string input;
  std::string output;
};

struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  DataConfig data;
  TrainConfig train;
  TransformRanges transforms;
  EqGapConfig eqgap;
  EvalConfig eval;
  TimeConfig time;
  MeshConfig mesh;
};

/// Builds a RunConfig from parsed entries; rejects unknown keys and
/// malformed values. model.targets = 0 means "derive from the dataset".
RunConfig to_run_config(const ConfigFile& file);
RunConfig parse_run_config(std::string_view text);
/// Loads a config file and applies the MESHNET_SEED override.
RunConfig load_run_config(const std::filesystem::path& path);

/// Parses "[0.5, 0.7]" or "0.5, 0.7".
std::vector<double> parse_number_list(std::string_view text);
std::vector<std::string> parse_string_list(std::string_view text);

}  // namespace meshnet
