#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "meshnet/config.hpp"
#include "meshnet/model.hpp"
#include "meshnet/transforms.hpp"

namespace meshnet {

std::string_view build_id();

/// Deterministic sub-seed for a named purpose (splitmix64 of seed ^ hash(tag)).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

struct Sample {
  SurfaceGeometry geometry;
  /// One label per vertex (segmentation) or a single label (classification).
  std::vector<std::size_t> labels;
};

struct Dataset {
  Task task = Task::Segmentation;
  int classes = 0;
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Seeded radial perturbation of an icosphere; the "body" every
/// segmentation mesh is a jittered copy of.
Mesh segmentation_template(const DataConfig& data, std::uint64_t seed);
Mesh jittered(const Mesh& mesh, double sigma, std::uint64_t seed);
Dataset make_dataset(const RunConfig& config);
Mesh make_configured_mesh(const MeshConfig& mesh, std::uint64_t seed);

enum class TransformFamily { Gauge, RotTrScale, Rotation, Translation, Scaling, Perm };

TransformFamily parse_transform_family(std::string_view name);
std::string_view to_string(TransformFamily family);

struct TransformedGeometry {
  SurfaceGeometry geometry;
  /// Set for the permutation family: old vertex i is new vertex perm(i).
  std::optional<Permutation> perm;
};

/// Gauge: rotates the existing frames and rebuilds transport. Ambient and
/// permutation families rebuild all geometry from scratch on the new mesh.
TransformedGeometry transform_geometry(const SurfaceGeometry& geometry, TransformFamily family,
                                       std::mt19937_64& rng, const TransformRanges& ranges);

/// Brings logits of a transformed mesh back to the original vertex order.
Tensor pull_back(const Tensor& logits, const TransformedGeometry& transformed, Task task);

double mean_squared_error(const Tensor& a, const Tensor& b);

double equivariance_gap(const Model& model, const SurfaceGeometry& geometry,
                        TransformFamily family, std::mt19937_64& rng,
                        const TransformRanges& ranges);

struct TrainHistory {
  std::vector<double> loss;
  std::vector<double> train_accuracy;
};

TrainHistory train_model(Model& model, const Dataset& data, const TrainConfig& train,
                         std::uint64_t seed);

/// Fraction of correctly predicted labels, optionally after a random
/// transformation of each mesh.
double accuracy(const Model& model, const std::vector<Sample>& samples,
                std::optional<TransformFamily> family = std::nullopt, std::uint64_t seed = 0,
                const TransformRanges& ranges = {});

/// Model config with targets filled from the dataset when left at 0.
ModelConfig resolved_model_config(const RunConfig& config, int classes);

nlohmann::json report_header(const RunConfig& config, std::string_view command);

nlohmann::json run_gen_mesh(const RunConfig& config);
nlohmann::json run_features(const RunConfig& config);
nlohmann::json run_eqgap(const RunConfig& config);
nlohmann::json run_train(const RunConfig& config);
nlohmann::json run_eval(const RunConfig& config);
nlohmann::json run_time(const RunConfig& config);

struct LayerTiming {
  double median_seconds = 0.0;
  std::size_t edges = 0;
};

/// Median forward + backward wall time of one hidden -> hidden layer on a
/// grid patch, after warmup runs.
LayerTiming time_layer(const RunConfig& config, LayerKind kind, int rows, int cols);

}  // namespace meshnet
