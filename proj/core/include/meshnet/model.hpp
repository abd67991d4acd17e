#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "meshnet/autodiff.hpp"
#include "meshnet/features.hpp"
#include "meshnet/layers.hpp"
#include "meshnet/tangent.hpp"

namespace meshnet {

enum class Task { Segmentation, Classification };
enum class LayerKind { Gem, Eman };

Task parse_task(std::string_view name);
std::string_view to_string(Task task);
LayerKind parse_layer_kind(std::string_view name);
std::string_view to_string(LayerKind kind);

struct ModelConfig {
  Task task = Task::Segmentation;
  LayerKind layer = LayerKind::Eman;
  BiasKind bias = BiasKind::Angular;
  FeatureFamily features = FeatureFamily::RelTan;
  RelTanConfig reltan;
  FeatureType hidden_type = FeatureType::parse("16x(rho0+rho1+rho2)");
  FeatureType final_type = FeatureType::parse("16x(rho0)");
  /// Attention type of every attention layer; defaults to the hidden type.
  std::optional<FeatureType> attention_type;
  int residual_blocks = 3;
  int dense_width = 256;
  double dropout = 0.5;
  bool self_contribution = false;
  int heads = 1;
  std::optional<FeatureType> head_type;
  int targets = 0;

  FeatureType input_type() const { return feature_type(features, reltan); }
  void validate() const;
  /// Sorted key=value lines of every architecture setting.
  std::string canonical() const;
  /// FNV-1a of canonical().
  std::uint64_t hash() const;
};

/// Adds a residual branch, checking that both sides have the same type.
Var residual_add(const Var& skip, const FeatureType& skip_type, const Var& branch,
                 const FeatureType& branch_type);

/// Convolution block (entry layer, residual pairs, exit layer to the final
/// scalar type) followed by the dense block.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;

  const ModelConfig& config() const noexcept { return config_; }

  GeometricFeatureField input_features(const SurfaceGeometry& geometry) const;

  /// Per-vertex logits (V x targets) or per-mesh logits (1 x targets).
  /// Dropout is active only when tape.training is set, and then needs rng.
  Var forward(Tape& tape, const GeometricFeatureField& input, const TransportData& transport,
              std::mt19937_64* dropout_rng = nullptr) const;

  Tensor logits(const SurfaceGeometry& geometry) const;
  Tensor logits(const GeometricFeatureField& input, const TransportData& transport) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;

 private:
  struct Stage {
    std::unique_ptr<MeshLayer> conv;
    GaugeNonlinearity gate;
  };

  Stage make_stage(const FeatureType& in, const FeatureType& out, const std::string& name,
                   std::mt19937_64& rng) const;
  Var run_stage(Tape& tape, const Stage& stage, const Var& x, const TransportData& t) const;

  ModelConfig config_;
  Stage entry_;
  std::vector<std::pair<Stage, Stage>> blocks_;
  Stage exit_;
  Dense dense1_;
  Dense dense2_;
};

}  // namespace meshnet
