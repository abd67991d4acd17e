#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meshnet/autodiff.hpp"
#include "meshnet/features.hpp"
#include "meshnet/representations.hpp"
#include "meshnet/tangent.hpp"

namespace meshnet {

// ---------------------------------------------------------------------------
// Typed differentiable ops

/// Row e of the result is rho(angles[e]) x[index[e]].
Var gather_rotate(const Var& x, const FeatureType& type, std::span<const std::size_t> index,
                  std::span<const double> angles);
/// Row e of the result is rho(angles[e]) x[e].
Var rotate_rows(const Var& x, const FeatureType& type, std::span<const double> angles);
/// x K(0)^T where K is assembled from `coefficients` (1 x coefficient_count).
Var equivariant_linear(const Var& x, const KernelLayout& layout, const Var& coefficients);
/// rho0 channels: f + b; rho_n channels: rho_n(b) f. One bias per irrep.
Var angular_bias(const Var& x, const FeatureType& type, const Var& bias);
/// rho0 channels: ReLU; rho_n channels: f sigma(|f| + c) / (|f| + eps), one
/// c per non-scalar irrep.
Var norm_gate(const Var& x, const FeatureType& type, const Var& offsets);

inline constexpr double kNormGateEps = 1e-6;

enum class BiasKind { None, Angular, Additive };

BiasKind parse_bias_kind(std::string_view name);
std::string_view to_string(BiasKind kind);

// ---------------------------------------------------------------------------
// Layers

/// Mesh convolution mapping features of one type to another.
class MeshLayer {
 public:
  virtual ~MeshLayer() = default;

  virtual Var forward(Tape& tape, const Var& x, const TransportData& transport) const = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::string kind() const = 0;

  const FeatureType& in_type() const noexcept { return in_; }
  const FeatureType& out_type() const noexcept { return out_; }

  /// Inference on a typed field; checks type and frame binding.
  GeometricFeatureField apply(const GeometricFeatureField& field,
                              const TransportData& transport) const;

 protected:
  MeshLayer(FeatureType in, FeatureType out) : in_(std::move(in)), out_(std::move(out)) {}
  void check_input(const Var& x, const TransportData& transport) const;

  FeatureType in_;
  FeatureType out_;
};

/// Bias applied after a convolution, in one of the three modes.
struct BiasTerm {
  BiasKind kind = BiasKind::None;
  Parameter param;

  BiasTerm() = default;
  BiasTerm(BiasKind kind, const FeatureType& type, const std::string& name, std::mt19937_64& rng);
  Var apply(Tape& tape, const Var& x, const FeatureType& type) const;
};

/// f'_p = K_self f_p + sum_q K_neigh(theta_pq) rho_in(g_{q->p}) f_q, then bias.
class GemConvLayer final : public MeshLayer {
 public:
  GemConvLayer(FeatureType in, FeatureType out, BiasKind bias, std::mt19937_64& rng,
               const std::string& name = "gem");

  Var forward(Tape& tape, const Var& x, const TransportData& transport) const override;
  std::vector<Parameter*> parameters() override;
  std::string kind() const override { return "gem"; }

  EquivariantKernel self_kernel() const;
  EquivariantKernel neigh_kernel() const;

  KernelLayout self_layout;
  KernelLayout neigh_layout;
  Parameter self_coefficients;
  Parameter neigh_coefficients;
  BiasTerm bias;
};

struct EmanOptions {
  /// Attention type; defaults to the output type.
  std::optional<FeatureType> attention_type;
  bool self_contribution = false;
  int heads = 1;
  /// Per-head type; defaults to splitting the output type into `heads`
  /// contiguous groups of equal dimension.
  std::optional<FeatureType> head_type;
  BiasKind bias = BiasKind::Angular;
};

/// Attention-weighted gauge equivariant aggregation
/// f'_p = N_p V_p softmax(K_p^T Q_p / sqrt(C_att)), with optional
/// self column ((N_p + 1) normaliser) and multi-head mixing.
class EmanAttentionLayer final : public MeshLayer {
 public:
  EmanAttentionLayer(FeatureType in, FeatureType out, const EmanOptions& options,
                     std::mt19937_64& rng, const std::string& name = "eman");

  Var forward(Tape& tape, const Var& x, const TransportData& transport) const override;
  std::vector<Parameter*> parameters() override;
  std::string kind() const override { return "eman"; }

  /// Attention weights alpha (one per edge, self entries excluded), for
  /// single-head layers.
  Tensor attention(const Tensor& x, const TransportData& transport) const;

  const FeatureType& attention_type() const noexcept { return att_; }
  bool self_contribution() const noexcept { return self_; }
  int heads() const noexcept { return static_cast<int>(head_types_.size()); }
  const std::vector<FeatureType>& head_types() const noexcept { return head_types_; }

  KernelLayout query_layout;
  KernelLayout key_layout;
  KernelLayout value_layout;
  KernelLayout key_self_layout;
  KernelLayout value_self_layout;
  Parameter query;
  Parameter key;
  Parameter value;
  Parameter key_self;
  Parameter value_self;

  // Multi-head projections (empty when heads == 1).
  std::vector<KernelLayout> head_query_layouts;
  std::vector<KernelLayout> head_key_layouts;
  std::vector<KernelLayout> head_value_layouts;
  KernelLayout mix_layout;
  std::vector<Parameter> head_query;
  std::vector<Parameter> head_key;
  std::vector<Parameter> head_value;
  Parameter mix;

  BiasTerm bias;

 private:
  Var forward_impl(Tape& tape, const Var& x, const TransportData& transport,
                   Var* alpha_out) const;

  FeatureType att_;
  bool self_ = false;
  std::vector<FeatureType> head_types_;
};

/// Norm-gated nonlinearity, equivariant for every feature type.
class GaugeNonlinearity {
 public:
  GaugeNonlinearity() = default;
  GaugeNonlinearity(FeatureType type, const std::string& name = "gate");

  Var forward(Tape& tape, const Var& x) const;
  std::vector<Parameter*> parameters();

  const FeatureType& type() const noexcept { return type_; }
  Parameter offsets;

 private:
  FeatureType type_;
};

/// Fully connected layer y = x W^T + b.
class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in, std::size_t out, std::mt19937_64& rng, const std::string& name = "dense");

  Var forward(Tape& tape, const Var& x) const;
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }

  Parameter weight;
  Parameter bias;
};

/// Equal-dimension split of a type into contiguous groups.
std::vector<FeatureType> split_type(const FeatureType& type, int groups);

}  // namespace meshnet
