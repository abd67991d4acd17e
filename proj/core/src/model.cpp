#include "meshnet/model.hpp"

#include <algorithm>
#include <sstream>

#include "meshnet/error.hpp"

namespace meshnet {

Task parse_task(std::string_view name) {
  if (name == "segmentation") return Task::Segmentation;
  if (name == "classification") return Task::Classification;
  throw Error(ErrorCode::Config, "unknown task '" + std::string(name) + "'");
}

std::string_view to_string(Task task) {
  return task == Task::Segmentation ? "segmentation" : "classification";
}

LayerKind parse_layer_kind(std::string_view name) {
  if (name == "gem") return LayerKind::Gem;
  if (name == "eman") return LayerKind::Eman;
  throw Error(ErrorCode::Config, "unknown layer kind '" + std::string(name) + "'");
}

std::string_view to_string(LayerKind kind) { return kind == LayerKind::Gem ? "gem" : "eman"; }

void ModelConfig::validate() const {
  if (targets < 1) throw Error(ErrorCode::Config, "model.targets must be >= 1");
  if (residual_blocks < 0) throw Error(ErrorCode::Config, "model.residual_blocks must be >= 0");
  if (dense_width < 1) throw Error(ErrorCode::Config, "model.dense_width must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw Error(ErrorCode::Config, "model.dropout must be in [0, 1)");
  if (heads < 1) throw Error(ErrorCode::Config, "model.heads must be >= 1");
  if (!final_type.is_scalar()) throw Error(ErrorCode::Config, "model.final_type must be scalar");
  if (hidden_type.irrep_count() == 0 || final_type.irrep_count() == 0) {
    throw Error(ErrorCode::Config, "model types must be non-empty");
  }
  if (features == FeatureFamily::RelTan && reltan.powers.empty()) {
    throw Error(ErrorCode::Config, "model.reltan_powers must be non-empty");
  }
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "attention_type=" << (attention_type ? attention_type->to_string() : "") << '\n'
     << "bias=" << to_string(bias) << '\n'
     << "dense_width=" << dense_width << '\n'
     << "dropout=" << dropout << '\n'
     << "features=" << to_string(features) << '\n'
     << "final_type=" << final_type.to_string() << '\n'
     << "head_type=" << (head_type ? head_type->to_string() : "") << '\n'
     << "heads=" << heads << '\n'
     << "hidden_type=" << hidden_type.to_string() << '\n'
     << "layer=" << to_string(layer) << '\n'
     << "reltan_norm=" << reltan.scalar_norm << '\n'
     << "reltan_powers=";
  for (std::size_t i = 0; i < reltan.powers.size(); ++i) os << (i ? "," : "") << reltan.powers[i];
  os << '\n'
     << "residual_blocks=" << residual_blocks << '\n'
     << "self_contribution=" << self_contribution << '\n'
     << "targets=" << targets << '\n'
     << "task=" << to_string(task) << '\n';
  return os.str();
}

std::uint64_t ModelConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Var residual_add(const Var& skip, const FeatureType& skip_type, const Var& branch,
                 const FeatureType& branch_type) {
  if (!(skip_type == branch_type)) {
    throw Error(ErrorCode::ResidualTypeMismatch, "residual add of " + skip_type.to_string() +
                                                     " and " + branch_type.to_string());
  }
  return add(skip, branch);
}

Model::Stage Model::make_stage(const FeatureType& in, const FeatureType& out,
                               const std::string& name, std::mt19937_64& rng) const {
  Stage s;
  if (config_.layer == LayerKind::Gem) {
    s.conv = std::make_unique<GemConvLayer>(in, out, config_.bias, rng, name);
  } else {
    EmanOptions opt;
    opt.attention_type = config_.attention_type.value_or(config_.hidden_type);
    opt.self_contribution = config_.self_contribution;
    opt.heads = config_.heads;
    opt.head_type = config_.head_type;
    opt.bias = config_.bias;
    s.conv = std::make_unique<EmanAttentionLayer>(in, out, opt, rng, name);
  }
  s.gate = GaugeNonlinearity(out, name + ".gate");
  return s;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const FeatureType& hidden = config_.hidden_type;
  entry_ = make_stage(config_.input_type(), hidden, "entry", rng);
  for (int b = 0; b < config_.residual_blocks; ++b) {
    const std::string tag = "block" + std::to_string(b);
    Stage first = make_stage(hidden, hidden, tag + ".conv0", rng);
    Stage second = make_stage(hidden, hidden, tag + ".conv1", rng);
    blocks_.emplace_back(std::move(first), std::move(second));
  }
  exit_ = make_stage(hidden, config_.final_type, "exit", rng);
  dense1_ = Dense(config_.final_type.dim(), static_cast<std::size_t>(config_.dense_width), rng, "dense0");
  dense2_ = Dense(static_cast<std::size_t>(config_.dense_width),
                  static_cast<std::size_t>(config_.targets), rng, "dense1");
}

Var Model::run_stage(Tape& tape, const Stage& stage, const Var& x, const TransportData& t) const {
  return stage.gate.forward(tape, stage.conv->forward(tape, x, t));
}

GeometricFeatureField Model::input_features(const SurfaceGeometry& geometry) const {
  return compute_features(config_.features, geometry.mesh, geometry.frames, config_.reltan);
}

Var Model::forward(Tape& tape, const GeometricFeatureField& input, const TransportData& transport,
                   std::mt19937_64* dropout_rng) const {
  if (!(input.type == config_.input_type())) {
    throw Error(ErrorCode::TypeMismatch, "model expects input " + config_.input_type().to_string() +
                                             ", got " + input.type.to_string());
  }
  if (!input.type.is_scalar() && input.binding != transport.binding) {
    throw Error(ErrorCode::FrameBindingMismatch, "input features and transport use different frames");
  }
  if (tape.training && config_.dropout > 0.0 && dropout_rng == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "training forward needs a dropout generator");
  }
  const FeatureType& hidden = config_.hidden_type;
  Var x = run_stage(tape, entry_, tape.constant(input.values), transport);
  for (const auto& [first, second] : blocks_) {
    const Var branch = run_stage(tape, second, run_stage(tape, first, x, transport), transport);
    x = residual_add(x, hidden, branch, hidden);
  }
  x = run_stage(tape, exit_, x, transport);

  std::mt19937_64 unused;
  std::mt19937_64& rng = dropout_rng != nullptr ? *dropout_rng : unused;
  x = dropout(relu(dense1_.forward(tape, x)), config_.dropout, rng);
  if (config_.task == Task::Classification) x = mean_rows(x);
  return dense2_.forward(tape, x);
}

Tensor Model::logits(const SurfaceGeometry& geometry) const {
  return logits(input_features(geometry), geometry.transport);
}

Tensor Model::logits(const GeometricFeatureField& input, const TransportData& transport) const {
  Tape tape;
  return forward(tape, input, transport).value();
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  auto add_stage = [&out](Stage& s) {
    for (Parameter* p : s.conv->parameters()) out.push_back(p);
    for (Parameter* p : s.gate.parameters()) out.push_back(p);
  };
  add_stage(entry_);
  for (auto& [first, second] : blocks_) {
    add_stage(first);
    add_stage(second);
  }
  add_stage(exit_);
  for (Parameter* p : dense1_.parameters()) out.push_back(p);
  for (Parameter* p : dense2_.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto mutable_params = const_cast<Model*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->size();
  return n;
}

}  // namespace meshnet
