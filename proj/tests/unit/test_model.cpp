#include <numbers>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "meshnet/error.hpp"
#include "meshnet/model.hpp"
#include "meshnet/transforms.hpp"

namespace meshnet {
namespace {

using testing::Rng;

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a meshnet::Error";
  return ErrorCode::InvalidArgument;
}

ModelConfig small_config(LayerKind layer) {
  ModelConfig c;
  c.layer = layer;
  c.hidden_type = FeatureType::parse("2x(rho0+rho1+rho2)");
  c.final_type = FeatureType::parse("4x(rho0)");
  c.residual_blocks = 1;
  c.dense_width = 8;
  c.dropout = 0.0;
  c.targets = 6;
  return c;
}

class ModelShapes : public ::testing::TestWithParam<LayerKind> {};

TEST_P(ModelShapes, SegmentationGivesOneRowPerVertex) {
  Rng rng(1);
  const SurfaceGeometry g = testing::random_geometry(rng);
  const Model model(small_config(GetParam()), 3);
  const Tensor z = model.logits(g);
  EXPECT_EQ(z.rows(), static_cast<long>(g.mesh.vertex_count()));
  EXPECT_EQ(z.cols(), 6);
  EXPECT_TRUE(z.allFinite());
}

TEST_P(ModelShapes, ClassificationGivesOneRow) {
  Rng rng(2);
  const SurfaceGeometry g = testing::random_geometry(rng);
  ModelConfig c = small_config(GetParam());
  c.task = Task::Classification;
  const Model model(c, 3);
  const Tensor z = model.logits(g);
  EXPECT_EQ(z.rows(), 1);
  EXPECT_EQ(z.cols(), 6);
}

TEST_P(ModelShapes, SameSeedSameWeights) {
  Rng rng(3);
  const SurfaceGeometry g = testing::random_geometry(rng);
  const Model a(small_config(GetParam()), 9);
  const Model b(small_config(GetParam()), 9);
  const Model c(small_config(GetParam()), 10);
  EXPECT_EQ(a.logits(g), b.logits(g));
  EXPECT_NE(a.logits(g), c.logits(g));
  EXPECT_EQ(a.parameter_count(), c.parameter_count());
}

TEST_P(ModelShapes, EveryBlockAddsParameters) {
  ModelConfig c = small_config(GetParam());
  c.residual_blocks = 0;
  const std::size_t none = Model(c, 1).parameter_count();
  c.residual_blocks = 2;
  const std::size_t two = Model(c, 1).parameter_count();
  c.residual_blocks = 1;
  const std::size_t one = Model(c, 1).parameter_count();
  EXPECT_GT(one, none);
  EXPECT_EQ(two - one, one - none);
}

INSTANTIATE_TEST_SUITE_P(Layers, ModelShapes, ::testing::Values(LayerKind::Gem, LayerKind::Eman),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Model, RelTanModelIsGaugeInvariant) {
  // Logits are scalars, so rotating every gauge must leave them unchanged.
  Rng rng(4);
  for (LayerKind kind : {LayerKind::Gem, LayerKind::Eman}) {
    const Model model(small_config(kind), 5);
    const SurfaceGeometry g = testing::random_geometry(rng);
    const SurfaceGeometry turned = regauge(g, random_gauge(g.mesh.vertex_count(), rng));
    const Tensor a = model.logits(g);
    EXPECT_LT((model.logits(turned) - a).norm() / a.norm(), 1e-10);
  }
}

TEST(Model, RejectsWrongInput) {
  Rng rng(5);
  const SurfaceGeometry g = testing::random_geometry(rng);
  const Model model(small_config(LayerKind::Gem), 1);
  GeometricFeatureField input = model.input_features(g);
  GeometricFeatureField wrong = input;
  wrong.type = FeatureType::parse("rho0+rho1+rho0");
  wrong.values = Tensor::Zero(input.values.rows(), 4);
  EXPECT_EQ(error_of([&] { model.logits(wrong, g.transport); }), ErrorCode::TypeMismatch);
  input.binding = next_frame_id();
  EXPECT_EQ(error_of([&] { model.logits(input, g.transport); }), ErrorCode::FrameBindingMismatch);
}

TEST(Model, TrainingForwardNeedsDropoutGenerator) {
  Rng rng(6);
  const SurfaceGeometry g = testing::random_geometry(rng);
  ModelConfig c = small_config(LayerKind::Gem);
  c.dropout = 0.5;
  const Model model(c, 1);
  const GeometricFeatureField input = model.input_features(g);
  Tape tape;
  tape.training = true;
  EXPECT_EQ(error_of([&] { model.forward(tape, input, g.transport); }), ErrorCode::InvalidArgument);
  Tape eval;
  EXPECT_EQ(model.forward(eval, input, g.transport).value(), model.logits(g));
}

TEST(Model, ResidualAddChecksTypes) {
  Tape tape;
  const Var a = tape.constant(Tensor::Ones(2, 3));
  const FeatureType t = FeatureType::parse("rho0+rho1");
  EXPECT_EQ(residual_add(a, t, a, t).value(), Tensor::Constant(2, 3, 2.0));
  EXPECT_EQ(error_of([&] { residual_add(a, t, a, FeatureType::parse("rho1+rho0")); }),
            ErrorCode::ResidualTypeMismatch);
}

TEST(ModelConfig, ValidateRejectsBadSettings) {
  auto code_for = [](auto mutate) {
    ModelConfig c = small_config(LayerKind::Eman);
    mutate(c);
    return error_of([&] { c.validate(); });
  };
  EXPECT_EQ(code_for([](ModelConfig& c) { c.targets = 0; }), ErrorCode::Config);
  EXPECT_EQ(code_for([](ModelConfig& c) { c.residual_blocks = -1; }), ErrorCode::Config);
  EXPECT_EQ(code_for([](ModelConfig& c) { c.dropout = 1.0; }), ErrorCode::Config);
  EXPECT_EQ(code_for([](ModelConfig& c) { c.heads = 0; }), ErrorCode::Config);
  EXPECT_EQ(code_for([](ModelConfig& c) { c.final_type = FeatureType::parse("rho0+rho1"); }),
            ErrorCode::Config);
  EXPECT_EQ(code_for([](ModelConfig& c) { c.reltan.powers.clear(); }), ErrorCode::Config);
}

TEST(ModelConfig, HashFollowsArchitecture) {
  const ModelConfig a = small_config(LayerKind::Eman);
  ModelConfig b = a;
  EXPECT_EQ(a.hash(), b.hash());
  b.heads = 2;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_NE(a.canonical(), b.canonical());
}

TEST(ModelConfig, NamesRoundTrip) {
  for (Task t : {Task::Segmentation, Task::Classification}) EXPECT_EQ(parse_task(to_string(t)), t);
  for (LayerKind k : {LayerKind::Gem, LayerKind::Eman}) EXPECT_EQ(parse_layer_kind(to_string(k)), k);
  EXPECT_EQ(error_of([] { parse_layer_kind("gcn"); }), ErrorCode::Config);
  EXPECT_EQ(error_of([] { parse_task("regression"); }), ErrorCode::Config);
}

}  // namespace
}  // namespace meshnet
