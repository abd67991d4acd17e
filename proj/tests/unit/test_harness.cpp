#include <filesystem>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "meshnet/checkpoint.hpp"
#include "meshnet/error.hpp"
#include "meshnet/harness.hpp"

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

// Tiny segmentation run: a handful of jittered icospheres and a narrow model.
RunConfig tiny_run() {
  RunConfig rc;
  rc.seed = 11;
  rc.data.train_meshes = 3;
  rc.data.test_meshes = 2;
  rc.model.hidden_type = FeatureType::parse("2x(rho0+rho1)");
  rc.model.final_type = FeatureType::parse("4x(rho0)");
  rc.model.residual_blocks = 0;
  rc.model.dense_width = 16;
  rc.model.dropout = 0.0;
  rc.train.epochs = 3;
  rc.train.batch_size = 3;
  rc.train.checkpoint.clear();
  return rc;
}

TEST(Seeds, DerivedSeedsDependOnSeedAndTag) {
  EXPECT_EQ(derive_seed(1, "model"), derive_seed(1, "model"));
  EXPECT_NE(derive_seed(1, "model"), derive_seed(2, "model"));
  EXPECT_NE(derive_seed(1, "model"), derive_seed(1, "train"));
}

TEST(Dataset, SegmentationLabelsEveryVertex) {
  const RunConfig rc = tiny_run();
  const Dataset d = make_dataset(rc);
  EXPECT_EQ(d.task, Task::Segmentation);
  EXPECT_EQ(d.classes, 42);
  ASSERT_EQ(d.train.size(), 3u);
  ASSERT_EQ(d.test.size(), 2u);
  for (const Sample& s : d.train) {
    ASSERT_EQ(s.labels.size(), 42u);
    for (std::size_t i = 0; i < 42; ++i) EXPECT_EQ(s.labels[i], i);
  }
  EXPECT_NE(d.train[0].geometry.mesh.vertices(), d.train[1].geometry.mesh.vertices());
  EXPECT_EQ(make_dataset(rc).train[1].geometry.mesh.vertices(), d.train[1].geometry.mesh.vertices());
}

TEST(Dataset, ClassificationAlternatesLabels) {
  RunConfig rc = tiny_run();
  rc.data.kind = "classification";
  rc.data.train_meshes = 4;
  const Dataset d = make_dataset(rc);
  EXPECT_EQ(d.task, Task::Classification);
  EXPECT_EQ(d.classes, 2);
  for (std::size_t k = 0; k < d.train.size(); ++k) {
    ASSERT_EQ(d.train[k].labels.size(), 1u);
    EXPECT_EQ(d.train[k].labels[0], k % 2);
  }
  rc.data.kind = "files";
  EXPECT_EQ(error_of([&] { make_dataset(rc); }), ErrorCode::Config);
}

TEST(Training, ZeroLearningRateKeepsTheUntrainedModel) {
  RunConfig rc = tiny_run();
  rc.train.learning_rate = 0.0;
  rc.model.dropout = 0.3;
  const Dataset d = make_dataset(rc);
  const ModelConfig mc = resolved_model_config(rc, d.classes);
  Model trained(mc, 5);
  const Model untouched(mc, 5);
  train_model(trained, d, rc.train, rc.seed);
  EXPECT_EQ(trained.logits(d.test[0].geometry), untouched.logits(d.test[0].geometry));
  EXPECT_EQ(accuracy(trained, d.test), accuracy(untouched, d.test));
}

TEST(Training, LossGoesDown) {
  RunConfig rc = tiny_run();
  rc.train.epochs = 15;
  const Dataset d = make_dataset(rc);
  Model model(resolved_model_config(rc, d.classes), 5);
  const TrainHistory h = train_model(model, d, rc.train, rc.seed);
  ASSERT_EQ(h.loss.size(), 15u);
  ASSERT_EQ(h.train_accuracy.size(), 15u);
  EXPECT_LT(h.loss.back(), h.loss.front());
}

TEST(Training, EmptySetsAreRejected) {
  RunConfig rc = tiny_run();
  rc.data.train_meshes = 0;
  const Dataset d = make_dataset(rc);
  Model model(resolved_model_config(rc, d.classes), 5);
  EXPECT_EQ(error_of([&] { train_model(model, d, rc.train, 1); }), ErrorCode::EmptyDataset);
  EXPECT_EQ(error_of([&] { accuracy(model, {}); }), ErrorCode::EmptyDataset);
  rc.data.test_meshes = 0;
  EXPECT_EQ(error_of([&] { run_eval(rc); }), ErrorCode::EmptyDataset);
}

TEST(Transforms, PermutationIsPulledBack) {
  RunConfig rc = tiny_run();
  const Dataset d = make_dataset(rc);
  const Model model(resolved_model_config(rc, d.classes), 2);
  Rng rng(3);
  const SurfaceGeometry& g = d.train[0].geometry;
  const TransformedGeometry moved = transform_geometry(g, TransformFamily::Perm, rng, {});
  ASSERT_TRUE(moved.perm.has_value());
  const Tensor base = model.logits(g);
  const Tensor raw = model.logits(moved.geometry);
  EXPECT_GT(mean_squared_error(base, raw), 1e-6);
  EXPECT_LT(mean_squared_error(base, pull_back(raw, moved, Task::Segmentation)), 1e-24);
}

TEST(Transforms, FamilyNamesRoundTrip) {
  for (TransformFamily f : {TransformFamily::Gauge, TransformFamily::RotTrScale, TransformFamily::Rotation,
                            TransformFamily::Translation, TransformFamily::Scaling, TransformFamily::Perm}) {
    EXPECT_EQ(parse_transform_family(to_string(f)), f);
  }
  EXPECT_EQ(error_of([] { parse_transform_family("shear"); }), ErrorCode::Config);
  EXPECT_EQ(error_of([] { mean_squared_error(Tensor::Zero(1, 2), Tensor::Zero(2, 1)); }),
            ErrorCode::DimensionMismatch);
}

TEST(Commands, EqGapReportIsDeterministic) {
  RunConfig rc = tiny_run();
  rc.eqgap.meshes = 2;
  const nlohmann::json a = run_eqgap(rc);
  const nlohmann::json b = run_eqgap(rc);
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a["command"], "eqgap");
  EXPECT_EQ(a["meshes"], 2);
  for (const char* family : {"gauge", "rot_tr_scale", "perm"}) {
    ASSERT_TRUE(a["mse"].contains(family)) << family;
    EXPECT_LT(a["mse"][family].get<double>(), 1e-18) << family;
  }
}

TEST(Commands, TrainThenEvalAgree) {
  const std::filesystem::path ckpt = std::filesystem::temp_directory_path() / "meshnet_harness_test.bin";
  RunConfig rc = tiny_run();
  rc.train.checkpoint = ckpt.string();
  rc.eval.checkpoint = ckpt.string();
  rc.eval.families = {"gauge"};
  const nlohmann::json trained = run_train(rc);
  const nlohmann::json evaluated = run_eval(rc);
  EXPECT_EQ(trained["config_hash"], evaluated["config_hash"]);
  EXPECT_DOUBLE_EQ(trained["test_accuracy"].get<double>(), evaluated["accuracy"]["test"].get<double>());
  EXPECT_DOUBLE_EQ(evaluated["accuracy"]["gauge"].get<double>(), evaluated["accuracy"]["test"].get<double>());
  std::filesystem::remove(ckpt);
  std::filesystem::remove(sidecar_path(ckpt));
}

TEST(Commands, GenMeshNeedsOutput) {
  RunConfig rc;
  rc.mesh.output.clear();
  EXPECT_EQ(error_of([&] { run_gen_mesh(rc); }), ErrorCode::Config);
  rc.mesh.kind = "torus";
  EXPECT_EQ(error_of([&] { make_configured_mesh(rc.mesh, 1); }), ErrorCode::Config);
}

}  // namespace
}  // namespace meshnet
