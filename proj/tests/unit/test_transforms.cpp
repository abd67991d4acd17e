#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "generators.hpp"
#include "meshnet/error.hpp"
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

TEST(Ambient, AppliesScaleRotationThenTranslation) {
  const Mat3 quarter_z = Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ()).toRotationMatrix();
  const AmbientTransform t{quarter_z, Vec3(1, 2, 3), 2.0};
  EXPECT_LT((t.apply(Vec3(1, 0, 0)) - Vec3(1, 4, 3)).norm(), 1e-15);
}

TEST(Ambient, ValidateRejectsReflectionsAndBadScale) {
  AmbientTransform reflect;
  reflect.rotation = Vec3(1, 1, -1).asDiagonal();
  EXPECT_EQ(error_of([&] { reflect.validate(); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_of([] { AmbientTransform::scale_only(0.0).validate(); }), ErrorCode::InvalidArgument);
  EXPECT_NO_THROW(AmbientTransform::translation_only(Vec3(1, 1, 1)).validate());
}

TEST(Ambient, MeshKeepsConnectivity) {
  Rng rng(1);
  const Mesh m = testing::random_mesh(rng);
  const Mesh moved = apply_ambient(m, random_ambient(rng));
  ASSERT_EQ(moved.vertex_count(), m.vertex_count());
  EXPECT_EQ(moved.faces(), m.faces());
}

TEST(Permutation, InverseUndoesMap) {
  const Permutation p({2, 0, 3, 1});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(p.inverse(p(i)), i);
  EXPECT_EQ(p.inverted()(2), 0u);
  EXPECT_EQ(error_of([] { Permutation({0, 0, 1}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_of([] { Permutation({0, 3}); }), ErrorCode::InvalidArgument);
}

TEST(Permutation, RowsMoveToNewIndex) {
  Tensor rows(3, 2);
  rows << 1, 2, 3, 4, 5, 6;
  const Tensor moved = permute_rows(rows, Permutation({1, 2, 0}));
  Tensor expected(3, 2);
  expected << 5, 6, 1, 2, 3, 4;
  EXPECT_EQ(moved, expected);
  EXPECT_EQ(error_of([&] { permute_rows(rows, Permutation::identity(2)); }), ErrorCode::CountMismatch);
}

TEST(Permutation, MeshNeighbourhoodsAreRelabelled) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Mesh m = testing::random_mesh(rng);
    const Permutation perm = random_permutation(m.vertex_count(), rng);
    const Mesh pm = apply_permutation(m, perm);
    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
      EXPECT_EQ(pm.position(perm(v)), m.position(v));
      std::set<std::size_t> expected;
      for (std::size_t q : m.neighbors(v)) expected.insert(perm(q));
      const auto got = pm.neighbors(perm(v));
      EXPECT_EQ(std::set<std::size_t>(got.begin(), got.end()), expected);
    }
  }
}

TEST(Random, RotationsAreProper) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Mat3 r = random_rotation(rng);
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).norm(), 1e-13);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-13);
  }
}

TEST(Random, RotationsCoverTheSphere) {
  // The image of a fixed axis is uniform on the sphere, so its mean tends
  // to zero; 4000 draws give a standard error of about 0.009 per axis.
  Rng rng(4);
  Vec3 mean = Vec3::Zero();
  const int n = 4000;
  for (int i = 0; i < n; ++i) mean += random_rotation(rng) * Vec3::UnitZ();
  mean /= n;
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.05);
}

TEST(Random, AmbientRespectsRanges) {
  Rng rng(5);
  TransformRanges ranges;
  ranges.translation = 2.0;
  ranges.scale_min = 0.5;
  ranges.scale_max = 4.0;
  for (int i = 0; i < 500; ++i) {
    const AmbientTransform t = random_ambient(rng, ranges);
    EXPECT_LE(t.translation.cwiseAbs().maxCoeff(), 2.0);
    EXPECT_GE(t.scale, 0.5);
    EXPECT_LE(t.scale, 4.0);
    EXPECT_NO_THROW(t.validate());
  }
  ranges.scale_min = -1.0;
  EXPECT_EQ(error_of([&] { random_ambient(rng, ranges); }), ErrorCode::Config);
}

TEST(Random, GaugeAnglesAreWrapped) {
  Rng rng(6);
  for (double a : random_gauge(1000, rng)) {
    EXPECT_GT(a, -std::numbers::pi);
    EXPECT_LE(a, std::numbers::pi);
  }
}

TEST(Random, SuiteIsDeterministicInSeed) {
  const TransformSuite a = random_transform_suite(30, 42);
  const TransformSuite b = random_transform_suite(30, 42);
  const TransformSuite c = random_transform_suite(30, 43);
  EXPECT_EQ(a.gauge, b.gauge);
  EXPECT_EQ(a.perm.map(), b.perm.map());
  EXPECT_EQ(a.ambient.rotation, b.ambient.rotation);
  EXPECT_NE(a.gauge, c.gauge);
}

TEST(Naturality, PushedFramesEqualRebuiltFrames) {
  // Frames are built from geometry only, so building them on the moved mesh
  // agrees with carrying the old frames along.
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const SurfaceGeometry g = testing::random_geometry(rng);
    const AmbientTransform t = random_ambient(rng);
    const SurfaceGeometry moved = prepare_geometry(apply_ambient(g.mesh, t));
    const FrameField pushed = pushforward_frames(g.frames, t.rotation);
    for (std::size_t v = 0; v < g.mesh.vertex_count(); ++v) {
      EXPECT_LT((pushed.e1[v] - moved.frames.e1[v]).norm(), 1e-10);
      EXPECT_LT((pushed.normals[v] - moved.frames.normals[v]).norm(), 1e-10);
    }
    for (std::size_t e = 0; e < g.transport.edge_count(); ++e) {
      EXPECT_LT(angle_distance(g.transport.transport[e], moved.transport.transport[e]), 1e-10);
      EXPECT_LT(angle_distance(g.transport.theta[e], moved.transport.theta[e]), 1e-10);
    }
  }
}

TEST(Naturality, PermutedFramesEqualRebuiltFrames) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const SurfaceGeometry g = testing::random_geometry(rng);
    const Permutation perm = random_permutation(g.mesh.vertex_count(), rng);
    const SurfaceGeometry moved = prepare_geometry(apply_permutation(g.mesh, perm));
    const FrameField permuted = permute_frames(g.frames, perm);
    for (std::size_t v = 0; v < g.mesh.vertex_count(); ++v) {
      EXPECT_LT((permuted.normals[v] - moved.frames.normals[v]).norm(), 1e-12);
    }
    EXPECT_EQ(moved.transport.edge_count(), g.transport.edge_count());
  }
}

TEST(Features, PermutationMovesRowsAndKeepsType) {
  Rng rng(9);
  const SurfaceGeometry g = testing::random_geometry(rng);
  const GeometricFeatureField f = testing::random_field(FeatureType::parse("rho0+rho1"), g, rng);
  const Permutation perm = random_permutation(g.mesh.vertex_count(), rng);
  const GeometricFeatureField pf = permute_features(f, perm);
  EXPECT_EQ(pf.type, f.type);
  for (std::size_t v = 0; v < g.mesh.vertex_count(); ++v) {
    EXPECT_EQ(pf.values.row(static_cast<long>(perm(v))), f.values.row(static_cast<long>(v)));
  }
  const GeometricFeatureField pushed = pushforward_features(f, 1234);
  EXPECT_EQ(pushed.values, f.values);
  EXPECT_EQ(pushed.binding, 1234u);
}

}  // namespace
}  // namespace meshnet
