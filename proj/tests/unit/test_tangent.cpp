#include <cmath>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "meshnet/error.hpp"
#include "meshnet/tangent.hpp"
#include "meshnet/transforms.hpp"

namespace meshnet {
namespace {

constexpr double kAngleTol = 1e-9;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a meshnet::Error";
  return ErrorCode::InvalidArgument;
}

void expect_frames_valid(const FrameField& frames) {
  for (std::size_t p = 0; p < frames.size(); ++p) {
    EXPECT_NEAR(frames.e1[p].norm(), 1.0, 1e-10);
    EXPECT_NEAR(frames.e2[p].norm(), 1.0, 1e-10);
    EXPECT_NEAR(frames.normals[p].norm(), 1.0, 1e-10);
    EXPECT_NEAR(frames.e1[p].dot(frames.e2[p]), 0.0, 1e-10);
    EXPECT_NEAR(frames.e1[p].dot(frames.normals[p]), 0.0, 1e-10);
    EXPECT_NEAR(frames.e2[p].dot(frames.normals[p]), 0.0, 1e-10);
    EXPECT_LE((frames.e1[p].cross(frames.e2[p]) - frames.normals[p]).norm(), 1e-10);
  }
}

TEST(TangentProjector, Examples) {
  const Mat3 pz = tangent_projector(Vec3(0, 0, 1));
  EXPECT_TRUE((pz * Vec3(3, 4, 5)).isApprox(Vec3(3, 4, 0)));
  EXPECT_LT((pz * Vec3(0, 0, 1)).norm(), 1e-15);

  const Vec3 n = Vec3(1, 1, 1).normalized();
  const Vec3 v(0.3, -2.0, 1.7);
  EXPECT_LT((tangent_projector(n) * v - (v - n.dot(v) * n)).norm(), 1e-14);
  const Mat3 p = tangent_projector(n);
  EXPECT_LT((p * p - p).norm(), 1e-14);
}

TEST(LogMap, Examples) {
  const Vec3 n(0, 0, 1);
  EXPECT_TRUE(log_map(Vec3::Zero(), Vec3(1, 0, 0), n).isApprox(Vec3(1, 0, 0)));
  EXPECT_LT((log_map(Vec3::Zero(), Vec3(1, 0, 1), n) - Vec3(std::sqrt(2.0), 0, 0)).norm(), 1e-15);
  EXPECT_EQ(code_of([&] { log_map(Vec3::Zero(), n, n); }), ErrorCode::UndefinedLogarithm);
}

TEST(LogMap, PreservesNeighborDistance) {
  testing::Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const SurfaceGeometry g = testing::random_geometry(rng);
    for (std::size_t p = 0; p < g.mesh.vertex_count(); ++p) {
      for (std::size_t q : g.mesh.neighbors(p)) {
        const Vec3 v = log_map(g.mesh.position(p), g.mesh.position(q), g.frames.normals[p]);
        const double d = (g.mesh.position(q) - g.mesh.position(p)).norm();
        EXPECT_NEAR(v.norm(), d, 1e-12 * std::max(1.0, d));
        EXPECT_NEAR(v.dot(g.frames.normals[p]), 0.0, 1e-12 * std::max(1.0, d));
      }
    }
  }
}

TEST(Frames, FlatGridReferenceNeighbor) {
  const Mesh grid = make_grid_patch(3, 3, 0.0, 1);
  const std::size_t centre = 4;  // (1, 1)
  const auto normals = vertex_normals(grid);
  std::vector<std::size_t> ref(grid.vertex_count());
  for (std::size_t p = 0; p < ref.size(); ++p) ref[p] = grid.neighbors(p).front();

  ref[centre] = 5;  // +x neighbour
  FrameField f = build_frames(grid, normals, ref);
  EXPECT_LT((f.e1[centre] - Vec3(1, 0, 0)).norm(), 1e-15);
  EXPECT_LT((f.e2[centre] - Vec3(0, 1, 0)).norm(), 1e-15);

  ref[centre] = 7;  // +y neighbour
  f = build_frames(grid, normals, ref);
  EXPECT_LT((f.e1[centre] - Vec3(0, 1, 0)).norm(), 1e-15);
  EXPECT_LT((f.e2[centre] - Vec3(-1, 0, 0)).norm(), 1e-15);

  ref[centre] = 2;  // (2, 0) is not adjacent to the centre in this triangulation
  EXPECT_EQ(code_of([&] { build_frames(grid, normals, ref); }), ErrorCode::FrameConstruction);
}

TEST(Frames, DefaultFramesAreOrthonormalAndPositive) {
  const Mesh ico = make_icosphere(2);
  expect_frames_valid(build_frames(ico, vertex_normals(ico)));
  testing::Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) expect_frames_valid(testing::random_geometry(rng).frames);
}

TEST(Frames, DefaultReferenceIsFirstStoredNeighbor) {
  const Mesh ico = make_icosphere(1);
  const auto normals = vertex_normals(ico);
  const FrameField f = build_frames(ico, normals);
  for (std::size_t p = 0; p < ico.vertex_count(); ++p) {
    const Vec3 v = log_map(ico.position(p), ico.position(ico.neighbors(p).front()), normals[p]);
    EXPECT_LT((f.e1[p] - v.normalized()).norm(), 1e-15);
  }
}

TEST(Frames, FreshIdentifiers) {
  const Mesh ico = make_icosphere(0);
  const auto normals = vertex_normals(ico);
  const FrameField a = build_frames(ico, normals);
  const FrameField b = build_frames(ico, normals);
  EXPECT_NE(a.id, kAnyFrame);
  EXPECT_NE(a.id, b.id);
}

TEST(ThetaAngle, Examples) {
  const Vec3 p = Vec3::Zero(), n(0, 0, 1), e1(1, 0, 0), e2(0, 1, 0);
  EXPECT_NEAR(theta_angle(p, Vec3(2, 0, 0), n, e1, e2), 0.0, 1e-15);
  EXPECT_NEAR(theta_angle(p, Vec3(0, 3, 0), n, e1, e2), M_PI / 2, 1e-15);
  // 30 degrees in the plane plus a normal offset, against explicit projections.
  const Vec3 q(std::cos(M_PI / 6), std::sin(M_PI / 6), 0.7);
  const Vec3 t = q - n * n.dot(q);
  EXPECT_NEAR(theta_angle(p, q, n, e1, e2), std::atan2(t.dot(e2), t.dot(e1)), 1e-15);
  EXPECT_NEAR(theta_angle(p, q, n, e1, e2), M_PI / 6, 1e-15);
}

TEST(TransportAngle, CoplanarIdentityFrames) {
  const Vec3 n(0, 0, 1), e1(1, 0, 0), e2(0, 1, 0);
  EXPECT_NEAR(transport_angle(n, e1, n, e1, e2), 0.0, 1e-15);
}

TEST(TransportAngle, RotatedFrameAtSourceGivesItsAngle) {
  // A vector with coordinates (1, 0) in q's gauge is the ambient vector
  // e_q1 = (cos phi, sin phi, 0); p's gauge is the standard one, so after
  // transport it has coordinates rho(phi) (1, 0). The transport angle is
  // therefore +phi, which is the value that keeps the gauge shift law
  // g' = g - g_p + g_q consistent.
  const Vec3 n(0, 0, 1), e1(1, 0, 0), e2(0, 1, 0);
  for (double phi : {0.3, 1.2, -2.5, 3.0}) {
    const Vec3 e1q(std::cos(phi), std::sin(phi), 0);
    // Explicit change of basis: coordinates of e1q in (e1, e2).
    Eigen::Matrix2d basis;
    basis << e1.dot(e1q), e1.dot(n.cross(e1q)), e2.dot(e1q), e2.dot(n.cross(e1q));
    const double expected = std::atan2(basis(1, 0), basis(0, 0));
    EXPECT_LE(angle_distance(transport_angle(n, e1q, n, e1, e2), expected), 1e-14);
    EXPECT_LE(angle_distance(transport_angle(n, e1q, n, e1, e2), phi), 1e-14);
  }
}

TEST(TransportAngle, AdjacentCubeFacesMatchAxisAngleOracle) {
  const Vec3 nq(0, 0, 1), e1q(1, 0, 0);
  const Vec3 np(1, 0, 0), e1p(0, 1, 0);
  const Vec3 e2p = np.cross(e1p);
  const Vec3 moved = testing::axis_angle_alignment(nq, np) * e1q;
  const double expected = std::atan2(moved.dot(e2p), moved.dot(e1p));
  EXPECT_NEAR(transport_angle(nq, e1q, np, e1p, e2p), expected, 1e-14);
  EXPECT_NEAR(expected, -M_PI / 2, 1e-14);
}

TEST(TransportAngle, NormalAlignmentMatchesAxisAngleOracle) {
  testing::Rng rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec3 a = Vec3(normal(rng), normal(rng), normal(rng)).normalized();
    const Vec3 b = Vec3(normal(rng), normal(rng), normal(rng)).normalized();
    if (a.dot(b) < -0.999) continue;
    const Mat3 r = normal_alignment_rotation(a, b);
    EXPECT_LE((r - testing::axis_angle_alignment(a, b)).norm(), 1e-10);
    EXPECT_LE((r * a - b).norm(), 1e-12);
  }
  EXPECT_TRUE(normal_alignment_rotation(Vec3(0, 0, 1), Vec3(0, 0, 1)).isApprox(Mat3::Identity()));
  EXPECT_EQ(code_of([] { normal_alignment_rotation(Vec3(0, 0, 1), Vec3(0, 0, -1)); }),
            ErrorCode::AmbiguousTransport);
}

TEST(Regauge, Examples) {
  const SurfaceGeometry g = prepare_geometry(make_icosphere(1));
  const std::size_t n = g.mesh.vertex_count();
  const FrameField same = regauge(g.frames, std::vector<double>(n, 0.0));
  for (std::size_t p = 0; p < n; ++p) {
    EXPECT_LT((same.e1[p] - g.frames.e1[p]).norm(), 1e-15);
    EXPECT_LT((same.e2[p] - g.frames.e2[p]).norm(), 1e-15);
  }
  std::vector<double> angles(n, 0.0);
  angles[5] = M_PI / 2;
  const FrameField turned = regauge(g.frames, angles);
  EXPECT_LT((turned.e1[5] - g.frames.e2[5]).norm(), 1e-15);
  EXPECT_LT((turned.e2[5] + g.frames.e1[5]).norm(), 1e-15);
  EXPECT_NE(turned.id, g.frames.id);
  EXPECT_EQ(code_of([&] { regauge(g.frames, std::vector<double>(n - 1, 0.0)); }),
            ErrorCode::CountMismatch);
}

TEST(TransportProperties, GaugeShiftLaw) {
  testing::Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const SurfaceGeometry g = testing::random_geometry(rng);
    const std::vector<double> angles = random_gauge(g.mesh.vertex_count(), rng);
    const SurfaceGeometry h = regauge(g, angles);
    expect_frames_valid(h.frames);
    ASSERT_EQ(h.transport.edge_count(), g.transport.edge_count());
    for (std::size_t e = 0; e < g.transport.edge_count(); ++e) {
      const std::size_t p = g.transport.target[e];
      const std::size_t q = g.transport.source[e];
      EXPECT_LE(angle_distance(h.transport.theta[e], g.transport.theta[e] - angles[p]), kAngleTol);
      EXPECT_LE(angle_distance(h.transport.transport[e],
                               g.transport.transport[e] - angles[p] + angles[q]),
                kAngleTol);
    }
  }
}

TEST(TransportProperties, InvariantUnderRotationTranslationScaling) {
  testing::Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const Mesh m = testing::random_mesh(rng);
    const SurfaceGeometry g = prepare_geometry(m);
    const AmbientTransform t = random_ambient(rng);
    for (const AmbientTransform& a :
         {t, AmbientTransform::rotation_only(t.rotation), AmbientTransform::translation_only(t.translation),
          AmbientTransform::scale_only(t.scale)}) {
      const SurfaceGeometry h = prepare_geometry(apply_ambient(m, a));
      for (std::size_t e = 0; e < g.transport.edge_count(); ++e) {
        EXPECT_LE(angle_distance(h.transport.theta[e], g.transport.theta[e]), kAngleTol);
        EXPECT_LE(angle_distance(h.transport.transport[e], g.transport.transport[e]), kAngleTol);
      }
    }
  }
}

TEST(TransportProperties, AnglesInHalfOpenRangeAndCsrShape) {
  testing::Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const SurfaceGeometry g = testing::random_geometry(rng);
    const TransportData& t = g.transport;
    EXPECT_NO_THROW(t.validate());
    EXPECT_EQ(t.edge_count(), 2 * g.mesh.edge_count());
    EXPECT_EQ(t.binding, g.frames.id);
    for (std::size_t e = 0; e < t.edge_count(); ++e) {
      EXPECT_GT(t.theta[e], -M_PI);
      EXPECT_LE(t.theta[e], M_PI);
      EXPECT_GT(t.transport[e], -M_PI);
      EXPECT_LE(t.transport[e], M_PI);
    }
    for (std::size_t p = 0; p < t.vertex_count; ++p) {
      const auto nb = g.mesh.neighbors(p);
      ASSERT_EQ(t.degree(p), nb.size());
      for (std::size_t k = 0; k < nb.size(); ++k) {
        EXPECT_EQ(t.source[t.offsets[p] + k], nb[k]);
        EXPECT_EQ(t.target[t.offsets[p] + k], p);
      }
    }
  }
}

TEST(TransportProperties, FirstNeighborHasZeroTheta) {
  const SurfaceGeometry g = prepare_geometry(make_icosphere(1));
  for (std::size_t p = 0; p < g.transport.vertex_count; ++p) {
    EXPECT_NEAR(g.transport.theta[g.transport.offsets[p]], 0.0, 1e-12);
  }
}

TEST(Angles, WrapAndDistance) {
  EXPECT_DOUBLE_EQ(wrap_angle(M_PI), M_PI);
  EXPECT_NEAR(wrap_angle(-M_PI), M_PI, 1e-15);
  EXPECT_NEAR(wrap_angle(3 * M_PI / 2), -M_PI / 2, 1e-15);
  EXPECT_NEAR(angle_distance(M_PI - 1e-3, -M_PI + 1e-3), 2e-3, 1e-12);
}

TEST(TransportData, ValidateRejectsInconsistentArrays) {
  TransportData t = prepare_geometry(make_icosphere(0)).transport;
  t.theta.pop_back();
  EXPECT_EQ(code_of([&] { t.validate(); }), ErrorCode::DimensionMismatch);
}

}  // namespace
}  // namespace meshnet
