#include <cmath>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "meshnet/error.hpp"
#include "meshnet/representations.hpp"

namespace meshnet {
namespace {

using testing::Rng;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a meshnet::Error";
  return ErrorCode::InvalidArgument;
}

Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<long>(rows.size()), static_cast<long>(rows.begin()->size()));
  long r = 0;
  for (const auto& row : rows) {
    long c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

TEST(FeatureTypeTest, ParseAndDimensions) {
  const FeatureType t = FeatureType::parse("4x(rho0)+rho1+3x(rho2)");
  EXPECT_EQ(t.orders(), (std::vector<int>{0, 0, 0, 0, 1, 2, 2, 2}));
  EXPECT_EQ(t.dim(), 12u);
  EXPECT_EQ(t.offset(4), 4u);
  EXPECT_EQ(t.offset(5), 6u);
  EXPECT_EQ(t.max_order(), 2);
  EXPECT_FALSE(t.is_scalar());
  EXPECT_TRUE(FeatureType::parse("16x(rho0)").is_scalar());
  EXPECT_EQ(FeatureType::parse("16x(rho0+rho1+rho2)").dim(), 80u);
  EXPECT_EQ(FeatureType::parse(" 2 * (rho0 + 2x rho1) "), FeatureType({0, 1, 1, 0, 1, 1}));
}

TEST(FeatureTypeTest, ToStringRoundTrips) {
  Rng rng(1);
  for (const char* text : {"16x(rho0+rho1+rho2)", "16x(rho0)", "rho0+rho1", "2x(rho0)+rho3"}) {
    const FeatureType t = FeatureType::parse(text);
    EXPECT_EQ(FeatureType::parse(t.to_string()), t) << text;
  }
  EXPECT_EQ(FeatureType::parse("16x(rho0+rho1+rho2)").to_string(), "16x(rho0+rho1+rho2)");
  for (int trial = 0; trial < 200; ++trial) {
    const FeatureType t = testing::random_type(rng, 8, 4);
    EXPECT_EQ(FeatureType::parse(t.to_string()), t);
  }
}

TEST(FeatureTypeTest, MalformedTextIsConfigError) {
  for (const char* text : {"", "rho", "rhox", "2x", "(rho0", "rho0+", "rho0 rho1", "rho99", "sigma1"}) {
    EXPECT_EQ(code_of([&] { FeatureType::parse(text); }), ErrorCode::Config) << text;
  }
}

TEST(FeatureTypeTest, Concatenation) {
  const FeatureType a = FeatureType::parse("rho0+rho1");
  EXPECT_EQ(a + FeatureType::parse("rho2"), FeatureType({0, 1, 2}));
  EXPECT_EQ(a.repeated(3), FeatureType::parse("3x(rho0+rho1)"));
}

TEST(RhoMatrix, Examples) {
  EXPECT_EQ(rho_matrix(0, 1.234), mat({{1.0}}));
  EXPECT_LT((rho_matrix(1, M_PI / 2) - mat({{0, -1}, {1, 0}})).norm(), 1e-15);
  EXPECT_LT((rho_matrix(2, M_PI / 4) - mat({{0, -1}, {1, 0}})).norm(), 1e-15);
}

TEST(RhoMatrix, HomomorphismProperty) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = testing::uniform_int(rng, 0, kMaxIrrepOrder);
    const double a = testing::uniform(rng, -10, 10);
    const double b = testing::uniform(rng, -10, 10);
    EXPECT_LE((rho_matrix(n, a) * rho_matrix(n, b) - rho_matrix(n, a + b)).norm(), 1e-12);
    EXPECT_LE((rho_matrix(n, a).transpose() - rho_matrix(n, -a)).norm(), 1e-12);
  }
}

TEST(RepBlockDiag, Examples) {
  const FeatureType t = FeatureType::parse("rho0+rho1");
  EXPECT_EQ(rep_block_diag(t, 0.0), Eigen::MatrixXd::Identity(3, 3));
  EXPECT_LT((rep_block_diag(t, M_PI / 2) - mat({{1, 0, 0}, {0, 0, -1}, {0, 1, 0}})).norm(), 1e-15);

  const FeatureType big = FeatureType::parse("4x(rho0)+rho1+3x(rho2)");
  const Eigen::MatrixXd r = rep_block_diag(big, 0.77);
  ASSERT_EQ(r.rows(), 12);
  EXPECT_LE((r * rep_block_diag(big, -0.77) - Eigen::MatrixXd::Identity(12, 12)).norm(), 1e-14);
}

TEST(RotateCoordinates, MatchesBlockMatrix) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const FeatureType t = testing::random_type(rng, 6, kMaxIrrepOrder);
    const double angle = testing::uniform(rng, -4, 4);
    Eigen::VectorXd v = Eigen::VectorXd::Random(static_cast<long>(t.dim()));
    const Eigen::VectorXd expected = rep_block_diag(t, angle) * v;
    rotate_coordinates(t, angle, {v.data(), static_cast<std::size_t>(v.size())});
    EXPECT_LE((v - expected).norm(), 1e-13);
  }
}

TEST(KernelBasis, Examples) {
  const auto b00 = kernel_basis(0, 0, KernelKind::Neigh);
  ASSERT_EQ(b00.size(), 1u);
  EXPECT_EQ(b00[0](0.4), mat({{1.0}}));

  const auto b01 = kernel_basis(0, 1, KernelKind::Neigh);
  ASSERT_EQ(b01.size(), 2u);
  EXPECT_LT((b01[0](0.0) - mat({{1}, {0}})).norm(), 1e-15);
  EXPECT_LT((b01[1](0.0) - mat({{0}, {-1}})).norm(), 1e-15);

  EXPECT_EQ(kernel_basis(1, 2, KernelKind::Neigh).size(), 4u);
  EXPECT_EQ(kernel_basis(2, 0, KernelKind::Neigh).size(), 2u);
  EXPECT_EQ(kernel_basis(1, 1, KernelKind::Self).size(), 2u);
  EXPECT_EQ(kernel_basis(0, 0, KernelKind::Self).size(), 1u);
  EXPECT_TRUE(kernel_basis(1, 2, KernelKind::Self).empty());
  EXPECT_TRUE(kernel_basis(0, 3, KernelKind::Self).empty());
}

TEST(KernelBasis, EveryElementMatchesTheTable) {
  Rng rng(4);
  for (int n = 0; n <= 3; ++n) {
    for (int m = 0; m <= 3; ++m) {
      for (KernelKind kind : {KernelKind::Self, KernelKind::Neigh}) {
        const auto basis = kernel_basis(n, m, kind);
        ASSERT_EQ(static_cast<int>(basis.size()), basis_count(n, m, kind));
        for (int trial = 0; trial < 10; ++trial) {
          const double theta = testing::uniform(rng, -M_PI, M_PI);
          for (std::size_t b = 0; b < basis.size(); ++b) {
            EXPECT_LE((basis[b](theta) - testing::table_basis(n, m, kind, static_cast<int>(b), theta)).norm(),
                      1e-15);
          }
        }
      }
    }
  }
}

TEST(KernelBasis, ElementsSolveTheConstraintIndividually) {
  Rng rng(5);
  for (int n = 0; n <= 3; ++n) {
    for (int m = 0; m <= 3; ++m) {
      const auto basis = kernel_basis(n, m, KernelKind::Neigh);
      for (int trial = 0; trial < 50; ++trial) {
        const double theta = testing::uniform(rng, -M_PI, M_PI);
        const double g = testing::uniform(rng, -M_PI, M_PI);
        for (const auto& k : basis) {
          EXPECT_LE((k(theta - g) - rho_matrix(m, -g) * k(theta) * rho_matrix(n, g)).norm(), 1e-12);
        }
      }
    }
  }
}

TEST(KernelBasis, ElementsAreLinearlyIndependent) {
  Rng rng(6);
  for (int n = 0; n <= 3; ++n) {
    for (int m = 0; m <= 3; ++m) {
      const auto basis = kernel_basis(n, m, KernelKind::Neigh);
      // Stack samples at several angles; full column rank means independence.
      Eigen::MatrixXd samples(40, static_cast<long>(basis.size()));
      for (int s = 0; s < 10; ++s) {
        const double theta = testing::uniform(rng, -M_PI, M_PI);
        for (std::size_t b = 0; b < basis.size(); ++b) {
          const Eigen::MatrixXd k = basis[b](theta);
          Eigen::VectorXd flat = Eigen::VectorXd::Zero(4);
          for (long i = 0; i < k.size(); ++i) flat(i) = k.data()[i];
          samples.block(4 * s, static_cast<long>(b), 4, 1) = flat;
        }
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(samples);
      EXPECT_EQ(lu.rank(), static_cast<long>(basis.size()));
    }
  }
}

TEST(KernelAssembly, Examples) {
  const FeatureType in = FeatureType::parse("rho0+rho1");
  const FeatureType out = FeatureType::parse("rho0+rho1+rho2");
  EquivariantKernel zero(in, out, KernelKind::Neigh);
  EXPECT_EQ(assemble_kernel(zero, 0.9), Eigen::MatrixXd::Zero(5, 3));

  EquivariantKernel scalar(FeatureType({0}), FeatureType({0}), KernelKind::Neigh);
  scalar.coefficients = {2.5};
  EXPECT_EQ(assemble_kernel(scalar, 0.1), mat({{2.5}}));
  EXPECT_EQ(assemble_kernel(scalar, -2.0), mat({{2.5}}));
}

TEST(KernelAssembly, MatchesEntrywiseTableOracle) {
  Rng rng(7);
  for (KernelKind kind : {KernelKind::Self, KernelKind::Neigh}) {
    EquivariantKernel k(FeatureType::parse("rho0+rho1"), FeatureType::parse("rho0+rho1+rho2"), kind);
    for (int trial = 0; trial < 50; ++trial) {
      for (double& c : k.coefficients) c = testing::uniform(rng, -2, 2);
      const double theta = testing::uniform(rng, -M_PI, M_PI);
      const double oracle_theta = kind == KernelKind::Self ? 0.0 : theta;
      EXPECT_LE((assemble_kernel(k, theta) - testing::table_kernel(k, oracle_theta)).norm(), 1e-14);
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    EquivariantKernel k(testing::random_type(rng), testing::random_type(rng), KernelKind::Neigh);
    for (double& c : k.coefficients) c = testing::uniform(rng, -2, 2);
    const double theta = testing::uniform(rng, -M_PI, M_PI);
    EXPECT_LE((assemble_kernel(k, theta) - testing::table_kernel(k, theta)).norm(), 1e-13);
  }
}

TEST(KernelAssembly, CoefficientCountMismatch) {
  const KernelLayout layout(FeatureType::parse("rho0+rho1"), FeatureType::parse("rho1"), KernelKind::Neigh);
  EXPECT_EQ(layout.coefficient_count(), 6u);
  std::vector<double> wrong(5, 0.0);
  EXPECT_EQ(code_of([&] { layout.assemble(wrong, 0.0); }), ErrorCode::CountMismatch);
}

TEST(KernelAssembly, CoefficientGradientIsTheAdjointOfAssembly) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const KernelLayout layout(testing::random_type(rng), testing::random_type(rng), KernelKind::Neigh);
    const double theta = testing::uniform(rng, -M_PI, M_PI);
    std::vector<double> c(layout.coefficient_count());
    for (double& v : c) v = testing::uniform(rng, -1, 1);
    const Eigen::MatrixXd dk = Eigen::MatrixXd::Random(static_cast<long>(layout.out_type().dim()),
                                                       static_cast<long>(layout.in_type().dim()));
    std::vector<double> grad(c.size(), 0.0);
    layout.accumulate_coefficient_gradient(dk, theta, grad);
    // <dK, K(c)> is linear in c, so its gradient is exactly grad.
    double inner = (dk.array() * layout.assemble(c, theta).array()).sum();
    double predicted = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) predicted += grad[i] * c[i];
    EXPECT_NEAR(inner, predicted, 1e-12 * std::max(1.0, std::abs(inner)));
  }
}

TEST(ConstraintResidual, ZeroAtIdentityGauge) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    EquivariantKernel k(testing::random_type(rng), testing::random_type(rng), KernelKind::Neigh);
    for (double& c : k.coefficients) c = testing::uniform(rng, -1, 1);
    EXPECT_EQ(constraint_residual(k, testing::uniform(rng, -3, 3), 0.0), 0.0);
  }
}

TEST(ConstraintResidual, AssembledKernelsSatisfyTheConstraint) {
  Rng rng(10);
  for (int trial = 0; trial < 500; ++trial) {
    const KernelKind kind = trial % 2 == 0 ? KernelKind::Self : KernelKind::Neigh;
    EquivariantKernel k(testing::random_type(rng), testing::random_type(rng), kind);
    for (double& c : k.coefficients) c = testing::uniform(rng, -1, 1);
    EXPECT_LE(constraint_residual(k, testing::uniform(rng, -M_PI, M_PI), testing::uniform(rng, -M_PI, M_PI)),
              1e-10);
  }
}

TEST(ConstraintResidual, CorruptedBasisIsDetected) {
  // Flip the sign of one entry of the second rho1 -> rho2 element; the
  // mutated kernel no longer commutes with the gauge action.
  Rng rng(11);
  int detected = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double theta = testing::uniform(rng, -M_PI, M_PI);
    const double g = testing::uniform(rng, 0.2, M_PI - 0.2);
    const auto mutated = [](double t) {
      Eigen::MatrixXd m = testing::table_basis(1, 2, KernelKind::Neigh, 1, t);
      m(0, 1) = -m(0, 1);
      return m;
    };
    const double residual =
        (mutated(theta - g) - rho_matrix(2, -g) * mutated(theta) * rho_matrix(1, g)).norm();
    if (residual > 1e-3) ++detected;
  }
  EXPECT_EQ(detected, 100);
}

}  // namespace
}  // namespace meshnet
