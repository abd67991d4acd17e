#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace meshnet {

/// Largest irrep order accepted anywhere in the library.
inline constexpr int kMaxIrrepOrder = 8;

/// Direct sum of SO(2) irreps rho_n, kept in declaration order.
class FeatureType {
 public:
  FeatureType() = default;
  explicit FeatureType(std::vector<int> orders);

  /// Accepts e.g. "16x(rho0+rho1+rho2)", "rho0+rho1", "3x(rho0)", "4xrho0+rho1".
  static FeatureType parse(std::string_view text);
  std::string to_string() const;

  const std::vector<int>& orders() const noexcept { return orders_; }
  std::size_t irrep_count() const noexcept { return orders_.size(); }
  std::size_t dim() const noexcept { return offsets_.back(); }
  std::size_t offset(std::size_t irrep) const { return offsets_[irrep]; }
  std::size_t block_dim(std::size_t irrep) const { return orders_[irrep] == 0 ? 1 : 2; }
  int max_order() const noexcept;
  bool is_scalar() const noexcept;

  FeatureType operator+(const FeatureType& other) const;
  FeatureType repeated(std::size_t times) const;

  bool operator==(const FeatureType& other) const { return orders_ == other.orders_; }

 private:
  std::vector<int> orders_;
  std::vector<std::size_t> offsets_{0};
};

Eigen::MatrixXd rho_matrix(int order, double angle);
Eigen::MatrixXd rep_block_diag(const FeatureType& type, double angle);

/// Applies rep_block_diag(type, angle) to a coordinate vector in place.
void rotate_coordinates(const FeatureType& type, double angle, std::span<double> coords);

enum class KernelKind { Self, Neigh };

using BasisFunction = std::function<Eigen::MatrixXd(double)>;

/// Linearly independent solutions of the kernel constraint mapping rho_{n_in}
/// to rho_{n_out}; each returns an out_dim x in_dim block for a given angle.
std::vector<BasisFunction> kernel_basis(int n_in, int n_out, KernelKind kind);
int basis_count(int n_in, int n_out, KernelKind kind);

struct KernelBlock {
  std::size_t out_irrep;
  std::size_t in_irrep;
  int out_order;
  int in_order;
  std::size_t out_offset;
  std::size_t in_offset;
  std::size_t coefficient_offset;
  int basis_count;
};

/// Coefficient layout of an equivariant kernel: row-major over
/// (out irrep, in irrep) with the basis index fastest.
class KernelLayout {
 public:
  KernelLayout() = default;
  KernelLayout(FeatureType in, FeatureType out, KernelKind kind);

  const FeatureType& in_type() const noexcept { return in_; }
  const FeatureType& out_type() const noexcept { return out_; }
  KernelKind kind() const noexcept { return kind_; }
  const std::vector<KernelBlock>& blocks() const noexcept { return blocks_; }
  std::size_t coefficient_count() const noexcept { return coefficient_count_; }

  /// K(theta) = sum of coefficient * basis, written into an out_dim x in_dim matrix.
  void assemble(std::span<const double> coefficients, double theta,
                Eigen::Ref<Eigen::MatrixXd> kernel) const;
  Eigen::MatrixXd assemble(std::span<const double> coefficients, double theta) const;

  /// Adjoint of assemble: accumulates <dK, basis_b(theta)> into gradient[b].
  void accumulate_coefficient_gradient(const Eigen::Ref<const Eigen::MatrixXd>& kernel_gradient,
                                       double theta, std::span<double> gradient) const;

  /// Uniform in [-s, s] with s = 1 / sqrt(in_dim * basis_count) per block.
  void initialize(std::span<double> coefficients, std::mt19937_64& rng) const;

 private:
  FeatureType in_;
  FeatureType out_;
  KernelKind kind_ = KernelKind::Neigh;
  std::vector<KernelBlock> blocks_;
  std::size_t coefficient_count_ = 0;
};

struct EquivariantKernel {
  KernelLayout layout;
  std::vector<double> coefficients;

  EquivariantKernel() = default;
  EquivariantKernel(FeatureType in, FeatureType out, KernelKind kind)
      : layout(std::move(in), std::move(out), kind),
        coefficients(layout.coefficient_count(), 0.0) {}
};

Eigen::MatrixXd assemble_kernel(const EquivariantKernel& kernel, double theta);

/// || K(theta - g) - rho_out(-g) K(theta) rho_in(g) ||_F  (theta is ignored for
/// self kernels).
double constraint_residual(const EquivariantKernel& kernel, double theta, double g);

}  // namespace meshnet
