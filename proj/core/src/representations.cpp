#include "meshnet/representations.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "meshnet/error.hpp"

namespace meshnet {

// ---------------------------------------------------------------------------
// FeatureType

FeatureType::FeatureType(std::vector<int> orders) : orders_(std::move(orders)) {
  offsets_.assign(1, 0);
  for (int n : orders_) {
    if (n < 0 || n > kMaxIrrepOrder) {
      throw Error(ErrorCode::InvalidArgument,
                  "irrep order " + std::to_string(n) + " outside [0, " +
                      std::to_string(kMaxIrrepOrder) + "]");
    }
    offsets_.push_back(offsets_.back() + (n == 0 ? 1 : 2));
  }
}

int FeatureType::max_order() const noexcept {
  return orders_.empty() ? 0 : *std::max_element(orders_.begin(), orders_.end());
}

bool FeatureType::is_scalar() const noexcept {
  return std::all_of(orders_.begin(), orders_.end(), [](int n) { return n == 0; });
}

FeatureType FeatureType::operator+(const FeatureType& other) const {
  std::vector<int> orders = orders_;
  orders.insert(orders.end(), other.orders_.begin(), other.orders_.end());
  return FeatureType(std::move(orders));
}

FeatureType FeatureType::repeated(std::size_t times) const {
  std::vector<int> orders;
  orders.reserve(orders_.size() * times);
  for (std::size_t k = 0; k < times; ++k) orders.insert(orders.end(), orders_.begin(), orders_.end());
  return FeatureType(std::move(orders));
}

namespace {

class TypeParser {
 public:
  explicit TypeParser(std::string_view text) {
    for (char c : text) {
      if (!std::isspace(static_cast<unsigned char>(c))) text_.push_back(c);
    }
  }

  std::vector<int> parse() {
    std::vector<int> out = sum();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return out;
  }

 private:
  std::vector<int> sum() {
    std::vector<int> out = term();
    while (peek('+')) {
      ++pos_;
      auto more = term();
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  }

  std::vector<int> term() {
    std::size_t count = 1;
    if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      count = number();
      if (peek('x') || peek('*')) ++pos_;
    }
    std::vector<int> unit;
    if (peek('(')) {
      ++pos_;
      unit = sum();
      if (!peek(')')) fail("missing ')'");
      ++pos_;
    } else if (text_.compare(pos_, 3, "rho") == 0) {
      pos_ += 3;
      if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        fail("expected an irrep order after 'rho'");
      }
      unit.push_back(static_cast<int>(number()));
    } else {
      fail("expected 'rho<n>' or '('");
    }
    std::vector<int> out;
    for (std::size_t k = 0; k < count; ++k) out.insert(out.end(), unit.begin(), unit.end());
    return out;
  }

  std::size_t number() {
    std::size_t value = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(text_[pos_] - '0');
      ++pos_;
    }
    return value;
  }

  bool peek(char c) const { return pos_ < text_.size() && text_[pos_] == c; }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::Config, "feature type '" + text_ + "': " + what);
  }

  std::string text_;
  std::size_t pos_ = 0;
};

std::string join_runs(const std::vector<int>& orders) {
  std::string out;
  std::size_t i = 0;
  while (i < orders.size()) {
    std::size_t j = i;
    while (j < orders.size() && orders[j] == orders[i]) ++j;
    if (!out.empty()) out += '+';
    const std::string irrep = "rho" + std::to_string(orders[i]);
    out += (j - i > 1) ? std::to_string(j - i) + "x(" + irrep + ")" : irrep;
    i = j;
  }
  return out;
}

}  // namespace

FeatureType FeatureType::parse(std::string_view text) {
  std::vector<int> orders = TypeParser(text).parse();
  try {
    return FeatureType(std::move(orders));
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, "feature type '" + std::string(text) + "': " + e.what());
  }
}

std::string FeatureType::to_string() const {
  const std::size_t n = orders_.size();
  if (n == 0) return "";
  for (std::size_t period = 1; period < n; ++period) {
    if (n % period != 0) continue;
    bool periodic = true;
    for (std::size_t k = period; k < n && periodic; ++k) periodic = orders_[k] == orders_[k - period];
    if (periodic) {
      std::vector<int> unit(orders_.begin(), orders_.begin() + static_cast<long>(period));
      return std::to_string(n / period) + "x(" + join_runs(unit) + ")";
    }
  }
  return join_runs(orders_);
}

// ---------------------------------------------------------------------------
// Representations

Eigen::MatrixXd rho_matrix(int order, double angle) {
  if (order < 0) throw Error(ErrorCode::InvalidArgument, "irrep order must be >= 0");
  if (order == 0) return Eigen::MatrixXd::Ones(1, 1);
  const double c = std::cos(order * angle);
  const double s = std::sin(order * angle);
  Eigen::MatrixXd m(2, 2);
  m << c, -s, s, c;
  return m;
}

Eigen::MatrixXd rep_block_diag(const FeatureType& type, double angle) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<long>(type.dim()), static_cast<long>(type.dim()));
  for (std::size_t i = 0; i < type.irrep_count(); ++i) {
    const auto off = static_cast<long>(type.offset(i));
    const auto d = static_cast<long>(type.block_dim(i));
    m.block(off, off, d, d) = rho_matrix(type.orders()[i], angle);
  }
  return m;
}

void rotate_coordinates(const FeatureType& type, double angle, std::span<double> coords) {
  std::array<double, kMaxIrrepOrder + 1> cs{};
  std::array<double, kMaxIrrepOrder + 1> sn{};
  for (int n = 1; n <= type.max_order(); ++n) {
    cs[n] = std::cos(n * angle);
    sn[n] = std::sin(n * angle);
  }
  for (std::size_t i = 0; i < type.irrep_count(); ++i) {
    const int n = type.orders()[i];
    if (n == 0) continue;
    const std::size_t off = type.offset(i);
    const double x = coords[off];
    const double y = coords[off + 1];
    coords[off] = cs[n] * x - sn[n] * y;
    coords[off + 1] = sn[n] * x + cs[n] * y;
  }
}

// ---------------------------------------------------------------------------
// Kernel bases

namespace {

using Mat2 = Eigen::Matrix2d;

/// Basis blocks (top-left rows x cols used) for one irrep pair at one angle.
int block_basis(int n_in, int n_out, KernelKind kind, double theta, std::array<Mat2, 4>& basis) {
  for (Mat2& b : basis) b.setZero();
  if (kind == KernelKind::Self) {
    if (n_in != n_out) return 0;
    if (n_in == 0) {
      basis[0](0, 0) = 1.0;
      return 1;
    }
    basis[0] << 1.0, 0.0, 0.0, 1.0;
    basis[1] << 0.0, 1.0, -1.0, 0.0;
    return 2;
  }
  if (n_in == 0 && n_out == 0) {
    basis[0](0, 0) = 1.0;
    return 1;
  }
  if (n_out == 0) {
    const double c = std::cos(n_in * theta);
    const double s = std::sin(n_in * theta);
    basis[0](0, 0) = c;
    basis[0](0, 1) = s;
    basis[1](0, 0) = s;
    basis[1](0, 1) = -c;
    return 2;
  }
  if (n_in == 0) {
    const double c = std::cos(n_out * theta);
    const double s = std::sin(n_out * theta);
    basis[0](0, 0) = c;
    basis[0](1, 0) = s;
    basis[1](0, 0) = s;
    basis[1](1, 0) = -c;
    return 2;
  }
  const double cm = std::cos((n_out - n_in) * theta);
  const double sm = std::sin((n_out - n_in) * theta);
  const double cp = std::cos((n_out + n_in) * theta);
  const double sp = std::sin((n_out + n_in) * theta);
  basis[0] << cm, -sm, sm, cm;
  basis[1] << sm, cm, -cm, sm;
  basis[2] << cp, sp, sp, -cp;
  basis[3] << -sp, cp, cp, sp;
  return 4;
}

}  // namespace

int basis_count(int n_in, int n_out, KernelKind kind) {
  if (kind == KernelKind::Self) {
    if (n_in != n_out) return 0;
    return n_in == 0 ? 1 : 2;
  }
  if (n_in == 0 && n_out == 0) return 1;
  if (n_in == 0 || n_out == 0) return 2;
  return 4;
}

std::vector<BasisFunction> kernel_basis(int n_in, int n_out, KernelKind kind) {
  if (n_in < 0 || n_out < 0) throw Error(ErrorCode::InvalidArgument, "irrep order must be >= 0");
  const int count = basis_count(n_in, n_out, kind);
  const long rows = n_out == 0 ? 1 : 2;
  const long cols = n_in == 0 ? 1 : 2;
  std::vector<BasisFunction> out;
  for (int b = 0; b < count; ++b) {
    out.emplace_back([=](double theta) {
      std::array<Mat2, 4> basis;
      block_basis(n_in, n_out, kind, theta, basis);
      return Eigen::MatrixXd(basis[static_cast<std::size_t>(b)].topLeftCorner(rows, cols));
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// KernelLayout

KernelLayout::KernelLayout(FeatureType in, FeatureType out, KernelKind kind)
    : in_(std::move(in)), out_(std::move(out)), kind_(kind) {
  for (std::size_t i = 0; i < out_.irrep_count(); ++i) {
    for (std::size_t j = 0; j < in_.irrep_count(); ++j) {
      const int count = basis_count(in_.orders()[j], out_.orders()[i], kind_);
      if (count == 0) continue;
      blocks_.push_back({i, j, out_.orders()[i], in_.orders()[j], out_.offset(i), in_.offset(j),
                         coefficient_count_, count});
      coefficient_count_ += static_cast<std::size_t>(count);
    }
  }
}

void KernelLayout::assemble(std::span<const double> coefficients, double theta,
                            Eigen::Ref<Eigen::MatrixXd> kernel) const {
  if (coefficients.size() != coefficient_count_) {
    throw Error(ErrorCode::CountMismatch, "kernel expects " + std::to_string(coefficient_count_) +
                                              " coefficients, got " +
                                              std::to_string(coefficients.size()));
  }
  kernel.setZero();
  std::array<Mat2, 4> basis;
  for (const KernelBlock& blk : blocks_) {
    block_basis(blk.in_order, blk.out_order, kind_, theta, basis);
    const long rows = blk.out_order == 0 ? 1 : 2;
    const long cols = blk.in_order == 0 ? 1 : 2;
    Mat2 acc = Mat2::Zero();
    for (int b = 0; b < blk.basis_count; ++b) {
      acc += coefficients[blk.coefficient_offset + static_cast<std::size_t>(b)] * basis[static_cast<std::size_t>(b)];
    }
    kernel.block(static_cast<long>(blk.out_offset), static_cast<long>(blk.in_offset), rows, cols) =
        acc.topLeftCorner(rows, cols);
  }
}

Eigen::MatrixXd KernelLayout::assemble(std::span<const double> coefficients, double theta) const {
  Eigen::MatrixXd k(static_cast<long>(out_.dim()), static_cast<long>(in_.dim()));
  assemble(coefficients, theta, k);
  return k;
}

void KernelLayout::accumulate_coefficient_gradient(
    const Eigen::Ref<const Eigen::MatrixXd>& kernel_gradient, double theta,
    std::span<double> gradient) const {
  std::array<Mat2, 4> basis;
  for (const KernelBlock& blk : blocks_) {
    block_basis(blk.in_order, blk.out_order, kind_, theta, basis);
    const long rows = blk.out_order == 0 ? 1 : 2;
    const long cols = blk.in_order == 0 ? 1 : 2;
    const auto g = kernel_gradient.block(static_cast<long>(blk.out_offset),
                                         static_cast<long>(blk.in_offset), rows, cols);
    for (int b = 0; b < blk.basis_count; ++b) {
      gradient[blk.coefficient_offset + static_cast<std::size_t>(b)] +=
          g.cwiseProduct(basis[static_cast<std::size_t>(b)].topLeftCorner(rows, cols)).sum();
    }
  }
}

void KernelLayout::initialize(std::span<double> coefficients, std::mt19937_64& rng) const {
  const double fan_in = static_cast<double>(std::max<std::size_t>(in_.dim(), 1));
  for (const KernelBlock& blk : blocks_) {
    const double s = 1.0 / std::sqrt(fan_in * blk.basis_count);
    std::uniform_real_distribution<double> dist(-s, s);
    for (int b = 0; b < blk.basis_count; ++b) {
      coefficients[blk.coefficient_offset + static_cast<std::size_t>(b)] = dist(rng);
    }
  }
}

Eigen::MatrixXd assemble_kernel(const EquivariantKernel& kernel, double theta) {
  return kernel.layout.assemble(kernel.coefficients, theta);
}

double constraint_residual(const EquivariantKernel& kernel, double theta, double g) {
  const KernelLayout& layout = kernel.layout;
  const Eigen::MatrixXd rho_out = rep_block_diag(layout.out_type(), -g);
  const Eigen::MatrixXd rho_in = rep_block_diag(layout.in_type(), g);
  if (layout.kind() == KernelKind::Self) {
    const Eigen::MatrixXd k = layout.assemble(kernel.coefficients, 0.0);
    return (k - rho_out * k * rho_in).norm();
  }
  const Eigen::MatrixXd lhs = layout.assemble(kernel.coefficients, theta - g);
  const Eigen::MatrixXd rhs = rho_out * layout.assemble(kernel.coefficients, theta) * rho_in;
  return (lhs - rhs).norm();
}

}  // namespace meshnet
