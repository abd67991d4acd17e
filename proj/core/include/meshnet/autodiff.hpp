#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace meshnet {

using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Learnable array. Gradients accumulate across backward passes until
/// zero_grad() is called; the gradient is an accumulation buffer, so it can
/// be written through a const reference by the tape.
struct Parameter {
  std::string name;
  Tensor value;
  mutable Tensor grad;

  Parameter() = default;
  Parameter(std::string name, Tensor value);

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(value.size()); }
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  /// Gradient after backward(); a zero tensor if the node was not reached.
  Tensor grad() const;
  long rows() const { return value().rows(); }
  long cols() const { return value().cols(); }
  bool requires_grad() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of a computation. Nodes are appended in evaluation order,
/// so every node's parents precede it and reverse order is a valid
/// topological order for backpropagation.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(const Parameter& param);
  /// Appends a derived node; the closure runs during backward() with the
  /// node's accumulated gradient. Pass requires_grad = false to skip it.
  Var record(Tensor value, bool requires_grad, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Mutable gradient buffer of a node, zero-initialised on first access.
  Tensor& grad(std::size_t id);
  const Tensor* grad_if_any(std::size_t id) const;

  /// Reverse sweep from a 1x1 loss; adds leaf gradients into their
  /// Parameter::grad. A tape can be swept once.
  void backward(const Var& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool training = false;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    const Parameter* param = nullptr;
    Backward backward;
  };

  std::deque<Node> nodes_;
  bool swept_ = false;
};

// Elementwise and shape ops. Operands must live on the same tape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
Var square(const Var& a);
/// a (R x C) plus a 1 x C row broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var relu(const Var& a);
Var sum(const Var& a);
Var mean_rows(const Var& a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, long start, long count);

// Linear algebra.
Var matmul(const Var& a, const Var& b);
/// a * b^T.
Var matmul_nt(const Var& a, const Var& b);
/// x W^T + b with W (out x in) and b (1 x out).
Var linear(const Var& x, const Var& weight, const Var& bias);

// Softmax family.
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
/// Mean over rows of -log softmax(logits)[target].
Var nll_loss(const Var& logits, std::span<const std::size_t> targets);
/// Inverted dropout; the identity unless the tape is in training mode.
Var dropout(const Var& a, double p, std::mt19937_64& rng);

// Graph ops over index lists.
Var gather_rows(const Var& a, std::span<const std::size_t> index);
Var scatter_sum(const Var& a, std::span<const std::size_t> index, std::size_t rows);
/// Row-wise inner products, E x 1.
Var rowwise_dot(const Var& a, const Var& b);
/// Multiplies row i of a by s(i, 0).
Var scale_rows(const Var& a, const Var& s);
/// Softmax of an E x 1 column within CSR segments [offsets[k], offsets[k+1]).
Var segment_softmax(const Var& scores, std::span<const std::size_t> offsets);

/// Adam with bias correction.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();

  double learning_rate() const noexcept { return lr_; }
  void set_learning_rate(double lr) noexcept { lr_ = lr; }
  long step_count() const noexcept { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

}  // namespace meshnet
