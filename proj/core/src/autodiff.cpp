#include "meshnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "meshnet/error.hpp"

namespace meshnet {

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)) {
  zero_grad();
}

const Tensor& Var::value() const { return tape_->value(id_); }

Tensor Var::grad() const {
  if (const Tensor* g = tape_->grad_if_any(id_)) return *g;
  return Tensor::Zero(rows(), cols());
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, nullptr, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& param) {
  nodes_.push_back(Node{param.value, Tensor(), true, &param, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, bool requires_grad, Backward backward) {
  if (!requires_grad) backward = nullptr;
  nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, nullptr, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

const Tensor* Tape::grad_if_any(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.grad.size() == 0 ? nullptr : &n.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw Error(ErrorCode::InvalidArgument, "loss belongs to another tape");
  if (swept_) throw Error(ErrorCode::DoubleBackward, "backward() already ran on this tape");
  const Tensor& v = value(loss.id());
  if (v.rows() != 1 || v.cols() != 1) {
    throw Error(ErrorCode::NonScalarLoss, "backward() needs a 1x1 loss, got " +
                                              std::to_string(v.rows()) + "x" +
                                              std::to_string(v.cols()));
  }
  swept_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad(loss.id())(0, 0) += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw Error(ErrorCode::InvalidArgument, "operands on different tapes");
  return *a.tape();
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(op) + ": shape " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "add");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, const Tensor& g) {
                    if (tp.requires_grad(ia)) tp.grad(ia) += g;
                    if (tp.requires_grad(ib)) tp.grad(ib) += g;
                  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, const Tensor& g) {
                    if (tp.requires_grad(ia)) tp.grad(ia) += g;
                    if (tp.requires_grad(ib)) tp.grad(ib) -= g;
                  });
}

Var scale(const Var& a, double s) {
  const std::size_t ia = a.id();
  return a.tape()->record(a.value() * s, a.requires_grad(),
                          [ia, s](Tape& tp, const Tensor& g) { tp.grad(ia) += s * g; });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "hadamard");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, const Tensor& g) {
                    if (tp.requires_grad(ia)) tp.grad(ia) += g.cwiseProduct(tp.value(ib));
                    if (tp.requires_grad(ib)) tp.grad(ib) += g.cwiseProduct(tp.value(ia));
                  });
}

Var square(const Var& a) {
  const std::size_t ia = a.id();
  return a.tape()->record(a.value().array().square().matrix(), a.requires_grad(),
                          [ia](Tape& tp, const Tensor& g) {
                            tp.grad(ia) += 2.0 * g.cwiseProduct(tp.value(ia));
                          });
}

Var add_row(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "add_row: bias must be 1 x " + std::to_string(a.cols()));
  }
  Tensor out = a.value();
  out.rowwise() += row.value().row(0);
  const std::size_t ia = a.id(), ir = row.id();
  return t.record(std::move(out), a.requires_grad() || row.requires_grad(),
                  [ia, ir](Tape& tp, const Tensor& g) {
                    if (tp.requires_grad(ia)) tp.grad(ia) += g;
                    if (tp.requires_grad(ir)) tp.grad(ir) += g.colwise().sum();
                  });
}

Var relu(const Var& a) {
  const std::size_t ia = a.id();
  return a.tape()->record(a.value().cwiseMax(0.0), a.requires_grad(),
                          [ia](Tape& tp, const Tensor& g) {
                            const Tensor& x = tp.value(ia);
                            tp.grad(ia) += (x.array() > 0.0).select(g, 0.0);
                          });
}

Var sum(const Var& a) {
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), a.requires_grad(), [ia](Tape& tp, const Tensor& g) {
    tp.grad(ia).array() += g(0, 0);
  });
}

Var mean_rows(const Var& a) {
  if (a.rows() == 0) throw Error(ErrorCode::DimensionMismatch, "mean_rows of an empty tensor");
  const double inv = 1.0 / static_cast<double>(a.rows());
  Tensor out = a.value().colwise().sum() * inv;
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), a.requires_grad(), [ia, inv](Tape& tp, const Tensor& g) {
    tp.grad(ia).rowwise() += g.row(0) * inv;
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "concat_cols of nothing");
  Tape& t = *parts[0].tape();
  const long rows = parts[0].rows();
  long cols = 0;
  bool needs = false;
  for (const Var& p : parts) {
    if (p.tape() != &t || p.rows() != rows) {
      throw Error(ErrorCode::DimensionMismatch, "concat_cols: row counts differ");
    }
    cols += p.cols();
    needs = needs || p.requires_grad();
  }
  Tensor out(rows, cols);
  std::vector<std::pair<std::size_t, long>> spans;
  long c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.id(), c);
    c += p.cols();
  }
  return t.record(std::move(out), needs, [spans](Tape& tp, const Tensor& g) {
    for (auto [id, start] : spans) {
      if (tp.requires_grad(id)) tp.grad(id) += g.middleCols(start, tp.value(id).cols());
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "concat_rows of nothing");
  Tape& t = *parts[0].tape();
  const long cols = parts[0].cols();
  long rows = 0;
  bool needs = false;
  for (const Var& p : parts) {
    if (p.tape() != &t || p.cols() != cols) {
      throw Error(ErrorCode::DimensionMismatch, "concat_rows: column counts differ");
    }
    rows += p.rows();
    needs = needs || p.requires_grad();
  }
  Tensor out(rows, cols);
  std::vector<std::pair<std::size_t, long>> spans;
  long r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id(), r);
    r += p.rows();
  }
  return t.record(std::move(out), needs, [spans](Tape& tp, const Tensor& g) {
    for (auto [id, start] : spans) {
      if (tp.requires_grad(id)) tp.grad(id) += g.middleRows(start, tp.value(id).rows());
    }
  });
}

Var slice_cols(const Var& a, long start, long count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "slice_cols out of range");
  }
  const std::size_t ia = a.id();
  return a.tape()->record(a.value().middleCols(start, count), a.requires_grad(),
                          [ia, start, count](Tape& tp, const Tensor& g) {
                            tp.grad(ia).middleCols(start, count) += g;
                          });
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw Error(ErrorCode::DimensionMismatch, "matmul: inner dimensions differ");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, const Tensor& g) {
                    if (tp.requires_grad(ia)) tp.grad(ia).noalias() += g * tp.value(ib).transpose();
                    if (tp.requires_grad(ib)) tp.grad(ib).noalias() += tp.value(ia).transpose() * g;
                  });
}

Var matmul_nt(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.cols()) throw Error(ErrorCode::DimensionMismatch, "matmul_nt: inner dimensions differ");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value().transpose(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, const Tensor& g) {
                    if (tp.requires_grad(ia)) tp.grad(ia).noalias() += g * tp.value(ib);
                    if (tp.requires_grad(ib)) tp.grad(ib).noalias() += g.transpose() * tp.value(ia);
                  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  return add_row(matmul_nt(x, weight), bias);
}

Var softmax_rows(const Var& a) {
  Tensor out = a.value();
  for (long i = 0; i < out.rows(); ++i) {
    out.row(i).array() -= out.row(i).maxCoeff();
    out.row(i) = out.row(i).array().exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  const std::size_t ia = a.id();
  Tensor y = out;
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [ia, y = std::move(y)](Tape& tp, const Tensor& g) {
                            Tensor& ga = tp.grad(ia);
                            for (long i = 0; i < y.rows(); ++i) {
                              const double dot = g.row(i).dot(y.row(i));
                              ga.row(i).array() += y.row(i).array() * (g.row(i).array() - dot);
                            }
                          });
}

Var log_softmax_rows(const Var& a) {
  Tensor out = a.value();
  for (long i = 0; i < out.rows(); ++i) {
    const double m = out.row(i).maxCoeff();
    const double lse = m + std::log((out.row(i).array() - m).exp().sum());
    out.row(i).array() -= lse;
  }
  const std::size_t ia = a.id();
  Tensor y = out;
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [ia, y = std::move(y)](Tape& tp, const Tensor& g) {
                            Tensor& ga = tp.grad(ia);
                            for (long i = 0; i < y.rows(); ++i) {
                              const double total = g.row(i).sum();
                              ga.row(i).array() += g.row(i).array() - y.row(i).array().exp() * total;
                            }
                          });
}

Var nll_loss(const Var& logits, std::span<const std::size_t> targets) {
  if (static_cast<long>(targets.size()) != logits.rows() || targets.empty()) {
    throw Error(ErrorCode::CountMismatch, "nll_loss: one target per logit row required");
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (static_cast<long>(targets[i]) >= logits.cols()) {
      throw Error(ErrorCode::InvalidTarget, "nll_loss: target " + std::to_string(targets[i]) +
                                                " at row " + std::to_string(i) + " >= " +
                                                std::to_string(logits.cols()) + " classes");
    }
  }
  const Var logp = log_softmax_rows(logits);
  const double inv = 1.0 / static_cast<double>(targets.size());
  Tensor out(1, 1);
  out(0, 0) = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    out(0, 0) -= logp.value()(static_cast<long>(i), static_cast<long>(targets[i]));
  }
  out(0, 0) *= inv;
  const std::size_t il = logp.id();
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return logits.tape()->record(std::move(out), logp.requires_grad(),
                               [il, inv, tg = std::move(tg)](Tape& tp, const Tensor& g) {
                                 Tensor& gl = tp.grad(il);
                                 for (std::size_t i = 0; i < tg.size(); ++i) {
                                   gl(static_cast<long>(i), static_cast<long>(tg[i])) -= g(0, 0) * inv;
                                 }
                               });
}

Var dropout(const Var& a, double p, std::mt19937_64& rng) {
  if (!a.tape()->training || p <= 0.0) return a;
  if (p >= 1.0) throw Error(ErrorCode::InvalidArgument, "dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  Tensor mask(a.rows(), a.cols());
  const double s = 1.0 / (1.0 - p);
  for (long i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : 0.0;
  Tensor out = a.value().cwiseProduct(mask);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [ia, mask = std::move(mask)](Tape& tp, const Tensor& g) {
                            tp.grad(ia) += g.cwiseProduct(mask);
                          });
}

Var gather_rows(const Var& a, std::span<const std::size_t> index) {
  const Tensor& x = a.value();
  Tensor out(static_cast<long>(index.size()), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (static_cast<long>(index[i]) >= x.rows()) throw Error(ErrorCode::IndexOutOfRange, "gather_rows index");
    out.row(static_cast<long>(i)) = x.row(static_cast<long>(index[i]));
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [ia, idx = std::move(idx)](Tape& tp, const Tensor& g) {
                            Tensor& ga = tp.grad(ia);
                            for (std::size_t i = 0; i < idx.size(); ++i) {
                              ga.row(static_cast<long>(idx[i])) += g.row(static_cast<long>(i));
                            }
                          });
}

Var scatter_sum(const Var& a, std::span<const std::size_t> index, std::size_t rows) {
  if (static_cast<long>(index.size()) != a.rows()) {
    throw Error(ErrorCode::CountMismatch, "scatter_sum: one index per row required");
  }
  const Tensor& x = a.value();
  Tensor out = Tensor::Zero(static_cast<long>(rows), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw Error(ErrorCode::IndexOutOfRange, "scatter_sum index");
    out.row(static_cast<long>(index[i])) += x.row(static_cast<long>(i));
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [ia, idx = std::move(idx)](Tape& tp, const Tensor& g) {
                            Tensor& ga = tp.grad(ia);
                            for (std::size_t i = 0; i < idx.size(); ++i) {
                              ga.row(static_cast<long>(i)) += g.row(static_cast<long>(idx[i]));
                            }
                          });
}

Var rowwise_dot(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "rowwise_dot");
  Tensor out = a.value().cwiseProduct(b.value()).rowwise().sum();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, const Tensor& g) {
                    if (tp.requires_grad(ia)) {
                      tp.grad(ia) += (tp.value(ib).array().colwise() * g.col(0).array()).matrix();
                    }
                    if (tp.requires_grad(ib)) {
                      tp.grad(ib) += (tp.value(ia).array().colwise() * g.col(0).array()).matrix();
                    }
                  });
}

Var scale_rows(const Var& a, const Var& s) {
  Tape& t = same_tape(a, s);
  if (s.cols() != 1 || s.rows() != a.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "scale_rows: scale must be a column with one entry per row");
  }
  Tensor out = (a.value().array().colwise() * s.value().col(0).array()).matrix();
  const std::size_t ia = a.id(), is = s.id();
  return t.record(std::move(out), a.requires_grad() || s.requires_grad(),
                  [ia, is](Tape& tp, const Tensor& g) {
                    if (tp.requires_grad(ia)) {
                      tp.grad(ia) += (g.array().colwise() * tp.value(is).col(0).array()).matrix();
                    }
                    if (tp.requires_grad(is)) {
                      tp.grad(is) += g.cwiseProduct(tp.value(ia)).rowwise().sum();
                    }
                  });
}

Var segment_softmax(const Var& scores, std::span<const std::size_t> offsets) {
  if (scores.cols() != 1 || offsets.empty() || static_cast<long>(offsets.back()) != scores.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "segment_softmax: scores must be a column covered by offsets");
  }
  const Tensor& x = scores.value();
  Tensor y(x.rows(), 1);
  for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
    const long b = static_cast<long>(offsets[k]);
    const long n = static_cast<long>(offsets[k + 1]) - b;
    if (n == 0) continue;
    const double m = x.col(0).segment(b, n).maxCoeff();
    double total = 0.0;
    for (long i = b; i < b + n; ++i) {
      y(i, 0) = std::exp(x(i, 0) - m);
      total += y(i, 0);
    }
    for (long i = b; i < b + n; ++i) y(i, 0) /= total;
  }
  const std::size_t is = scores.id();
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  Tensor ys = y;
  return scores.tape()->record(std::move(y), scores.requires_grad(),
                               [is, off = std::move(off), ys = std::move(ys)](Tape& tp, const Tensor& g) {
                                 Tensor& gs = tp.grad(is);
                                 for (std::size_t k = 0; k + 1 < off.size(); ++k) {
                                   const long b = static_cast<long>(off[k]);
                                   const long e = static_cast<long>(off[k + 1]);
                                   double dot = 0.0;
                                   for (long i = b; i < e; ++i) dot += g(i, 0) * ys(i, 0);
                                   for (long i = b; i < e; ++i) gs(i, 0) += ys(i, 0) * (g(i, 0) - dot);
                                 }
                               });
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Parameter*> params, double learning_rate, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Parameter* p : params_) {
    m_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "Adam: gradient shape of " + p.name);
    }
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * p.grad;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace meshnet
