#include "meshnet/layers.hpp"

#include <cmath>
#include <numbers>

#include "meshnet/error.hpp"

namespace meshnet {

namespace {

std::span<double> row_span(Tensor& t, long row) {
  return {t.row(row).data(), static_cast<std::size_t>(t.cols())};
}

void require_cols(const Var& x, const FeatureType& type, const char* op) {
  if (x.cols() != static_cast<long>(type.dim())) {
    throw Error(ErrorCode::TypeMismatch, std::string(op) + ": input has " +
                                             std::to_string(x.cols()) + " channels, type " +
                                             type.to_string() + " has " +
                                             std::to_string(type.dim()));
  }
}

Parameter make_kernel_parameter(const KernelLayout& layout, const std::string& name,
                                std::mt19937_64& rng) {
  Tensor coeffs(1, static_cast<long>(layout.coefficient_count()));
  layout.initialize({coeffs.data(), layout.coefficient_count()}, rng);
  return Parameter(name, std::move(coeffs));
}

std::size_t nonscalar_count(const FeatureType& type) {
  std::size_t n = 0;
  for (int o : type.orders()) n += o != 0 ? 1 : 0;
  return n;
}

/// Receiver-grouped rows for attention: row r belongs to target[r], rows of
/// one receiver are contiguous in [offsets[p], offsets[p+1]).
struct AttentionRows {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> target;
  Tensor multiplicity;  // rows x 1, size of the receiver's group
};

AttentionRows attention_rows(std::span<const std::size_t> offsets, std::size_t vertex_count) {
  AttentionRows rows;
  rows.offsets.assign(offsets.begin(), offsets.end());
  rows.target.resize(rows.offsets.back());
  rows.multiplicity.resize(static_cast<long>(rows.offsets.back()), 1);
  for (std::size_t p = 0; p < vertex_count; ++p) {
    const std::size_t n = rows.offsets[p + 1] - rows.offsets[p];
    for (std::size_t r = rows.offsets[p]; r < rows.offsets[p + 1]; ++r) {
      rows.target[r] = p;
      rows.multiplicity(static_cast<long>(r), 0) = static_cast<double>(n);
    }
  }
  return rows;
}

/// out_p = n_p * sum_r softmax_r(k_r . q_p * temperature) v_r over the rows of p.
Var attend(Tape& tape, const Var& q, const Var& k, const Var& v, const AttentionRows& rows,
           std::size_t vertex_count, double temperature, Var* alpha_out) {
  const Var qe = gather_rows(q, rows.target);
  const Var scores = scale(rowwise_dot(k, qe), temperature);
  const Var alpha = segment_softmax(scores, rows.offsets);
  if (alpha_out != nullptr) *alpha_out = alpha;
  const Var weights = hadamard(alpha, tape.constant(rows.multiplicity));
  return scatter_sum(scale_rows(v, weights), rows.target, vertex_count);
}

}  // namespace

// ---------------------------------------------------------------------------
// Typed ops

Var gather_rotate(const Var& x, const FeatureType& type, std::span<const std::size_t> index,
                  std::span<const double> angles) {
  require_cols(x, type, "gather_rotate");
  if (index.size() != angles.size()) {
    throw Error(ErrorCode::CountMismatch, "gather_rotate: one angle per gathered row required");
  }
  const Tensor& xv = x.value();
  Tensor out(static_cast<long>(index.size()), xv.cols());
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (static_cast<long>(index[e]) >= xv.rows()) {
      throw Error(ErrorCode::IndexOutOfRange, "gather_rotate index");
    }
    const long row = static_cast<long>(e);
    out.row(row) = xv.row(static_cast<long>(index[e]));
    rotate_coordinates(type, angles[e], row_span(out, row));
  }
  const std::size_t ix = x.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> ang(angles.begin(), angles.end());
  return x.tape()->record(std::move(out), x.requires_grad(),
                          [ix, type, idx = std::move(idx), ang = std::move(ang)](Tape& tp, const Tensor& g) {
                            Tensor& gx = tp.grad(ix);
                            Eigen::RowVectorXd tmp(g.cols());
                            for (std::size_t e = 0; e < idx.size(); ++e) {
                              tmp = g.row(static_cast<long>(e));
                              rotate_coordinates(type, -ang[e], {tmp.data(), static_cast<std::size_t>(tmp.size())});
                              gx.row(static_cast<long>(idx[e])) += tmp;
                            }
                          });
}

Var rotate_rows(const Var& x, const FeatureType& type, std::span<const double> angles) {
  require_cols(x, type, "rotate_rows");
  if (static_cast<long>(angles.size()) != x.rows()) {
    throw Error(ErrorCode::CountMismatch, "rotate_rows: one angle per row required");
  }
  Tensor out = x.value();
  for (long r = 0; r < out.rows(); ++r) {
    rotate_coordinates(type, angles[static_cast<std::size_t>(r)], row_span(out, r));
  }
  const std::size_t ix = x.id();
  std::vector<double> ang(angles.begin(), angles.end());
  return x.tape()->record(std::move(out), x.requires_grad(),
                          [ix, type, ang = std::move(ang)](Tape& tp, const Tensor& g) {
                            Tensor back = g;
                            for (long r = 0; r < back.rows(); ++r) {
                              rotate_coordinates(type, -ang[static_cast<std::size_t>(r)], row_span(back, r));
                            }
                            tp.grad(ix) += back;
                          });
}

Var equivariant_linear(const Var& x, const KernelLayout& layout, const Var& coefficients) {
  require_cols(x, layout.in_type(), "equivariant_linear");
  if (coefficients.tape() != x.tape()) {
    throw Error(ErrorCode::InvalidArgument, "equivariant_linear: operands on different tapes");
  }
  const std::size_t n = layout.coefficient_count();
  if (static_cast<std::size_t>(coefficients.value().size()) != n) {
    throw Error(ErrorCode::CountMismatch, "equivariant_linear: coefficient count mismatch");
  }
  Eigen::MatrixXd k0 = layout.assemble({coefficients.value().data(), n}, 0.0);
  Tensor out = x.value() * k0.transpose();
  const std::size_t ix = x.id();
  const std::size_t ic = coefficients.id();
  const bool needs = x.requires_grad() || coefficients.requires_grad();
  return x.tape()->record(std::move(out), needs,
                          [ix, ic, layout, k0 = std::move(k0)](Tape& tp, const Tensor& g) {
                            if (tp.requires_grad(ix)) tp.grad(ix).noalias() += g * k0;
                            if (tp.requires_grad(ic)) {
                              const Eigen::MatrixXd dk = g.transpose() * tp.value(ix);
                              Tensor& gc = tp.grad(ic);
                              layout.accumulate_coefficient_gradient(
                                  dk, 0.0, {gc.data(), static_cast<std::size_t>(gc.size())});
                            }
                          });
}

Var angular_bias(const Var& x, const FeatureType& type, const Var& bias) {
  require_cols(x, type, "angular_bias");
  if (static_cast<std::size_t>(bias.value().size()) != type.irrep_count()) {
    throw Error(ErrorCode::CountMismatch, "angular_bias: expected " +
                                              std::to_string(type.irrep_count()) +
                                              " bias parameters, got " +
                                              std::to_string(bias.value().size()));
  }
  const Tensor& b = bias.value();
  Tensor out = x.value();
  for (std::size_t i = 0; i < type.irrep_count(); ++i) {
    const int n = type.orders()[i];
    const long off = static_cast<long>(type.offset(i));
    const double bi = b.data()[i];
    if (n == 0) {
      out.col(off).array() += bi;
      continue;
    }
    const double c = std::cos(n * bi);
    const double s = std::sin(n * bi);
    for (long r = 0; r < out.rows(); ++r) {
      const double u = out(r, off);
      const double w = out(r, off + 1);
      out(r, off) = c * u - s * w;
      out(r, off + 1) = s * u + c * w;
    }
  }
  const std::size_t ix = x.id();
  const std::size_t ib = bias.id();
  Tensor y = out;
  return x.tape()->record(std::move(out), x.requires_grad() || bias.requires_grad(),
                          [ix, ib, type, y = std::move(y)](Tape& tp, const Tensor& g) {
                            const Tensor& bv = tp.value(ib);
                            const bool gx = tp.requires_grad(ix);
                            const bool gb = tp.requires_grad(ib);
                            for (std::size_t i = 0; i < type.irrep_count(); ++i) {
                              const int n = type.orders()[i];
                              const long off = static_cast<long>(type.offset(i));
                              if (n == 0) {
                                if (gx) tp.grad(ix).col(off) += g.col(off);
                                if (gb) tp.grad(ib).data()[i] += g.col(off).sum();
                                continue;
                              }
                              const double c = std::cos(n * bv.data()[i]);
                              const double s = std::sin(n * bv.data()[i]);
                              double db = 0.0;
                              for (long r = 0; r < g.rows(); ++r) {
                                const double g0 = g(r, off);
                                const double g1 = g(r, off + 1);
                                if (gx) {
                                  Tensor& gxt = tp.grad(ix);
                                  gxt(r, off) += c * g0 + s * g1;
                                  gxt(r, off + 1) += -s * g0 + c * g1;
                                }
                                // d/db of rho_n(b) f is n * J y with J the quarter turn.
                                db += n * (-y(r, off + 1) * g0 + y(r, off) * g1);
                              }
                              if (gb) tp.grad(ib).data()[i] += db;
                            }
                          });
}

Var norm_gate(const Var& x, const FeatureType& type, const Var& offsets) {
  require_cols(x, type, "norm_gate");
  const std::size_t gated = nonscalar_count(type);
  if (static_cast<std::size_t>(offsets.value().size()) != gated) {
    throw Error(ErrorCode::CountMismatch, "norm_gate: expected " + std::to_string(gated) +
                                              " offsets, got " +
                                              std::to_string(offsets.value().size()));
  }
  const Tensor& xv = x.value();
  const Tensor& cv = offsets.value();
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t i = 0, k = 0; i < type.irrep_count(); ++i) {
    const long off = static_cast<long>(type.offset(i));
    if (type.orders()[i] == 0) {
      out.col(off) = xv.col(off).cwiseMax(0.0);
      continue;
    }
    const double c = cv.data()[k++];
    for (long r = 0; r < xv.rows(); ++r) {
      const double norm = std::hypot(xv(r, off), xv(r, off + 1));
      const double s = 1.0 / (1.0 + std::exp(-(norm + c)));
      const double h = s / (norm + kNormGateEps);
      out(r, off) = h * xv(r, off);
      out(r, off + 1) = h * xv(r, off + 1);
    }
  }
  const std::size_t ix = x.id();
  const std::size_t ic = offsets.id();
  return x.tape()->record(
      std::move(out), x.requires_grad() || offsets.requires_grad(),
      [ix, ic, type](Tape& tp, const Tensor& g) {
        const Tensor& xv = tp.value(ix);
        const Tensor& cv = tp.value(ic);
        const bool gx = tp.requires_grad(ix);
        const bool gc = tp.requires_grad(ic);
        for (std::size_t i = 0, k = 0; i < type.irrep_count(); ++i) {
          const long off = static_cast<long>(type.offset(i));
          if (type.orders()[i] == 0) {
            if (gx) tp.grad(ix).col(off) += (xv.col(off).array() > 0.0).select(g.col(off), 0.0);
            continue;
          }
          const std::size_t slot = k++;
          const double c = cv.data()[slot];
          double dc = 0.0;
          for (long r = 0; r < xv.rows(); ++r) {
            const double f0 = xv(r, off);
            const double f1 = xv(r, off + 1);
            const double g0 = g(r, off);
            const double g1 = g(r, off + 1);
            const double norm = std::hypot(f0, f1);
            const double s = 1.0 / (1.0 + std::exp(-(norm + c)));
            const double denom = norm + kNormGateEps;
            const double h = s / denom;
            const double fg = f0 * g0 + f1 * g1;
            dc += s * (1.0 - s) / denom * fg;
            if (!gx) continue;
            Tensor& gxt = tp.grad(ix);
            gxt(r, off) += h * g0;
            gxt(r, off + 1) += h * g1;
            if (norm > 0.0) {
              const double dh = (s * (1.0 - s) * denom - s) / (denom * denom);
              const double w = dh * fg / norm;
              gxt(r, off) += w * f0;
              gxt(r, off + 1) += w * f1;
            }
          }
          if (gc) tp.grad(ic).data()[slot] += dc;
        }
      });
}

BiasKind parse_bias_kind(std::string_view name) {
  if (name == "none") return BiasKind::None;
  if (name == "angular") return BiasKind::Angular;
  if (name == "additive") return BiasKind::Additive;
  throw Error(ErrorCode::Config, "unknown bias kind '" + std::string(name) + "'");
}

std::string_view to_string(BiasKind kind) {
  switch (kind) {
    case BiasKind::None: return "none";
    case BiasKind::Angular: return "angular";
    case BiasKind::Additive: return "additive";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// MeshLayer

void MeshLayer::check_input(const Var& x, const TransportData& transport) const {
  require_cols(x, in_, kind().c_str());
  if (static_cast<std::size_t>(x.rows()) != transport.vertex_count) {
    throw Error(ErrorCode::CountMismatch, kind() + ": " + std::to_string(x.rows()) +
                                              " feature rows for " +
                                              std::to_string(transport.vertex_count) + " vertices");
  }
}

GeometricFeatureField MeshLayer::apply(const GeometricFeatureField& field,
                                       const TransportData& transport) const {
  if (!(field.type == in_)) {
    throw Error(ErrorCode::TypeMismatch, kind() + ": layer expects " + in_.to_string() +
                                             ", field has " + field.type.to_string());
  }
  if (!in_.is_scalar() && field.binding != transport.binding) {
    throw Error(ErrorCode::FrameBindingMismatch,
                kind() + ": features and transport refer to different frame fields");
  }
  Tape tape;
  const Var y = forward(tape, tape.constant(field.values), transport);
  return {out_, y.value(), out_.is_scalar() ? kAnyFrame : transport.binding};
}

BiasTerm::BiasTerm(BiasKind kind_, const FeatureType& type, const std::string& name,
                   std::mt19937_64& rng)
    : kind(kind_) {
  std::uniform_real_distribution<double> scalar(-0.5, 0.5);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  if (kind == BiasKind::Angular) {
    Tensor b(1, static_cast<long>(type.irrep_count()));
    for (std::size_t i = 0; i < type.irrep_count(); ++i) {
      b.data()[i] = type.orders()[i] == 0 ? scalar(rng) : angle(rng);
    }
    param = Parameter(name, std::move(b));
  } else if (kind == BiasKind::Additive) {
    Tensor b(1, static_cast<long>(type.dim()));
    for (long i = 0; i < b.size(); ++i) b.data()[i] = scalar(rng);
    param = Parameter(name, std::move(b));
  }
}

Var BiasTerm::apply(Tape& tape, const Var& x, const FeatureType& type) const {
  switch (kind) {
    case BiasKind::None: return x;
    case BiasKind::Angular: return angular_bias(x, type, tape.parameter(param));
    case BiasKind::Additive: return add_row(x, tape.parameter(param));
  }
  return x;
}

// ---------------------------------------------------------------------------
// GemConvLayer

GemConvLayer::GemConvLayer(FeatureType in, FeatureType out, BiasKind bias_kind,
                           std::mt19937_64& rng, const std::string& name)
    : MeshLayer(std::move(in), std::move(out)),
      self_layout(in_, out_, KernelKind::Self),
      neigh_layout(in_, out_, KernelKind::Neigh),
      self_coefficients(make_kernel_parameter(self_layout, name + ".self", rng)),
      neigh_coefficients(make_kernel_parameter(neigh_layout, name + ".neigh", rng)),
      bias(bias_kind, out_, name + ".bias", rng) {}

Var GemConvLayer::forward(Tape& tape, const Var& x, const TransportData& transport) const {
  check_input(x, transport);
  const std::size_t edges = transport.edge_count();
  std::vector<double> pre(edges);
  for (std::size_t e = 0; e < edges; ++e) pre[e] = transport.transport[e] - transport.theta[e];

  const Var self_term =
      equivariant_linear(x, self_layout, tape.parameter(self_coefficients));
  const Var gathered = gather_rotate(x, in_, transport.source, pre);
  const Var messages = rotate_rows(
      equivariant_linear(gathered, neigh_layout,
                         tape.parameter(neigh_coefficients)),
      out_, transport.theta);
  const Var summed = scatter_sum(messages, transport.target, transport.vertex_count);
  return bias.apply(tape, add(self_term, summed), out_);
}

std::vector<Parameter*> GemConvLayer::parameters() {
  std::vector<Parameter*> out{&self_coefficients, &neigh_coefficients};
  if (bias.kind != BiasKind::None) out.push_back(&bias.param);
  return out;
}

EquivariantKernel GemConvLayer::self_kernel() const {
  EquivariantKernel k(in_, out_, KernelKind::Self);
  k.coefficients.assign(self_coefficients.value.data(),
                        self_coefficients.value.data() + self_coefficients.value.size());
  return k;
}

EquivariantKernel GemConvLayer::neigh_kernel() const {
  EquivariantKernel k(in_, out_, KernelKind::Neigh);
  k.coefficients.assign(neigh_coefficients.value.data(),
                        neigh_coefficients.value.data() + neigh_coefficients.value.size());
  return k;
}

// ---------------------------------------------------------------------------
// EmanAttentionLayer

std::vector<FeatureType> split_type(const FeatureType& type, int groups) {
  if (groups < 1) throw Error(ErrorCode::InvalidArgument, "head count must be >= 1");
  const std::size_t dim = type.dim();
  if (dim % static_cast<std::size_t>(groups) != 0) {
    throw Error(ErrorCode::DimensionMismatch, "type " + type.to_string() + " of dimension " +
                                                  std::to_string(dim) + " does not split into " +
                                                  std::to_string(groups) + " heads");
  }
  const std::size_t d = dim / static_cast<std::size_t>(groups);
  std::vector<FeatureType> out;
  std::vector<int> current;
  std::size_t current_dim = 0;
  for (int n : type.orders()) {
    current.push_back(n);
    current_dim += n == 0 ? 1 : 2;
    if (current_dim == d) {
      out.emplace_back(std::move(current));
      current.clear();
      current_dim = 0;
    } else if (current_dim > d) {
      throw Error(ErrorCode::DimensionMismatch, "type " + type.to_string() +
                                                    " cannot be split at irrep boundaries into " +
                                                    std::to_string(groups) + " heads");
    }
  }
  return out;
}

EmanAttentionLayer::EmanAttentionLayer(FeatureType in, FeatureType out, const EmanOptions& options,
                                       std::mt19937_64& rng, const std::string& name)
    : MeshLayer(std::move(in), std::move(out)),
      att_(options.attention_type.value_or(out_)),
      self_(options.self_contribution) {
  query_layout = KernelLayout(in_, att_, KernelKind::Self);
  key_layout = KernelLayout(in_, att_, KernelKind::Neigh);
  value_layout = KernelLayout(in_, out_, KernelKind::Neigh);
  query = make_kernel_parameter(query_layout, name + ".query", rng);
  key = make_kernel_parameter(key_layout, name + ".key", rng);
  value = make_kernel_parameter(value_layout, name + ".value", rng);
  if (self_) {
    key_self_layout = KernelLayout(in_, att_, KernelKind::Self);
    value_self_layout = KernelLayout(in_, out_, KernelKind::Self);
    key_self = make_kernel_parameter(key_self_layout, name + ".key_self", rng);
    value_self = make_kernel_parameter(value_self_layout, name + ".value_self", rng);
  }
  if (options.heads < 1) throw Error(ErrorCode::InvalidArgument, "head count must be >= 1");
  if (options.heads == 1) {
    head_types_ = {out_};
  } else {
    if (options.head_type) {
      if (options.head_type->dim() * static_cast<std::size_t>(options.heads) != out_.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "heads x dim(head type) must equal the output dimension");
      }
      head_types_.assign(static_cast<std::size_t>(options.heads), *options.head_type);
    } else {
      head_types_ = split_type(out_, options.heads);
    }
    FeatureType diag;
    for (std::size_t i = 0; i < head_types_.size(); ++i) {
      const std::string tag = name + ".head" + std::to_string(i);
      head_query_layouts.emplace_back(att_, head_types_[i], KernelKind::Self);
      head_key_layouts.emplace_back(att_, head_types_[i], KernelKind::Self);
      head_value_layouts.emplace_back(out_, head_types_[i], KernelKind::Self);
      head_query.push_back(make_kernel_parameter(head_query_layouts.back(), tag + ".query", rng));
      head_key.push_back(make_kernel_parameter(head_key_layouts.back(), tag + ".key", rng));
      head_value.push_back(make_kernel_parameter(head_value_layouts.back(), tag + ".value", rng));
      diag = diag + head_types_[i];
    }
    mix_layout = KernelLayout(diag, out_, KernelKind::Self);
    mix = make_kernel_parameter(mix_layout, name + ".mix", rng);
  }
  bias = BiasTerm(options.bias, out_, name + ".bias", rng);
}

Var EmanAttentionLayer::forward(Tape& tape, const Var& x, const TransportData& transport) const {
  return forward_impl(tape, x, transport, nullptr);
}

Var EmanAttentionLayer::forward_impl(Tape& tape, const Var& x, const TransportData& transport,
                                     Var* alpha_out) const {
  check_input(x, transport);
  const std::size_t vcount = transport.vertex_count;
  if (!self_) {
    for (std::size_t p = 0; p < vcount; ++p) {
      if (transport.degree(p) == 0) {
        throw Error(ErrorCode::EmptyNeighborhood,
                    "vertex " + std::to_string(p) + " has no neighbors to attend to");
      }
    }
  }
  auto param = [&tape](const Parameter& p) { return tape.parameter(p); };

  const std::size_t edges = transport.edge_count();
  std::vector<double> pre(edges);
  for (std::size_t e = 0; e < edges; ++e) pre[e] = transport.transport[e] - transport.theta[e];

  const Var q = equivariant_linear(x, query_layout, param(query));
  const Var gathered = gather_rotate(x, in_, transport.source, pre);
  Var k_rows = rotate_rows(equivariant_linear(gathered, key_layout, param(key)), att_, transport.theta);
  Var v_rows = rotate_rows(equivariant_linear(gathered, value_layout, param(value)), out_, transport.theta);

  AttentionRows rows;
  if (self_) {
    // Each receiver's group is its self row followed by its edges.
    const Var k_self = equivariant_linear(x, key_self_layout, param(key_self));
    const Var v_self = equivariant_linear(x, value_self_layout, param(value_self));
    std::vector<std::size_t> order;
    std::vector<std::size_t> offsets{0};
    order.reserve(edges + vcount);
    for (std::size_t p = 0; p < vcount; ++p) {
      order.push_back(edges + p);
      for (std::size_t e = transport.offsets[p]; e < transport.offsets[p + 1]; ++e) order.push_back(e);
      offsets.push_back(order.size());
    }
    const Var k_parts[] = {k_rows, k_self};
    const Var v_parts[] = {v_rows, v_self};
    k_rows = gather_rows(concat_rows(k_parts), order);
    v_rows = gather_rows(concat_rows(v_parts), order);
    rows = attention_rows(offsets, vcount);
  } else {
    rows = attention_rows(transport.offsets, vcount);
  }

  Var out;
  if (head_types_.size() == 1) {
    out = attend(tape, q, k_rows, v_rows, rows, vcount, 1.0 / std::sqrt(static_cast<double>(att_.dim())),
                 alpha_out);
  } else {
    std::vector<Var> heads;
    for (std::size_t i = 0; i < head_types_.size(); ++i) {
      const Var qi = equivariant_linear(q, head_query_layouts[i], param(head_query[i]));
      const Var ki = equivariant_linear(k_rows, head_key_layouts[i], param(head_key[i]));
      const Var vi = equivariant_linear(v_rows, head_value_layouts[i], param(head_value[i]));
      const double temp = 1.0 / std::sqrt(static_cast<double>(head_types_[i].dim()));
      heads.push_back(attend(tape, qi, ki, vi, rows, vcount, temp, i == 0 ? alpha_out : nullptr));
    }
    out = equivariant_linear(concat_cols(heads), mix_layout, param(mix));
  }
  return bias.apply(tape, out, out_);
}

Tensor EmanAttentionLayer::attention(const Tensor& x, const TransportData& transport) const {
  Tape tape;
  Var alpha;
  forward_impl(tape, tape.constant(x), transport, &alpha);
  return alpha.value();
}

std::vector<Parameter*> EmanAttentionLayer::parameters() {
  std::vector<Parameter*> out{&query, &key, &value};
  if (self_) {
    out.push_back(&key_self);
    out.push_back(&value_self);
  }
  for (std::size_t i = 0; i < head_query.size(); ++i) {
    out.push_back(&head_query[i]);
    out.push_back(&head_key[i]);
    out.push_back(&head_value[i]);
  }
  if (!head_query.empty()) out.push_back(&mix);
  if (bias.kind != BiasKind::None) out.push_back(&bias.param);
  return out;
}

// ---------------------------------------------------------------------------
// GaugeNonlinearity and Dense

GaugeNonlinearity::GaugeNonlinearity(FeatureType type, const std::string& name)
    : offsets(name + ".offset", Tensor::Zero(1, static_cast<long>(nonscalar_count(type)))),
      type_(std::move(type)) {}

Var GaugeNonlinearity::forward(Tape& tape, const Var& x) const {
  return norm_gate(x, type_, tape.parameter(offsets));
}

std::vector<Parameter*> GaugeNonlinearity::parameters() {
  if (offsets.size() == 0) return {};
  return {&offsets};
}

Dense::Dense(std::size_t in, std::size_t out, std::mt19937_64& rng, const std::string& name) {
  const double s = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1)));
  std::uniform_real_distribution<double> dist(-s, s);
  Tensor w(static_cast<long>(out), static_cast<long>(in));
  for (long i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  Tensor b(1, static_cast<long>(out));
  for (long i = 0; i < b.size(); ++i) b.data()[i] = dist(rng);
  weight = Parameter(name + ".weight", std::move(w));
  bias = Parameter(name + ".bias", std::move(b));
}

Var Dense::forward(Tape& tape, const Var& x) const {
  if (x.cols() != weight.value.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "dense: input width " + std::to_string(x.cols()) +
                                                  ", expected " + std::to_string(weight.value.cols()));
  }
  return linear(x, tape.parameter(weight),
                tape.parameter(bias));
}

}  // namespace meshnet
