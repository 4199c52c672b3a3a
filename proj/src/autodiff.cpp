#include "cfc/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "cfc/tensor_ops.hpp"

namespace cfc::ad {

const Tensor& Var::value() const { return tape->value(*this); }

const Tensor& GradientMap::at(const Var& param) const {
  for (std::size_t i = 0; i < param_ids_.size(); ++i) {
    if (param_ids_[i] == param.id) return grads_[i];
  }
  throw std::invalid_argument("GradientMap: var " + std::to_string(param.id) +
                              " is not a registered parameter");
}

double GradientMap::global_norm() const {
  double sq = 0.0;
  for (const Tensor& g : grads_) {
    for (std::size_t i = 0, n = g.size(); i < n; ++i) sq += g[i] * g[i];
  }
  return std::sqrt(sq);
}

void GradientMap::scale(double factor) {
  for (Tensor& g : grads_) {
    for (std::size_t i = 0, n = g.size(); i < n; ++i) g[i] *= factor;
  }
}

const Tensor& Tape::value(Var v) const {
  if (v.tape != this) throw std::invalid_argument("Tape: var belongs to a different tape");
  return nodes_[v.id].value;
}

void Tape::check_mine(const char* op, Var v) const {
  if (v.tape != this) {
    throw std::invalid_argument(std::string(op) + ": operand recorded on a different tape");
  }
}

Var Tape::emit(const char* op, Tensor value, bool requires_grad, PullFn pull) {
  if (!value.all_finite()) {
    throw std::runtime_error(std::string(op) + ": produced non-finite values");
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.pull = std::move(pull);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate_adj(std::vector<Tensor>& adj, std::size_t id, const Tensor& g) {
  ops::accumulate(adj[id], g);
}

Var Tape::constant(Tensor v) { return emit("constant", std::move(v), false, {}); }

Var Tape::param(Tensor v) {
  Var out = emit("param", std::move(v), true, {});
  param_ids_.push_back(out.id);
  return out;
}

Var Tape::add(Var a, Var b) {
  check_mine("add", a);
  check_mine("add", b);
  Tensor out = ops::add(value(a), value(b));
  const bool ga = needs_grad(a), gb = needs_grad(b);
  auto pull = [ia = a.id, ib = b.id, ga, gb](const Tape& t, const Tensor& up,
                                             std::vector<Tensor>& adj) {
    if (ga) accumulate_adj(adj, ia, ops::reduce_leading(up, t.nodes_[ia].value.shape()));
    if (gb) accumulate_adj(adj, ib, ops::reduce_leading(up, t.nodes_[ib].value.shape()));
  };
  return emit("add", std::move(out), ga || gb, pull);
}

Var Tape::sub(Var a, Var b) {
  check_mine("sub", a);
  check_mine("sub", b);
  Tensor out = ops::sub(value(a), value(b));
  const bool ga = needs_grad(a), gb = needs_grad(b);
  auto pull = [ia = a.id, ib = b.id, ga, gb](const Tape& t, const Tensor& up,
                                             std::vector<Tensor>& adj) {
    if (ga) accumulate_adj(adj, ia, ops::reduce_leading(up, t.nodes_[ia].value.shape()));
    if (gb) accumulate_adj(adj, ib, ops::reduce_leading(ops::neg(up), t.nodes_[ib].value.shape()));
  };
  return emit("sub", std::move(out), ga || gb, pull);
}

Var Tape::mul(Var a, Var b) {
  check_mine("mul", a);
  check_mine("mul", b);
  Tensor out = ops::mul(value(a), value(b));
  const bool ga = needs_grad(a), gb = needs_grad(b);
  auto pull = [ia = a.id, ib = b.id, ga, gb](const Tape& t, const Tensor& up,
                                             std::vector<Tensor>& adj) {
    if (ga) {
      accumulate_adj(adj, ia, ops::reduce_leading(ops::mul(up, t.nodes_[ib].value),
                                                  t.nodes_[ia].value.shape()));
    }
    if (gb) {
      accumulate_adj(adj, ib, ops::reduce_leading(ops::mul(up, t.nodes_[ia].value),
                                                  t.nodes_[ib].value.shape()));
    }
  };
  return emit("mul", std::move(out), ga || gb, pull);
}

Var Tape::matmul(Var a, Var b) {
  check_mine("matmul", a);
  check_mine("matmul", b);
  Tensor out = ops::matmul(value(a), value(b));
  const bool ga = needs_grad(a), gb = needs_grad(b);
  auto pull = [ia = a.id, ib = b.id, ga, gb](const Tape& t, const Tensor& up,
                                             std::vector<Tensor>& adj) {
    if (ga) accumulate_adj(adj, ia, ops::matmul_nt(up, t.nodes_[ib].value));
    if (gb) accumulate_adj(adj, ib, ops::matmul_tn(t.nodes_[ia].value, up));
  };
  return emit("matmul", std::move(out), ga || gb, pull);
}

Var Tape::concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  std::vector<const Tensor*> values;
  values.reserve(parts.size());
  bool any_grad = false;
  for (Var p : parts) {
    check_mine("concat", p);
    values.push_back(&value(p));
    any_grad = any_grad || needs_grad(p);
  }
  Tensor out = ops::concat(values, axis);

  struct Piece {
    std::size_t id;
    std::size_t extent;
    bool grad;
  };
  std::vector<Piece> pieces;
  pieces.reserve(parts.size());
  for (Var p : parts) {
    pieces.push_back({p.id, value(p).dim(axis), needs_grad(p)});
  }
  auto pull = [pieces, axis](const Tape&, const Tensor& up, std::vector<Tensor>& adj) {
    std::size_t offset = 0;
    for (const Piece& piece : pieces) {
      if (piece.grad) {
        accumulate_adj(adj, piece.id, ops::slice(up, axis, offset, piece.extent));
      }
      offset += piece.extent;
    }
  };
  return emit("concat", std::move(out), any_grad, pull);
}

Var Tape::slice(Var a, std::size_t axis, std::size_t start, std::size_t len) {
  check_mine("slice", a);
  Tensor out = ops::slice(value(a), axis, start, len);
  const bool ga = needs_grad(a);
  auto pull = [ia = a.id, axis, start, len](const Tape& t, const Tensor& up,
                                            std::vector<Tensor>& adj) {
    const Tensor& in = t.nodes_[ia].value;
    Tensor g(in.shape());
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= in.dim(i);
    for (std::size_t i = axis + 1; i < in.rank(); ++i) inner *= in.dim(i);
    const std::size_t in_row = in.dim(axis) * inner;
    const std::size_t up_row = len * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::memcpy(g.data() + o * in_row + start * inner, up.data() + o * up_row,
                  up_row * sizeof(double));
    }
    accumulate_adj(adj, ia, g);
  };
  return emit("slice", std::move(out), ga, pull);
}

Var Tape::unary_elementwise(
    const char* op, Var a, Tensor out,
    std::function<Tensor(const Tape&, const Tensor&, std::size_t, std::size_t)> grad_fn) {
  const bool ga = needs_grad(a);
  const std::size_t out_id = nodes_.size();
  auto pull = [ia = a.id, out_id, grad_fn](const Tape& t, const Tensor& up,
                                           std::vector<Tensor>& adj) {
    accumulate_adj(adj, ia, grad_fn(t, up, ia, out_id));
  };
  return emit(op, std::move(out), ga, pull);
}

Var Tape::neg(Var a) {
  check_mine("neg", a);
  return unary_elementwise("neg", a, ops::neg(value(a)),
                           [](const Tape&, const Tensor& up, std::size_t, std::size_t) {
                             return ops::neg(up);
                           });
}

Var Tape::exp(Var a) {
  check_mine("exp", a);
  return unary_elementwise("exp", a, ops::exp(value(a)),
                           [](const Tape& t, const Tensor& up, std::size_t, std::size_t out_id) {
                             return ops::mul(up, t.nodes_[out_id].value);
                           });
}

Var Tape::sigmoid(Var a) {
  check_mine("sigmoid", a);
  return unary_elementwise("sigmoid", a, ops::sigmoid(value(a)),
                           [](const Tape& t, const Tensor& up, std::size_t, std::size_t out_id) {
                             const Tensor& s = t.nodes_[out_id].value;
                             Tensor g(up.shape());
                             for (std::size_t i = 0, n = g.size(); i < n; ++i) {
                               g[i] = up[i] * s[i] * (1.0 - s[i]);
                             }
                             return g;
                           });
}

Var Tape::tanh(Var a) {
  check_mine("tanh", a);
  return unary_elementwise("tanh", a, ops::tanh(value(a)),
                           [](const Tape& t, const Tensor& up, std::size_t, std::size_t out_id) {
                             const Tensor& y = t.nodes_[out_id].value;
                             Tensor g(up.shape());
                             for (std::size_t i = 0, n = g.size(); i < n; ++i) {
                               g[i] = up[i] * (1.0 - y[i] * y[i]);
                             }
                             return g;
                           });
}

Var Tape::relu(Var a) {
  check_mine("relu", a);
  return unary_elementwise("relu", a, ops::relu(value(a)),
                           [](const Tape& t, const Tensor& up, std::size_t in_id, std::size_t) {
                             const Tensor& x = t.nodes_[in_id].value;
                             Tensor g(up.shape());
                             for (std::size_t i = 0, n = g.size(); i < n; ++i) {
                               g[i] = x[i] > 0.0 ? up[i] : 0.0;
                             }
                             return g;
                           });
}

Var Tape::silu(Var a) {
  check_mine("silu", a);
  return unary_elementwise("silu", a, ops::silu(value(a)),
                           [](const Tape& t, const Tensor& up, std::size_t in_id, std::size_t) {
                             const Tensor& x = t.nodes_[in_id].value;
                             Tensor g(up.shape());
                             for (std::size_t i = 0, n = g.size(); i < n; ++i) {
                               const double s = ops::sigmoid_scalar(x[i]);
                               g[i] = up[i] * s * (1.0 + x[i] * (1.0 - s));
                             }
                             return g;
                           });
}

Var Tape::lecun_tanh(Var a) {
  check_mine("lecun_tanh", a);
  return unary_elementwise(
      "lecun_tanh", a, ops::lecun_tanh(value(a)),
      [](const Tape& t, const Tensor& up, std::size_t in_id, std::size_t) {
        const Tensor& x = t.nodes_[in_id].value;
        Tensor g(up.shape());
        for (std::size_t i = 0, n = g.size(); i < n; ++i) {
          const double th = std::tanh(x[i] * (2.0 / 3.0));
          g[i] = up[i] * 1.7159 * (2.0 / 3.0) * (1.0 - th * th);
        }
        return g;
      });
}

Var Tape::dropout(Var a, double rate, std::mt19937_64& rng) {
  check_mine("dropout", a);
  Tensor mask;
  Tensor out = ops::dropout(value(a), rate, rng, &mask);
  const bool ga = needs_grad(a);
  auto pull = [ia = a.id, mask = std::move(mask)](const Tape&, const Tensor& up,
                                                  std::vector<Tensor>& adj) {
    accumulate_adj(adj, ia, ops::mul(up, mask));
  };
  return emit("dropout", std::move(out), ga, pull);
}

Var Tape::sum(Var a) {
  check_mine("sum", a);
  Tensor out = ops::sum(value(a));
  const bool ga = needs_grad(a);
  auto pull = [ia = a.id](const Tape& t, const Tensor& up, std::vector<Tensor>& adj) {
    accumulate_adj(adj, ia, Tensor::full(t.nodes_[ia].value.shape(), up[0]));
  };
  return emit("sum", std::move(out), ga, pull);
}

Var Tape::mean(Var a) {
  check_mine("mean", a);
  Tensor out = ops::mean(value(a));
  const bool ga = needs_grad(a);
  auto pull = [ia = a.id](const Tape& t, const Tensor& up, std::vector<Tensor>& adj) {
    const double n = static_cast<double>(t.nodes_[ia].value.size());
    accumulate_adj(adj, ia, Tensor::full(t.nodes_[ia].value.shape(), up[0] / n));
  };
  return emit("mean", std::move(out), ga, pull);
}

Var Tape::bce_with_logits(Var logits, Var targets) {
  check_mine("bce_with_logits", logits);
  check_mine("bce_with_logits", targets);
  Tensor out = ops::bce_with_logits(value(logits), value(targets));
  const bool gl = needs_grad(logits), gt = needs_grad(targets);
  auto pull = [il = logits.id, it = targets.id, gl, gt](const Tape& t, const Tensor& up,
                                                        std::vector<Tensor>& adj) {
    const Tensor& z = t.nodes_[il].value;
    const Tensor& y = t.nodes_[it].value;
    const double scale = up[0] / static_cast<double>(z.size());
    if (gl) {
      Tensor g(z.shape());
      for (std::size_t i = 0, n = g.size(); i < n; ++i) {
        g[i] = scale * (ops::sigmoid_scalar(z[i]) - y[i]);
      }
      accumulate_adj(adj, il, g);
    }
    if (gt) {
      Tensor g(y.shape());
      for (std::size_t i = 0, n = g.size(); i < n; ++i) g[i] = scale * (-z[i]);
      accumulate_adj(adj, it, g);
    }
  };
  return emit("bce_with_logits", std::move(out), gl || gt, pull);
}

GradientMap Tape::backward(Var loss) const {
  if (loss.tape != this) {
    throw std::invalid_argument("backward: loss recorded on a different tape");
  }
  const Tensor& lv = nodes_[loss.id].value;
  if (!lv.is_scalar()) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + lv.shape_str());
  }

  std::vector<Tensor> adj(nodes_.size());
  adj[loss.id] = Tensor::full(lv.shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (node.pull && !adj[i].empty()) node.pull(*this, adj[i], adj);
  }

  GradientMap gm;
  gm.param_ids_ = param_ids_;
  gm.grads_.reserve(param_ids_.size());
  for (std::size_t pid : param_ids_) {
    if (pid <= loss.id && !adj[pid].empty()) {
      gm.grads_.push_back(std::move(adj[pid]));
    } else {
      gm.grads_.push_back(Tensor(nodes_[pid].value.shape()));
    }
  }
  return gm;
}

}  // namespace ad
