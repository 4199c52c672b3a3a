// Reverse-mode automatic differentiation over a single-threaded tape.
//
// A Tape records every operation in issue order; backward() replays the
// record once in reverse, so recording order is the reverse-traversal order.
// Leaves are either constants (no gradient tracked) or parameters. Every op
// validates shapes and rejects non-finite results.
#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cfc/tensor.hpp"

namespace cfc::ad {

class Tape;

// Lightweight handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  bool valid() const { return tape != nullptr; }
  const Tensor& value() const;
};

// Gradients for every parameter registered on the tape, in registration
// order. Parameters the loss never touched get zero tensors.
class GradientMap {
 public:
  std::size_t size() const { return grads_.size(); }
  const Tensor& at(const Var& param) const;
  const Tensor& at_index(std::size_t i) const { return grads_[i]; }
  Tensor& at_index(std::size_t i) { return grads_[i]; }

  double global_norm() const;
  void scale(double factor);

 private:
  friend class Tape;
  std::vector<std::size_t> param_ids_;
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor v);
  Var param(Tensor v);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var matmul(Var a, Var b);
  Var concat(std::span<const Var> parts, std::size_t axis);
  Var slice(Var a, std::size_t axis, std::size_t start, std::size_t len);
  Var neg(Var a);
  Var exp(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var silu(Var a);
  Var lecun_tanh(Var a);
  Var dropout(Var a, double rate, std::mt19937_64& rng);
  Var sum(Var a);
  Var mean(Var a);
  Var bce_with_logits(Var logits, Var targets);

  // d(loss)/d(p) for every registered parameter p; loss must be a scalar
  // recorded on this tape.
  GradientMap backward(Var loss) const;

  const Tensor& value(Var v) const;
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_params() const { return param_ids_.size(); }

 private:
  using PullFn = std::function<void(const Tape&, const Tensor& upstream, std::vector<Tensor>& adj)>;

  struct Node {
    Tensor value;
    bool requires_grad = false;
    PullFn pull;  // empty for leaves and grad-free subgraphs
  };

  Var emit(const char* op, Tensor value, bool requires_grad, PullFn pull);
  void check_mine(const char* op, Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id].requires_grad; }
  static void accumulate_adj(std::vector<Tensor>& adj, std::size_t id, const Tensor& g);

  Var unary_elementwise(const char* op, Var a, Tensor out,
                        std::function<Tensor(const Tape&, const Tensor&, std::size_t in_id,
                                             std::size_t out_id)> grad_fn);

  std::vector<Node> nodes_;
  std::vector<std::size_t> param_ids_;
};

}  // namespace cfc::ad
