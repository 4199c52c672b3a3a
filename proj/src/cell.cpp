#include "cfc/cell.hpp"

#include <cmath>
#include <stdexcept>

#include "cfc/tensor_ops.hpp"

namespace cfc::model {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::silu: return "silu";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::lecun_tanh: return "lecun-tanh";
  }
  fail("unknown activation");
}

Activation activation_from_string(const std::string& s) {
  if (s == "silu") return Activation::silu;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "lecun-tanh") return Activation::lecun_tanh;
  fail("unknown activation '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::cf_s: return "cf-s";
    case Variant::cfc: return "cfc";
    case Variant::cfc_nogate: return "cfc-nogate";
    case Variant::cfc_mmrnn: return "cfc-mmrnn";
  }
  fail("unknown variant");
}

Variant variant_from_string(const std::string& s) {
  if (s == "cf-s") return Variant::cf_s;
  if (s == "cfc") return Variant::cfc;
  if (s == "cfc-nogate") return Variant::cfc_nogate;
  if (s == "cfc-mmrnn") return Variant::cfc_mmrnn;
  fail("unknown variant '" + s + "'");
}

void BackboneConfig::validate() const {
  if (units == 0) fail("BackboneConfig: units must be > 0");
  if (layers == 0) fail("BackboneConfig: layers must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("BackboneConfig: dropout must be in [0, 1)");
}

const Tensor& CfcModel::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail("CfcModel: missing tensor '" + name + "'");
  return it->second;
}

Tensor& CfcModel::tensor(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail("CfcModel: missing tensor '" + name + "'");
  return it->second;
}

namespace {

// Per-variant parameter set with a single enumeration point so that the
// canonical order, tape binding and inference binding can never diverge.
template <class V>
struct BoundParams {
  std::vector<std::pair<V, V>> backbone;  // weight, bias per layer
  V head_f_w{}, head_f_b{}, head_g_w{}, head_g_b{}, head_h_w{}, head_h_b{};
  V cfs_W_Ix{}, cfs_W_xx{}, cfs_b_x{}, cfs_B{}, cfs_A{}, cfs_w_tau{};
  V lstm_w{}, lstm_b{};
  V readout_w{}, readout_b{};
};

template <class V, class Fetch>
BoundParams<V> bind_params(const CfcModel& m, Fetch&& fetch) {
  BoundParams<V> p;
  if (m.variant == Variant::cf_s) {
    p.cfs_W_Ix = fetch("cfs.W_Ix");
    p.cfs_W_xx = fetch("cfs.W_xx");
    p.cfs_b_x = fetch("cfs.b_x");
    p.cfs_B = fetch("cfs.B");
    p.cfs_A = fetch("cfs.A");
    p.cfs_w_tau = fetch("cfs.w_tau");
  } else {
    p.backbone.resize(m.backbone.layers);
    for (std::size_t i = 0; i < m.backbone.layers; ++i) {
      const std::string base = "backbone." + std::to_string(i);
      p.backbone[i].first = fetch(base + ".weight");
      p.backbone[i].second = fetch(base + ".bias");
    }
    p.head_f_w = fetch("head_f.weight");
    p.head_f_b = fetch("head_f.bias");
    p.head_g_w = fetch("head_g.weight");
    p.head_g_b = fetch("head_g.bias");
    p.head_h_w = fetch("head_h.weight");
    p.head_h_b = fetch("head_h.bias");
    if (m.variant == Variant::cfc_mmrnn) {
      p.lstm_w = fetch("lstm.weight");
      p.lstm_b = fetch("lstm.bias");
    }
  }
  p.readout_w = fetch("readout.weight");
  p.readout_b = fetch("readout.bias");
  return p;
}

}  // namespace

std::vector<std::string> CfcModel::parameter_names() const {
  std::vector<std::string> names;
  bind_params<char>(*this, [&names](const std::string& name) {
    names.push_back(name);
    return char{};
  });
  return names;
}

std::size_t CfcModel::parameter_count() const {
  std::size_t n = 0;
  for (const std::string& name : parameter_names()) n += tensor(name).size();
  return n;
}

void CfcModel::validate() const {
  if (input_dim == 0 || hidden_dim == 0) fail("CfcModel: input_dim and hidden_dim must be > 0");
  backbone.validate();
  if (!(forget_bias == forget_bias)) fail("CfcModel: forget_bias must be finite");
  const std::size_t m = input_dim, D = hidden_dim, U = backbone.units;
  auto expect = [this](const std::string& name, std::vector<std::size_t> shape) {
    const Tensor& t = tensor(name);
    if (t.shape() != shape) {
      fail("CfcModel: tensor '" + name + "' has shape " + t.shape_str() + ", expected " +
           shape_to_string(shape));
    }
  };
  if (variant == Variant::cf_s) {
    expect("cfs.W_Ix", {m, D});
    expect("cfs.W_xx", {D, D});
    expect("cfs.b_x", {D});
    expect("cfs.B", {D});
    expect("cfs.A", {D});
    expect("cfs.w_tau", {D});
    for (std::size_t i = 0; i < D; ++i) {
      if (tensor("cfs.w_tau")[i] < 0.0) fail("CfcModel: cfs.w_tau entries must be >= 0");
    }
  } else {
    for (std::size_t i = 0; i < backbone.layers; ++i) {
      const std::string base = "backbone." + std::to_string(i);
      expect(base + ".weight", {i == 0 ? D + m : U, U});
      expect(base + ".bias", {U});
    }
    expect("head_f.weight", {U, D});
    expect("head_f.bias", {D});
    expect("head_g.weight", {U, D});
    expect("head_g.bias", {D});
    expect("head_h.weight", {U, D});
    expect("head_h.bias", {D});
    if (variant == Variant::cfc_mmrnn) {
      expect("lstm.weight", {m + D, 4 * D});
      expect("lstm.bias", {4 * D});
    }
  }
  expect("readout.weight", {D, 1});
  expect("readout.bias", {1});
}

namespace {

Tensor glorot(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> uni(-limit, limit);
  Tensor t({rows, cols});
  for (std::size_t i = 0, n = t.size(); i < n; ++i) t[i] = uni(rng);
  return t;
}

}  // namespace

CfcModel make_model(Variant variant, std::size_t input_dim, std::size_t hidden_dim,
                    BackboneConfig backbone, TimePolicy policy, std::uint64_t seed,
                    double forget_bias) {
  CfcModel m;
  m.variant = variant;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.backbone = backbone;
  m.time_policy = policy;
  m.forget_bias = forget_bias;
  backbone.validate();
  if (input_dim == 0 || hidden_dim == 0) fail("make_model: dims must be > 0");

  std::mt19937_64 rng(seed);
  const std::size_t mm = input_dim, D = hidden_dim, U = backbone.units;
  if (variant == Variant::cf_s) {
    m.tensors["cfs.W_Ix"] = glorot(rng, mm, D);
    m.tensors["cfs.W_xx"] = glorot(rng, D, D);
    m.tensors["cfs.b_x"] = Tensor({D});
    m.tensors["cfs.B"] = Tensor::full({D}, 1.0);
    m.tensors["cfs.A"] = Tensor({D});
    m.tensors["cfs.w_tau"] = Tensor({D});
  } else {
    for (std::size_t i = 0; i < backbone.layers; ++i) {
      const std::string base = "backbone." + std::to_string(i);
      m.tensors[base + ".weight"] = glorot(rng, i == 0 ? D + mm : U, U);
      m.tensors[base + ".bias"] = Tensor({U});
    }
    m.tensors["head_f.weight"] = glorot(rng, U, D);
    m.tensors["head_f.bias"] = Tensor({D});
    m.tensors["head_g.weight"] = glorot(rng, U, D);
    m.tensors["head_g.bias"] = Tensor({D});
    m.tensors["head_h.weight"] = glorot(rng, U, D);
    m.tensors["head_h.bias"] = Tensor({D});
    if (variant == Variant::cfc_mmrnn) {
      m.tensors["lstm.weight"] = glorot(rng, mm + D, 4 * D);
      Tensor bias({4 * D});
      for (std::size_t i = D; i < 2 * D; ++i) bias[i] = forget_bias;  // forget-gate slice
      m.tensors["lstm.bias"] = std::move(bias);
    }
  }
  m.tensors["readout.weight"] = glorot(rng, D, 1);
  m.tensors["readout.bias"] = Tensor({1});
  m.validate();
  return m;
}

namespace {

// ---- expression contexts -------------------------------------------------
// The cell math below is written once against a context; EvalCx computes on
// plain tensors (inference, benchmarking), TapeCx records on an autodiff
// tape (training). Both paths therefore share formula and operation order.

struct EvalCx {
  using V = Tensor;
  V constant(Tensor t) { return t; }
  V add(const V& a, const V& b) { return ops::add(a, b); }
  V sub(const V& a, const V& b) { return ops::sub(a, b); }
  V mul(const V& a, const V& b) { return ops::mul(a, b); }
  V matmul(const V& a, const V& b) { return ops::matmul(a, b); }
  V neg(const V& a) { return ops::neg(a); }
  V exp(const V& a) { return ops::exp(a); }
  V sigmoid(const V& a) { return ops::sigmoid(a); }
  V tanh(const V& a) { return ops::tanh(a); }
  V relu(const V& a) { return ops::relu(a); }
  V silu(const V& a) { return ops::silu(a); }
  V lecun_tanh(const V& a) { return ops::lecun_tanh(a); }
  V concat2(const V& a, const V& b) {
    const Tensor* parts[2] = {&a, &b};
    return ops::concat(parts, 1);
  }
  V slice(const V& a, std::size_t axis, std::size_t start, std::size_t len) {
    return ops::slice(a, axis, start, len);
  }
  V dropout(const V& a, double) { return a; }  // inference: no-op
};

struct TapeCx {
  using V = ad::Var;
  ad::Tape* tape = nullptr;
  std::mt19937_64* rng = nullptr;
  bool training = false;

  V constant(Tensor t) { return tape->constant(std::move(t)); }
  V add(V a, V b) { return tape->add(a, b); }
  V sub(V a, V b) { return tape->sub(a, b); }
  V mul(V a, V b) { return tape->mul(a, b); }
  V matmul(V a, V b) { return tape->matmul(a, b); }
  V neg(V a) { return tape->neg(a); }
  V exp(V a) { return tape->exp(a); }
  V sigmoid(V a) { return tape->sigmoid(a); }
  V tanh(V a) { return tape->tanh(a); }
  V relu(V a) { return tape->relu(a); }
  V silu(V a) { return tape->silu(a); }
  V lecun_tanh(V a) { return tape->lecun_tanh(a); }
  V concat2(V a, V b) {
    const ad::Var parts[2] = {a, b};
    return tape->concat(parts, 1);
  }
  V slice(V a, std::size_t axis, std::size_t start, std::size_t len) {
    return tape->slice(a, axis, start, len);
  }
  V dropout(V a, double rate) {
    if (!training || rate <= 0.0) return a;
    if (!rng) fail("unroll: training-mode dropout needs an RNG");
    return tape->dropout(a, rate, *rng);
  }
};

template <class Cx, class V = typename Cx::V>
V apply_activation(Cx& cx, Activation a, V v) {
  switch (a) {
    case Activation::silu: return cx.silu(v);
    case Activation::relu: return cx.relu(v);
    case Activation::tanh: return cx.tanh(v);
    case Activation::lecun_tanh: return cx.lecun_tanh(v);
  }
  fail("unknown activation");
}

template <class Cx, class V = typename Cx::V>
V apply_backbone(Cx& cx, const CfcModel& m, const BoundParams<V>& p, V z) {
  for (const auto& [w, b] : p.backbone) {
    z = apply_activation(cx, m.backbone.activation, cx.add(cx.matmul(z, w), b));
    z = cx.dropout(z, m.backbone.dropout);
  }
  return z;
}

enum class GateKind { full, nogate_add, nogate_only };

// x_t = sigmoid(-f*t) . g + [1 - sigmoid(-f*t)] . h, with the complement
// realized as sigmoid(+f*t). The nogate kinds drop the complement gate.
template <class Cx, class V = typename Cx::V>
V cfc_core(Cx& cx, const CfcModel& m, const BoundParams<V>& p, V x_prev, V input, V t_tiled,
           GateKind kind) {
  V z = apply_backbone(cx, m, p, cx.concat2(x_prev, input));
  V f_hat = cx.add(cx.matmul(z, p.head_f_w), p.head_f_b);            // linear head
  V g_hat = cx.tanh(cx.add(cx.matmul(z, p.head_g_w), p.head_g_b));
  V h_hat = cx.tanh(cx.add(cx.matmul(z, p.head_h_w), p.head_h_b));
  V ft = cx.mul(f_hat, t_tiled);
  V gated_g = cx.mul(cx.sigmoid(cx.neg(ft)), g_hat);
  switch (kind) {
    case GateKind::full: return cx.add(gated_g, cx.mul(cx.sigmoid(ft), h_hat));
    case GateKind::nogate_add: return cx.add(gated_g, h_hat);
    case GateKind::nogate_only: return gated_g;
  }
  fail("unknown gate kind");
}

// x_t = B . exp(-(w_tau + f(x, I)) * t) . f(-x, -I) + A with
// f(x, I) = sigmoid(W_Ix*I + W_xx*x + b_x); negating the inputs flips the
// linear part but keeps the bias.
template <class Cx, class V = typename Cx::V>
V cfs_core(Cx& cx, const BoundParams<V>& p, V x_prev, V input, V t_tiled) {
  V pre = cx.add(cx.matmul(input, p.cfs_W_Ix), cx.matmul(x_prev, p.cfs_W_xx));
  V f_pos = cx.sigmoid(cx.add(pre, p.cfs_b_x));
  V f_neg = cx.sigmoid(cx.sub(p.cfs_b_x, pre));
  V decay = cx.exp(cx.neg(cx.mul(cx.add(f_pos, p.cfs_w_tau), t_tiled)));
  return cx.add(cx.mul(cx.mul(decay, p.cfs_B), f_neg), p.cfs_A);
}

// LSTM memory update plus cfc output path driven by o . tanh(c).
template <class Cx, class V = typename Cx::V>
std::pair<V, V> mmrnn_core(Cx& cx, const CfcModel& m, const BoundParams<V>& p, V h_prev, V c_prev,
                           V input, V t_tiled) {
  const std::size_t D = m.hidden_dim;
  V gates = cx.add(cx.matmul(cx.concat2(input, h_prev), p.lstm_w), p.lstm_b);
  V gate_i = cx.sigmoid(cx.slice(gates, 1, 0, D));
  V gate_f = cx.sigmoid(cx.slice(gates, 1, D, D));
  V gate_o = cx.sigmoid(cx.slice(gates, 1, 2 * D, D));
  V cand = cx.tanh(cx.slice(gates, 1, 3 * D, D));
  V c = cx.add(cx.mul(gate_f, c_prev), cx.mul(gate_i, cand));
  V lstm_out = cx.mul(gate_o, cx.tanh(c));
  V h = cfc_core(cx, m, p, lstm_out, input, t_tiled, GateKind::full);
  return {h, c};
}

template <class Cx, class V = typename Cx::V>
std::pair<V, V> step_core(Cx& cx, const CfcModel& m, const BoundParams<V>& p, V x_prev, V c_prev,
                          V input, V t_tiled) {
  switch (m.variant) {
    case Variant::cf_s: return {cfs_core(cx, p, x_prev, input, t_tiled), c_prev};
    case Variant::cfc: return {cfc_core(cx, m, p, x_prev, input, t_tiled, GateKind::full), c_prev};
    case Variant::cfc_nogate:
      return {cfc_core(cx, m, p, x_prev, input, t_tiled,
                       m.nogate_gate_only ? GateKind::nogate_only : GateKind::nogate_add),
              c_prev};
    case Variant::cfc_mmrnn: return mmrnn_core(cx, m, p, x_prev, c_prev, input, t_tiled);
  }
  fail("unknown variant");
}

// ---- batched unrolling ---------------------------------------------------

struct Batch {
  std::size_t size = 0;   // B
  std::size_t steps = 0;  // padded T
  std::vector<Tensor> inputs;    // per step [B, m]
  std::vector<Tensor> times;     // per step [B, D], time value tiled over D
  std::vector<Tensor> mask;      // per step [B, D] (empty when nothing is masked)
  std::vector<Tensor> inv_mask;  // 1 - mask
  Tensor labels;                 // [B, 1]
};

Batch make_batch(const CfcModel& m, std::span<const IrregularSeries* const> series,
                 const TimePolicy& policy) {
  if (series.empty()) fail("unroll: empty batch");
  Batch batch;
  batch.size = series.size();
  const std::size_t B = batch.size, D = m.hidden_dim;
  std::size_t T = 0;
  for (const IrregularSeries* s : series) {
    s->validate();
    if (s->steps() > 0 && s->features() != m.input_dim) {
      fail("unroll: series has " + std::to_string(s->features()) + " features, model expects " +
           std::to_string(m.input_dim));
    }
    if (policy.mode == TimePolicy::Mode::timestamped && s->steps() > 0 &&
        s->timestamps.empty()) {
      fail("unroll: timestamped mode needs timestamps");
    }
    T = std::max(T, s->steps());
  }
  batch.steps = T;

  bool any_masked = false;
  for (const IrregularSeries* s : series) {
    if (s->steps() < T) any_masked = true;
    for (std::uint8_t v : s->mask) {
      if (!v) any_masked = true;
    }
  }

  std::vector<double> last_time(B, 0.0);
  for (std::size_t k = 0; k < T; ++k) {
    Tensor input({B, m.input_dim});
    Tensor tt({B, D});
    Tensor mk;
    if (any_masked) mk = Tensor({B, D});
    double equi_t = policy.a;
    if (policy.mode == TimePolicy::Mode::equidistant && T > 1) {
      equi_t = policy.a + (policy.b - policy.a) * static_cast<double>(k) /
                              static_cast<double>(T - 1);
    }
    for (std::size_t b = 0; b < B; ++b) {
      const IrregularSeries* s = series[b];
      const bool valid = k < s->steps() && s->mask[k];
      double tval = 0.0;
      if (valid) {
        for (std::size_t j = 0; j < m.input_dim; ++j) input.at(b, j) = s->values.at(k, j);
        if (policy.mode == TimePolicy::Mode::timestamped) {
          tval = s->timestamps[k] - last_time[b];
          last_time[b] = s->timestamps[k];
        } else {
          tval = equi_t;
        }
      }
      for (std::size_t j = 0; j < D; ++j) {
        tt.at(b, j) = tval;
        if (any_masked) mk.at(b, j) = valid ? 1.0 : 0.0;
      }
    }
    batch.inputs.push_back(std::move(input));
    batch.times.push_back(std::move(tt));
    if (any_masked) {
      Tensor inv(mk.shape());
      for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 - mk[i];
      batch.mask.push_back(std::move(mk));
      batch.inv_mask.push_back(std::move(inv));
    }
  }

  batch.labels = Tensor({B, 1});
  for (std::size_t b = 0; b < B; ++b) batch.labels.at(b, 0) = series[b]->label;
  return batch;
}

template <class Cx, class V = typename Cx::V>
struct Unrolled {
  V logits;
  V final_x;
  std::vector<V> states;
};

template <class Cx, class V = typename Cx::V>
Unrolled<Cx> unroll_core(Cx& cx, const CfcModel& m, const BoundParams<V>& p, const Batch& batch,
                         bool collect_states) {
  const std::size_t B = batch.size, D = m.hidden_dim;
  V x = cx.constant(Tensor({B, D}));
  V c{};
  if (m.variant == Variant::cfc_mmrnn) c = cx.constant(Tensor({B, D}));

  Unrolled<Cx> out;
  for (std::size_t k = 0; k < batch.steps; ++k) {
    V input = cx.constant(batch.inputs[k]);
    V t = cx.constant(batch.times[k]);
    auto [x_new, c_new] = step_core(cx, m, p, x, c, input, t);
    if (!batch.mask.empty()) {
      // masked steps keep the previous state
      V mk = cx.constant(batch.mask[k]);
      V inv = cx.constant(batch.inv_mask[k]);
      x = cx.add(cx.mul(mk, x_new), cx.mul(inv, x));
      if (m.variant == Variant::cfc_mmrnn) c = cx.add(cx.mul(mk, c_new), cx.mul(inv, c));
    } else {
      x = x_new;
      c = c_new;
    }
    if (collect_states) out.states.push_back(x);
  }
  out.logits = cx.add(cx.matmul(x, p.readout_w), p.readout_b);
  out.final_x = x;
  return out;
}

BoundParams<Tensor> bind_eval(const CfcModel& m) {
  return bind_params<Tensor>(m, [&m](const std::string& name) { return m.tensor(name); });
}

// ---- single-step helpers ----

Tensor as_row_matrix(const Tensor& t, const char* what, std::size_t cols) {
  if (t.rank() == 1 && t.dim(0) == cols) return Tensor({1, cols}, {t.data(), t.data() + cols});
  if (t.rank() == 2 && t.dim(1) == cols) return t;
  fail(std::string("step: ") + what + " has shape " + t.shape_str() + ", expected [" +
       std::to_string(cols) + "] or [batch," + std::to_string(cols) + "]");
}

Tensor match_rank(Tensor result, const Tensor& like) {
  if (like.rank() == 1) {
    return Tensor({result.dim(1)}, {result.data(), result.data() + result.size()});
  }
  return result;
}

void check_step_args(const CfcModel& m, double t) {
  m.validate();
  if (t < 0.0) fail("step: negative time value " + std::to_string(t));
}

}  // namespace

CellState initial_state(const CfcModel& m, std::size_t batch) {
  CellState s;
  s.x = Tensor({batch, m.hidden_dim});
  if (m.variant == Variant::cfc_mmrnn) s.c = Tensor({batch, m.hidden_dim});
  return s;
}

Tensor cfs_step(const CfcModel& m, const Tensor& x_prev, const Tensor& input, double t) {
  if (m.variant != Variant::cf_s) fail("cfs_step: model variant is " + to_string(m.variant));
  check_step_args(m, t);
  const Tensor x = as_row_matrix(x_prev, "state", m.hidden_dim);
  const Tensor in = as_row_matrix(input, "input", m.input_dim);
  EvalCx cx;
  BoundParams<Tensor> p = bind_eval(m);
  Tensor tt = Tensor::full({x.dim(0), m.hidden_dim}, t);
  return match_rank(cfs_core(cx, p, x, in, tt), x_prev);
}

Tensor cfc_step(const CfcModel& m, const Tensor& x_prev, const Tensor& input, double t) {
  if (m.variant != Variant::cfc && m.variant != Variant::cfc_nogate) {
    fail("cfc_step: model variant is " + to_string(m.variant));
  }
  check_step_args(m, t);
  const Tensor x = as_row_matrix(x_prev, "state", m.hidden_dim);
  const Tensor in = as_row_matrix(input, "input", m.input_dim);
  EvalCx cx;
  BoundParams<Tensor> p = bind_eval(m);
  Tensor tt = Tensor::full({x.dim(0), m.hidden_dim}, t);
  const GateKind kind = m.variant == Variant::cfc
                            ? GateKind::full
                            : (m.nogate_gate_only ? GateKind::nogate_only : GateKind::nogate_add);
  return match_rank(cfc_core(cx, m, p, x, in, tt, kind), x_prev);
}

CellState mmrnn_step(const CfcModel& m, const CellState& prev, const Tensor& input, double t) {
  if (m.variant != Variant::cfc_mmrnn) fail("mmrnn_step: model variant is " + to_string(m.variant));
  check_step_args(m, t);
  const Tensor h = as_row_matrix(prev.x, "state", m.hidden_dim);
  const Tensor c = as_row_matrix(prev.c, "cell state", m.hidden_dim);
  const Tensor in = as_row_matrix(input, "input", m.input_dim);
  EvalCx cx;
  BoundParams<Tensor> p = bind_eval(m);
  Tensor tt = Tensor::full({h.dim(0), m.hidden_dim}, t);
  auto [hn, cn] = mmrnn_core(cx, m, p, h, c, in, tt);
  return {match_rank(std::move(hn), prev.x), match_rank(std::move(cn), prev.c)};
}

CellState step(const CfcModel& m, const CellState& prev, const Tensor& input, double t) {
  switch (m.variant) {
    case Variant::cf_s: return {cfs_step(m, prev.x, input, t), {}};
    case Variant::cfc:
    case Variant::cfc_nogate: return {cfc_step(m, prev.x, input, t), {}};
    case Variant::cfc_mmrnn: return mmrnn_step(m, prev, input, t);
  }
  fail("unknown variant");
}

UnrollResult unroll(const CfcModel& m, std::span<const IrregularSeries* const> batch,
                    bool collect_states) {
  m.validate();
  const Batch data = make_batch(m, batch, m.time_policy);
  EvalCx cx;
  BoundParams<Tensor> p = bind_eval(m);
  Unrolled<EvalCx> rolled = unroll_core(cx, m, p, data, collect_states);

  UnrollResult out;
  out.final_state = std::move(rolled.final_x);
  out.states = std::move(rolled.states);
  out.logits = Tensor({data.size});
  for (std::size_t b = 0; b < data.size; ++b) out.logits[b] = rolled.logits.at(b, 0);
  return out;
}

UnrollResult unroll(const CfcModel& m, const IrregularSeries& series, bool collect_states) {
  const IrregularSeries* ptr = &series;
  return unroll(m, std::span<const IrregularSeries* const>(&ptr, 1), collect_states);
}

TapedUnroll unroll_on_tape(ad::Tape& tape, const CfcModel& m,
                           std::span<const IrregularSeries* const> batch, bool training,
                           std::mt19937_64* dropout_rng) {
  m.validate();
  const Batch data = make_batch(m, batch, m.time_policy);
  TapeCx cx{&tape, dropout_rng, training};

  TapedUnroll out;
  BoundParams<ad::Var> p = bind_params<ad::Var>(m, [&](const std::string& name) {
    ad::Var v = tape.param(m.tensor(name));
    out.params.push_back(v);
    return v;
  });
  Unrolled<TapeCx> rolled = unroll_core(cx, m, p, data, false);
  out.logits = rolled.logits;
  out.targets = tape.constant(data.labels);
  return out;
}

}  // namespace cfc::model
