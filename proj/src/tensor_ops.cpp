#include "cfc/tensor_ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace cfc::ops {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() +
                              " vs " + b.shape_str());
}

bool is_leading_ext(const std::vector<std::size_t>& big, const std::vector<std::size_t>& small) {
  if (big.size() != small.size() + 1) return false;
  for (std::size_t i = 0; i < small.size(); ++i) {
    if (big[i + 1] != small[i]) return false;
  }
  return true;
}

template <class F>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f) {
  const Broadcast bc = broadcast_kind(op, a, b);
  if (bc == Broadcast::none) {
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0, n = a.size(); i < n; ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  const Tensor& big = (bc == Broadcast::rhs) ? a : b;
  const Tensor& rep = (bc == Broadcast::rhs) ? b : a;
  Tensor out(big.shape());
  const std::size_t inner = rep.size();
  const std::size_t batch = big.size() / inner;
  const double* pb = big.data();
  const double* pr = rep.data();
  double* po = out.data();
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = pb + i * inner;
    double* orow = po + i * inner;
    if (bc == Broadcast::rhs) {
      for (std::size_t j = 0; j < inner; ++j) orow[j] = f(row[j], pr[j]);
    } else {
      for (std::size_t j = 0; j < inner; ++j) orow[j] = f(pr[j], row[j]);
    }
  }
  return out;
}

template <class F>
Tensor map(const Tensor& t, F f) {
  Tensor out(t.shape());
  const double* p = t.data();
  double* o = out.data();
  for (std::size_t i = 0, n = t.size(); i < n; ++i) o[i] = f(p[i]);
  return out;
}

// byte stride of one index step along `axis`, and the count of outer blocks
void axis_geometry(const std::vector<std::size_t>& shape, std::size_t axis, std::size_t& outer,
                   std::size_t& inner) {
  outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  inner = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

}  // namespace

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Broadcast::none;
  if (is_leading_ext(a.shape(), b.shape())) return Broadcast::rhs;
  if (is_leading_ext(b.shape(), a.shape())) return Broadcast::lhs;
  shape_error(op, a, b);
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul: expects rank-2 operands, got " + a.shape_str() + " and " +
                                b.shape_str());
  }
  if (a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: inner dimensions differ: " + a.shape_str() + " vs " +
                                b.shape_str());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = po + i * n;
    const double* arow = pa + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw std::invalid_argument("matmul_nt: incompatible shapes " + a.shape_str() + " vs " +
                                b.shape_str());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * k;
    double* orow = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      orow[j] = acc;
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw std::invalid_argument("matmul_tn: incompatible shapes " + a.shape_str() + " vs " +
                                b.shape_str());
  }
  const std::size_t m = a.dim(1), k = a.dim(0), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* arow = a.data() + kk * m;
    const double* brow = b.data() + kk * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor concat(std::span<const Tensor* const> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  const Tensor& first = *parts[0];
  if (axis >= first.rank()) {
    throw std::invalid_argument("concat: axis " + std::to_string(axis) + " out of range for " +
                                first.shape_str());
  }
  std::size_t total_axis = 0;
  for (const Tensor* p : parts) {
    if (p->rank() != first.rank()) shape_error("concat", first, *p);
    for (std::size_t i = 0; i < first.rank(); ++i) {
      if (i != axis && p->dim(i) != first.dim(i)) shape_error("concat", first, *p);
    }
    total_axis += p->dim(axis);
  }
  std::vector<std::size_t> out_shape = first.shape();
  out_shape[axis] = total_axis;
  Tensor out(std::move(out_shape));

  std::size_t outer, inner;
  axis_geometry(out.shape(), axis, outer, inner);
  const std::size_t out_row = total_axis * inner;
  std::size_t offset = 0;
  for (const Tensor* p : parts) {
    const std::size_t blk = p->dim(axis) * inner;
    const double* src = p->data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::memcpy(out.data() + o * out_row + offset, src + o * blk, blk * sizeof(double));
    }
    offset += blk;
  }
  return out;
}

Tensor slice(const Tensor& t, std::size_t axis, std::size_t start, std::size_t len) {
  if (axis >= t.rank()) {
    throw std::invalid_argument("slice: axis " + std::to_string(axis) + " out of range for " +
                                t.shape_str());
  }
  if (start + len > t.dim(axis)) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") exceeds axis extent " +
                                std::to_string(t.dim(axis)) + " of " + t.shape_str());
  }
  std::vector<std::size_t> out_shape = t.shape();
  out_shape[axis] = len;
  Tensor out(std::move(out_shape));
  std::size_t outer, inner;
  axis_geometry(t.shape(), axis, outer, inner);
  const std::size_t in_row = t.dim(axis) * inner;
  const std::size_t out_row = len * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::memcpy(out.data() + o * out_row, t.data() + o * in_row + start * inner,
                out_row * sizeof(double));
  }
  return out;
}

Tensor neg(const Tensor& t) {
  return map(t, [](double x) { return -x; });
}

Tensor exp(const Tensor& t) {
  return map(t, [](double x) { return std::exp(x); });
}

Tensor sigmoid(const Tensor& t) { return map(t, sigmoid_scalar); }

Tensor tanh(const Tensor& t) {
  return map(t, [](double x) { return std::tanh(x); });
}

Tensor relu(const Tensor& t) {
  return map(t, [](double x) { return x > 0.0 ? x : 0.0; });
}

Tensor silu(const Tensor& t) {
  return map(t, [](double x) { return x * sigmoid_scalar(x); });
}

Tensor lecun_tanh(const Tensor& t) {
  return map(t, [](double x) { return 1.7159 * std::tanh(x * (2.0 / 3.0)); });
}

Tensor dropout(const Tensor& t, double rate, std::mt19937_64& rng, Tensor* mask_out) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
  }
  Tensor mask(t.shape());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0, n = mask.size(); i < n; ++i) {
    mask[i] = uni(rng) < rate ? 0.0 : scale;
  }
  Tensor out = mul(t, mask);
  if (mask_out) *mask_out = std::move(mask);
  return out;
}

Tensor sum(const Tensor& t) {
  double acc = 0.0;
  for (std::size_t i = 0, n = t.size(); i < n; ++i) acc += t[i];
  return Tensor::scalar(acc);
}

Tensor mean(const Tensor& t) {
  if (t.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return Tensor::scalar(sum(t).scalar_value() / static_cast<double>(t.size()));
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (!logits.same_shape(targets)) shape_error("bce_with_logits", logits, targets);
  if (logits.size() == 0) throw std::invalid_argument("bce_with_logits: empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0, n = logits.size(); i < n; ++i) {
    const double z = logits[i];
    const double y = targets[i];
    acc += (z > 0.0 ? z : 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return Tensor::scalar(acc / static_cast<double>(logits.size()));
}

Tensor reduce_leading(const Tensor& grad, const std::vector<std::size_t>& operand_shape) {
  if (grad.shape() == operand_shape) return grad;
  Tensor out(operand_shape);
  const std::size_t inner = out.size();
  const std::size_t batch = grad.size() / inner;
  const double* pg = grad.data();
  double* po = out.data();
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = pg + i * inner;
    for (std::size_t j = 0; j < inner; ++j) po[j] += row[j];
  }
  return out;
}

void accumulate(Tensor& dst, const Tensor& src) {
  if (dst.size() == 0) {
    dst = src;
    return;
  }
  double* pd = dst.data();
  const double* ps = src.data();
  for (std::size_t i = 0, n = dst.size(); i < n; ++i) pd[i] += ps[i];
}

}  // namespace cfc::ops
