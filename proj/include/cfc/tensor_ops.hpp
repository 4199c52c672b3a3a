// Forward kernels shared by the autodiff tape and the solver-free inference path.
//
// Binary elementwise ops broadcast over a leading batch dimension only:
// shapes must be identical, or one operand's shape must equal the other's
// shape with the first axis removed (that operand is repeated across the
// batch). Anything else is a shape error.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cfc/tensor.hpp"

namespace cfc::ops {

// Which operand, if any, is repeated across the other's leading axis.
enum class Broadcast : std::uint8_t { none, lhs, rhs };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b

Tensor concat(std::span<const Tensor* const> parts, std::size_t axis);
Tensor slice(const Tensor& t, std::size_t axis, std::size_t start, std::size_t len);

Tensor neg(const Tensor& t);
Tensor exp(const Tensor& t);
Tensor sigmoid(const Tensor& t);
Tensor tanh(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor silu(const Tensor& t);
Tensor lecun_tanh(const Tensor& t);

// Inverted dropout; writes the applied keep/scale mask for reuse in backward.
Tensor dropout(const Tensor& t, double rate, std::mt19937_64& rng, Tensor* mask_out);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);

// Numerically stable mean of max(z,0) - z*y + log(1 + exp(-|z|)).
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

double sigmoid_scalar(double x);

// Fold a gradient of `full` shape back onto a leading-broadcast operand.
Tensor reduce_leading(const Tensor& grad, const std::vector<std::size_t>& operand_shape);

// Shared elementwise accumulate: dst += src (shapes must match).
void accumulate(Tensor& dst, const Tensor& src);

}  // namespace cfc::ops
