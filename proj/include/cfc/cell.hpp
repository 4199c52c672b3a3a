// The trainable cell family built from the closed-form neuron solution:
//   cf-s       exponential-decay cell, the solution neuralized directly
//   cfc        sigmoidal time-gated interpolation between two heads
//   cfc-nogate cfc without the complementary gate on the second head
//   cfc-mmrnn  cfc output path wrapped around an LSTM memory cell
// All variants share the backbone-plus-heads layout and the time policy.
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cfc/autodiff.hpp"
#include "cfc/series.hpp"
#include "cfc/tensor.hpp"

namespace cfc::model {

enum class Activation { silu, relu, tanh, lecun_tanh };
enum class Variant { cf_s, cfc, cfc_nogate, cfc_mmrnn };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct BackboneConfig {
  std::size_t units = 64;
  std::size_t layers = 1;
  Activation activation = Activation::silu;
  double dropout = 0.0;

  void validate() const;
};

// How the per-step time value is chosen when unrolling a sequence:
// timestamped feeds the gap between consecutive samples, equidistant feeds
// values evenly spaced in [a, b] across the padded batch length.
struct TimePolicy {
  enum class Mode { timestamped, equidistant };
  Mode mode = Mode::timestamped;
  double a = 1.0;
  double b = 1.0;
};

struct CfcModel {
  Variant variant = Variant::cfc;
  std::size_t input_dim = 0;   // m
  std::size_t hidden_dim = 0;  // D
  BackboneConfig backbone;
  TimePolicy time_policy;
  bool nogate_gate_only = false;  // cfc-nogate: drop the additive h head entirely
  double forget_bias = 1.0;       // initial LSTM forget-gate bias (cfc-mmrnn)
  std::map<std::string, Tensor> tensors;

  const Tensor& tensor(const std::string& name) const;
  Tensor& tensor(const std::string& name);
  // Canonical parameter order used for tape binding, optimizers and I/O.
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  void validate() const;
};

CfcModel make_model(Variant variant, std::size_t input_dim, std::size_t hidden_dim,
                    BackboneConfig backbone = {}, TimePolicy policy = {}, std::uint64_t seed = 0,
                    double forget_bias = 1.0);

// x is the hidden state; c is the LSTM cell state (cfc-mmrnn only, otherwise
// left empty). Initial states are zeros.
struct CellState {
  Tensor x;
  Tensor c;
};

CellState initial_state(const CfcModel& m, std::size_t batch);

// Single-step inference (no tape). Accepts rank-1 vectors ([D], [m]) or
// batched rank-2 tensors; the result rank follows the state input. t is the
// per-step time value and must be >= 0.
Tensor cfs_step(const CfcModel& m, const Tensor& x_prev, const Tensor& input, double t);
Tensor cfc_step(const CfcModel& m, const Tensor& x_prev, const Tensor& input, double t);
CellState mmrnn_step(const CfcModel& m, const CellState& prev, const Tensor& input, double t);
CellState step(const CfcModel& m, const CellState& prev, const Tensor& input, double t);

struct UnrollResult {
  Tensor logits;       // [B] final-step readout
  Tensor final_state;  // [B, D]
  std::vector<Tensor> states;  // per-step [B, D], filled when collect_states
};

UnrollResult unroll(const CfcModel& m, std::span<const IrregularSeries* const> batch,
                    bool collect_states = false);
UnrollResult unroll(const CfcModel& m, const IrregularSeries& series, bool collect_states = false);

// Training-path unroll recorded on a tape (backpropagation through time).
// Parameters are registered in parameter_names() order.
struct TapedUnroll {
  ad::Var logits;   // [B, 1]
  ad::Var targets;  // [B, 1] constant labels
  std::vector<ad::Var> params;
};

TapedUnroll unroll_on_tape(ad::Tape& tape, const CfcModel& m,
                           std::span<const IrregularSeries* const> batch, bool training = false,
                           std::mt19937_64* dropout_rng = nullptr);

}  // namespace cfc::model
