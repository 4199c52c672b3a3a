// Translate a trained liquid time-constant network into a solver-free
// closed-form network, evaluate it, and verify fidelity against the ODE
// simulation of the same network.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cfc/ltc.hpp"
#include "cfc/series.hpp"
#include "cfc/tensor.hpp"

namespace cfc::compiler {

// One synapse from source node j to target hidden neuron i. Node indices run
// over inputs first (0..N-1), then hidden neurons (N..N+H-1).
struct Synapse {
  std::size_t target = 0;  // i
  std::size_t source = 0;  // j
  double sigma = 1.0;
  double mu = 0.0;
  double a_bias = 0.0;
};

struct LtcNetworkSpec {
  std::size_t n_inputs = 0;
  std::size_t n_hidden = 0;
  std::vector<std::uint8_t> adjacency;  // (N+H)^2 row-major, [target * (N+H) + source]
  std::vector<Synapse> synapses;        // defined exactly where adjacency is 1
  std::vector<double> tau;              // per hidden neuron, > 0
  std::vector<double> x0;               // per hidden neuron

  std::size_t nodes() const { return n_inputs + n_hidden; }
  bool edge(std::size_t target, std::size_t source) const {
    return adjacency[target * nodes() + source] != 0;
  }

  void validate() const;
};

// How the time vector enters the compiled exponent: elapsed time since the
// sequence start (default), or the gap to the previous sample.
enum class TimeMode { elapsed, delta };

// The compiled network keeps the source parameters bit-identical and adds
// evaluation-order metadata (synapses grouped per target neuron).
struct ClosedFormNetwork {
  LtcNetworkSpec spec;
  std::vector<std::vector<std::size_t>> synapses_of;  // per hidden neuron, into spec.synapses
  bool compiled = true;
};

ClosedFormNetwork compile(const LtcNetworkSpec& spec);

// Per-timestep closed-form evaluation. Input values are read at each step;
// hidden-to-hidden synapses read the previous step's compiled state (the
// source neuron's initial state at step 0). Returns hidden states [H, T].
Tensor evaluate(const ClosedFormNetwork& net, const IrregularSeries& inputs,
                std::span<const double> time_vector, TimeMode mode = TimeMode::elapsed);

struct FidelityReport {
  std::vector<double> per_neuron_mse;
  double aggregate = 0.0;
};

// Simulate the multi-neuron ODE (summing per-synapse terms) with the given
// solver, evaluate the compiled network on the identical inputs and times,
// and report the mean squared error per hidden neuron.
FidelityReport verify_fidelity(const LtcNetworkSpec& spec, const IrregularSeries& inputs,
                               const ltc::SolverConfig& solver_cfg,
                               ltc::OdeForm form = ltc::OdeForm::symmetric,
                               TimeMode mode = TimeMode::elapsed);

// The ODE trajectory half of verify_fidelity, exposed for simulation dumps:
// states of all hidden neurons sampled at the input timestamps.
Tensor simulate_ode(const LtcNetworkSpec& spec, const IrregularSeries& inputs,
                    const ltc::SolverConfig& solver_cfg,
                    ltc::OdeForm form = ltc::OdeForm::symmetric);

}  // namespace cfc::compiler
