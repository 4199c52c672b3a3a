#include "cfc/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cfc::compiler {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string edge_str(std::size_t i, std::size_t j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

void check_time_vector(std::span<const double> tv, std::size_t expected_len) {
  if (tv.size() != expected_len) {
    fail("evaluate: time vector length " + std::to_string(tv.size()) +
         " does not match input steps " + std::to_string(expected_len));
  }
  for (std::size_t k = 1; k < tv.size(); ++k) {
    if (!(tv[k] > tv[k - 1])) fail("evaluate: time vector must increase strictly");
  }
  if (!tv.empty() && tv[0] < 0.0) fail("evaluate: times must be non-negative");
}

double step_time(std::span<const double> tv, std::size_t k, TimeMode mode) {
  if (mode == TimeMode::elapsed) return tv[k] - tv[0];
  return k == 0 ? tv[0] : tv[k] - tv[k - 1];
}

}  // namespace

void LtcNetworkSpec::validate() const {
  const std::size_t total = nodes();
  if (n_hidden == 0) fail("LtcNetworkSpec: need at least one hidden neuron");
  if (adjacency.size() != total * total) {
    fail("LtcNetworkSpec: adjacency must be " + std::to_string(total) + "x" +
         std::to_string(total));
  }
  if (tau.size() != n_hidden) fail("LtcNetworkSpec: tau must have one entry per hidden neuron");
  if (x0.size() != n_hidden) fail("LtcNetworkSpec: x0 must have one entry per hidden neuron");
  for (std::size_t i = 0; i < n_hidden; ++i) {
    if (!(tau[i] > 0.0)) {
      fail("LtcNetworkSpec: tau[" + std::to_string(i) + "] must be > 0, got " +
           std::to_string(tau[i]));
    }
    if (!std::isfinite(x0[i])) fail("LtcNetworkSpec: non-finite x0[" + std::to_string(i) + "]");
  }
  for (std::size_t t = 0; t < n_inputs; ++t) {
    for (std::size_t s = 0; s < n_inputs; ++s) {
      if (edge(t, s)) fail("LtcNetworkSpec: input-to-input synapse " + edge_str(t, s));
    }
  }

  std::vector<std::uint8_t> covered(total * total, 0);
  for (const Synapse& syn : synapses) {
    if (syn.target >= total || syn.source >= total) {
      fail("LtcNetworkSpec: synapse " + edge_str(syn.target, syn.source) + " out of range");
    }
    if (!edge(syn.target, syn.source)) {
      fail("LtcNetworkSpec: synapse " + edge_str(syn.target, syn.source) +
           " has no adjacency entry");
    }
    if (covered[syn.target * total + syn.source]) {
      fail("LtcNetworkSpec: duplicate synapse " + edge_str(syn.target, syn.source));
    }
    covered[syn.target * total + syn.source] = 1;
    if (!(syn.sigma > 0.0)) {
      fail("LtcNetworkSpec: synapse " + edge_str(syn.target, syn.source) +
           " needs sigma > 0, got " + std::to_string(syn.sigma));
    }
    if (!std::isfinite(syn.mu) || !std::isfinite(syn.a_bias)) {
      fail("LtcNetworkSpec: synapse " + edge_str(syn.target, syn.source) +
           " has non-finite parameters");
    }
  }
  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t s = 0; s < total; ++s) {
      if (edge(t, s) && !covered[t * total + s]) {
        fail("LtcNetworkSpec: dangling synapse " + edge_str(t, s) +
             ": adjacency set but parameters missing");
      }
    }
  }
}

ClosedFormNetwork compile(const LtcNetworkSpec& spec) {
  spec.validate();
  ClosedFormNetwork net;
  net.spec = spec;
  net.synapses_of.assign(spec.n_hidden, {});
  // deterministic evaluation order: ascending source per target neuron
  std::vector<std::size_t> order(spec.synapses.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Synapse& sa = spec.synapses[a];
    const Synapse& sb = spec.synapses[b];
    return sa.target != sb.target ? sa.target < sb.target : sa.source < sb.source;
  });
  for (std::size_t idx : order) {
    const Synapse& syn = spec.synapses[idx];
    if (syn.target >= spec.n_inputs) {
      net.synapses_of[syn.target - spec.n_inputs].push_back(idx);
    }
  }
  return net;
}

Tensor evaluate(const ClosedFormNetwork& net, const IrregularSeries& inputs,
                std::span<const double> time_vector, TimeMode mode) {
  const LtcNetworkSpec& spec = net.spec;
  const std::size_t T = time_vector.size();
  check_time_vector(time_vector, inputs.steps());
  if (inputs.features() != spec.n_inputs) {
    fail("evaluate: input series has " + std::to_string(inputs.features()) +
         " channels, network expects " + std::to_string(spec.n_inputs));
  }

  Tensor out({spec.n_hidden, T});
  std::vector<double> prev(spec.x0);  // recurrent reads lag one step
  std::vector<double> cur(spec.n_hidden);

  for (std::size_t k = 0; k < T; ++k) {
    const double t = step_time(time_vector, k, mode);
    for (std::size_t i = 0; i < spec.n_hidden; ++i) {
      const double w = 1.0 / spec.tau[i];
      double acc = 0.0;
      for (std::size_t idx : net.synapses_of[i]) {
        const Synapse& syn = spec.synapses[idx];
        const double x_pre = syn.source < spec.n_inputs
                                 ? inputs.values.at(k, syn.source)
                                 : prev[syn.source - spec.n_inputs];
        const ltc::SigmoidGate gate{syn.sigma, syn.mu};
        acc += (spec.x0[i] - syn.a_bias) * std::exp(-t * (w + gate(x_pre))) *
                   gate.reversed(x_pre) +
               syn.a_bias;
      }
      cur[i] = acc;
      out.at(i, k) = acc;
    }
    prev = cur;
  }
  return out;
}

Tensor simulate_ode(const LtcNetworkSpec& spec, const IrregularSeries& inputs,
                    const ltc::SolverConfig& solver_cfg, ltc::OdeForm form) {
  spec.validate();
  const std::size_t T = inputs.steps();
  std::span<const double> tv(inputs.timestamps);
  check_time_vector(tv, T);
  if (inputs.features() != spec.n_inputs) {
    fail("simulate_ode: input series has " + std::to_string(inputs.features()) +
         " channels, network expects " + std::to_string(spec.n_inputs));
  }

  // group synapses per target once
  std::vector<std::vector<const Synapse*>> by_target(spec.n_hidden);
  for (const Synapse& syn : spec.synapses) {
    if (syn.target >= spec.n_inputs) by_target[syn.target - spec.n_inputs].push_back(&syn);
  }

  auto input_at = [&](double t, std::size_t channel) {
    // piecewise-constant hold of the sampled inputs
    auto it = std::upper_bound(tv.begin(), tv.end(), t);
    const std::size_t k = it == tv.begin() ? 0 : static_cast<std::size_t>(it - tv.begin()) - 1;
    return inputs.values.at(k, channel);
  };

  ltc::Rhs rhs = [&](double t, const std::vector<double>& x, std::vector<double>& dx) {
    for (std::size_t i = 0; i < spec.n_hidden; ++i) {
      const double w = 1.0 / spec.tau[i];
      double d = 0.0;
      for (const Synapse* syn : by_target[i]) {
        const double x_pre = syn->source < spec.n_inputs
                                 ? input_at(t, syn->source)
                                 : x[syn->source - spec.n_inputs];
        const ltc::SigmoidGate gate{syn->sigma, syn->mu};
        const double f = gate(x_pre);
        const double rate = w + f;
        d += -rate * x[i] + (form == ltc::OdeForm::eq1 ? syn->a_bias * f : syn->a_bias * rate);
      }
      dx[i] = d;
      if (!std::isfinite(d)) {
        throw std::runtime_error("simulate_ode: non-finite derivative at t=" + std::to_string(t));
      }
    }
  };

  const double t_end = tv.back();
  Tensor out({spec.n_hidden, T});
  if (t_end <= 0.0) {  // single sample at t=0: the trajectory is the initial state
    for (std::size_t i = 0; i < spec.n_hidden; ++i) out.at(i, 0) = spec.x0[i];
    return out;
  }
  ltc::Trajectory traj = ltc::integrate(rhs, spec.x0, tv, t_end, solver_cfg);

  for (std::size_t k = 0; k < T; ++k) {
    const std::size_t row = traj.index_of_time(tv[k]);
    for (std::size_t i = 0; i < spec.n_hidden; ++i) out.at(i, k) = traj.at(row, i);
  }
  return out;
}

FidelityReport verify_fidelity(const LtcNetworkSpec& spec, const IrregularSeries& inputs,
                               const ltc::SolverConfig& solver_cfg, ltc::OdeForm form,
                               TimeMode mode) {
  const Tensor ode = simulate_ode(spec, inputs, solver_cfg, form);
  const Tensor comp = evaluate(compile(spec), inputs, inputs.timestamps, mode);

  const std::size_t T = inputs.steps();
  FidelityReport report;
  report.per_neuron_mse.resize(spec.n_hidden, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < spec.n_hidden; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < T; ++k) {
      const double d = ode.at(i, k) - comp.at(i, k);
      acc += d * d;
    }
    report.per_neuron_mse[i] = acc / static_cast<double>(T);
    total += acc;
  }
  report.aggregate = total / static_cast<double>(T * spec.n_hidden);
  return report;
}

}  // namespace cfc::compiler
