// Liquid time-constant neuron dynamics: the governing ODE, fixed- and
// adaptive-step solvers, and the exact analytical solution for
// piecewise-constant inputs.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cfc::ltc {

// Two RHS parametrizations for a single neuron:
//   eq1:        dx/dt = -(w_tau + f(I)) * x + A * f(I)
//   symmetric:  dx/dt = -(w_tau + f(I)) * x + A * (w_tau + f(I))
// The exact piecewise solution below integrates the symmetric form, so
// oracle comparisons default to it.
enum class OdeForm { eq1, symmetric };

// Bounded monotone nonlinearity f(v) = 1 / (1 + exp(-slope * (v - offset))),
// mapping R -> (0, 1). slope must be positive.
struct SigmoidGate {
  double slope = 1.0;
  double offset = 0.0;

  double operator()(double v) const;
  // The same gate with negated pre-activation: 1 / (1 + exp(slope*(v-offset))).
  // Identical to 1 - (*this)(v).
  double reversed(double v) const;
  // Lipschitz constant of the gate: slope / 4.
  double lipschitz() const { return slope / 4.0; }

  void validate() const;
};

struct LtcScalarParams {
  double x0 = 0.0;     // initial state
  double a_bias = 0.0; // bias / target value A
  double w_tau = 0.0;  // time constant, >= 0
  SigmoidGate gate;

  void validate() const;
};

// I(t) = level[i] for t in [breakpoint[i], breakpoint[i+1]); the final level
// extends to infinity. breakpoints start at 0 and increase strictly.
class PiecewiseConstantSignal {
 public:
  PiecewiseConstantSignal(std::vector<double> breakpoints, std::vector<double> levels);

  double operator()(double t) const { return levels_[segment_index(t)]; }
  std::size_t segment_index(double t) const;

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& levels() const { return levels_; }
  std::size_t segments() const { return levels_.size(); }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> levels_;
};

struct SolverConfig {
  enum class Method { euler, rk4, dopri };

  Method method = Method::rk4;
  double step = 1e-3;        // fixed-step methods
  double rtol = 1e-6;        // adaptive
  double atol = 1e-9;        // adaptive
  long max_steps = 10000000; // safety cap

  void validate() const;
};

struct Trajectory {
  std::vector<double> times;       // strictly increasing, includes t=0 and t_end
  std::vector<double> states;      // row-major [times.size()][dim]
  std::size_t dim = 1;

  double at(std::size_t step, std::size_t d = 0) const { return states[step * dim + d]; }
  std::size_t steps() const { return times.size(); }
  // Index of an exactly recorded time (solver landings are exact).
  std::size_t index_of_time(double t) const;
};

// dx/dt for one neuron, Eq-form selectable. Throws on non-finite output.
double ltc_rhs_scalar(double x, double input, const LtcScalarParams& params,
                      OdeForm form = OdeForm::eq1);

// Elementwise over hidden units: unit i uses params[i] and input[i].
std::vector<double> ltc_rhs(std::span<const double> x, std::span<const double> input,
                            std::span<const LtcScalarParams> params, OdeForm form = OdeForm::eq1);

// Integrate the scalar neuron driven by a piecewise-constant signal over
// [0, t_end]. Integration restarts at each signal breakpoint so the input
// discontinuities are handled exactly; the trajectory therefore contains
// every breakpoint <= t_end in addition to the solver's own steps.
Trajectory solve_ivp(const LtcScalarParams& params, const PiecewiseConstantSignal& signal,
                     double t_end, const SolverConfig& cfg, OdeForm form = OdeForm::symmetric);

// Exact solution of the symmetric-form ODE for piecewise-constant input:
//   x(t) = (x0 - A) * exp(-w_tau*t) * exp(-f(g_k)(t - tau_k)
//          - sum_{i<k} f(g_i)(tau_{i+1} - tau_i)) + A
// with k the segment containing t.
double exact_piecewise(const LtcScalarParams& params, const PiecewiseConstantSignal& signal,
                       double t);

// General-purpose integrator used by the scalar wrapper and the network
// fidelity checks. `restarts` lists interior times where integration must
// stop and restart (input discontinuities); they are landed on exactly.
using Rhs = std::function<void(double t, const std::vector<double>& x, std::vector<double>& dxdt)>;
Trajectory integrate(const Rhs& rhs, std::vector<double> x0, std::span<const double> restarts,
                     double t_end, const SolverConfig& cfg);

}  // namespace cfc::ltc
