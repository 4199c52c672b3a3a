// Approximate closed-form solution for a single liquid time-constant neuron,
// its error bound, and the two worst-case constructions that show the bound
// is attained in the limit.
#pragma once

#include "cfc/ltc.hpp"

namespace cfc::ltc {

// x~(t) = (x0 - A) * exp(-(w_tau + f(I_t)) * t) * f_rev(I_t) + A, where f_rev
// is the gate with negated pre-activation. Depends on the input only through
// its instantaneous value I_t = I(t).
double closed_form_scalar(const LtcScalarParams& params, double input_at_t, double t);

// |x(t) - x~(t)| <= |x0 - A| * exp(-w_tau * t) for every input signal.
double error_bound(const LtcScalarParams& params, double t);

// Two-segment probe signal: I(s) = -C on [0, t-delta], +C on (t-delta, t].
// C must saturate the gate (f(-C) <= 0.01 and f(C) >= 0.99) so the achieved
// error approaches the bound's extremes.
struct SharpnessProbe {
  double C = 50.0;
  double delta = 1e-3;
  double t = 1.0;
  LtcScalarParams params;

  void validate() const;
};

// Normalized error (x(t) - x~(t)) / ((x0 - A) * exp(-w_tau * t)) under the
// probe signal; approaches 1 as C grows and delta shrinks.
double sharpness_sup(const SharpnessProbe& probe);

// Same ratio under the negated probe signal; approaches exp(-t) - 1 from
// above and never goes below it.
double sharpness_inf(const SharpnessProbe& probe);

}  // namespace cfc::ltc
