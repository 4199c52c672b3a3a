#include "cfc/closed_form.hpp"

#include <cmath>
#include <stdexcept>

namespace cfc::ltc {

double closed_form_scalar(const LtcScalarParams& params, double input_at_t, double t) {
  params.validate();
  if (t < 0.0) {
    throw std::invalid_argument("closed_form_scalar: t must be >= 0, got " + std::to_string(t));
  }
  if (!std::isfinite(input_at_t)) {
    throw std::invalid_argument("closed_form_scalar: non-finite input");
  }
  const double rate = params.w_tau + params.gate(input_at_t);
  return (params.x0 - params.a_bias) * std::exp(-rate * t) * params.gate.reversed(input_at_t) +
         params.a_bias;
}

double error_bound(const LtcScalarParams& params, double t) {
  params.validate();
  if (t < 0.0) {
    throw std::invalid_argument("error_bound: t must be >= 0, got " + std::to_string(t));
  }
  return std::abs(params.x0 - params.a_bias) * std::exp(-params.w_tau * t);
}

void SharpnessProbe::validate() const {
  params.validate();
  if (!(C > 0.0)) throw std::invalid_argument("SharpnessProbe: C must be > 0");
  if (!(delta > 0.0 && delta < t)) {
    throw std::invalid_argument("SharpnessProbe: need 0 < delta < t, got delta=" +
                                std::to_string(delta) + ", t=" + std::to_string(t));
  }
  if (params.gate(-C) > 0.01 || params.gate(C) < 0.99) {
    throw std::invalid_argument(
        "SharpnessProbe: C does not saturate the gate (need f(-C) <= 0.01 and f(C) >= 0.99)");
  }
}

namespace {

double normalized_error(const SharpnessProbe& probe, double first_level, double last_level) {
  probe.validate();
  const double c = probe.params.x0 - probe.params.a_bias;
  if (c == 0.0) {
    throw std::invalid_argument("sharpness: normalized error undefined for x0 == A");
  }
  PiecewiseConstantSignal signal({0.0, probe.t - probe.delta}, {first_level, last_level});
  const double exact = exact_piecewise(probe.params, signal, probe.t);
  const double approx = closed_form_scalar(probe.params, signal(probe.t), probe.t);
  return (exact - approx) / (c * std::exp(-probe.params.w_tau * probe.t));
}

}  // namespace

double sharpness_sup(const SharpnessProbe& probe) {
  return normalized_error(probe, -probe.C, probe.C);
}

double sharpness_inf(const SharpnessProbe& probe) {
  return normalized_error(probe, probe.C, -probe.C);
}

}  // namespace cfc::ltc
