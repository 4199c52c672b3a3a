#include "cfc/ltc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfc::ltc {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double SigmoidGate::operator()(double v) const { return sigmoid(slope * (v - offset)); }

double SigmoidGate::reversed(double v) const { return sigmoid(-slope * (v - offset)); }

void SigmoidGate::validate() const {
  if (!(slope > 0.0)) fail("SigmoidGate: slope must be positive, got " + std::to_string(slope));
  if (!std::isfinite(offset)) fail("SigmoidGate: offset must be finite");
}

void LtcScalarParams::validate() const {
  gate.validate();
  if (!(w_tau >= 0.0)) fail("LtcScalarParams: w_tau must be >= 0, got " + std::to_string(w_tau));
  if (!std::isfinite(x0) || !std::isfinite(a_bias)) fail("LtcScalarParams: non-finite x0 or A");
}

PiecewiseConstantSignal::PiecewiseConstantSignal(std::vector<double> breakpoints,
                                                 std::vector<double> levels)
    : breakpoints_(std::move(breakpoints)), levels_(std::move(levels)) {
  if (breakpoints_.empty() || breakpoints_.size() != levels_.size()) {
    fail("PiecewiseConstantSignal: need equally many breakpoints and levels (>= 1)");
  }
  if (breakpoints_.front() != 0.0) {
    fail("PiecewiseConstantSignal: first breakpoint must be 0, got " +
         std::to_string(breakpoints_.front()));
  }
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i] > breakpoints_[i - 1])) {
      fail("PiecewiseConstantSignal: breakpoints must increase strictly");
    }
  }
  for (double v : levels_) {
    if (!std::isfinite(v)) fail("PiecewiseConstantSignal: non-finite level");
  }
}

std::size_t PiecewiseConstantSignal::segment_index(double t) const {
  if (t < 0.0) fail("PiecewiseConstantSignal: t must be >= 0, got " + std::to_string(t));
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  return static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
}

void SolverConfig::validate() const {
  if (method != Method::dopri && !(step > 0.0)) fail("SolverConfig: step must be > 0");
  if (method == Method::dopri && (!(rtol > 0.0) || !(atol > 0.0))) {
    fail("SolverConfig: rtol and atol must be > 0");
  }
  if (max_steps <= 0) fail("SolverConfig: max_steps must be > 0");
}

std::size_t Trajectory::index_of_time(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12);
  if (it == times.end() || std::abs(*it - t) > 1e-12) {
    throw std::invalid_argument("Trajectory: time " + std::to_string(t) + " was not recorded");
  }
  return static_cast<std::size_t>(it - times.begin());
}

double ltc_rhs_scalar(double x, double input, const LtcScalarParams& params, OdeForm form) {
  const double f = params.gate(input);
  const double rate = params.w_tau + f;
  const double drive = form == OdeForm::eq1 ? params.a_bias * f : params.a_bias * rate;
  const double dx = -rate * x + drive;
  if (!std::isfinite(dx)) {
    throw std::runtime_error("ltc_rhs: non-finite derivative at x=" + std::to_string(x));
  }
  return dx;
}

std::vector<double> ltc_rhs(std::span<const double> x, std::span<const double> input,
                            std::span<const LtcScalarParams> params, OdeForm form) {
  if (x.size() != input.size() || x.size() != params.size()) {
    fail("ltc_rhs: x, input and params must have equal length");
  }
  std::vector<double> dx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    dx[i] = ltc_rhs_scalar(x[i], input[i], params[i], form);
  }
  return dx;
}

namespace {

struct StepBudget {
  long remaining;
  double last_time;

  void spend(double t) {
    last_time = t;
    if (--remaining < 0) {
      throw std::runtime_error("solve_ivp: exceeded max_steps, last time reached t=" +
                               std::to_string(t));
    }
  }
};

void rk4_step(const Rhs& rhs, double t, double h, const std::vector<double>& x,
              std::vector<double>& out, std::vector<double>& k1, std::vector<double>& k2,
              std::vector<double>& k3, std::vector<double>& k4, std::vector<double>& tmp) {
  const std::size_t n = x.size();
  rhs(t, x, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  rhs(t + 0.5 * h, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  rhs(t + 0.5 * h, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  rhs(t + h, tmp, k4);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

// Fixed-step integration of one segment [t0, t1]; appends every step point.
void integrate_fixed(const Rhs& rhs, SolverConfig::Method method, double step, double t0,
                     double t1, std::vector<double>& x, Trajectory& traj, StepBudget& budget) {
  const std::size_t n = x.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n), next(n);
  double t = t0;
  while (t < t1) {
    budget.spend(t);
    double h = step;
    bool landing = false;
    if (t + h >= t1 - 1e-15 * std::max(1.0, std::abs(t1))) {
      h = t1 - t;
      landing = true;
    }
    if (method == SolverConfig::Method::euler) {
      rhs(t, x, k1);
      for (std::size_t i = 0; i < n; ++i) next[i] = x[i] + h * k1[i];
    } else {
      rk4_step(rhs, t, h, x, next, k1, k2, k3, k4, tmp);
    }
    x = next;
    t = landing ? t1 : t + h;
    traj.times.push_back(t);
    traj.states.insert(traj.states.end(), x.begin(), x.end());
  }
}

// Dormand-Prince 5(4) with PI step control (safety 0.9), FSAL within a segment.
void integrate_dopri(const Rhs& rhs, double t0, double t1, double h_init, double rtol, double atol,
                     std::vector<double>& x, Trajectory& traj, StepBudget& budget) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // 5th-order minus embedded 4th-order weights
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double safety = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;

  const std::size_t n = x.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), x_new(n);
  double t = t0;
  double h = std::min(h_init, t1 - t0);
  double facold = 1e-4;
  bool have_k1 = false;

  while (t < t1) {
    budget.spend(t);
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      throw std::runtime_error("solve_ivp: adaptive step size underflow at t=" +
                               std::to_string(t));
    }
    bool landing = false;
    if (t + h >= t1 - 1e-15 * std::max(1.0, std::abs(t1))) {
      h = t1 - t;
      landing = true;
    }

    if (!have_k1) rhs(t, x, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * a21 * k1[i];
    rhs(t + c2 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(t + c3 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = x[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    }
    rhs(t + c4 * h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = x[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    }
    rhs(t + c5 * h, tmp, k5);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = x[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    }
    rhs(t + h, tmp, k6);
    for (std::size_t i = 0; i < n; ++i) {
      x_new[i] = x[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    }
    rhs(t + h, x_new, k7);

    double err_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                            e7 * k7[i]);
      const double sc = atol + rtol * std::max(std::abs(x[i]), std::abs(x_new[i]));
      err_sq += (e / sc) * (e / sc);
    }
    const double err = std::sqrt(err_sq / static_cast<double>(n));

    const double fac11 = std::pow(err, expo1);
    if (err <= 1.0) {
      facold = std::max(err, 1e-4);
      double fac = fac11 / std::pow(facold, beta);
      fac = std::max(0.1, std::min(5.0, fac / safety));
      t = landing ? t1 : t + h;
      x = x_new;
      k1 = k7;  // FSAL
      have_k1 = true;
      traj.times.push_back(t);
      traj.states.insert(traj.states.end(), x.begin(), x.end());
      h = h / fac;
    } else {
      h = h / std::min(5.0, fac11 / safety);
      have_k1 = true;  // k1 is still f(t, x)
    }
  }
}

}  // namespace

Trajectory integrate(const Rhs& rhs, std::vector<double> x0, std::span<const double> restarts,
                     double t_end, const SolverConfig& cfg) {
  cfg.validate();
  if (!(t_end > 0.0)) fail("integrate: t_end must be > 0, got " + std::to_string(t_end));

  std::vector<double> stops;
  for (double r : restarts) {
    if (r > 0.0 && r < t_end) stops.push_back(r);
  }
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  stops.push_back(t_end);

  Trajectory traj;
  traj.dim = x0.size();
  traj.times.push_back(0.0);
  traj.states.insert(traj.states.end(), x0.begin(), x0.end());

  StepBudget budget{cfg.max_steps, 0.0};
  std::vector<double> x = std::move(x0);
  double t = 0.0;
  for (double stop : stops) {
    if (cfg.method == SolverConfig::Method::dopri) {
      integrate_dopri(rhs, t, stop, 1e-3 * t_end, cfg.rtol, cfg.atol, x, traj, budget);
    } else {
      integrate_fixed(rhs, cfg.method, cfg.step, t, stop, x, traj, budget);
    }
    t = stop;
  }
  return traj;
}

Trajectory solve_ivp(const LtcScalarParams& params, const PiecewiseConstantSignal& signal,
                     double t_end, const SolverConfig& cfg, OdeForm form) {
  params.validate();
  Rhs rhs = [&params, &signal, form](double t, const std::vector<double>& x,
                                     std::vector<double>& dx) {
    dx[0] = ltc_rhs_scalar(x[0], signal(t), params, form);
  };
  return integrate(rhs, {params.x0}, signal.breakpoints(), t_end, cfg);
}

double exact_piecewise(const LtcScalarParams& params, const PiecewiseConstantSignal& signal,
                       double t) {
  params.validate();
  if (t < 0.0) fail("exact_piecewise: t must be >= 0, got " + std::to_string(t));
  const std::size_t k = signal.segment_index(t);
  const auto& bp = signal.breakpoints();
  const auto& lv = signal.levels();
  double integral = params.gate(lv[k]) * (t - bp[k]);
  for (std::size_t i = 0; i < k; ++i) {
    integral += params.gate(lv[i]) * (bp[i + 1] - bp[i]);
  }
  return (params.x0 - params.a_bias) * std::exp(-params.w_tau * t - integral) + params.a_bias;
}

}  // namespace cfc::ltc
