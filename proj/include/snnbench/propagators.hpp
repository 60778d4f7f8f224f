#pragma once

#include <cmath>

#include "snnbench/error.hpp"
#include "snnbench/model.hpp"

namespace snnbench {

/// One-step exact solution of the subthreshold system
///   dV/dt = -(V - E_L)/tau_m + (I_ex + I_in + I_e)/C_m
///   dI_x/dt = -I_x/tau_syn_x
/// so that V(t+h) = p_vv V + p_const + p_ve I_ex + p_vi I_in + p_dc I_e and
/// I_x(t+h) = p_xx I_x.
struct Propagators {
  double p_vv = 1.0;     // membrane decay
  double p_ee = 1.0;     // excitatory current decay
  double p_ii = 1.0;     // inhibitory current decay
  double p_ve = 0.0;     // mV per pA of I_ex at the start of the step
  double p_vi = 0.0;     // mV per pA of I_in at the start of the step
  double p_dc = 0.0;     // mV per pA of constant current
  double p_const = 0.0;  // resting-potential contribution, mV
};

namespace detail {

/// Voltage response after h to a unit current decaying with tau_syn:
///   (1/C) * integral_0^h exp(-(h-t)/tau_m) exp(-t/tau_syn) dt.
/// Uses the tau_syn == tau_m limit h/C * exp(-h/tau_m) when the two coincide.
inline double current_to_voltage(double tau_m, double tau_syn, double C_m,
                                 double h) {
  if (tau_syn == tau_m) return h / C_m * std::exp(-h / tau_m);
  const double rate_gap = 1.0 / tau_m - 1.0 / tau_syn;
  return std::exp(-h / tau_m) * std::expm1(h * rate_gap) / (rate_gap * C_m);
}

}  // namespace detail

inline Propagators compute_propagators(const NeuronParams& p, double h) {
  if (!(h > 0.0)) throw DomainError("grid step must be > 0");
  if (!(p.tau_m > 0.0) || !(p.tau_syn_ex > 0.0) || !(p.tau_syn_in > 0.0) ||
      !(p.C_m > 0.0)) {
    throw DomainError("time constants and capacitance must be > 0");
  }
  Propagators prop;
  const double decay_m = std::expm1(-h / p.tau_m);  // p_vv - 1
  prop.p_vv = 1.0 + decay_m;
  prop.p_ee = std::exp(-h / p.tau_syn_ex);
  prop.p_ii = std::exp(-h / p.tau_syn_in);
  prop.p_ve = detail::current_to_voltage(p.tau_m, p.tau_syn_ex, p.C_m, h);
  prop.p_vi = detail::current_to_voltage(p.tau_m, p.tau_syn_in, p.C_m, h);
  prop.p_dc = -decay_m * p.tau_m / p.C_m;
  prop.p_const = -decay_m * p.E_L;
  return prop;
}

}  // namespace snnbench
