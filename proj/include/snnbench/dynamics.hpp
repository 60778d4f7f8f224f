#pragma once

// Per-step neuron update and external Poisson drive.

#include <cstdint>
#include <span>
#include <vector>

#include "snnbench/model.hpp"
#include "snnbench/propagators.hpp"
#include "snnbench/rng.hpp"

namespace snnbench {

/// Structure-of-arrays state of a group of neurons.
struct NeuronStateArrays {
  std::vector<double> v_m;
  std::vector<double> i_ex;
  std::vector<double> i_in;
  std::vector<std::int32_t> refr_left;

  NeuronStateArrays() = default;
  NeuronStateArrays(std::size_t n, double v0)
      : v_m(n, v0), i_ex(n, 0.0), i_in(n, 0.0), refr_left(n, 0) {}

  std::size_t size() const noexcept { return v_m.size(); }
};

struct SpikeEvent {
  std::uint32_t neuron = 0;
  std::int64_t step = 0;

  bool operator==(const SpikeEvent&) const = default;
  /// Canonical record order: by step, then by neuron.
  auto operator<=>(const SpikeEvent& o) const noexcept {
    if (auto c = step <=> o.step; c != 0) return c;
    return neuron <=> o.neuron;
  }
};

/// Everything the update needs for neurons sharing one parameter set.
struct UpdateRule {
  Propagators prop;
  double drive = 0.0;  // p_const + p_dc * I_e
  double v_th = 0.0;
  double v_reset = 0.0;
  std::int32_t refractory_steps = 0;
};

inline UpdateRule make_update_rule(const NeuronParams& params, double h) {
  UpdateRule rule;
  rule.prop = compute_propagators(params, h);
  rule.drive = rule.prop.p_const + rule.prop.p_dc * params.I_e;
  rule.v_th = params.V_th;
  rule.v_reset = params.V_reset;
  rule.refractory_steps = refractory_steps(params.t_ref, h);
  return rule;
}

/// Advances neurons [begin, end) of `s` by one step. Order per neuron:
/// propagate the state, add this step's input to the currents, then test
/// v_m >= V_th. Refractory neurons are clamped at V_reset while their
/// currents keep evolving. `on_spike(i)` is called for each neuron i that
/// fires, in increasing i.
template <class OnSpike>
inline void advance(NeuronStateArrays& s, std::size_t begin, std::size_t end,
                    const UpdateRule& rule, std::span<const double> input_ex,
                    std::span<const double> input_in, OnSpike&& on_spike) {
  const Propagators& p = rule.prop;
  double* v = s.v_m.data();
  double* ie = s.i_ex.data();
  double* ii = s.i_in.data();
  std::int32_t* refr = s.refr_left.data();
  for (std::size_t i = begin; i < end; ++i) {
    const double in_ex = input_ex[i - begin];
    const double in_in = input_in[i - begin];
    if (refr[i] > 0) {
      --refr[i];
      v[i] = rule.v_reset;
      ie[i] = p.p_ee * ie[i] + in_ex;
      ii[i] = p.p_ii * ii[i] + in_in;
      continue;
    }
    v[i] = p.p_vv * v[i] + rule.drive + p.p_ve * ie[i] + p.p_vi * ii[i];
    ie[i] = p.p_ee * ie[i] + in_ex;
    ii[i] = p.p_ii * ii[i] + in_in;
    if (v[i] >= rule.v_th) {
      v[i] = rule.v_reset;
      refr[i] = rule.refractory_steps;
      on_spike(i);
    }
  }
}

/// One step of a whole group. Neuron i of the group has global id
/// `first_id + i * id_stride`; emitted events carry `step`.
inline std::vector<SpikeEvent> step_population(
    NeuronStateArrays& states, const UpdateRule& rule,
    std::span<const double> input_ex, std::span<const double> input_in,
    std::int64_t step = 0, std::uint32_t first_id = 0,
    std::uint32_t id_stride = 1) {
  std::vector<SpikeEvent> spikes;
  advance(states, 0, states.size(), rule, input_ex, input_in,
          [&](std::size_t i) {
            spikes.push_back(
                {static_cast<std::uint32_t>(first_id + i * id_stride), step});
          });
  return spikes;
}

/// Summed current increment from `indegree` independent Poisson sources of
/// `rate` spikes/s, each of weight `weight` pA, over one step of h ms.
inline double poisson_external_input(double rate, std::uint64_t indegree,
                                     double weight, double h,
                                     CounterStream& rng) {
  const double lambda = rate * static_cast<double>(indegree) * h / 1000.0;
  const auto k = poisson(lambda, rng);
  return weight == 0.0 ? 0.0 : weight * static_cast<double>(k);
}

}  // namespace snnbench
