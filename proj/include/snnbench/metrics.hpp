#pragma once

// Performance and activity metrics: realtime factor, phase fractions,
// power-trace energy accounting, firing rates, ISI irregularity and raster
// export.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "snnbench/engine.hpp"
#include "snnbench/error.hpp"
#include "snnbench/model.hpp"
#include "snnbench/rng.hpp"

namespace snnbench {

// ---------------------------------------------------------------------------
// Realtime factor and phase fractions

/// Wall-clock time over model time; below 1 is faster than realtime.
inline double rtf(double t_wall, double t_model) {
  if (!(t_model > 0.0)) throw DomainError("model time must be > 0");
  return t_wall / t_model;
}

struct PhaseFractions {
  double f_update = 0.0;
  double f_deliver = 0.0;
  double f_communicate = 0.0;
  double f_other = 0.0;
};

inline PhaseFractions phase_fractions(const PhaseTimers& t) {
  if (!(t.t_total > 0.0)) throw DomainError("t_total must be > 0");
  PhaseFractions f;
  f.f_update = t.t_update / t.t_total;
  f.f_deliver = t.t_deliver / t.t_total;
  f.f_communicate = t.t_communicate / t.t_total;
  f.f_other = 1.0 - (f.f_update + f.f_deliver + f.f_communicate);
  return f;
}

struct RtfReport {
  double t_wall = 0.0;   // s
  double t_model = 0.0;  // s
  double rtf = 0.0;
  PhaseFractions fractions;
};

/// `t_model_s` in seconds. Fractions are zero when nothing was timed.
inline RtfReport make_rtf_report(const PhaseTimers& timers, double t_model_s) {
  RtfReport r;
  r.t_wall = timers.t_total;
  r.t_model = t_model_s;
  r.rtf = rtf(timers.t_total, t_model_s);
  if (timers.t_total > 0.0) r.fractions = phase_fractions(timers);
  return r;
}

// ---------------------------------------------------------------------------
// Power and energy

/// Wattage readings at 1 Hz; sample i is attributed to the second
/// [start_time + i, start_time + i + 1).
struct PowerTrace {
  double start_time = 0.0;  // s
  std::vector<double> samples;  // W
  double accuracy = 0.05;  // fractional, of each reading

  double end_time() const noexcept {
    return start_time + static_cast<double>(samples.size());
  }
};

/// Attributes every reading `shift` seconds earlier, compensating the
/// meter's reporting delay. Values are unchanged.
inline PowerTrace align_power(PowerTrace trace, double shift = 1.0) {
  if (shift != std::round(shift)) {
    throw DomainError("power alignment shift must be a whole number of samples");
  }
  trace.start_time -= shift;
  return trace;
}

/// Energy in J above `baseline` W over [t0, t1) s: left-rectangle rule, each
/// sample weighted by the overlap of its second with the window and
/// negative excess clamped to zero.
inline double integrate_energy(const PowerTrace& trace, double t0, double t1,
                               double baseline = 0.0) {
  if (!(baseline >= 0.0)) throw DomainError("baseline must be >= 0");
  if (t1 < t0) throw DomainError("energy window end precedes its start");
  if (t1 == t0) return 0.0;
  if (t0 < trace.start_time || t1 > trace.end_time()) {
    throw RangeError("energy window lies outside the power trace");
  }
  double energy = 0.0;
  const auto first = static_cast<std::size_t>(std::floor(t0 - trace.start_time));
  for (std::size_t i = first; i < trace.samples.size(); ++i) {
    const double a = trace.start_time + static_cast<double>(i);
    if (a >= t1) break;
    const double overlap = std::min(a + 1.0, t1) - std::max(a, t0);
    if (overlap <= 0.0) continue;
    energy += std::max(trace.samples[i] - baseline, 0.0) * overlap;
  }
  return energy;
}

inline double energy_per_synaptic_event(double energy, std::uint64_t synaptic_events) {
  if (synaptic_events == 0) throw DomainError("no synaptic events to attribute energy to");
  return energy / static_cast<double>(synaptic_events);
}

struct EnergyReport {
  double e_total = 0.0;                // J, no baseline subtracted
  double e_baseline_subtracted = 0.0;  // J
  double baseline = 0.0;               // W
  double t0 = 0.0, t1 = 0.0;           // window, s
  std::uint64_t synaptic_events = 0;
  double e_per_event = 0.0;  // J
};

inline EnergyReport make_energy_report(const PowerTrace& trace, double t0, double t1,
                                       double baseline, std::uint64_t synaptic_events) {
  EnergyReport r;
  r.t0 = t0;
  r.t1 = t1;
  r.baseline = baseline;
  r.e_total = integrate_energy(trace, t0, t1, 0.0);
  r.e_baseline_subtracted = integrate_energy(trace, t0, t1, baseline);
  r.synaptic_events = synaptic_events;
  r.e_per_event = energy_per_synaptic_event(r.e_baseline_subtracted, synaptic_events);
  return r;
}

/// Parses a `epoch_seconds,watts` log (optional header line, '#' comments).
/// Consecutive readings must be exactly one second apart.
inline PowerTrace parse_power_csv(std::string_view text) {
  PowerTrace trace;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::optional<double> prev;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ConfigError("power log line " + std::to_string(line_no) + ": expected 'epoch_seconds,watts'");
    }
    double t = 0.0, w = 0.0;
    try {
      std::size_t used_t = 0, used_w = 0;
      const std::string ts = line.substr(0, comma), ws = line.substr(comma + 1);
      t = std::stod(ts, &used_t);
      w = std::stod(ws, &used_w);
      if (used_t != ts.size() || used_w != ws.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      if (!prev && trace.samples.empty() && line_no == 1) continue;  // header
      throw ConfigError("power log line " + std::to_string(line_no) + ": not numeric");
    }
    if (w < 0.0) {
      throw ConfigError("power log line " + std::to_string(line_no) + ": negative wattage");
    }
    if (prev && std::fabs(t - *prev - 1.0) > 1e-6) {
      throw ConfigError("power log line " + std::to_string(line_no) +
                        ": readings must be spaced exactly 1 s apart");
    }
    if (!prev) trace.start_time = t;
    prev = t;
    trace.samples.push_back(w);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Activity statistics

struct PopulationRate {
  std::string name;
  double rate = 0.0;  // spikes/s
  bool empty = false;  // population has no neurons; rate not defined
};

inline std::vector<PopulationRate> population_rates(const SpikeRecord& record,
                                                    const NetworkSpec& spec) {
  const double window = record.window_seconds();
  if (!(window > 0.0)) throw DomainError("spike record window has zero length");
  const auto ranges = population_ranges(spec);
  std::vector<std::uint64_t> counts(ranges.size(), 0);
  for (const auto& e : record.events) {
    for (std::size_t p = 0; p < ranges.size(); ++p) {
      if (e.neuron >= ranges[p].first && e.neuron < ranges[p].first + ranges[p].size) {
        ++counts[p];
        break;
      }
    }
  }
  std::vector<PopulationRate> out;
  for (std::size_t p = 0; p < ranges.size(); ++p) {
    PopulationRate r{ranges[p].name, 0.0, ranges[p].size == 0};
    if (!r.empty) {
      r.rate = static_cast<double>(counts[p]) / (static_cast<double>(ranges[p].size) * window);
    }
    out.push_back(std::move(r));
  }
  return out;
}

struct NeuronCv {
  std::uint32_t neuron = 0;
  double cv = 0.0;
};

/// Coefficient of variation of inter-spike intervals for every neuron with
/// at least three spikes (sample standard deviation, n-1 denominator).
/// Intervals are taken in steps; the ratio does not depend on h.
inline std::vector<NeuronCv> cv_isi(const SpikeRecord& record) {
  std::map<std::uint32_t, std::vector<std::int64_t>> trains;
  for (const auto& e : record.events) trains[e.neuron].push_back(e.step);
  std::vector<NeuronCv> out;
  for (auto& [neuron, steps] : trains) {
    if (steps.size() < 3) continue;
    std::sort(steps.begin(), steps.end());
    std::vector<double> isi;
    for (std::size_t i = 1; i < steps.size(); ++i) {
      isi.push_back(static_cast<double>(steps[i] - steps[i - 1]));
    }
    const double n = static_cast<double>(isi.size());
    const double mean = std::accumulate(isi.begin(), isi.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : isi) ss += (x - mean) * (x - mean);
    out.push_back({neuron, mean > 0.0 ? std::sqrt(ss / (n - 1.0)) / mean : 0.0});
  }
  return out;
}

struct RasterRow {
  double t_ms = 0.0;
  std::uint64_t row = 0;
  std::string population;

  bool operator==(const RasterRow&) const = default;
};

/// Neurons of a population picked for the raster: floor(fraction * size)
/// ids chosen by a seeded partial Fisher-Yates shuffle, ascending.
inline std::vector<std::uint64_t> select_neurons(const PopulationRange& pop,
                                                 std::size_t pop_index, double fraction,
                                                 std::uint64_t seed) {
  const auto n_select = static_cast<std::uint64_t>(
      std::floor(fraction * static_cast<double>(pop.size) + 1e-9));
  std::vector<std::uint64_t> ids(pop.size);
  std::iota(ids.begin(), ids.end(), pop.first);
  CounterStream rng(seed, StreamTag::raster_selection, static_cast<std::uint32_t>(pop_index), 0);
  for (std::uint64_t i = 0; i < n_select; ++i) {
    const auto j = i + rng.uniform_index(pop.size - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n_select);
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Raster data for [t0_ms, t1_ms): for each population (top to bottom in
/// declaration order) the selected neurons get consecutive rows; rows are
/// ordered by population, row, then time.
inline std::vector<RasterRow> raster_export(const SpikeRecord& record, const NetworkSpec& spec,
                                            double fraction, double t0_ms, double t1_ms,
                                            std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw DomainError("fraction must lie in [0, 1]");
  if (t1_ms < t0_ms) throw DomainError("raster window end precedes its start");
  if (t0_ms < record.window_start_ms() - 1e-9 || t1_ms > record.window_end_ms() + 1e-9) {
    throw RangeError("raster window lies outside the recorded window");
  }
  const auto ranges = population_ranges(spec);
  std::map<std::uint64_t, std::pair<std::uint64_t, std::size_t>> row_of;  // id -> (row, pop)
  std::uint64_t next_row = 0;
  for (std::size_t p = 0; p < ranges.size(); ++p) {
    for (auto id : select_neurons(ranges[p], p, fraction, seed)) row_of[id] = {next_row++, p};
  }
  const auto first = static_cast<std::int64_t>(std::ceil(t0_ms / record.h - 1e-9));
  const auto last = static_cast<std::int64_t>(std::ceil(t1_ms / record.h - 1e-9));
  std::vector<std::pair<std::uint64_t, std::int64_t>> hits;  // (row, step)
  for (const auto& e : record.events) {
    if (e.step < first || e.step >= last) continue;
    if (auto it = row_of.find(e.neuron); it != row_of.end()) hits.emplace_back(it->second.first, e.step);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::string> pop_of_row(next_row);
  for (const auto& [id, rp] : row_of) pop_of_row[rp.first] = ranges[rp.second].name;
  std::vector<RasterRow> out;
  out.reserve(hits.size());
  for (const auto& [row, step] : hits) {
    out.push_back({static_cast<double>(step) * record.h, row, pop_of_row[row]});
  }
  return out;
}

}  // namespace snnbench
