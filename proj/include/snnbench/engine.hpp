#pragma once

// The parallel simulation loop.
//
// Neurons are dealt round-robin to n_vp virtual processes, one worker thread
// each. Time advances in slices of min_delay steps. Per slice every worker
//   deliver:     walks the out-edges (towards its own neurons) of the spikes
//                exchanged at the end of the previous slice and adds their
//                weights into its ring buffers,
//   update:      advances its neurons through the slice, collecting spikes,
// and then the spikes of all workers are merged into one register sorted by
// (step, neuron) (communicate). Phases are separated by barriers.
//
// All random draws are keyed by neuron id and step, and deliveries into a
// ring-buffer slot always happen in (step, neuron, synapse) order, so the
// spike record is bit-identical for every n_vp.

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "snnbench/connectivity.hpp"
#include "snnbench/dynamics.hpp"
#include "snnbench/error.hpp"
#include "snnbench/model.hpp"
#include "snnbench/placement.hpp"
#include "snnbench/rng.hpp"

namespace snnbench {

inline constexpr std::uint32_t kMaxVirtualProcesses = 1024;

/// Round-robin ownership: neuron id belongs to vp id % n_vp, where it has
/// local index id / n_vp.
struct VirtualProcessPartition {
  std::uint64_t n_neurons = 0;
  std::uint32_t n_vp = 1;

  std::uint32_t vp_of(std::uint64_t id) const noexcept {
    return static_cast<std::uint32_t>(id % n_vp);
  }
  std::uint64_t local_index(std::uint64_t id) const noexcept { return id / n_vp; }
  std::uint64_t global_id(std::uint32_t vp, std::uint64_t local) const noexcept {
    return local * n_vp + vp;
  }
  /// Number of neurons of `vp` with id < x.
  std::uint64_t count_below(std::uint32_t vp, std::uint64_t x) const noexcept {
    return x > vp ? (x - vp + n_vp - 1) / n_vp : 0;
  }
  std::uint64_t local_count(std::uint32_t vp) const noexcept {
    return count_below(vp, n_neurons);
  }
  std::vector<std::uint64_t> members(std::uint32_t vp) const {
    std::vector<std::uint64_t> ids;
    for (std::uint64_t id = vp; id < n_neurons; id += n_vp) ids.push_back(id);
    return ids;
  }
};

inline VirtualProcessPartition partition_neurons(std::uint64_t n_neurons,
                                                 std::uint32_t n_vp) {
  if (n_vp == 0) throw DomainError("n_vp must be >= 1");
  return {n_neurons, n_vp};
}

/// Per-neuron circular array of future input, one row per step slot.
class RingBuffer {
 public:
  RingBuffer() = default;
  RingBuffer(std::size_t n_local, std::size_t length)
      : n_local_(n_local), length_(length), data_(n_local * length, 0.0) {}

  std::size_t length() const noexcept { return length_; }

  void add(std::int64_t step, std::size_t local, double value) noexcept {
    data_[slot(step) * n_local_ + local] += value;
  }

  std::span<double> row(std::int64_t step) noexcept {
    return {data_.data() + slot(step) * n_local_, n_local_};
  }

  void clear(std::int64_t step) noexcept {
    auto r = row(step);
    std::fill(r.begin(), r.end(), 0.0);
  }

 private:
  std::size_t slot(std::int64_t step) const noexcept {
    return static_cast<std::size_t>(step) % length_;
  }

  std::size_t n_local_ = 0;
  std::size_t length_ = 1;
  std::vector<double> data_;
};

struct PopulationRange {
  std::string name;
  std::uint64_t first = 0;
  std::uint64_t size = 0;

  bool operator==(const PopulationRange&) const = default;
};

inline std::vector<PopulationRange> population_ranges(const NetworkSpec& spec) {
  std::vector<PopulationRange> out;
  std::uint64_t next = 0;
  for (const auto& p : spec.populations) {
    out.push_back({p.name, next, p.size});
    next += p.size;
  }
  return out;
}

/// Spikes of the measured window, sorted by (step, neuron). Step s covers
/// model time [s*h, (s+1)*h) ms; the window is steps [first_step,
/// first_step + n_steps).
struct SpikeRecord {
  std::vector<SpikeEvent> events;
  double h = 0.1;
  std::int64_t first_step = 0;
  std::int64_t n_steps = 0;
  std::vector<PopulationRange> populations;

  bool operator==(const SpikeRecord&) const = default;

  double window_start_ms() const noexcept { return static_cast<double>(first_step) * h; }
  double window_end_ms() const noexcept {
    return static_cast<double>(first_step + n_steps) * h;
  }
  double window_seconds() const noexcept { return static_cast<double>(n_steps) * h / 1000.0; }
};

/// Wall-clock seconds per phase of the measured window, each the maximum
/// over workers. t_other is the part of t_total no phase timer accounts for.
struct PhaseTimers {
  double t_update = 0.0;
  double t_deliver = 0.0;
  double t_communicate = 0.0;
  double t_other = 0.0;
  double t_total = 0.0;
};

struct RunCounts {
  std::uint64_t spikes_emitted = 0;
  /// Sum over spikes of the window of the emitter's out-degree.
  std::uint64_t synaptic_events_delivered = 0;
};

struct RunOptions {
  std::uint32_t n_vp = 1;
  bool record_spikes = true;
  /// CPU for each worker; empty runs unpinned.
  std::vector<int> cpus;
};

struct RunResult {
  SpikeRecord record;
  PhaseTimers timers;
  RunCounts counts;
  std::uint32_t n_vp = 1;
  bool pinned = false;
  /// System-clock bounds of the measured window, seconds since the epoch.
  double wall_start_epoch_s = 0.0;
  double wall_end_epoch_s = 0.0;
};

/// Merges per-worker spike lists into one list sorted by (step, neuron).
inline std::vector<SpikeEvent> merge_records(std::span<const std::vector<SpikeEvent>> parts) {
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  std::vector<SpikeEvent> out;
  out.reserve(total);
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  std::stable_sort(out.begin(), out.end());
  return out;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline double epoch_seconds_now() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct LocalPopulation {
  std::size_t begin = 0, end = 0;  // local indices
  UpdateRule rule;
  double lambda = 0.0;  // expected external spikes per neuron per step
  double ext_weight = 0.0;
};

struct Worker {
  NeuronStateArrays state;
  std::vector<LocalPopulation> pops;
  RingBuffer ring_ex, ring_in;
  std::vector<SpikeEvent> outbox;
  double t_update = 0.0, t_deliver = 0.0, t_communicate = 0.0;
  std::uint64_t events = 0;
  bool pinned = false;
};

class Engine {
 public:
  Engine(const NetworkSpec& spec, const TargetTable& table, const RunOptions& opt)
      : spec_(spec),
        table_(table),
        opt_(opt),
        part_(partition_neurons(spec.total_neurons(), opt.n_vp)),
        h_(spec.grid.h),
        min_steps_(to_steps(spec.grid.min_delay, h_)),
        max_steps_(to_steps(spec.grid.max_delay, h_)),
        transient_steps_(to_steps(spec.grid.t_transient, h_)),
        model_steps_(to_steps(spec.grid.t_model, h_)),
        workers_(opt.n_vp),
        sync_(static_cast<std::ptrdiff_t>(opt.n_vp)) {}

  RunResult run() {
    {
      std::vector<std::jthread> threads;
      for (std::uint32_t vp = 0; vp < opt_.n_vp; ++vp) {
        threads.emplace_back([this, vp] { work(vp); });
      }
    }
    RunResult result;
    result.n_vp = opt_.n_vp;
    result.record.events = std::move(recorded_);
    result.record.h = h_;
    result.record.first_step = transient_steps_;
    result.record.n_steps = model_steps_;
    result.record.populations = population_ranges(spec_);
    result.counts.spikes_emitted = spikes_emitted_;
    result.pinned = !opt_.cpus.empty();
    for (const auto& w : workers_) {
      result.counts.synaptic_events_delivered += w.events;
      result.timers.t_update = std::max(result.timers.t_update, w.t_update);
      result.timers.t_deliver = std::max(result.timers.t_deliver, w.t_deliver);
      result.timers.t_communicate = std::max(result.timers.t_communicate, w.t_communicate);
      result.pinned = result.pinned && w.pinned;
    }
    result.timers.t_total = t_total_;
    result.timers.t_other = std::max(
        0.0, t_total_ - (result.timers.t_update + result.timers.t_deliver +
                         result.timers.t_communicate));
    result.wall_start_epoch_s = wall_start_;
    result.wall_end_epoch_s = wall_end_;
    return result;
  }

 private:
  void init(std::uint32_t vp) {
    Worker& w = workers_[vp];
    const std::size_t n_local = part_.local_count(vp);
    w.state = NeuronStateArrays(n_local, 0.0);
    const auto length = static_cast<std::size_t>(max_steps_ + min_steps_);
    w.ring_ex = RingBuffer(n_local, length);
    w.ring_in = RingBuffer(n_local, length);
    std::uint64_t first = 0;
    for (const auto& p : spec_.populations) {
      LocalPopulation lp;
      lp.begin = part_.count_below(vp, first);
      lp.end = part_.count_below(vp, first + p.size);
      lp.rule = make_update_rule(p.params, h_);
      lp.lambda = p.ext_rate * static_cast<double>(p.ext_indegree) * h_ / 1000.0;
      lp.ext_weight = p.ext_weight;
      for (std::size_t i = lp.begin; i < lp.end; ++i) {
        double v0 = p.params.E_L;
        if (p.v_init) {
          CounterStream rng(spec_.seed, StreamTag::initial_state, 0,
                            static_cast<std::uint32_t>(part_.global_id(vp, i)));
          v0 = rng.normal(p.v_init->mean, p.v_init->sd);
        }
        w.state.v_m[i] = v0;
      }
      w.pops.push_back(lp);
      first += p.size;
    }
  }

  void deliver(std::uint32_t vp, bool count_only) {
    Worker& w = workers_[vp];
    for (const SpikeEvent& e : register_) {
      const auto edges = table_.out_edges(e.neuron, vp);
      if (e.step >= transient_steps_) w.events += edges.size();
      if (count_only) continue;
      for (const Synapse& s : edges) {
        const std::int64_t arrival = e.step + s.delay_steps;
        const std::size_t local = part_.local_index(s.target);
        if (s.channel == Channel::excitatory) {
          w.ring_ex.add(arrival, local, s.weight);
        } else {
          w.ring_in.add(arrival, local, s.weight);
        }
      }
    }
  }

  void update(std::uint32_t vp, std::int64_t s0, std::int64_t s1) {
    Worker& w = workers_[vp];
    for (std::int64_t step = s0; step < s1; ++step) {
      auto in_ex = w.ring_ex.row(step);
      auto in_in = w.ring_in.row(step);
      for (const auto& lp : w.pops) {
        if (lp.lambda > 0.0 && lp.ext_weight != 0.0) {
          auto& target = lp.ext_weight >= 0.0 ? in_ex : in_in;
          for (std::size_t i = lp.begin; i < lp.end; ++i) {
            CounterStream rng(spec_.seed, StreamTag::external_input, 0,
                              static_cast<std::uint32_t>(part_.global_id(vp, i)),
                              static_cast<std::uint32_t>(step));
            target[i] += lp.ext_weight * static_cast<double>(poisson(lp.lambda, rng));
          }
        }
        const std::size_t n = lp.end - lp.begin;
        advance(w.state, lp.begin, lp.end, lp.rule, in_ex.subspan(lp.begin, n),
                in_in.subspan(lp.begin, n), [&](std::size_t i) {
                  w.outbox.push_back(
                      {static_cast<std::uint32_t>(part_.global_id(vp, i)), step});
                });
      }
      w.ring_ex.clear(step);
      w.ring_in.clear(step);
    }
  }

  void communicate(bool timed) {
    std::vector<std::vector<SpikeEvent>> parts;
    parts.reserve(workers_.size());
    for (auto& w : workers_) parts.push_back(std::move(w.outbox));
    register_ = merge_records(parts);
    for (std::size_t i = 0; i < workers_.size(); ++i) {
      workers_[i].outbox = std::move(parts[i]);
      workers_[i].outbox.clear();
    }
    if (timed) {
      spikes_emitted_ += register_.size();
      if (opt_.record_spikes) recorded_.insert(recorded_.end(), register_.begin(), register_.end());
    }
  }

  void work(std::uint32_t vp) {
    using clock = std::chrono::steady_clock;
    Worker& w = workers_[vp];
    if (!opt_.cpus.empty()) w.pinned = pin_current_thread(opt_.cpus[vp % opt_.cpus.size()]);
    init(vp);

    const std::int64_t end_steps = transient_steps_ + model_steps_;
    clock::time_point window_start;
    bool window_open = false;
    std::int64_t s0 = 0;
    while (s0 < end_steps) {
      // Slices never straddle the transient/measurement boundary.
      const std::int64_t boundary = s0 < transient_steps_ ? transient_steps_ : end_steps;
      const std::int64_t s1 = std::min(s0 + min_steps_, boundary);
      const bool timed = s0 >= transient_steps_;
      if (timed && !window_open) {
        if (vp == 0) {
          window_start = clock::now();
          wall_start_ = epoch_seconds_now();
        }
        window_open = true;
        sync_.arrive_and_wait();
      }

      auto t0 = clock::now();
      deliver(vp, false);
      if (timed) w.t_deliver += seconds_since(t0);
      sync_.arrive_and_wait();

      t0 = clock::now();
      update(vp, s0, s1);
      if (timed) w.t_update += seconds_since(t0);
      sync_.arrive_and_wait();

      if (vp == 0) {
        t0 = clock::now();
        communicate(timed);
        if (timed) w.t_communicate += seconds_since(t0);
      }
      sync_.arrive_and_wait();
      s0 = s1;
    }
    if (vp == 0 && window_open) {
      t_total_ = seconds_since(window_start);
      wall_end_ = epoch_seconds_now();
    }
    // Spikes of the final slice reach their synapses after the window closes.
    deliver(vp, true);
  }

  const NetworkSpec& spec_;
  const TargetTable& table_;
  const RunOptions& opt_;
  VirtualProcessPartition part_;
  double h_;
  std::int64_t min_steps_, max_steps_, transient_steps_, model_steps_;
  std::vector<Worker> workers_;
  std::barrier<> sync_;
  std::vector<SpikeEvent> register_;
  std::vector<SpikeEvent> recorded_;
  std::uint64_t spikes_emitted_ = 0;
  double t_total_ = 0.0;
  double wall_start_ = 0.0, wall_end_ = 0.0;
};

}  // namespace detail

/// Simulates t_transient followed by t_model. Only the t_model window is
/// timed and recorded. `table` may be grouped for any n_vp; it is regrouped
/// if it does not match `opt.n_vp`.
inline RunResult run_simulation(const NetworkSpec& spec, const TargetTable& table,
                                const RunOptions& opt) {
  require_valid(spec);
  if (opt.n_vp == 0 || opt.n_vp > kMaxVirtualProcesses) {
    throw ConfigError("n_vp must be in [1, " + std::to_string(kMaxVirtualProcesses) + "]");
  }
  if (table.n_neurons() != spec.total_neurons()) {
    throw ConfigError("synapse table does not match the network spec");
  }
  if (table.n_vp() != opt.n_vp) {
    const TargetTable local = regroup(table, opt.n_vp);
    return detail::Engine(spec, local, opt).run();
  }
  return detail::Engine(spec, table, opt).run();
}

inline RunResult run_simulation(const NetworkSpec& spec, const TargetTable& table,
                                std::uint32_t n_vp, bool record_spikes = true) {
  RunOptions opt;
  opt.n_vp = n_vp;
  opt.record_spikes = record_spikes;
  return run_simulation(spec, table, opt);
}

}  // namespace snnbench
