#pragma once

// Socket -> chiplet -> CCX -> core topology and thread placement plans.
//
// Cores are numbered the way lstopo lists them: socket-major, then chiplet,
// then CCX, so core k of chiplet n has id n * cores_per_chiplet + k and the
// four cores of a CCX (sharing one L3) are consecutive.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

#include "snnbench/error.hpp"

namespace snnbench {

struct TopologyModel {
  int sockets = 2;
  int chiplets_per_socket = 8;
  int ccx_per_chiplet = 2;
  int cores_per_ccx = 4;

  bool operator==(const TopologyModel&) const = default;

  int cores_per_chiplet() const noexcept { return ccx_per_chiplet * cores_per_ccx; }
  int total_chiplets() const noexcept { return sockets * chiplets_per_socket; }
  int total_cores() const noexcept { return total_chiplets() * cores_per_chiplet(); }
  int ccx_of(int core) const noexcept { return core / cores_per_ccx; }
  int socket_of(int core) const noexcept {
    return core / (chiplets_per_socket * cores_per_chiplet());
  }

  void check() const {
    if (sockets < 1 || chiplets_per_socket < 1 || ccx_per_chiplet < 1 || cores_per_ccx < 1) {
      throw DomainError("topology counts must all be >= 1");
    }
  }
};

enum class Scheme { sequential, distant };

inline std::string_view to_string(Scheme s) {
  return s == Scheme::sequential ? "sequential" : "distant";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "sequential") return Scheme::sequential;
  if (s == "distant") return Scheme::distant;
  throw ConfigError("unknown placement scheme '" + std::string(s) +
                    "' (expected sequential or distant)");
}

struct PlacementPlan {
  std::vector<int> cores;
  Scheme scheme = Scheme::sequential;

  bool operator==(const PlacementPlan&) const = default;
};

/// Physical id of core k on chiplet n.
inline int core_id(const TopologyModel& topo, int chiplet, int core) {
  topo.check();
  if (chiplet < 0 || chiplet >= topo.total_chiplets()) {
    throw RangeError("chiplet index " + std::to_string(chiplet) + " out of range");
  }
  if (core < 0 || core >= topo.cores_per_chiplet()) {
    throw RangeError("core index " + std::to_string(core) + " out of range");
  }
  return chiplet * topo.cores_per_chiplet() + core;
}

namespace detail {
inline void check_thread_count(const TopologyModel& topo, int n_threads) {
  topo.check();
  if (n_threads < 0 || n_threads > topo.total_cores()) {
    throw RangeError("cannot place " + std::to_string(n_threads) + " threads on " +
                     std::to_string(topo.total_cores()) + " cores");
  }
}
}  // namespace detail

/// Threads on physically consecutive cores: 0, 1, 2, ...
inline PlacementPlan sequential_plan(const TopologyModel& topo, int n_threads) {
  detail::check_thread_count(topo, n_threads);
  PlacementPlan plan{{}, Scheme::sequential};
  for (int i = 0; i < n_threads; ++i) plan.cores.push_back(i);
  return plan;
}

/// Order in which the cores of a chiplet are used by the distant scheme:
/// the bit-reversal permutation of 0..n-1 (ids >= n skipped when n is not a
/// power of two). For 8 cores this is 0,4,2,6,1,5,3,7.
inline std::vector<int> distant_core_order(int cores_per_chiplet) {
  int bits = 0;
  while ((1 << bits) < cores_per_chiplet) ++bits;
  std::vector<int> order;
  for (int i = 0; i < (1 << bits); ++i) {
    int reversed = 0;
    for (int b = 0; b < bits; ++b) {
      if (i & (1 << b)) reversed |= 1 << (bits - 1 - b);
    }
    if (reversed < cores_per_chiplet) order.push_back(reversed);
  }
  return order;
}

/// Round r adds core order[r] of every chiplet, chiplets in id order, so L3
/// and chiplet sharing is postponed as long as possible.
inline PlacementPlan distant_plan(const TopologyModel& topo, int n_threads) {
  detail::check_thread_count(topo, n_threads);
  const auto order = distant_core_order(topo.cores_per_chiplet());
  const int chiplets = topo.total_chiplets();
  PlacementPlan plan{{}, Scheme::distant};
  for (int t = 0; t < n_threads; ++t) {
    plan.cores.push_back(core_id(topo, t % chiplets, order[static_cast<std::size_t>(t / chiplets)]));
  }
  return plan;
}

inline PlacementPlan make_plan(const TopologyModel& topo, Scheme scheme, int n_threads) {
  return scheme == Scheme::sequential ? sequential_plan(topo, n_threads)
                                      : distant_plan(topo, n_threads);
}

/// Position of the first core that shares a CCX (L3 cache) with an earlier
/// core of the plan.
inline std::optional<std::size_t> first_l3_sharing_index(const PlacementPlan& plan,
                                                         const TopologyModel& topo) {
  std::vector<bool> used(static_cast<std::size_t>(topo.total_cores() / topo.cores_per_ccx + 1));
  for (std::size_t i = 0; i < plan.cores.size(); ++i) {
    const auto ccx = static_cast<std::size_t>(topo.ccx_of(plan.cores[i]));
    if (ccx >= used.size()) used.resize(ccx + 1);
    if (used[ccx]) return i;
    used[ccx] = true;
  }
  return std::nullopt;
}

/// OMP_PLACES-style pinning string: "{0},{8},{16}".
inline std::string format_places(const PlacementPlan& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.cores.size(); ++i) {
    if (i > 0) out += ',';
    out += '{' + std::to_string(plan.cores[i]) + '}';
  }
  return out;
}

inline std::string format_json_array(const PlacementPlan& plan) {
  std::string out = "[";
  for (std::size_t i = 0; i < plan.cores.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(plan.cores[i]);
  }
  return out + "]";
}

/// Binds the calling thread to one logical CPU. Returns false if affinity
/// is unsupported or the CPU is not available to this process.
inline bool pin_current_thread(int cpu) {
#if defined(__linux__)
  if (cpu < 0 || cpu >= CPU_SETSIZE) return false;
  cpu_set_t allowed;
  CPU_ZERO(&allowed);
  if (sched_getaffinity(0, sizeof(allowed), &allowed) != 0 || !CPU_ISSET(cpu, &allowed)) {
    return false;
  }
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  return pthread_setaffinity_np(pthread_self(), sizeof(set), &set) == 0;
#else
  (void)cpu;
  return false;
#endif
}

}  // namespace snnbench
