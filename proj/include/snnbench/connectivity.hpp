#pragma once

// Synapse table grouped by source neuron. Within a source the out-edges are
// grouped by the virtual process owning the target (vp = target mod n_vp)
// and sorted by target id, so each worker delivers from one contiguous run.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "snnbench/error.hpp"
#include "snnbench/model.hpp"
#include "snnbench/rng.hpp"

namespace snnbench {

enum class Channel : std::uint8_t { excitatory = 0, inhibitory = 1 };

struct Synapse {
  double weight = 0.0;  // pA, signed
  std::uint32_t target = 0;
  std::uint16_t delay_steps = 1;
  Channel channel = Channel::excitatory;

  bool operator==(const Synapse&) const = default;
};

class TargetTable {
 public:
  TargetTable() = default;
  TargetTable(std::size_t n_neurons, std::uint32_t n_vp,
              std::vector<std::uint64_t> offsets, std::vector<Synapse> entries)
      : n_neurons_(n_neurons),
        n_vp_(n_vp),
        offsets_(std::move(offsets)),
        entries_(std::move(entries)) {}

  std::size_t n_neurons() const noexcept { return n_neurons_; }
  std::uint32_t n_vp() const noexcept { return n_vp_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::span<const Synapse> out_edges(std::size_t source) const noexcept {
    return slice(offsets_[source * n_vp_], offsets_[(source + 1) * n_vp_]);
  }

  /// Out-edges of `source` whose targets live on virtual process `vp`.
  std::span<const Synapse> out_edges(std::size_t source,
                                     std::uint32_t vp) const noexcept {
    const std::size_t k = source * n_vp_ + vp;
    return slice(offsets_[k], offsets_[k + 1]);
  }

  std::uint64_t out_degree(std::size_t source) const noexcept {
    return offsets_[(source + 1) * n_vp_] - offsets_[source * n_vp_];
  }

  const std::vector<std::uint64_t>& offsets() const noexcept { return offsets_; }
  const std::vector<Synapse>& entries() const noexcept { return entries_; }

 private:
  std::span<const Synapse> slice(std::uint64_t b, std::uint64_t e) const noexcept {
    return {entries_.data() + b, static_cast<std::size_t>(e - b)};
  }

  std::size_t n_neurons_ = 0;
  std::uint32_t n_vp_ = 1;
  std::vector<std::uint64_t> offsets_{0};
  std::vector<Synapse> entries_;
};

struct DegreeSummary {
  std::vector<std::uint64_t> in_degree;
  std::vector<std::uint64_t> out_degree;
};

namespace detail {

/// Draws of one synapse. Stream = (seed, rule, synapse index); the source
/// is always the first draw so it can be recomputed cheaply.
struct SynapseSampler {
  std::uint64_t seed;
  std::uint32_t rule_index;
  std::uint64_t src_offset, src_size, tgt_offset, tgt_size;
  double weight_mean, weight_sd, delay_mean, delay_sd, h;
  std::int64_t min_steps, max_steps;
  Channel channel;

  CounterStream stream(std::uint64_t index) const noexcept {
    return CounterStream(seed, StreamTag::connectivity, rule_index,
                         static_cast<std::uint32_t>(index),
                         static_cast<std::uint32_t>(index >> 32));
  }

  std::uint32_t source(std::uint64_t index) const noexcept {
    auto rng = stream(index);
    return static_cast<std::uint32_t>(src_offset + rng.uniform_index(src_size));
  }

  Synapse synapse(std::uint64_t index) const noexcept {
    auto rng = stream(index);
    rng.uniform_index(src_size);  // source
    Synapse s;
    s.target = static_cast<std::uint32_t>(tgt_offset + rng.uniform_index(tgt_size));
    double w = rng.normal(weight_mean, weight_sd);
    for (int attempt = 0; w < 0.0 && attempt < 1000; ++attempt) {
      w = rng.normal(weight_mean, weight_sd);
    }
    if (w < 0.0) w = 0.0;
    s.weight = channel == Channel::inhibitory ? -w : w;
    const double d = rng.normal(delay_mean, delay_sd);
    const std::int64_t steps = std::clamp<std::int64_t>(
        std::llround(d / h), min_steps, max_steps);
    s.delay_steps = static_cast<std::uint16_t>(steps);
    s.channel = channel;
    return s;
  }
};

inline std::vector<SynapseSampler> make_samplers(const NetworkSpec& spec) {
  const auto offsets = spec.population_offsets();
  std::vector<SynapseSampler> samplers;
  for (std::size_t r = 0; r < spec.connections.size(); ++r) {
    const auto& c = spec.connections[r];
    const auto src = *spec.find_population(c.source);
    const auto tgt = *spec.find_population(c.target);
    samplers.push_back(SynapseSampler{
        spec.seed, static_cast<std::uint32_t>(r), offsets[src],
        spec.populations[src].size, offsets[tgt], spec.populations[tgt].size,
        c.weight_mean, c.weight_sd, c.delay_mean, c.delay_sd, spec.grid.h,
        to_steps(spec.grid.min_delay, spec.grid.h),
        to_steps(spec.grid.max_delay, spec.grid.h),
        c.sign == Sign::excitatory ? Channel::excitatory : Channel::inhibitory});
  }
  return samplers;
}

/// Runs fn(chunk_index, begin, end) over [0, n) split into `chunks` pieces.
template <class Fn>
inline void parallel_chunks(std::uint64_t n, unsigned chunks, Fn&& fn) {
  if (chunks <= 1) {
    fn(0u, std::uint64_t{0}, n);
    return;
  }
  std::vector<std::jthread> workers;
  for (unsigned c = 0; c < chunks; ++c) {
    const std::uint64_t b = n * c / chunks;
    const std::uint64_t e = n * (c + 1) / chunks;
    workers.emplace_back([&fn, c, b, e] { fn(c, b, e); });
  }
}

/// Stable reorder of each source's run by (target mod n_vp, target). For a
/// fixed target this keeps the relative order of its entries unchanged.
inline void group_by_vp(std::vector<Synapse>& entries,
                        const std::vector<std::uint64_t>& source_offsets,
                        std::uint32_t n_vp, unsigned n_threads,
                        std::vector<std::uint64_t>& vp_offsets) {
  const std::size_t n = source_offsets.size() - 1;
  vp_offsets.assign(n * n_vp + 1, 0);
  parallel_chunks(n, n_threads, [&](unsigned, std::uint64_t b, std::uint64_t e) {
    for (std::uint64_t src = b; src < e; ++src) {
      auto first = entries.begin() + static_cast<std::ptrdiff_t>(source_offsets[src]);
      auto last = entries.begin() + static_cast<std::ptrdiff_t>(source_offsets[src + 1]);
      std::stable_sort(first, last, [n_vp](const Synapse& a, const Synapse& c) {
        const auto va = a.target % n_vp, vc = c.target % n_vp;
        return va != vc ? va < vc : a.target < c.target;
      });
      std::uint64_t pos = source_offsets[src];
      for (std::uint32_t vp = 0; vp < n_vp; ++vp) {
        vp_offsets[src * n_vp + vp] = pos;
        while (pos < source_offsets[src + 1] && entries[pos].target % n_vp == vp) ++pos;
      }
    }
  });
  vp_offsets[n * n_vp] = entries.size();
}

}  // namespace detail

/// Realizes every connection rule of `spec` with exactly `total_synapses`
/// entries. Each synapse's draws are keyed by (seed, rule, index), so the
/// resulting set of synapses is the same for every n_vp and n_threads;
/// n_vp only changes the grouping inside each source's run.
inline TargetTable build_connectivity(const NetworkSpec& spec, std::uint32_t n_vp,
                                      unsigned n_threads = 1) {
  require_valid(spec);
  if (n_vp == 0) throw DomainError("n_vp must be >= 1");
  n_threads = std::max(1u, n_threads);
  const std::uint64_t n_neurons = spec.total_neurons();
  std::uint64_t total = 0;
  for (const auto& c : spec.connections) {
    if (c.total_synapses > std::numeric_limits<std::uint64_t>::max() - total) {
      throw CapacityError("synapse count overflows 64 bits");
    }
    total += c.total_synapses;
  }
  if (total > std::vector<Synapse>().max_size()) {
    throw CapacityError("synapse table does not fit in memory");
  }
  if (n_neurons >= std::numeric_limits<std::uint32_t>::max()) {
    throw CapacityError("neuron count overflows the 32-bit id space");
  }

  const auto samplers = detail::make_samplers(spec);
  // Global synapse index g enumerates rules in order; locate g's rule.
  std::vector<std::uint64_t> rule_start{0};
  for (const auto& c : spec.connections) rule_start.push_back(rule_start.back() + c.total_synapses);
  auto for_range = [&](std::uint64_t b, std::uint64_t e, auto&& fn) {
    for (std::size_t r = 0; r < samplers.size(); ++r) {
      const std::uint64_t lo = std::max(b, rule_start[r]);
      const std::uint64_t hi = std::min(e, rule_start[r + 1]);
      for (std::uint64_t g = lo; g < hi; ++g) fn(samplers[r], g - rule_start[r]);
    }
  };

  // Pass 1: per-chunk source histograms.
  const unsigned chunks = total < 100000 ? 1u : n_threads;
  std::vector<std::vector<std::uint64_t>> counts(
      chunks, std::vector<std::uint64_t>(n_neurons, 0));
  detail::parallel_chunks(total, chunks, [&](unsigned c, std::uint64_t b, std::uint64_t e) {
    auto& hist = counts[c];
    for_range(b, e, [&](const detail::SynapseSampler& s, std::uint64_t i) {
      ++hist[s.source(i)];
    });
  });

  // Cursor of chunk c inside source run: source-major, chunk-minor, so each
  // source's run lists synapses in global (rule, index) order.
  std::vector<std::uint64_t> source_offsets(n_neurons + 1, 0);
  std::uint64_t pos = 0;
  for (std::uint64_t src = 0; src < n_neurons; ++src) {
    source_offsets[src] = pos;
    for (unsigned c = 0; c < chunks; ++c) {
      const auto n = counts[c][src];
      counts[c][src] = pos;
      pos += n;
    }
  }
  source_offsets[n_neurons] = pos;

  // Pass 2: fill.
  std::vector<Synapse> entries(total);
  detail::parallel_chunks(total, chunks, [&](unsigned c, std::uint64_t b, std::uint64_t e) {
    auto& cursor = counts[c];
    for_range(b, e, [&](const detail::SynapseSampler& s, std::uint64_t i) {
      entries[cursor[s.source(i)]++] = s.synapse(i);
    });
  });
  counts.clear();

  std::vector<std::uint64_t> vp_offsets;
  detail::group_by_vp(entries, source_offsets, n_vp, n_threads, vp_offsets);
  return TargetTable(n_neurons, n_vp, std::move(vp_offsets), std::move(entries));
}

/// Same synapses, grouped for a different virtual-process count.
inline TargetTable regroup(const TargetTable& table, std::uint32_t n_vp,
                           unsigned n_threads = 1) {
  if (n_vp == 0) throw DomainError("n_vp must be >= 1");
  if (n_vp == table.n_vp()) return table;
  const std::size_t n = table.n_neurons();
  std::vector<std::uint64_t> source_offsets(n + 1);
  for (std::size_t src = 0; src <= n; ++src) {
    source_offsets[src] = table.offsets()[src * table.n_vp()];
  }
  std::vector<Synapse> entries = table.entries();
  std::vector<std::uint64_t> vp_offsets;
  detail::group_by_vp(entries, source_offsets, n_vp, std::max(1u, n_threads),
                      vp_offsets);
  return TargetTable(n, n_vp, std::move(vp_offsets), std::move(entries));
}

inline DegreeSummary degrees(const TargetTable& table) {
  DegreeSummary d;
  d.in_degree.assign(table.n_neurons(), 0);
  d.out_degree.assign(table.n_neurons(), 0);
  for (std::size_t src = 0; src < table.n_neurons(); ++src) {
    d.out_degree[src] = table.out_degree(src);
    for (const auto& s : table.out_edges(src)) ++d.in_degree[s.target];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Binary dump. Layout (all little-endian):
//   char[8]  magic "SNNTBL01"
//   u32      format version (1)
//   u32      n_vp
//   u64      n_neurons
//   u64      n_entries
//   u64      spec fingerprint (FNV-1a of the serialized spec)
//   u64[n_neurons * n_vp + 1] offsets
//   n_entries x { f64 weight, u32 target, u16 delay_steps, u8 channel, u8 pad }

inline constexpr std::uint32_t kTableFormatVersion = 1;

inline std::uint64_t spec_fingerprint(const NetworkSpec& spec) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : serialize_network_spec(spec)) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "table dump assumes a little-endian host");

template <class T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ConfigError("truncated synapse table file");
  return value;
}

}  // namespace detail

inline void dump_table(const TargetTable& table, std::uint64_t fingerprint,
                       const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out.write("SNNTBL01", 8);
    detail::write_pod(out, kTableFormatVersion);
    detail::write_pod(out, table.n_vp());
    detail::write_pod(out, static_cast<std::uint64_t>(table.n_neurons()));
    detail::write_pod(out, static_cast<std::uint64_t>(table.size()));
    detail::write_pod(out, fingerprint);
    out.write(reinterpret_cast<const char*>(table.offsets().data()),
              static_cast<std::streamsize>(table.offsets().size() * sizeof(std::uint64_t)));
    for (const auto& s : table.entries()) {
      detail::write_pod(out, s.weight);
      detail::write_pod(out, s.target);
      detail::write_pod(out, s.delay_steps);
      detail::write_pod(out, static_cast<std::uint8_t>(s.channel));
      detail::write_pod(out, std::uint8_t{0});
    }
    if (!out) throw ConfigError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

/// Loads a dumped table; throws ConfigError if the file is malformed or was
/// built from a different spec.
inline TargetTable load_table(const std::filesystem::path& path,
                              std::uint64_t expected_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "SNNTBL01", 8) != 0) {
    throw ConfigError("'" + path.string() + "' is not a synapse table");
  }
  if (detail::read_pod<std::uint32_t>(in) != kTableFormatVersion) {
    throw ConfigError("unsupported synapse table version");
  }
  const auto n_vp = detail::read_pod<std::uint32_t>(in);
  const auto n_neurons = detail::read_pod<std::uint64_t>(in);
  const auto n_entries = detail::read_pod<std::uint64_t>(in);
  if (detail::read_pod<std::uint64_t>(in) != expected_fingerprint) {
    throw ConfigError("synapse table was built from a different network spec");
  }
  if (n_vp == 0) throw ConfigError("synapse table has n_vp = 0");
  std::vector<std::uint64_t> offsets(n_neurons * n_vp + 1);
  in.read(reinterpret_cast<char*>(offsets.data()),
          static_cast<std::streamsize>(offsets.size() * sizeof(std::uint64_t)));
  if (!in || offsets.back() != n_entries) throw ConfigError("corrupt synapse table offsets");
  std::vector<Synapse> entries(n_entries);
  for (auto& s : entries) {
    s.weight = detail::read_pod<double>(in);
    s.target = detail::read_pod<std::uint32_t>(in);
    s.delay_steps = detail::read_pod<std::uint16_t>(in);
    s.channel = static_cast<Channel>(detail::read_pod<std::uint8_t>(in));
    detail::read_pod<std::uint8_t>(in);
  }
  return TargetTable(n_neurons, n_vp, std::move(offsets), std::move(entries));
}

}  // namespace snnbench
