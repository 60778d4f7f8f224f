#pragma once

// Strong-scaling sweeps: a fixed network simulated at increasing thread
// counts under one placement scheme.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "snnbench/connectivity.hpp"
#include "snnbench/engine.hpp"
#include "snnbench/io.hpp"
#include "snnbench/metrics.hpp"
#include "snnbench/model.hpp"
#include "snnbench/placement.hpp"

namespace snnbench {

struct BenchmarkConfig {
  std::filesystem::path spec_path;
  std::vector<int> thread_counts{1};
  Scheme scheme = Scheme::sequential;
  TopologyModel topology;
  double t_model = 1.0;      // s
  double t_transient = 0.1;  // s
  int repetitions = 1;
  std::filesystem::path output_path = "scaling.csv";

  void check() const {
    topology.check();
    if (thread_counts.empty()) throw ConfigError("sweep needs at least one thread count");
    for (int n : thread_counts) {
      if (n < 1 || n > topology.total_cores()) {
        throw ConfigError("thread count " + std::to_string(n) + " outside [1, " +
                          std::to_string(topology.total_cores()) + "]");
      }
    }
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (!(t_model > 0.0)) throw ConfigError("t_model must be > 0");
    if (!(t_transient >= 0.0)) throw ConfigError("t_transient must be >= 0");
  }
};

/// Sweep config document. Relative spec/output paths resolve against
/// `base_dir` (normally the config file's directory).
inline BenchmarkConfig parse_benchmark_config(std::string_view document,
                                              const std::filesystem::path& base_dir = {}) {
  using nlohmann::json;
  const json root = detail::parse_json_document(document);
  detail::require_object(root, "<root>");
  detail::reject_unknown_keys(root, "",
                              {"spec", "threads", "scheme", "topology", "t_model_s",
                               "t_transient_s", "repetitions", "output"});
  BenchmarkConfig cfg;
  cfg.spec_path = base_dir / detail::get_string(root, "", "spec");
  const json& threads = detail::require(root, "", "threads");
  if (!threads.is_array()) throw ConfigError("field 'threads' must be an array");
  cfg.thread_counts.clear();
  for (const auto& t : threads) {
    if (!t.is_number_unsigned()) throw ConfigError("field 'threads' must hold positive integers");
    cfg.thread_counts.push_back(t.get<int>());
  }
  if (root.contains("scheme")) cfg.scheme = parse_scheme(detail::get_string(root, "", "scheme"));
  if (root.contains("topology")) {
    const json& t = detail::require_object(root["topology"], "topology");
    detail::reject_unknown_keys(t, "topology",
                                {"sockets", "chiplets_per_socket", "ccx_per_chiplet", "cores_per_ccx"});
    auto count = [&](const char* key, int fallback) {
      return t.contains(key) ? static_cast<int>(detail::get_count(t, "topology", key)) : fallback;
    };
    cfg.topology = {count("sockets", 2), count("chiplets_per_socket", 8),
                    count("ccx_per_chiplet", 2), count("cores_per_ccx", 4)};
  }
  cfg.t_model = detail::get_number_or(root, "", "t_model_s", cfg.t_model);
  cfg.t_transient = detail::get_number_or(root, "", "t_transient_s", cfg.t_transient);
  if (root.contains("repetitions")) {
    cfg.repetitions = static_cast<int>(detail::get_count(root, "", "repetitions"));
  }
  if (root.contains("output")) cfg.output_path = base_dir / detail::get_string(root, "", "output");
  cfg.check();
  return cfg;
}

struct ScalingRow {
  int n_threads = 0;
  Scheme scheme = Scheme::sequential;
  int rep = 0;
  double t_wall = 0.0;
  double rtf = 0.0;
  PhaseFractions fractions;
  std::uint64_t spikes = 0;
  std::uint64_t syn_events = 0;
  bool pinned = false;
  std::string error;  // empty on success; not serialized

  bool operator==(const ScalingRow& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return n_threads == o.n_threads && scheme == o.scheme && rep == o.rep &&
           same(t_wall, o.t_wall) && same(rtf, o.rtf) &&
           same(fractions.f_update, o.fractions.f_update) &&
           same(fractions.f_deliver, o.fractions.f_deliver) &&
           same(fractions.f_communicate, o.fractions.f_communicate) &&
           same(fractions.f_other, o.fractions.f_other) && spikes == o.spikes &&
           syn_events == o.syn_events && pinned == o.pinned;
  }
};

/// Runs every (thread count, repetition) in order on `spec` with the
/// config's model and transient times. Connectivity is built once and only
/// regrouped per thread count; instantiation is never timed. A failed run
/// yields a row with NaN measurements and `error` set.
inline std::vector<ScalingRow> run_sweep(const BenchmarkConfig& cfg, NetworkSpec spec,
                                         std::ostream* log = nullptr) {
  cfg.check();
  spec.grid.t_model = cfg.t_model * 1000.0;
  spec.grid.t_transient = cfg.t_transient * 1000.0;
  require_valid(spec);
  const TargetTable base = build_connectivity(spec, 1);

  std::vector<ScalingRow> rows;
  for (int n : cfg.thread_counts) {
    const auto plan = make_plan(cfg.topology, cfg.scheme, n);
    const TargetTable table = regroup(base, static_cast<std::uint32_t>(n));
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      ScalingRow row;
      row.n_threads = n;
      row.scheme = cfg.scheme;
      row.rep = rep;
      try {
        RunOptions opt;
        opt.n_vp = static_cast<std::uint32_t>(n);
        opt.record_spikes = false;
        opt.cpus = plan.cores;
        const RunResult run = run_simulation(spec, table, opt);
        row.t_wall = run.timers.t_total;
        row.rtf = rtf(run.timers.t_total, cfg.t_model);
        row.fractions = phase_fractions(run.timers);
        row.spikes = run.counts.spikes_emitted;
        row.syn_events = run.counts.synaptic_events_delivered;
        row.pinned = run.pinned;
      } catch (const std::exception& e) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.t_wall = row.rtf = nan;
        row.fractions = {nan, nan, nan, nan};
        row.error = e.what();
      }
      if (log) {
        *log << "threads=" << n << " rep=" << rep;
        if (row.error.empty()) {
          *log << " t_wall=" << row.t_wall << "s rtf=" << row.rtf << " spikes=" << row.spikes;
        } else {
          *log << " error: " << row.error;
        }
        *log << (row.pinned ? "" : " (unpinned)") << '\n';
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline std::vector<ScalingRow> run_sweep(const BenchmarkConfig& cfg, std::ostream* log = nullptr) {
  return run_sweep(cfg, load_network_spec_file(cfg.spec_path), log);
}

inline constexpr std::string_view kScalingHeader =
    "n_threads,scheme,rep,t_wall_s,rtf,f_update,f_deliver,f_communicate,f_other,spikes,syn_events,"
    "pinned";

inline std::string emit_scaling_table(const std::vector<ScalingRow>& rows) {
  std::string out(kScalingHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.n_threads) + ',' + std::string(to_string(r.scheme)) + ',' +
           std::to_string(r.rep) + ',' + format_double(r.t_wall) + ',' + format_double(r.rtf) +
           ',' + format_double(r.fractions.f_update) + ',' +
           format_double(r.fractions.f_deliver) + ',' +
           format_double(r.fractions.f_communicate) + ',' +
           format_double(r.fractions.f_other) + ',' + std::to_string(r.spikes) + ',' +
           std::to_string(r.syn_events) + ',' + (r.pinned ? "true" : "false") + '\n';
  }
  return out;
}

inline std::vector<ScalingRow> parse_scaling_table(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != kScalingHeader) {
    throw ConfigError("scaling table has an unexpected header");
  }
  std::vector<ScalingRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 12) throw ConfigError("scaling table row has " + std::to_string(f.size()) + " fields");
    ScalingRow r;
    try {
      r.n_threads = std::stoi(f[0]);
      r.scheme = parse_scheme(f[1]);
      r.rep = std::stoi(f[2]);
      r.t_wall = std::stod(f[3]);
      r.rtf = std::stod(f[4]);
      r.fractions = {std::stod(f[5]), std::stod(f[6]), std::stod(f[7]), std::stod(f[8])};
      r.spikes = std::stoull(f[9]);
      r.syn_events = std::stoull(f[10]);
    } catch (const std::logic_error&) {
      throw ConfigError("scaling table row is not numeric: " + line);
    }
    if (f[11] != "true" && f[11] != "false") throw ConfigError("bad pinned flag: " + f[11]);
    r.pinned = f[11] == "true";
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace snnbench
