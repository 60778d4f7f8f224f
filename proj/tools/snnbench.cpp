// snnbench: command-line front end.
//
//   snnbench simulate  --spec net.json [--threads N] [--out-dir DIR] ...
//   snnbench sweep     --config sweep.json [--threads 1,2,4] [--scheme distant]
//   snnbench placement --threads N [--scheme distant] [--sockets 2 ...]
//   snnbench energy    --power pdu.csv (--events N | --run-dir DIR) ...
//   snnbench stats     --spikes spikes.tsv --spec net.json ...
//
// Exit codes: 0 success, 1 domain error (bad input data), 2 usage error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "snnbench/snnbench.hpp"

namespace fs = std::filesystem;
using namespace snnbench;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

void add_topology_flags(CLI::App* cmd, TopologyModel& topo) {
  cmd->add_option("--sockets", topo.sockets, "Sockets per node")->check(CLI::PositiveNumber);
  cmd->add_option("--chiplets", topo.chiplets_per_socket, "Chiplets per socket")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--ccx", topo.ccx_per_chiplet, "Core complexes (shared L3) per chiplet")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--cores-per-ccx", topo.cores_per_ccx, "Cores per core complex")
      ->check(CLI::PositiveNumber);
}

struct SimulateArgs {
  std::string spec;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string placement = "none";
  std::string table;
  bool no_record = false;
  TopologyModel topo;
};

int run_simulate(const SimulateArgs& a) {
  NetworkSpec spec = load_network_spec_file(a.spec);
  if (a.seed) spec.seed = *a.seed;
  const auto violations = validate(spec);
  if (!violations.empty()) {
    std::cerr << "invalid network spec '" << a.spec << "':\n";
    for (const auto& v : violations) std::cerr << "  " << v << '\n';
    return kExitDomain;
  }

  RunOptions opt;
  opt.n_vp = a.threads;
  opt.record_spikes = !a.no_record;
  if (a.placement != "none") {
    opt.cpus = make_plan(a.topo, parse_scheme(a.placement), static_cast<int>(a.threads)).cores;
  }

  TargetTable table;
  const auto fingerprint = spec_fingerprint(spec);
  if (!a.table.empty() && fs::exists(a.table)) {
    table = load_table(a.table, fingerprint);
  } else {
    table = build_connectivity(spec, a.threads, a.threads);
    if (!a.table.empty()) dump_table(table, fingerprint, a.table);
  }

  const RunResult run = run_simulation(spec, table, opt);
  const fs::path out(a.out_dir);
  if (opt.record_spikes) write_spike_file(out / "spikes.tsv", run.record);
  write_file_atomic(out / "timers.json", timers_json(run).dump(2) + "\n");
  const RtfReport report = make_rtf_report(run.timers, spec.grid.t_model / 1000.0);
  write_file_atomic(out / "rtf.json", rtf_json(report).dump(2) + "\n");

  std::cout << "rtf " << format_double(report.rtf) << '\n';
  std::cerr << "spikes " << run.counts.spikes_emitted << ", synaptic events "
            << run.counts.synaptic_events_delivered << ", wall " << run.timers.t_total << " s"
            << (opt.cpus.empty() ? "" : (run.pinned ? ", pinned" : ", unpinned")) << '\n';
  return 0;
}

struct SweepArgs {
  std::string config;
  std::vector<int> threads;
  std::string scheme;
  std::optional<double> model_time;
  std::string output;
};

int run_sweep_cmd(const SweepArgs& a) {
  const fs::path config_path(a.config);
  BenchmarkConfig cfg = parse_benchmark_config(read_file(config_path), config_path.parent_path());
  if (!a.threads.empty()) cfg.thread_counts = a.threads;
  if (!a.scheme.empty()) cfg.scheme = parse_scheme(a.scheme);
  if (a.model_time) cfg.t_model = *a.model_time;
  if (!a.output.empty()) cfg.output_path = a.output;
  cfg.check();

  const auto rows = run_sweep(cfg, &std::cerr);
  const std::string csv = emit_scaling_table(rows);
  write_file_atomic(cfg.output_path, csv);
  std::cout << csv;
  return 0;
}

struct PlacementArgs {
  std::string scheme = "sequential";
  int threads = 1;
  TopologyModel topo;
};

int run_placement(const PlacementArgs& a) {
  const auto plan = make_plan(a.topo, parse_scheme(a.scheme), a.threads);
  std::cout << format_places(plan) << '\n' << format_json_array(plan) << '\n';
  return 0;
}

struct EnergyArgs {
  std::string power;
  std::optional<double> t0, t1;
  double baseline = 0.0;
  double shift = 1.0;
  std::optional<std::uint64_t> events;
  std::string run_dir;
  std::string out;
};

int run_energy(const EnergyArgs& a) {
  PowerTrace trace = align_power(parse_power_csv(read_file(a.power)), a.shift);
  double t0 = trace.start_time;
  double t1 = trace.end_time();
  std::uint64_t events = 0;
  if (!a.run_dir.empty()) {
    const auto timers = nlohmann::json::parse(read_file(fs::path(a.run_dir) / "timers.json"));
    events = timers.at("syn_events").get<std::uint64_t>();
    t0 = timers.at("wall_start_epoch_s").get<double>();
    t1 = timers.at("wall_end_epoch_s").get<double>();
  } else {
    events = *a.events;
  }
  if (a.t0) t0 = *a.t0;
  if (a.t1) t1 = *a.t1;
  const EnergyReport report = make_energy_report(trace, t0, t1, a.baseline, events);
  const std::string json = energy_json(report).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << json;
  } else {
    write_file_atomic(a.out, json);
  }
  return 0;
}

struct StatsArgs {
  std::string spikes;
  std::string spec;
  double fraction = 0.6;
  double window_ms = 200.0;
  std::optional<double> t_start_ms;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int run_stats(const StatsArgs& a) {
  const NetworkSpec spec = load_network_spec_file(a.spec);
  const SpikeRecord record = read_spike_file(a.spikes, spec);
  const double t0 = a.t_start_ms.value_or(record.window_start_ms());
  const auto rows = raster_export(record, spec, a.fraction, t0, t0 + a.window_ms, a.seed);
  const fs::path out(a.out_dir);
  write_file_atomic(out / "stats.json",
                    stats_json(population_rates(record, spec), cv_isi(record)).dump(2) + "\n");
  write_file_atomic(out / "raster.csv", format_raster_csv(rows));
  std::cerr << rows.size() << " raster rows\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network simulation and strong-scaling benchmark harness"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run one simulation and write spikes, timers and RTF");
  simulate->add_option("--spec", sim.spec, "Network spec JSON")->required();
  simulate->add_option("-n,--threads", sim.threads, "Virtual processes (worker threads)")
      ->check(CLI::Range(1u, kMaxVirtualProcesses));
  simulate->add_option("--seed", sim.seed, "Override the spec's master seed");
  simulate->add_option("--out-dir", sim.out_dir, "Directory for spikes.tsv, timers.json, rtf.json");
  simulate->add_option("--placement", sim.placement, "Pin workers: none, sequential or distant")
      ->check(CLI::IsMember({"none", "sequential", "distant"}));
  simulate->add_option("--table", sim.table, "Synapse table cache (loaded if present, else written)");
  simulate->add_flag("--no-record", sim.no_record, "Do not record spikes");
  add_topology_flags(simulate, sim.topo);

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Strong-scaling sweep over thread counts");
  sweep->add_option("--config", sw.config, "Sweep config JSON")->required();
  sweep->add_option("--threads", sw.threads, "Thread counts, comma separated")->delimiter(',');
  sweep->add_option("--scheme", sw.scheme, "Placement scheme")
      ->check(CLI::IsMember({"sequential", "distant"}));
  sweep->add_option("--model-time", sw.model_time, "Model time per run, s");
  sweep->add_option("--output", sw.output, "Scaling CSV path (overrides config)");

  PlacementArgs pl;
  auto* placement = app.add_subcommand("placement", "Print a thread placement plan");
  placement->add_option("--scheme", pl.scheme, "sequential or distant")
      ->check(CLI::IsMember({"sequential", "distant"}));
  placement->add_option("-n,--threads", pl.threads, "Number of threads")->required()
      ->check(CLI::NonNegativeNumber);
  add_topology_flags(placement, pl.topo);

  EnergyArgs en;
  auto* energy = app.add_subcommand("energy", "Energy per synaptic event from a 1 Hz power log");
  energy->add_option("--power", en.power, "Power log CSV: epoch_seconds,watts")->required();
  energy->add_option("--t0", en.t0, "Window start, epoch seconds");
  energy->add_option("--t1", en.t1, "Window end, epoch seconds");
  energy->add_option("--baseline", en.baseline, "Baseline power subtracted, W")
      ->check(CLI::NonNegativeNumber);
  energy->add_option("--shift", en.shift, "Meter delay compensation, s");
  auto* ev = energy->add_option("--events", en.events, "Synaptic event count");
  auto* rd = energy->add_option("--run-dir", en.run_dir, "Simulation output dir (reads timers.json)");
  ev->excludes(rd);
  energy->add_option("--out", en.out, "Report path (default: stdout)");

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Firing rates, ISI CV and raster data");
  stats->add_option("--spikes", st.spikes, "Spike file (step<TAB>neuron)")->required();
  stats->add_option("--spec", st.spec, "Network spec JSON of the run")->required();
  stats->add_option("--fraction", st.fraction, "Fraction of neurons per population in the raster")
      ->check(CLI::Range(0.0, 1.0));
  stats->add_option("--window-ms", st.window_ms, "Raster window length, ms")
      ->check(CLI::NonNegativeNumber);
  stats->add_option("--t-start-ms", st.t_start_ms, "Raster window start, ms (default: record start)");
  stats->add_option("--seed", st.seed, "Seed for the neuron selection");
  stats->add_option("--out-dir", st.out_dir, "Directory for stats.json and raster.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  if (energy->parsed() && !en.events && en.run_dir.empty()) {
    std::cerr << "energy: one of --events or --run-dir is required\n";
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim);
    if (sweep->parsed()) return run_sweep_cmd(sw);
    if (placement->parsed()) return run_placement(pl);
    if (energy->parsed()) return run_energy(en);
    if (stats->parsed()) return run_stats(st);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}
