#pragma once

// On-disk formats: spike files with their metadata sidecar, JSON reports and
// raster CSV. Layouts are documented in docs/formats.md.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unistd.h>

#include "json.hpp"
#include "snnbench/engine.hpp"
#include "snnbench/error.hpp"
#include "snnbench/metrics.hpp"

namespace snnbench {

inline constexpr int kReportSchemaVersion = 1;

/// Writes `content` to a temporary file next to `path`, then renames it over
/// `path`, so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Spike files: one `step<TAB>neuron` line per event, sorted.

inline std::string format_spikes(const SpikeRecord& record) {
  std::string out;
  out.reserve(record.events.size() * 12);
  for (const auto& e : record.events) {
    out += std::to_string(e.step);
    out += '\t';
    out += std::to_string(e.neuron);
    out += '\n';
  }
  return out;
}

inline nlohmann::json spike_metadata(const SpikeRecord& record) {
  nlohmann::json pops = nlohmann::json::array();
  for (const auto& p : record.populations) {
    pops.push_back({{"name", p.name}, {"first", p.first}, {"size", p.size}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"h", record.h},
          {"first_step", record.first_step},
          {"n_steps", record.n_steps},
          {"n_events", record.events.size()},
          {"populations", std::move(pops)}};
}

inline std::filesystem::path metadata_path(const std::filesystem::path& spikes) {
  auto meta = spikes;
  meta.replace_extension(".meta.json");
  return meta;
}

inline void write_spike_file(const std::filesystem::path& path, const SpikeRecord& record) {
  write_file_atomic(path, format_spikes(record));
  write_file_atomic(metadata_path(path), spike_metadata(record).dump(2) + "\n");
}

inline std::vector<SpikeEvent> parse_spikes(std::string_view text) {
  std::vector<SpikeEvent> events;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    SpikeEvent e;
    const auto r1 = tab == std::string_view::npos
                        ? std::from_chars_result{line.data(), std::errc::invalid_argument}
                        : std::from_chars(line.data(), line.data() + tab, e.step);
    const auto r2 = r1.ec == std::errc{}
                        ? std::from_chars(line.data() + tab + 1, line.data() + line.size(), e.neuron)
                        : r1;
    if (r2.ec != std::errc{} || r2.ptr != line.data() + line.size() || r1.ptr != line.data() + tab) {
      throw ConfigError("spike file line " + std::to_string(line_no) + ": expected 'step<TAB>neuron'");
    }
    events.push_back(e);
  }
  if (!std::is_sorted(events.begin(), events.end())) {
    throw ConfigError("spike file is not sorted by (step, neuron)");
  }
  return events;
}

/// Spike file plus the window implied by `spec` (transient excluded).
inline SpikeRecord read_spike_file(const std::filesystem::path& path, const NetworkSpec& spec) {
  SpikeRecord record;
  record.events = parse_spikes(read_file(path));
  record.h = spec.grid.h;
  record.first_step = to_steps(spec.grid.t_transient, spec.grid.h);
  record.n_steps = to_steps(spec.grid.t_model, spec.grid.h);
  record.populations = population_ranges(spec);
  const auto n = spec.total_neurons();
  for (const auto& e : record.events) {
    if (e.neuron >= n || e.step < record.first_step || e.step >= record.first_step + record.n_steps) {
      throw ConfigError("spike file event (" + std::to_string(e.step) + ", " +
                        std::to_string(e.neuron) + ") lies outside the spec's network or window");
    }
  }
  return record;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json timers_json(const RunResult& run) {
  const auto& t = run.timers;
  return {{"schema_version", kReportSchemaVersion},
          {"t_update", t.t_update},
          {"t_deliver", t.t_deliver},
          {"t_communicate", t.t_communicate},
          {"t_other", t.t_other},
          {"t_total", t.t_total},
          {"n_vp", run.n_vp},
          {"pinned", run.pinned},
          {"spikes", run.counts.spikes_emitted},
          {"syn_events", run.counts.synaptic_events_delivered},
          {"wall_start_epoch_s", run.wall_start_epoch_s},
          {"wall_end_epoch_s", run.wall_end_epoch_s}};
}

inline nlohmann::json rtf_json(const RtfReport& r) {
  return {{"schema_version", kReportSchemaVersion},
          {"t_wall", r.t_wall},
          {"t_model", r.t_model},
          {"rtf", r.rtf},
          {"f_update", r.fractions.f_update},
          {"f_deliver", r.fractions.f_deliver},
          {"f_communicate", r.fractions.f_communicate},
          {"f_other", r.fractions.f_other}};
}

inline nlohmann::json energy_json(const EnergyReport& r) {
  return {{"schema_version", kReportSchemaVersion},
          {"e_total", r.e_total},
          {"e_baseline_subtracted", r.e_baseline_subtracted},
          {"baseline", r.baseline},
          {"t0", r.t0},
          {"t1", r.t1},
          {"synaptic_events", r.synaptic_events},
          {"e_per_event", r.e_per_event}};
}

inline nlohmann::json stats_json(const std::vector<PopulationRate>& rates,
                                 const std::vector<NeuronCv>& cvs) {
  nlohmann::json jr = nlohmann::json::array();
  for (const auto& r : rates) {
    nlohmann::json entry{{"population", r.name}, {"empty", r.empty}};
    entry["rate"] = r.empty ? nlohmann::json(nullptr) : nlohmann::json(r.rate);
    jr.push_back(std::move(entry));
  }
  nlohmann::json jc = nlohmann::json::array();
  for (const auto& c : cvs) jc.push_back({{"neuron", c.neuron}, {"cv", c.cv}});
  return {{"schema_version", kReportSchemaVersion}, {"rates", std::move(jr)}, {"cv_isi", std::move(jc)}};
}

inline std::string format_raster_csv(const std::vector<RasterRow>& rows) {
  std::string out = "t_ms,row,population\n";
  for (const auto& r : rows) {
    out += format_double(r.t_ms) + ',' + std::to_string(r.row) + ',' + r.population + '\n';
  }
  return out;
}

}  // namespace snnbench
