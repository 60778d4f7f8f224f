#pragma once

// Network description: simulation grid, neuron parameters, populations and
// fixed-total-count connection rules, plus the JSON document format they are
// loaded from. See docs/formats.md for the schema.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "snnbench/error.hpp"

namespace snnbench {

/// Time grid of a simulation. All times in ms.
struct SimulationGrid {
  double h = 0.1;
  double t_model = 0.0;
  double t_transient = 0.0;
  double min_delay = 0.1;
  double max_delay = 0.1;

  bool operator==(const SimulationGrid&) const = default;
};

/// Current-based LIF neuron with exponentially decaying synaptic currents.
/// Potentials in mV, times in ms, capacitance in pF, currents in pA.
struct NeuronParams {
  double tau_m = 10.0;
  double C_m = 250.0;
  double E_L = -65.0;
  double V_th = -50.0;
  double V_reset = -65.0;
  double t_ref = 2.0;
  double tau_syn_ex = 0.5;
  double tau_syn_in = 0.5;
  double I_e = 0.0;  // constant DC input current

  bool operator==(const NeuronParams&) const = default;
};

/// Normal distribution of initial membrane potentials.
struct InitialVoltage {
  double mean = -65.0;
  double sd = 0.0;

  bool operator==(const InitialVoltage&) const = default;
};

struct PopulationSpec {
  std::string name;
  std::uint64_t size = 0;
  NeuronParams params;
  double ext_rate = 0.0;           // spikes/s per external source
  std::uint64_t ext_indegree = 0;  // independent external sources per neuron
  double ext_weight = 0.0;         // pA
  std::optional<InitialVoltage> v_init;  // defaults to E_L

  bool operator==(const PopulationSpec&) const = default;
};

enum class Sign { excitatory, inhibitory };

/// `total_synapses` (source, target) pairs drawn uniformly from the two
/// populations. `weight_mean` is the magnitude; the sign comes from `sign`.
struct ConnectionRule {
  std::string source;
  std::string target;
  std::uint64_t total_synapses = 0;
  double weight_mean = 0.0;
  double weight_sd = 0.0;
  double delay_mean = 0.1;
  double delay_sd = 0.0;
  Sign sign = Sign::excitatory;

  bool operator==(const ConnectionRule&) const = default;
};

struct NetworkSpec {
  SimulationGrid grid;
  std::vector<PopulationSpec> populations;
  std::vector<ConnectionRule> connections;
  std::uint64_t seed = 0;

  bool operator==(const NetworkSpec&) const = default;

  std::uint64_t total_neurons() const noexcept {
    std::uint64_t n = 0;
    for (const auto& p : populations) n += p.size;
    return n;
  }

  std::uint64_t total_synapses() const noexcept {
    std::uint64_t n = 0;
    for (const auto& c : connections) n += c.total_synapses;
    return n;
  }

  /// First global neuron id of each population; ids are assigned to
  /// populations in declaration order.
  std::vector<std::uint64_t> population_offsets() const {
    std::vector<std::uint64_t> offsets;
    offsets.reserve(populations.size());
    std::uint64_t next = 0;
    for (const auto& p : populations) {
      offsets.push_back(next);
      next += p.size;
    }
    return offsets;
  }

  std::optional<std::size_t> find_population(std::string_view name) const {
    for (std::size_t i = 0; i < populations.size(); ++i) {
      if (populations[i].name == name) return i;
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Grid arithmetic

namespace detail {
inline bool on_grid(double value, double h) {
  const double ratio = value / h;
  return std::fabs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio);
}
}  // namespace detail

/// Number of grid steps in `ms`, rounded to the nearest step.
inline std::int64_t to_steps(double ms, double h) {
  return static_cast<std::int64_t>(std::llround(ms / h));
}

/// Steps a neuron stays refractory: ceil(t_ref / h), tolerant of rounding.
inline std::int32_t refractory_steps(double t_ref, double h) {
  return static_cast<std::int32_t>(std::ceil(t_ref / h - 1e-9));
}

// ---------------------------------------------------------------------------
// JSON document

namespace detail {

using nlohmann::json;

inline std::string join_path(const std::string& ctx, const std::string& key) {
  return ctx.empty() ? key : ctx + "." + key;
}

inline void reject_unknown_keys(const json& obj, const std::string& ctx,
                                std::initializer_list<std::string_view> keys) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto k : keys) known = known || (k == key);
    if (!known) {
      throw ConfigError("unknown key '" + join_path(ctx, key) + "'");
    }
  }
}

inline const json& require(const json& obj, const std::string& ctx,
                           const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError("missing required field '" + join_path(ctx, key) + "'");
  }
  return *it;
}

inline const json& require_object(const json& value, const std::string& ctx) {
  if (!value.is_object()) {
    throw ConfigError("field '" + ctx + "' must be an object");
  }
  return value;
}

inline double get_number(const json& obj, const std::string& ctx,
                         const char* key) {
  const json& v = require(obj, ctx, key);
  if (!v.is_number()) {
    throw ConfigError("field '" + join_path(ctx, key) + "' must be a number");
  }
  return v.get<double>();
}

inline double get_number_or(const json& obj, const std::string& ctx,
                            const char* key, double fallback) {
  return obj.contains(key) ? get_number(obj, ctx, key) : fallback;
}

inline std::uint64_t get_count(const json& obj, const std::string& ctx,
                               const char* key) {
  const json& v = require(obj, ctx, key);
  if (!v.is_number_unsigned()) {
    throw ConfigError("field '" + join_path(ctx, key) +
                      "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string get_string(const json& obj, const std::string& ctx,
                              const char* key) {
  const json& v = require(obj, ctx, key);
  if (!v.is_string()) {
    throw ConfigError("field '" + join_path(ctx, key) + "' must be a string");
  }
  return v.get<std::string>();
}

inline NeuronParams parse_params(const json& j, const std::string& ctx) {
  require_object(j, ctx);
  reject_unknown_keys(j, ctx,
                      {"tau_m", "C_m", "E_L", "V_th", "V_reset", "t_ref",
                       "tau_syn_ex", "tau_syn_in", "I_e"});
  NeuronParams p;
  p.tau_m = get_number(j, ctx, "tau_m");
  p.C_m = get_number(j, ctx, "C_m");
  p.E_L = get_number(j, ctx, "E_L");
  p.V_th = get_number(j, ctx, "V_th");
  p.V_reset = get_number(j, ctx, "V_reset");
  p.t_ref = get_number(j, ctx, "t_ref");
  p.tau_syn_ex = get_number(j, ctx, "tau_syn_ex");
  p.tau_syn_in = get_number(j, ctx, "tau_syn_in");
  p.I_e = get_number_or(j, ctx, "I_e", 0.0);
  return p;
}

inline json params_to_json(const NeuronParams& p) {
  return json{{"tau_m", p.tau_m},           {"C_m", p.C_m},
              {"E_L", p.E_L},               {"V_th", p.V_th},
              {"V_reset", p.V_reset},       {"t_ref", p.t_ref},
              {"tau_syn_ex", p.tau_syn_ex}, {"tau_syn_in", p.tau_syn_in},
              {"I_e", p.I_e}};
}

/// 1-based line and column of a byte offset in `text`.
inline std::pair<std::size_t, std::size_t> line_column(std::string_view text,
                                                       std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

inline json parse_json_document(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // nlohmann reports the byte just past the offending token
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    const auto [line, column] = line_column(text, byte);
    std::string what = e.what();
    if (auto pos = what.find("parse error"); pos != std::string::npos) {
      what = what.substr(pos);
    }
    throw ConfigError("line " + std::to_string(line) + ", column " +
                      std::to_string(column) + ": " + what);
  }
}

}  // namespace detail

/// Parses a network spec document. Throws ConfigError naming the offending
/// line (syntax) or field (schema). Unknown keys are rejected.
inline NetworkSpec load_network_spec(std::string_view document) {
  using detail::get_count;
  using detail::get_number;
  using detail::get_string;
  using nlohmann::json;

  const json root = detail::parse_json_document(document);
  detail::require_object(root, "<root>");
  detail::reject_unknown_keys(root, "",
                              {"grid", "populations", "connections", "seed"});

  NetworkSpec spec;
  const json& grid = detail::require_object(detail::require(root, "", "grid"),
                                            "grid");
  detail::reject_unknown_keys(
      grid, "grid", {"h", "t_model", "t_transient", "min_delay", "max_delay"});
  spec.grid.h = get_number(grid, "grid", "h");
  spec.grid.t_model = get_number(grid, "grid", "t_model");
  spec.grid.t_transient = get_number(grid, "grid", "t_transient");
  spec.grid.min_delay = get_number(grid, "grid", "min_delay");
  spec.grid.max_delay = get_number(grid, "grid", "max_delay");

  const json& pops = detail::require(root, "", "populations");
  if (!pops.is_array()) throw ConfigError("field 'populations' must be an array");
  for (std::size_t i = 0; i < pops.size(); ++i) {
    const std::string ctx = "populations[" + std::to_string(i) + "]";
    const json& p = detail::require_object(pops[i], ctx);
    detail::reject_unknown_keys(p, ctx,
                                {"name", "size", "params", "ext_rate",
                                 "ext_indegree", "ext_weight", "v_init"});
    PopulationSpec pop;
    pop.name = get_string(p, ctx, "name");
    pop.size = get_count(p, ctx, "size");
    pop.params = detail::parse_params(detail::require(p, ctx, "params"),
                                      ctx + ".params");
    pop.ext_rate = detail::get_number_or(p, ctx, "ext_rate", 0.0);
    pop.ext_indegree =
        p.contains("ext_indegree") ? get_count(p, ctx, "ext_indegree") : 0;
    pop.ext_weight = detail::get_number_or(p, ctx, "ext_weight", 0.0);
    if (p.contains("v_init")) {
      const std::string vctx = ctx + ".v_init";
      const json& v = detail::require_object(p["v_init"], vctx);
      detail::reject_unknown_keys(v, vctx, {"mean", "sd"});
      pop.v_init = InitialVoltage{get_number(v, vctx, "mean"),
                                  detail::get_number_or(v, vctx, "sd", 0.0)};
    }
    spec.populations.push_back(std::move(pop));
  }

  const json& conns = detail::require(root, "", "connections");
  if (!conns.is_array()) throw ConfigError("field 'connections' must be an array");
  for (std::size_t i = 0; i < conns.size(); ++i) {
    const std::string ctx = "connections[" + std::to_string(i) + "]";
    const json& c = detail::require_object(conns[i], ctx);
    detail::reject_unknown_keys(
        c, ctx,
        {"source", "target", "total_synapses", "weight_mean", "weight_sd",
         "delay_mean", "delay_sd", "sign"});
    ConnectionRule rule;
    rule.source = get_string(c, ctx, "source");
    rule.target = get_string(c, ctx, "target");
    for (const auto* name : {&rule.source, &rule.target}) {
      if (!spec.find_population(*name)) {
        throw ConfigError("field '" + ctx + "' names unknown population '" +
                          *name + "'");
      }
    }
    rule.total_synapses = get_count(c, ctx, "total_synapses");
    rule.weight_mean = get_number(c, ctx, "weight_mean");
    rule.weight_sd = detail::get_number_or(c, ctx, "weight_sd", 0.0);
    rule.delay_mean = get_number(c, ctx, "delay_mean");
    rule.delay_sd = detail::get_number_or(c, ctx, "delay_sd", 0.0);
    const std::string sign = get_string(c, ctx, "sign");
    if (sign == "excitatory") {
      rule.sign = Sign::excitatory;
    } else if (sign == "inhibitory") {
      rule.sign = Sign::inhibitory;
    } else {
      throw ConfigError("field '" + ctx +
                        ".sign' must be \"excitatory\" or \"inhibitory\"");
    }
    spec.connections.push_back(std::move(rule));
  }

  spec.seed = get_count(root, "", "seed");
  return spec;
}

inline NetworkSpec load_network_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open network spec '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return load_network_spec(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline nlohmann::json network_spec_to_json(const NetworkSpec& spec) {
  using nlohmann::json;
  json pops = json::array();
  for (const auto& p : spec.populations) {
    json jp{{"name", p.name},
            {"size", p.size},
            {"params", detail::params_to_json(p.params)},
            {"ext_rate", p.ext_rate},
            {"ext_indegree", p.ext_indegree},
            {"ext_weight", p.ext_weight}};
    if (p.v_init) jp["v_init"] = {{"mean", p.v_init->mean}, {"sd", p.v_init->sd}};
    pops.push_back(std::move(jp));
  }
  json conns = json::array();
  for (const auto& c : spec.connections) {
    conns.push_back(
        {{"source", c.source},
         {"target", c.target},
         {"total_synapses", c.total_synapses},
         {"weight_mean", c.weight_mean},
         {"weight_sd", c.weight_sd},
         {"delay_mean", c.delay_mean},
         {"delay_sd", c.delay_sd},
         {"sign", c.sign == Sign::excitatory ? "excitatory" : "inhibitory"}});
  }
  return json{{"grid",
               {{"h", spec.grid.h},
                {"t_model", spec.grid.t_model},
                {"t_transient", spec.grid.t_transient},
                {"min_delay", spec.grid.min_delay},
                {"max_delay", spec.grid.max_delay}}},
              {"populations", std::move(pops)},
              {"connections", std::move(conns)},
              {"seed", spec.seed}};
}

inline std::string serialize_network_spec(const NetworkSpec& spec) {
  return network_spec_to_json(spec).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation

/// Checks every invariant of the spec. Returns the list of violations; an
/// empty list means the spec is valid.
inline std::vector<std::string> validate(const NetworkSpec& spec) {
  std::vector<std::string> out;
  const auto& g = spec.grid;
  const double h = g.h;

  if (!(h > 0.0)) {
    out.push_back("grid.h must be > 0");
    return out;  // every later check divides by h
  }
  if (!(g.t_model >= 0.0)) out.push_back("grid.t_model must be >= 0");
  if (!(g.t_transient >= 0.0)) out.push_back("grid.t_transient must be >= 0");
  if (!detail::on_grid(g.t_model, h)) {
    out.push_back("grid.t_model is not a multiple of the grid step");
  }
  if (!detail::on_grid(g.t_transient, h)) {
    out.push_back("grid.t_transient is not a multiple of the grid step");
  }
  if (g.min_delay < h - 1e-12) {
    out.push_back("grid.min_delay: delay below grid step");
  } else if (!detail::on_grid(g.min_delay, h)) {
    out.push_back("grid.min_delay is not a multiple of the grid step");
  }
  if (g.max_delay < g.min_delay) {
    out.push_back("grid.max_delay must be >= grid.min_delay");
  } else if (!detail::on_grid(g.max_delay, h)) {
    out.push_back("grid.max_delay is not a multiple of the grid step");
  }
  if (to_steps(g.max_delay, h) > std::numeric_limits<std::uint16_t>::max()) {
    out.push_back("grid.max_delay exceeds 65535 steps");
  }

  std::set<std::string> names;
  for (std::size_t i = 0; i < spec.populations.size(); ++i) {
    const auto& pop = spec.populations[i];
    const std::string ctx = "population '" + pop.name + "'";
    if (pop.name.empty()) out.push_back("populations[" + std::to_string(i) + "]: empty name");
    if (!names.insert(pop.name).second) out.push_back(ctx + ": duplicate name");
    const auto& p = pop.params;
    if (!(p.tau_m > 0.0)) out.push_back(ctx + ": tau_m must be > 0");
    if (!(p.tau_syn_ex > 0.0)) out.push_back(ctx + ": tau_syn_ex must be > 0");
    if (!(p.tau_syn_in > 0.0)) out.push_back(ctx + ": tau_syn_in must be > 0");
    if (!(p.C_m > 0.0)) out.push_back(ctx + ": C_m must be > 0");
    if (!(p.V_reset < p.V_th)) out.push_back(ctx + ": V_reset must be < V_th");
    if (!(p.t_ref >= 0.0)) {
      out.push_back(ctx + ": t_ref must be >= 0");
    } else if (!detail::on_grid(p.t_ref, h)) {
      out.push_back(ctx + ": t_ref is not a multiple of the grid step");
    }
    if (!(pop.ext_rate >= 0.0)) out.push_back(ctx + ": ext_rate must be >= 0");
    if (pop.v_init && !(pop.v_init->sd >= 0.0)) {
      out.push_back(ctx + ": v_init.sd must be >= 0");
    }
  }
  if (spec.total_neurons() >= std::numeric_limits<std::uint32_t>::max()) {
    out.push_back("total neuron count exceeds the 32-bit id space");
  }

  // Delay steps the connection rules can realize: a rule with delay_sd > 0
  // can hit both clip bounds, a fixed-delay rule realizes exactly one value.
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  const std::int64_t min_steps = to_steps(g.min_delay, h);
  const std::int64_t max_steps = to_steps(g.max_delay, h);
  for (std::size_t i = 0; i < spec.connections.size(); ++i) {
    const auto& c = spec.connections[i];
    const std::string ctx = "connections[" + std::to_string(i) + "] (" +
                            c.source + " -> " + c.target + ")";
    const auto src = spec.find_population(c.source);
    const auto tgt = spec.find_population(c.target);
    if (!src) out.push_back(ctx + ": unknown population '" + c.source + "'");
    if (!tgt) out.push_back(ctx + ": unknown population '" + c.target + "'");
    if (src && tgt && c.total_synapses > 0 &&
        (spec.populations[*src].size == 0 || spec.populations[*tgt].size == 0)) {
      out.push_back(ctx + ": synapses requested between empty populations");
    }
    if (!(c.weight_mean >= 0.0)) {
      out.push_back(ctx + ": weight_mean is a magnitude and must be >= 0");
    }
    if (!(c.weight_sd >= 0.0)) out.push_back(ctx + ": weight_sd must be >= 0");
    if (!(c.delay_sd >= 0.0)) out.push_back(ctx + ": delay_sd must be >= 0");
    if (c.delay_mean < h - 1e-12) {
      out.push_back(ctx + ": delay below grid step");
      continue;
    }
    if (c.total_synapses == 0) continue;
    if (c.delay_sd > 0.0) {
      lo = std::min(lo, min_steps);
      hi = std::max(hi, max_steps);
    } else {
      const std::int64_t d = to_steps(c.delay_mean, h);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (lo <= hi) {
    if (lo != min_steps) {
      out.push_back("grid.min_delay does not equal the smallest realizable delay (" +
                    std::to_string(static_cast<double>(lo) * h) + " ms)");
    }
    if (hi != max_steps) {
      out.push_back("grid.max_delay does not equal the largest realizable delay (" +
                    std::to_string(static_cast<double>(hi) * h) + " ms)");
    }
  }
  return out;
}

/// Throws ConfigError listing all violations if the spec is invalid.
inline void require_valid(const NetworkSpec& spec) {
  const auto violations = validate(spec);
  if (violations.empty()) return;
  std::string msg = "invalid network spec:";
  for (const auto& v : violations) msg += "\n  " + v;
  throw ConfigError(msg);
}

/// Downscaled copy of a network: population sizes scale by `size_scale`,
/// per-neuron in-degrees by `indegree_scale` (so synapse totals scale by
/// the product). External drive is left unchanged.
inline NetworkSpec scale_network(NetworkSpec spec, double size_scale,
                                 double indegree_scale) {
  if (!(size_scale > 0.0) || !(indegree_scale > 0.0)) {
    throw DomainError("scale factors must be > 0");
  }
  for (auto& p : spec.populations) {
    p.size = static_cast<std::uint64_t>(
        std::llround(static_cast<double>(p.size) * size_scale));
  }
  for (auto& c : spec.connections) {
    c.total_synapses = static_cast<std::uint64_t>(std::llround(
        static_cast<double>(c.total_synapses) * size_scale * indegree_scale));
  }
  return spec;
}

}  // namespace snnbench
