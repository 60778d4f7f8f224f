#include <gtest/gtest.h>

#include <algorithm>

#include "snnbench/model.hpp"
#include "snnbench/rng.hpp"
#include "test_networks.hpp"

using namespace snnbench;

namespace {

const char* kMinimal = R"({
  "grid": {"h": 0.1, "t_model": 100.0, "t_transient": 0.0, "min_delay": 0.1, "max_delay": 0.1},
  "populations": [
    {"name": "A", "size": 0,
     "params": {"tau_m": 10, "C_m": 250, "E_L": -65, "V_th": -50, "V_reset": -65,
                "t_ref": 2, "tau_syn_ex": 0.5, "tau_syn_in": 0.5}}
  ],
  "connections": [],
  "seed": 1
})";

bool mentions(const std::vector<std::string>& violations, std::string_view needle) {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

std::string error_of(std::string_view doc) {
  try {
    load_network_spec(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(LoadNetworkSpec, MinimalEmptyNetwork) {
  const NetworkSpec spec = load_network_spec(kMinimal);
  ASSERT_EQ(spec.populations.size(), 1u);
  EXPECT_EQ(spec.populations[0].size, 0u);
  EXPECT_TRUE(spec.connections.empty());
  EXPECT_EQ(spec.total_neurons(), 0u);
  EXPECT_EQ(spec.populations[0].params.I_e, 0.0);
  EXPECT_TRUE(validate(spec).empty());
}

TEST(LoadNetworkSpec, UnknownPopulationIsNamed) {
  std::string doc = kMinimal;
  doc.replace(doc.find("\"connections\": []"), 17,
              R"("connections": [{"source": "A", "target": "L9E", "total_synapses": 1,
                  "weight_mean": 1, "delay_mean": 0.1, "sign": "excitatory"}])");
  const std::string err = error_of(doc);
  EXPECT_NE(err.find("L9E"), std::string::npos) << err;
}

TEST(LoadNetworkSpec, UnknownKeysRejected) {
  std::string doc = kMinimal;
  doc.replace(doc.find("\"seed\""), 6, "\"extra\": 3, \"seed\"");
  EXPECT_NE(error_of(doc).find("extra"), std::string::npos);

  std::string nested = kMinimal;
  nested.replace(nested.find("\"tau_m\""), 7, "\"tau_x\": 1, \"tau_m\"");
  EXPECT_NE(error_of(nested).find("populations[0].params.tau_x"), std::string::npos);
}

TEST(LoadNetworkSpec, SyntaxErrorReportsLine) {
  const std::string doc = "{\n  \"grid\": {\n    \"h\": 0.1,,\n  }\n}";
  const std::string err = error_of(doc);
  EXPECT_NE(err.find("line 3"), std::string::npos) << err;
}

TEST(LoadNetworkSpec, SchemaViolationsNameTheField) {
  std::string doc = kMinimal;
  doc.replace(doc.find("\"size\": 0"), 9, "\"size\": -4");
  EXPECT_NE(error_of(doc).find("populations[0].size"), std::string::npos);

  std::string missing = kMinimal;
  missing.replace(missing.find("\"seed\": 1"), 9, "\"seed\": \"x\"");
  EXPECT_NE(error_of(missing).find("seed"), std::string::npos);
}

TEST(LoadNetworkSpec, ShippedMicrocircuit) {
  const NetworkSpec spec =
      load_network_spec_file(std::string(SNNBENCH_SOURCE_DIR) + "/models/microcircuit.json");
  EXPECT_EQ(spec.populations.size(), 8u);
  // "about 80,000 neurons and 300 million synapses"
  EXPECT_NEAR(static_cast<double>(spec.total_neurons()), 80000.0, 0.05 * 80000.0);
  EXPECT_NEAR(static_cast<double>(spec.total_synapses()), 3e8, 0.05 * 3e8);
  EXPECT_DOUBLE_EQ(spec.grid.h, 0.1);
  EXPECT_DOUBLE_EQ(spec.grid.t_transient, 100.0);
  for (const auto& p : spec.populations) {
    EXPECT_DOUBLE_EQ(p.params.tau_m, 10.0);
    EXPECT_DOUBLE_EQ(p.params.tau_syn_ex, 0.5);
  }
  const auto violations = validate(spec);
  EXPECT_TRUE(violations.empty()) << violations.front();
}

TEST(Validate, DelayBelowGridStep) {
  auto spec = nets::balanced_network(100, 1000, 10.0);
  spec.connections[0].delay_mean = 0.05;
  EXPECT_TRUE(mentions(validate(spec), "delay below grid step"));
}

TEST(Validate, ResetMustBeBelowThreshold) {
  auto spec = nets::balanced_network(100, 1000, 10.0);
  spec.populations[1].params.V_reset = spec.populations[1].params.V_th;
  EXPECT_TRUE(mentions(validate(spec), "V_reset must be < V_th"));
}

TEST(Validate, GridAlignment) {
  auto spec = nets::balanced_network(100, 1000, 10.0);
  spec.populations[0].params.t_ref = 0.25;
  spec.grid.t_model = 10.05;
  spec.grid.min_delay = 0.05;
  const auto v = validate(spec);
  EXPECT_TRUE(mentions(v, "t_ref is not a multiple"));
  EXPECT_TRUE(mentions(v, "t_model is not a multiple"));
  EXPECT_TRUE(mentions(v, "min_delay: delay below grid step"));
}

TEST(Validate, GridDelayBoundsMustMatchRealizableDelays) {
  auto spec = nets::balanced_network(100, 1000, 10.0);
  for (auto& c : spec.connections) {
    c.delay_sd = 0.0;
    c.delay_mean = 1.5;
  }
  // Fixed delays realize exactly 1.5 ms; the grid claims [0.1, 6.0].
  auto v = validate(spec);
  EXPECT_TRUE(mentions(v, "min_delay does not equal"));
  EXPECT_TRUE(mentions(v, "max_delay does not equal"));
  spec.grid.min_delay = spec.grid.max_delay = 1.5;
  EXPECT_TRUE(validate(spec).empty());
}

TEST(Validate, DuplicateNamesAndNegativeParameters) {
  auto spec = nets::balanced_network(100, 1000, 10.0);
  spec.populations[1].name = "E";
  spec.populations[0].params.tau_m = 0.0;
  spec.populations[0].ext_rate = -1.0;
  spec.connections[1].weight_sd = -1.0;
  const auto v = validate(spec);
  EXPECT_TRUE(mentions(v, "duplicate name"));
  EXPECT_TRUE(mentions(v, "tau_m must be > 0"));
  EXPECT_TRUE(mentions(v, "ext_rate must be >= 0"));
  EXPECT_TRUE(mentions(v, "weight_sd must be >= 0"));
}

// Property: valid specs survive serialize -> load unchanged.
TEST(SpecRoundTrip, RandomValidSpecs) {
  CounterStream rng(2024, StreamTag::test, 0, 0);
  for (int trial = 0; trial < 200; ++trial) {
    auto spec = nets::balanced_network(10 + rng.uniform_index(5000), rng.uniform_index(100000),
                                          0.1 * static_cast<double>(rng.uniform_index(10000)),
                                          rng.next_u64());
    spec.populations[0].params.I_e = rng.normal(0.0, 100.0);
    spec.populations[1].params.tau_syn_in = 0.1 + rng.uniform();
    spec.populations[1].v_init.reset();
    spec.connections[2].weight_mean = rng.uniform() * 1e3;
    ASSERT_TRUE(validate(spec).empty());
    const NetworkSpec back = load_network_spec(serialize_network_spec(spec));
    ASSERT_EQ(back, spec) << serialize_network_spec(spec);
  }
}

TEST(ScaleNetwork, ScalesSizesAndTotals) {
  const auto spec = nets::balanced_network(1000, 100000, 10.0);
  const auto small = scale_network(spec, 0.1, 0.5);
  EXPECT_EQ(small.populations[0].size, 80u);
  EXPECT_EQ(small.populations[1].size, 20u);
  EXPECT_EQ(small.connections[0].total_synapses, 3200u);  // 64000 * 0.05
  EXPECT_THROW(scale_network(spec, 0.0, 1.0), DomainError);
}
