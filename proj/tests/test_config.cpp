#include "netdiff/config.hpp"
#include "netdiff/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace netdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("netdiff_test_config_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(GraphJson, RoundTripAndErrors) {
  Graph g = ring_graph(5);
  json j = graph_to_json(g);
  EXPECT_EQ(j.at("n"), 5);
  EXPECT_EQ(j.at("edges").size(), 5u);
  Graph back = graph_from_json(j);
  EXPECT_EQ(back.edges(), g.edges());
  EXPECT_THROW(graph_from_json(json{{"n", 3}}), ConfigError);
  EXPECT_THROW(graph_from_json(json::parse(R"({"n":3,"edges":[[1,2,3]]})")), ConfigError);
  EXPECT_THROW(graph_from_json(json::parse(R"({"n":3,"edges":[[1,2]]})")), GraphError);
}

TEST(GraphJson, LoadFromFileOrGenerator) {
  fs::path dir = scratch("graph");
  std::ofstream(dir / "g.json") << R"({"n":4,"edges":[[1,2],[2,3],[3,4]]})";
  EXPECT_EQ(load_graph((dir / "g.json").string()).n_edges(), 3);
  EXPECT_EQ(load_graph("complete:4").n_edges(), 6);
  EXPECT_THROW(load_graph((dir / "missing.json").string()), ConfigError);
  std::ofstream(dir / "bad.json") << "{not json";
  EXPECT_THROW(load_graph((dir / "bad.json").string()), ConfigError);
}

TEST(TriggerJson, Kinds) {
  auto r = rule_from_json(json::parse(R"({"kind":"vanishing","delta":0.03,"q":0.25,"p":1})"));
  ASSERT_TRUE(r);
  auto* v = std::get_if<VanishingThreshold>(&*r);
  ASSERT_NE(v, nullptr);
  EXPECT_EQ(v->delta, 0.03);
  EXPECT_EQ(v->q, 0.25);
  EXPECT_EQ(v->p, 1.0);
  EXPECT_FALSE(rule_from_json(json{{"kind", "none"}}));
  EXPECT_THROW(rule_from_json(json{{"kind", "sometimes"}}), ConfigError);
  EXPECT_THROW(rule_from_json(json{{"kind", "state_dependent"}, {"sigma", 0.6}}), std::invalid_argument);
  for (ThresholdRule t : {ThresholdRule{ConstantThreshold{0.1}}, ThresholdRule{StateDependentThreshold{0.02, 0.2}}}) {
    auto back = rule_from_json(rule_to_json(t));
    ASSERT_TRUE(back);
    EXPECT_EQ(rule_kind(*back), rule_kind(t));
    EXPECT_EQ(rule_delta(*back), rule_delta(t));
    EXPECT_EQ(rule_sigma(*back), rule_sigma(t));
  }
}

TEST(ExperimentConfig, RoundTrip) {
  ExperimentConfig c = preset("paper-fig2");
  c.sim.seed = 42;
  c.sim.init.eta0 = Vec::Constant(5, 0.25);
  c.lyapunov = true;
  json j = config_to_json(c);
  ExperimentConfig back = config_from_json(j);
  EXPECT_EQ(config_to_json(back), j);
  EXPECT_EQ(back.triggers.size(), 3u);
  EXPECT_EQ(back.sim.seed, 42u);
  ASSERT_TRUE(back.sim.init.eta0);
  EXPECT_EQ(*back.sim.init.eta0, Vec::Constant(5, 0.25));
}

TEST(ExperimentConfig, CustomSignalsAndAutoGains) {
  json j = json::parse(R"({
    "graph": "path:2",
    "signals": [{"offset": 1.0, "terms": [{"amp": 2, "omega": 3, "phi": 0}]}, {"terms": []}],
    "gains": "auto",
    "gain_params": {"k1": 5, "L": 2},
    "trigger": {"kind": "constant", "delta": 0.05},
    "sim": {"dt": 0.001, "horizon": 2, "variant": "derivative_free"}
  })");
  ExperimentConfig c = config_from_json(j);
  EXPECT_TRUE(c.auto_gains);
  EXPECT_EQ(c.gains.k1, 5.0);
  EXPECT_EQ(c.gains.l, 2.0);
  EXPECT_EQ(c.sim.variant, Variant::derivative_free);
  SignalBank b = make_bank(c);
  ASSERT_EQ(b.size(), 2);
  EXPECT_DOUBLE_EQ(b.evaluate(0.0, 0)(0), 1.0);
  EXPECT_DOUBLE_EQ(b.evaluate(0.0, 1)(0), 6.0);
  EXPECT_EQ(config_from_json(config_to_json(c)).custom_signals.size(), 2u);
}

TEST(ExperimentConfig, Errors) {
  EXPECT_THROW(config_from_json(json{{"signals", "noise"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"gains", "manual"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"sim", {{"variant", "other"}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"sim", {{"dt", -1.0}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"csv_stride", 0}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"sim", {{"dt", "fast"}}}}), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/netdiff.json"), ConfigError);
  EXPECT_THROW(preset("paper-fig3"), ConfigError);
}

TEST(Presets, ReferenceParameters) {
  ExperimentConfig f1 = preset("paper-fig1");
  EXPECT_EQ(f1.gains.k0, 4.0);
  EXPECT_EQ(f1.gains.k1, 13.0);
  EXPECT_EQ(f1.gains.gamma, 1.0);
  EXPECT_EQ(f1.gains.l, 4.0);
  EXPECT_EQ(f1.sim.dt, 1e-4);
  EXPECT_EQ(f1.sim.horizon, 10.0);
  ASSERT_EQ(f1.triggers.size(), 1u);
  EXPECT_EQ(rule_delta(f1.triggers[0]), 0.02);
  ExperimentConfig f2 = preset("paper-fig2");
  ASSERT_EQ(f2.triggers.size(), 3u);
  EXPECT_EQ(rule_kind(f2.triggers[1]), "vanishing");
  EXPECT_EQ(rule_sigma(f2.triggers[2]), 0.15);
}

TEST(Csv, TraceEventsAndSweepLayouts) {
  fs::path dir = scratch("csv");
  SimConfig c;
  c.dt = 1e-3;
  c.horizon = 0.05;
  Graph g = ring_graph(5);
  GainSet gains;
  Trace tr = integrate(g, reference_bank(), gains, ConstantThreshold{0.02}, c);
  LyapunovReport lyap = lyapunov_monitor(g, tr, gains, 10);
  write_trace_csv(dir / "trace.csv", tr, 10, &lyap);
  auto t = lines(dir / "trace.csv");
  EXPECT_EQ(t.front(), "t,agent,s_hat0,s_hat1,err1,V");
  EXPECT_EQ(t.size(), 1u + 6 * 5);
  EXPECT_EQ(t[1].rfind("0,1,", 0), 0u);
  write_trace_csv(dir / "plain.csv", tr, 1);
  EXPECT_EQ(lines(dir / "plain.csv").front(), "t,agent,s_hat0,s_hat1,err1");
  EXPECT_THROW(write_trace_csv(dir / "x.csv", tr, 0), std::invalid_argument);

  write_events_csv(dir / "events.csv", tr.channels);
  auto e = lines(dir / "events.csv");
  EXPECT_EQ(e.front(), "edge_i,edge_j,t_event");
  long total = 0;
  for (const auto& ch : tr.channels) total += ch.event_count;
  EXPECT_EQ(static_cast<long>(e.size()) - 1, total);
  double prev = -1.0;
  for (std::size_t k = 1; k < e.size(); ++k) {
    double tv = std::stod(e[k].substr(e[k].rfind(',') + 1));
    EXPECT_GE(tv, prev);
    prev = tv;
  }

  std::vector<SweepRow> rows{{0.02, 0, 0.5, 0.3, 0}, {0.02, 1, 0.7, 0.1, 0}, {0.08, 0, 1.0, 0.05, 0}};
  write_sweep_csv(dir / "sweep.csv", rows);
  auto s = lines(dir / "sweep.csv");
  EXPECT_EQ(s.front(), "delta,rep,sse,event_fraction");
  EXPECT_EQ(s[1], "0.02,0,0.5,0.3");
  auto sum = summarize_sweep(rows, 7.9);
  ASSERT_EQ(sum.size(), 2u);
  EXPECT_EQ(sum[0].reps, 2);
  EXPECT_DOUBLE_EQ(sum[0].max_sse, 0.7);
  EXPECT_DOUBLE_EQ(sum[0].mean_sse, 0.6);
  EXPECT_DOUBLE_EQ(sum[0].mean_event_fraction, 0.2);
  EXPECT_NEAR(sum[1].bound, 7.9 * std::sqrt(0.08), 1e-15);
}

TEST(Metrics, JsonFields) {
  SimConfig c;
  c.dt = 1e-3;
  c.horizon = 0.5;
  Graph g = ring_graph(5);
  Trace tr = integrate(g, reference_bank(), GainSet{}, ConstantThreshold{0.02}, c);
  json m = metrics_json(g, tr, 0.8);
  for (const char* key : {"steady_state_error", "event_fraction", "total_events", "inter_event_windows",
                          "epsilon_bound", "max_edge_disagreement_late"})
    EXPECT_TRUE(m.contains(key)) << key;
  EXPECT_EQ(m["epsilon_bound"]["violations"], 0);
  Trace ideal = integrate(g, reference_bank(), GainSet{}, std::nullopt, c);
  EXPECT_EQ(metrics_json(g, ideal, 0.8)["event_fraction"], 1.0);
}
