#pragma once

#include "netdiff/gain_set.hpp"
#include "netdiff/graph.hpp"
#include "netdiff/signals.hpp"
#include "netdiff/sim.hpp"
#include "netdiff/trigger.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace netdiff {

using json = nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything needed to reproduce a run. `triggers` empty means ideal
/// communication; several entries run one experiment per rule.
struct ExperimentConfig {
  std::string graph = "ring:5";
  std::string signals = "reference";          // "reference" or "custom"
  std::vector<AgentSignal> custom_signals;    // used when signals == "custom"
  bool auto_gains = false;
  GainSet gains;
  std::vector<ThresholdRule> triggers;
  SimConfig sim;
  std::string output_dir = "out";
  int csv_stride = 10;            // trace rows every csv_stride steps
  bool lyapunov = false;
  int lyapunov_decimation = 100;
  double c1_reference = 7.9;      // bound column of the sweep summary
};

inline Graph graph_from_json(const json& j) {
  if (!j.contains("n") || !j.contains("edges")) throw ConfigError("graph JSON needs 'n' and 'edges'");
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw ConfigError("each edge must be a pair [i, j]");
    edges.push_back({e[0].get<int>(), e[1].get<int>()});
  }
  return Graph(j.at("n").get<int>(), edges);
}

inline json graph_to_json(const Graph& g) {
  json edges = json::array();
  for (const auto& e : g.edges()) edges.push_back({e.i, e.j});
  return {{"n", g.n_agents()}, {"edges", edges}};
}

/// "kind:n" generator or a path to a graph JSON file.
inline Graph load_graph(const std::string& spec) {
  for (const char* kind : {"ring:", "path:", "complete:"})
    if (spec.rfind(kind, 0) == 0) return graph_from_generator(spec);
  std::ifstream in(spec);
  if (!in) throw ConfigError("cannot open graph file '" + spec + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("graph file '" + spec + "': " + e.what());
  }
  return graph_from_json(j);
}

inline json rule_to_json(const ThresholdRule& r) {
  json j{{"kind", rule_kind(r)}, {"delta", rule_delta(r)}};
  if (auto* v = std::get_if<VanishingThreshold>(&r)) {
    j["q"] = v->q;
    j["p"] = v->p;
  }
  if (auto* s = std::get_if<StateDependentThreshold>(&r)) j["sigma"] = s->sigma;
  return j;
}

/// nullopt for kind "none".
inline std::optional<ThresholdRule> rule_from_json(const json& j) {
  std::string kind = j.value("kind", "constant");
  double delta = j.value("delta", 0.02);
  ThresholdRule r;
  if (kind == "none") return std::nullopt;
  if (kind == "constant") r = ConstantThreshold{delta};
  else if (kind == "vanishing") r = VanishingThreshold{delta, j.value("q", 0.5), j.value("p", 0.0)};
  else if (kind == "state_dependent") r = StateDependentThreshold{delta, j.value("sigma", 0.15)};
  else throw ConfigError("unknown trigger kind '" + kind + "'");
  validate_rule(r);
  return r;
}

inline json gains_to_json(const GainSet& g) {
  return {{"k0", g.k0}, {"k1", g.k1}, {"gamma", g.gamma}, {"L", g.l}, {"beta", g.beta}};
}

inline GainSet gains_from_json(const json& j, GainSet g = {}) {
  g.k0 = j.value("k0", g.k0);
  g.k1 = j.value("k1", g.k1);
  g.gamma = j.value("gamma", g.gamma);
  g.l = j.value("L", g.l);
  g.beta = j.value("beta", g.beta);
  return g;
}

namespace detail {

inline json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
inline Vec vec_from_json(const json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["graph"] = c.graph;
  if (c.signals == "custom") {
    json agents = json::array();
    for (const auto& a : c.custom_signals) {
      json terms = json::array();
      for (const auto& t : a.terms) terms.push_back({{"amp", t.amp}, {"omega", t.omega}, {"phi", t.phi}});
      agents.push_back({{"offset", a.offset}, {"terms", terms}});
    }
    j["signals"] = agents;
  } else {
    j["signals"] = c.signals;
  }
  j["gains"] = c.auto_gains ? json("auto") : gains_to_json(c.gains);
  if (c.auto_gains) j["gain_params"] = gains_to_json(c.gains);
  if (c.triggers.size() == 1) j["trigger"] = rule_to_json(c.triggers.front());
  else if (c.triggers.empty()) j["trigger"] = {{"kind", "none"}};
  else {
    j["triggers"] = json::array();
    for (const auto& r : c.triggers) j["triggers"].push_back(rule_to_json(r));
  }
  json sim{{"dt", c.sim.dt},
           {"horizon", c.sim.horizon},
           {"seed", c.sim.seed},
           {"steady_state_fraction", c.sim.steady_state_fraction},
           {"init_range", c.sim.init.range},
           {"variant", c.sim.variant == Variant::derivative_free ? "derivative_free" : "redcho"}};
  if (c.sim.init.eta0) sim["eta0"] = detail::vec_to_json(*c.sim.init.eta0);
  if (c.sim.init.eta1) sim["eta1"] = detail::vec_to_json(*c.sim.init.eta1);
  if (c.sim.init.eta0p) sim["eta0p"] = detail::vec_to_json(*c.sim.init.eta0p);
  if (c.sim.init.eta1p) sim["eta1p"] = detail::vec_to_json(*c.sim.init.eta1p);
  j["sim"] = sim;
  j["output_dir"] = c.output_dir;
  j["csv_stride"] = c.csv_stride;
  j["lyapunov"] = c.lyapunov;
  j["lyapunov_decimation"] = c.lyapunov_decimation;
  j["c1_reference"] = c.c1_reference;
  return j;
}

inline ExperimentConfig config_from_json(const json& j, ExperimentConfig c = {}) {
  try {
    c.graph = j.value("graph", c.graph);
    if (j.contains("signals")) {
      const json& s = j.at("signals");
      if (s.is_string()) {
        c.signals = s.get<std::string>();
        if (c.signals != "reference") throw ConfigError("signals must be \"reference\" or a list of agents");
        c.custom_signals.clear();
      } else {
        c.signals = "custom";
        c.custom_signals.clear();
        for (const auto& a : s) {
          AgentSignal sig;
          sig.offset = a.value("offset", 0.0);
          for (const auto& t : a.at("terms"))
            sig.terms.push_back({t.value("amp", 1.0), t.value("omega", 1.0), t.value("phi", 0.0)});
          c.custom_signals.push_back(sig);
        }
      }
    }
    if (j.contains("gains")) {
      const json& g = j.at("gains");
      c.auto_gains = g.is_string() && g.get<std::string>() == "auto";
      if (g.is_string() && !c.auto_gains) throw ConfigError("gains must be an object or \"auto\"");
      if (!c.auto_gains) c.gains = gains_from_json(g, c.gains);
    }
    if (j.contains("gain_params")) c.gains = gains_from_json(j.at("gain_params"), c.gains);
    if (j.contains("trigger")) {
      c.triggers.clear();
      if (auto r = rule_from_json(j.at("trigger"))) c.triggers.push_back(*r);
    }
    if (j.contains("triggers")) {
      c.triggers.clear();
      for (const auto& t : j.at("triggers"))
        if (auto r = rule_from_json(t)) c.triggers.push_back(*r);
    }
    if (j.contains("sim")) {
      const json& s = j.at("sim");
      c.sim.dt = s.value("dt", c.sim.dt);
      c.sim.horizon = s.value("horizon", c.sim.horizon);
      c.sim.seed = s.value("seed", c.sim.seed);
      c.sim.steady_state_fraction = s.value("steady_state_fraction", c.sim.steady_state_fraction);
      c.sim.init.range = s.value("init_range", c.sim.init.range);
      std::string v = s.value("variant", std::string("redcho"));
      if (v != "redcho" && v != "derivative_free") throw ConfigError("unknown variant '" + v + "'");
      c.sim.variant = v == "derivative_free" ? Variant::derivative_free : Variant::redcho;
      if (s.contains("eta0")) c.sim.init.eta0 = detail::vec_from_json(s.at("eta0"));
      if (s.contains("eta1")) c.sim.init.eta1 = detail::vec_from_json(s.at("eta1"));
      if (s.contains("eta0p")) c.sim.init.eta0p = detail::vec_from_json(s.at("eta0p"));
      if (s.contains("eta1p")) c.sim.init.eta1p = detail::vec_from_json(s.at("eta1p"));
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.csv_stride = j.value("csv_stride", c.csv_stride);
    c.lyapunov = j.value("lyapunov", c.lyapunov);
    c.lyapunov_decimation = j.value("lyapunov_decimation", c.lyapunov_decimation);
    c.c1_reference = j.value("c1_reference", c.c1_reference);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.sim.validate();
  if (c.csv_stride < 1) throw ConfigError("csv_stride must be >= 1");
  return c;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(j, std::move(base));
}

inline SignalBank make_bank(const ExperimentConfig& c) {
  return c.signals == "reference" ? reference_bank() : SignalBank(c.custom_signals);
}

/// Reference five-agent ring experiment; fig1 uses the constant threshold,
/// fig2 compares constant, vanishing and state-dependent thresholds.
inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.gains = GainSet{4.0, 13.0, 1.0, 4.0, 7.0};
  c.sim.dt = 1e-4;
  c.sim.horizon = 10.0;
  if (name == "paper-fig1") {
    c.triggers = {ConstantThreshold{0.02}};
  } else if (name == "paper-fig2") {
    c.triggers = {ConstantThreshold{0.02}, VanishingThreshold{0.02, 0.5, 0.0}, StateDependentThreshold{0.02, 0.15}};
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected paper-fig1 or paper-fig2)");
  }
  c.output_dir = "out/" + name;
  return c;
}

}  // namespace netdiff
