// netdiff: gain certification, simulation, delta sweeps and property checks.
#include "netdiff/netdiff.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace netdiff;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Flags shared by simulate and sweep; unset flags leave the config alone.
struct ExperimentFlags {
  std::string config, preset, graph, trigger, variant, out;
  double k0 = 0, k1 = 0, gamma = 0, l = 0, beta = 0, delta = 0, q = 0, p = 0, sigma = 0, dt = 0, horizon = 0;
  std::uint64_t seed = 0;
  int csv_stride = 0;
  bool lyapunov = false;
  std::map<std::string, CLI::Option*> opt;

  void attach(CLI::App* app) {
    opt["config"] = app->add_option("--config", config, "experiment JSON");
    opt["preset"] = app->add_option("--preset", preset, "paper-fig1 | paper-fig2");
    opt["graph"] = app->add_option("--graph", graph, "generator (ring:5) or graph JSON file");
    opt["k0"] = app->add_option("--k0", k0);
    opt["k1"] = app->add_option("--k1", k1);
    opt["gamma"] = app->add_option("--gamma", gamma);
    opt["L"] = app->add_option("--L", l);
    opt["beta"] = app->add_option("--beta", beta);
    opt["trigger"] = app->add_option("--trigger", trigger, "none | constant | vanishing | state_dependent");
    opt["delta"] = app->add_option("--delta", delta);
    opt["q"] = app->add_option("--q", q);
    opt["p"] = app->add_option("--p", p);
    opt["sigma"] = app->add_option("--sigma", sigma);
    opt["dt"] = app->add_option("--dt", dt);
    opt["horizon"] = app->add_option("--horizon", horizon);
    opt["seed"] = app->add_option("--seed", seed);
    opt["variant"] = app->add_option("--variant", variant, "redcho | derivative_free");
    opt["out"] = app->add_option("--out", out, "output directory");
    opt["csv-stride"] = app->add_option("--csv-stride", csv_stride, "trace CSV row every n steps");
    opt["lyapunov"] = app->add_flag("--lyapunov", lyapunov, "add a V column to the trace");
  }
  bool given(const std::string& k) const { return opt.at(k)->count() > 0; }

  ExperimentConfig resolve() const {
    ExperimentConfig c = given("preset") ? netdiff::preset(preset) : ExperimentConfig{};
    if (given("config")) c = load_config(config, c);
    if (given("graph")) c.graph = graph;
    if (given("k0")) c.gains.k0 = k0, c.auto_gains = false;
    if (given("k1")) c.gains.k1 = k1;
    if (given("gamma")) c.gains.gamma = gamma;
    if (given("L")) c.gains.l = l;
    if (given("beta")) c.gains.beta = beta;
    if (given("trigger") || given("delta") || given("q") || given("p") || given("sigma")) {
      std::string kind = given("trigger") ? trigger : (c.triggers.empty() ? "constant" : rule_kind(c.triggers.front()));
      json j{{"kind", kind}};
      if (!c.triggers.empty() && kind == rule_kind(c.triggers.front())) j = rule_to_json(c.triggers.front());
      if (given("delta")) j["delta"] = delta;
      if (given("q")) j["q"] = q;
      if (given("p")) j["p"] = p;
      if (given("sigma")) j["sigma"] = sigma;
      c.triggers.clear();
      if (auto r = rule_from_json(j)) c.triggers.push_back(*r);
    }
    if (given("dt")) c.sim.dt = dt;
    if (given("horizon")) c.sim.horizon = horizon;
    if (const char* env = std::getenv("NETDIFF_SEED")) {
      try {
        c.sim.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw UsageError("NETDIFF_SEED must be a nonnegative integer");
      }
    }
    if (given("seed")) c.sim.seed = seed;
    if (given("variant")) {
      if (variant != "redcho" && variant != "derivative_free") throw UsageError("unknown variant '" + variant + "'");
      c.sim.variant = variant == "derivative_free" ? Variant::derivative_free : Variant::redcho;
    }
    if (given("out")) c.output_dir = out;
    if (given("csv-stride")) c.csv_stride = csv_stride;
    if (given("lyapunov")) c.lyapunov = lyapunov;
    c.sim.validate();
    return c;
  }
};

json state_json(const AbstractState& x) { return {{"x0", detail::vec_to_json(x.x0)}, {"x1", detail::vec_to_json(x.x1)}}; }

GainSet resolve_gains(const ExperimentConfig& c, const Graph& g) {
  if (!c.auto_gains) return c.gains;
  OptimizerSettings o;
  o.seed = c.sim.seed;
  return synthesize_gains(Kernel::from_graph(g), c.gains.k1, c.gains.gamma, c.gains.l, 0.1, o);
}

int cmd_gains(const std::string& config, const std::string& graph_flag, std::optional<double> k0,
              std::optional<double> k1, std::optional<double> beta, std::optional<double> gamma,
              std::optional<double> l, std::optional<std::uint64_t> seed, int starts) {
  ExperimentConfig c;
  bool have_graph = false;
  if (!config.empty()) {
    std::ifstream in(config);
    if (!in) throw UsageError("cannot open config '" + config + "'");
    json j = json::parse(in);
    c = config_from_json(j);
    have_graph = j.contains("graph");
    if (j.contains("gains") && !c.auto_gains && !k0) k0 = c.gains.k0;
  }
  if (!graph_flag.empty()) c.graph = graph_flag, have_graph = true;
  if (!have_graph) throw UsageError("gains: --graph is required");
  Graph g = load_graph(c.graph);
  Kernel k = Kernel::from_graph(g);

  OptimizerSettings o;
  o.seed = c.sim.seed;
  if (const char* env = std::getenv("NETDIFF_SEED")) o.seed = std::stoull(env);
  if (seed) o.seed = *seed;
  o.starts = starts;
  GainSet gs = c.gains;
  if (k1) gs.k1 = *k1;
  if (beta) gs.beta = *beta;
  if (gamma) gs.gamma = *gamma;
  if (l) gs.l = *l;
  gs.validate();

  json rep;
  rep["graph"] = graph_to_json(g);
  rep["lambda_G"] = algebraic_connectivity(g);
  rep["k1_lower"] = k1_lower_bound(g);
  rep["seed"] = o.seed;
  K0Bound kb = k0_lower_bound(k, gs.k1, gs.beta, o);
  rep["k0_lower"] = kb.k0_lower;
  rep["k0_bound"] = {{"sup_pi_hat_over_gamma", kb.sup_ratio},
                     {"witness", state_json(kb.witness)},
                     {"max_pi_hat_near_gamma_zero", kb.max_pi_near_gamma_zero}};
  gs.k0 = k0 ? *k0 : 1.1 * kb.k0_lower;
  rep["gains"] = gains_to_json(gs);
  rep["k0_source"] = k0 ? "given" : "1.1 * k0_lower";
  try {
    CertifiedConstants cc = certify(k, gs, o);
    rep["certified"] = true;
    rep["c"] = cc.c;
    rep["c_witness"] = state_json(cc.margin_witness.point);
    rep["v_lower"] = cc.v_lower;
    rep["v_lower_witness"] = state_json(cc.v_lower_witness.point);
    rep["c_psi"] = cc.c_psi;
    rep["c_psi_witness"] = state_json(cc.c_psi_witness.point);
    rep["sigma_max"] = cc.sigma_max;
    rep["c0"] = cc.c0;
    rep["c1"] = cc.c1;
    rep["theta"] = cc.accuracy.theta;
    rep["settling_scale"] = cc.settling_scale;
    std::cout << rep.dump(2) << "\n";
    return kOk;
  } catch (const CertificationError& e) {
    rep["certified"] = false;
    rep["error"] = e.what();
    rep["value"] = e.value;
    std::cout << rep.dump(2) << "\n";
    std::cerr << "netdiff gains: " << e.what() << "\n";
    return kFail;
  }
}

/// One run into `dir`: config copy, trace, events, metrics.
json run_one(const ExperimentConfig& c, const Graph& g, const SignalBank& bank, const GainSet& gs,
             const std::optional<ThresholdRule>& rule, const fs::path& dir) {
  ExperimentConfig copy = c;
  copy.triggers.clear();
  if (rule) copy.triggers.push_back(*rule);
  copy.output_dir = dir.string();
  fs::create_directories(dir);
  write_json(dir / "config.json", config_to_json(copy));

  SimConfig sc = c.sim;
  sc.record_stride = 1;
  Trace tr = integrate(g, bank, gs, rule, sc);
  std::optional<LyapunovReport> lyap;
  if (c.lyapunov) lyap = lyapunov_monitor(g, tr, gs, c.lyapunov_decimation);
  write_trace_csv(dir / "trace.csv", tr, c.csv_stride, lyap ? &*lyap : nullptr);
  if (rule) write_events_csv(dir / "events.csv", tr.channels);
  json m = metrics_json(g, tr, sc.steady_state_fraction, lyap ? &*lyap : nullptr);
  m["trigger"] = rule ? rule_to_json(*rule) : json{{"kind", "none"}};
  m["gains"] = gains_to_json(gs);
  write_json(dir / "metrics.json", m);
  return m;
}

int cmd_simulate(const ExperimentFlags& f) {
  ExperimentConfig c = f.resolve();
  Graph g = load_graph(c.graph);
  SignalBank bank = make_bank(c);
  if (bank.size() != g.n_agents()) throw UsageError("signal bank has " + std::to_string(bank.size()) + " agents, graph has " + std::to_string(g.n_agents()));
  GainSet gs = resolve_gains(c, g);
  AssumptionReport ar = check_assumption(bank, gs.gamma, gs.l, TimeGrid{0.0, c.sim.horizon, 1e-3});
  if (!ar.satisfied)
    std::cerr << "warning: signal mismatch bound needs L >= " << ar.l_required << " (L = " << gs.l << ")\n";

  fs::path root(c.output_dir);
  json summary = json::array();
  if (c.triggers.empty()) {
    summary.push_back(run_one(c, g, bank, gs, std::nullopt, root));
  } else if (c.triggers.size() == 1) {
    summary.push_back(run_one(c, g, bank, gs, c.triggers.front(), root));
  } else {
    fs::create_directories(root);
    write_json(root / "config.json", config_to_json(c));
    for (const auto& r : c.triggers) summary.push_back(run_one(c, g, bank, gs, r, root / rule_kind(r)));
  }
  for (auto& m : summary) {
    m.erase("inter_event_per_edge");
    m.erase("inter_event_windows");
  }
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

std::vector<double> parse_deltas(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) throw UsageError("sweep: --deltas is empty");
  auto colon = std::count(s.begin(), s.end(), ':');
  try {
    if (colon == 2) {
      auto a = s.find(':'), b = s.find(':', a + 1);
      double lo = std::stod(s.substr(0, a)), hi = std::stod(s.substr(a + 1, b - a - 1));
      int n = std::stoi(s.substr(b + 1));
      if (n < 1) throw UsageError("sweep: delta count must be positive");
      for (int k = 0; k < n; ++k) out.push_back(n == 1 ? hi : lo + (hi - lo) * k / (n - 1));
    } else {
      std::stringstream ss(s);
      std::string tok;
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("sweep: cannot parse --deltas '" + s + "' (use lo:hi:n or a,b,c)");
  }
  if (out.empty()) throw UsageError("sweep: no deltas given");
  for (double d : out)
    if (!(d >= 0.0)) throw UsageError("sweep: deltas must be nonnegative");
  return out;
}

int cmd_sweep(const ExperimentFlags& f, const std::string& deltas_spec, int reps, std::optional<double> c1,
              unsigned threads, bool assert_bound) {
  std::vector<double> deltas = parse_deltas(deltas_spec);
  if (reps < 1) throw UsageError("sweep: --reps must be positive");
  ExperimentConfig c = f.resolve();
  if (c1) c.c1_reference = *c1;
  Graph g = load_graph(c.graph);
  SignalBank bank = make_bank(c);
  GainSet gs = resolve_gains(c, g);
  std::optional<ThresholdRule> base;
  if (!c.triggers.empty()) base = c.triggers.front();
  SimConfig sc = c.sim;
  sc.record_stride = 1;
  auto rows = sweep_delta(g, bank, gs, base, sc, deltas, reps, c.sim.seed, threads);
  auto summary = summarize_sweep(rows, c.c1_reference);
  fs::path root(c.output_dir);
  fs::create_directories(root);
  write_json(root / "config.json", config_to_json(c));
  write_sweep_csv(root / "sweep.csv", rows);
  write_sweep_summary_csv(root / "sweep_summary.csv", summary);
  bool ok = true;
  std::cout << "delta,reps,max_sse,mean_sse,mean_event_fraction,bound\n";
  for (const auto& s : summary) {
    std::cout << detail::num(s.delta) << ',' << s.reps << ',' << detail::num(s.max_sse) << ','
              << detail::num(s.mean_sse) << ',' << detail::num(s.mean_event_fraction) << ',' << detail::num(s.bound)
              << "\n";
    if (s.delta > 0.0 && s.max_sse > s.bound) ok = false;
  }
  return assert_bound && !ok ? kFail : kOk;
}

int cmd_check(const std::string& graph, const std::string& only, std::uint64_t seed, const std::string& inject) {
  Graph g = load_graph(graph);
  Kernel k = Kernel::from_graph(g);
  CheckOptions o;
  o.seed = seed;
  if (const char* env = std::getenv("NETDIFF_SEED")) o.seed = std::stoull(env);
  std::stringstream ss(only);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) o.only.push_back(tok);
  KernelView kv = KernelView::of(k);
  if (inject == "sign") kv = KernelView::with_sign_bug(k);
  else if (!inject.empty()) throw UsageError("unknown --inject-bug '" + inject + "'");
  std::vector<CheckResult> res;
  try {
    res = run_checks(g, kv, o);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  bool ok = true;
  for (const auto& r : res) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.samples << " samples): " << r.detail << "\n";
    if (!r.passed) std::cout << "  counterexample: " << r.counterexample << "\n";
    ok = ok && r.passed;
  }
  return ok ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed differentiator toolkit"};
  app.require_subcommand(1);

  auto* gains = app.add_subcommand("gains", "certify gains on a graph; JSON report on stdout");
  std::string g_config, g_graph;
  double g_k0 = 0, g_k1 = 0, g_beta = 0, g_gamma = 0, g_l = 0;
  std::uint64_t g_seed = 0;
  int g_starts = 32;
  gains->add_option("--config", g_config);
  gains->add_option("--graph", g_graph, "generator (ring:5) or graph JSON file");
  auto* o_k0 = gains->add_option("--k0", g_k0, "k0 to certify (default 1.1 * k0_lower)");
  auto* o_k1 = gains->add_option("--k1", g_k1);
  auto* o_beta = gains->add_option("--beta", g_beta);
  auto* o_gamma = gains->add_option("--gamma", g_gamma);
  auto* o_l = gains->add_option("--L", g_l);
  auto* o_seed = gains->add_option("--seed", g_seed);
  gains->add_option("--starts", g_starts, "multi-starts per optimization")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "run experiments; writes trace/events CSV and metrics JSON");
  ExperimentFlags sim_flags;
  sim_flags.attach(simulate);

  auto* sweep = app.add_subcommand("sweep", "steady-state error and event fraction over trigger thresholds");
  ExperimentFlags sweep_flags;
  sweep_flags.attach(sweep);
  std::string deltas = "0:0.14:8";
  int reps = 10;
  double c1 = 7.9;
  unsigned threads = 0;
  bool assert_bound = false;
  sweep->add_option("--deltas", deltas, "lo:hi:n or comma list");
  sweep->add_option("--reps", reps);
  auto* o_c1 = sweep->add_option("--c1", c1, "bound column c1 * sqrt(delta)");
  sweep->add_option("--threads", threads, "0 = hardware concurrency");
  sweep->add_flag("--assert-bound", assert_bound, "exit 1 if a max error exceeds the bound");

  auto* check = app.add_subcommand("check", "property suites of the kernel and protocol");
  std::string c_graph = "ring:5", c_only, c_inject;
  std::uint64_t c_seed = 1;
  check->add_option("--graph", c_graph);
  check->add_option("--only", c_only, "comma-separated subset of suites");
  check->add_option("--seed", c_seed);
  check->add_option("--inject-bug", c_inject, "self-test: 'sign' flips the sign selection");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  auto opt = [](CLI::Option* o, auto v) { return o->count() ? std::optional(v) : std::nullopt; };
  try {
    if (*gains)
      return cmd_gains(g_config, g_graph, opt(o_k0, g_k0), opt(o_k1, g_k1), opt(o_beta, g_beta), opt(o_gamma, g_gamma),
                       opt(o_l, g_l), opt(o_seed, g_seed), g_starts);
    if (*simulate) return cmd_simulate(sim_flags);
    if (*sweep) return cmd_sweep(sweep_flags, deltas, reps, opt(o_c1, c1), threads, assert_bound);
    if (*check) return cmd_check(c_graph, c_only, c_seed, c_inject);
  } catch (const UsageError& e) {
    std::cerr << "netdiff: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "netdiff: " << e.what() << "\n";
    return kUsage;
  } catch (const GraphError& e) {
    std::cerr << "netdiff: " << e.what() << "\n";
    return kUsage;
  } catch (const SimulationError& e) {
    std::cerr << "netdiff: simulation diverged: " << e.what() << "\n";
    return kFail;
  } catch (const std::exception& e) {
    std::cerr << "netdiff: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
