#pragma once

#include "netdiff/core.hpp"
#include "netdiff/gain_set.hpp"
#include "netdiff/graph.hpp"
#include "netdiff/protocol.hpp"
#include "netdiff/signals.hpp"
#include "netdiff/trigger.hpp"

#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace netdiff {

enum class Variant { redcho, derivative_free };

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, long step) : std::runtime_error(what), step(step) {}
  long step;
};

/// Explicit initial states override the seeded uniform draw in [-range, range].
struct InitialEta {
  std::optional<Vec> eta0, eta1, eta0p, eta1p;
  double range = 1.0;
};

struct SimConfig {
  double dt = 1e-4;
  double horizon = 10.0;
  std::uint64_t seed = 1;
  InitialEta init;
  double steady_state_fraction = 0.8;
  int record_stride = 1;
  Variant variant = Variant::redcho;

  long steps() const { return std::lround(horizon / dt); }

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(horizon >= dt)) throw std::invalid_argument("horizon must be at least dt");
    if (!(steady_state_fraction > 0.0 && steady_state_fraction < 1.0))
      throw std::invalid_argument("steady-state fraction must lie in (0,1)");
    if (record_stride < 1) throw std::invalid_argument("record stride must be >= 1");
  }
};

/// Per-step check of ||eps|| <= 2/(1-2 sigma) (delta sqrt|E| / L + sigma ||D^T x0||),
/// eps being the broadcast error of each edge difference scaled by 1/L.
struct EpsilonCheck {
  long checked = 0;
  long violations = 0;
  double worst_ratio = 0.0;  // max ||eps|| / bound
  double first_violation_t = -1.0;
};

/// Columns are recorded instants; rows are agents.
struct Trace {
  double dt = 0.0;
  int stride = 1;
  std::vector<double> t;
  Mat s_hat0, s_hat1, err1, e0, e1;
  std::vector<double> avg_dot;
  bool triggered = false;
  std::vector<EdgeChannel> channels;
  EpsilonCheck epsilon;

  double horizon() const { return t.empty() ? 0.0 : t.back(); }
  long size() const { return static_cast<long>(t.size()); }
};

namespace detail {

inline ProtocolState initial_state(int n, const SimConfig& cfg) {
  const bool variant = cfg.variant == Variant::derivative_free;
  ProtocolState st = ProtocolState::zeros(n, variant);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(-cfg.init.range, cfg.init.range);
  auto fill = [&](Vec& v, const std::optional<Vec>& given) {
    Vec draw(n);
    for (auto& x : draw) x = u(rng);
    if (given) {
      if (given->size() != n) throw std::invalid_argument("initial state has wrong length");
      v = *given;
    } else {
      v = draw;
    }
  };
  fill(st.eta0, cfg.init.eta0);
  fill(st.eta1, cfg.init.eta1);
  if (variant) {
    fill(st.eta0p, cfg.init.eta0p);
    fill(st.eta1p, cfg.init.eta1p);
  }
  return st;
}

inline double base_delta(const ThresholdRule& rule, double t) {
  if (auto* v = std::get_if<VanishingThreshold>(&rule)) return v->delta * std::exp(-v->q * (t - v->p));
  return rule_delta(rule);
}

}  // namespace detail

/// Forward Euler. In triggered mode every edge is checked once per step,
/// fires first, and the step's right-hand side uses the refreshed values.
inline Trace integrate(const Graph& g, const SignalBank& bank, const GainSet& gains,
                       const std::optional<ThresholdRule>& rule, const SimConfig& cfg) {
  cfg.validate();
  if (!(gains.k0 > 0.0) || !(gains.k1 > 0.0)) throw std::invalid_argument("gains must be positive");
  if (bank.size() != g.n_agents()) throw std::invalid_argument("signal bank size does not match the graph");
  const bool variant = cfg.variant == Variant::derivative_free;
  if (variant && rule) throw std::invalid_argument("the derivative-free variant is simulated with ideal communication");
  if (rule) validate_rule(*rule);

  const int n = g.n_agents(), m = g.n_edges();
  const long steps = cfg.steps();
  const long records = steps / cfg.record_stride + 1;

  Trace tr;
  tr.dt = cfg.dt;
  tr.stride = cfg.record_stride;
  tr.triggered = rule.has_value();
  tr.t.reserve(records);
  tr.avg_dot.reserve(records);
  for (Mat* mt : {&tr.s_hat0, &tr.s_hat1, &tr.err1, &tr.e0, &tr.e1}) mt->resize(n, records);
  if (rule) {
    tr.channels.resize(m);
    for (int l = 0; l < m; ++l) {
      tr.channels[l].edge = l;
      tr.channels[l].i = g.edges()[l].i;
      tr.channels[l].j = g.edges()[l].j;
    }
  }

  ProtocolState st = detail::initial_state(n, cfg);
  const double sigma = rule ? rule_sigma(*rule) : 0.0;
  EdgeValues comm{Vec(m), Vec(m)};

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    if (!st.finite()) throw SimulationError("non-finite state at step " + std::to_string(k), k);

    if (k % cfg.record_stride == 0) {
      long c = k / cfg.record_stride;
      OutputSnapshot o = variant ? derivative_free_outputs(st, bank, t, gains) : redcho_outputs(st, bank, t, gains);
      double avg = bank.average(t, 1);
      tr.t.push_back(t);
      tr.avg_dot.push_back(avg);
      tr.s_hat0.col(c) = o.s_hat0;
      tr.s_hat1.col(c) = o.s_hat1;
      tr.err1.col(c) = (o.s_hat1.array() - avg).abs();
      tr.e0.col(c) = o.e0;
      tr.e1.col(c) = o.e1;
    }
    if (k == steps) break;

    Vec s = bank.evaluate(t, 0);
    ProtocolState d;
    if (variant) {
      d = derivative_free_rhs(g, st, s, gains);
    } else {
      Vec sh = shared_estimate(st, s);
      if (rule) {
        for (int l = 0; l < m; ++l) {
          EdgeChannel& ch = tr.channels[l];
          double ci = sh(ch.i - 1), cj = sh(ch.j - 1);
          if (!ch.fired_before() || should_fire(ch, ci, cj, threshold_value(*rule, t, ch))) fire(ch, t, ci, cj);
          comm.at_i(l) = ch.stored_i;
          comm.at_j(l) = ch.stored_j;
        }
        // broadcast error against the instantaneous differences
        double eps2 = 0.0, dx2 = 0.0;
        for (int l = 0; l < m; ++l) {
          double cur = sh(g.edges()[l].i - 1) - sh(g.edges()[l].j - 1);
          double e = (comm.at_i(l) - comm.at_j(l) - cur) / gains.l;
          eps2 += e * e;
          dx2 += (cur / gains.l) * (cur / gains.l);
        }
        double bound = 2.0 / (1.0 - 2.0 * sigma) *
                       (detail::base_delta(*rule, t) * std::sqrt(static_cast<double>(m)) / gains.l +
                        sigma * std::sqrt(dx2));
        double norm = std::sqrt(eps2);
        ++tr.epsilon.checked;
        if (norm > 0.0) tr.epsilon.worst_ratio = std::max(tr.epsilon.worst_ratio, bound > 0.0 ? norm / bound : INFINITY);
        if (norm > bound * (1.0 + 1e-9) + 1e-14) {
          if (tr.epsilon.violations == 0) tr.epsilon.first_violation_t = t;
          ++tr.epsilon.violations;
        }
      } else {
        comm = EdgeValues::instantaneous(g, sh);
      }
      d = redcho_rhs(g, st, comm, gains);
    }
    st.axpy(cfg.dt, d);
  }
  return tr;
}

/// Max over recorded t >= fraction * horizon and over agents of |s_hat1 - avg s'|.
inline double steady_state_error(const Trace& tr, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("fraction must lie in (0,1)");
  const double from = fraction * tr.horizon() - 1e-9;
  double worst = -1.0;
  for (long c = 0; c < tr.size(); ++c)
    if (tr.t[c] >= from) worst = std::max(worst, tr.err1.col(c).maxCoeff());
  if (worst < 0.0) throw std::invalid_argument("steady-state window is empty");
  return worst;
}

/// Max error over recorded instants in [t0, t1].
inline double max_error_between(const Trace& tr, double t0, double t1) {
  double worst = 0.0;
  for (long c = 0; c < tr.size(); ++c)
    if (tr.t[c] >= t0 - 1e-9 && tr.t[c] <= t1 + 1e-9) worst = std::max(worst, tr.err1.col(c).maxCoeff());
  return worst;
}

/// Max over recorded instants in [t0, t1] and edges of |s_hat0_i - s_hat0_j|.
inline double max_edge_disagreement(const Graph& g, const Trace& tr, double t0, double t1) {
  double worst = 0.0;
  for (long c = 0; c < tr.size(); ++c) {
    if (tr.t[c] < t0 - 1e-9 || tr.t[c] > t1 + 1e-9) continue;
    for (const auto& e : g.edges())
      worst = std::max(worst, std::abs(tr.s_hat0(e.i - 1, c) - tr.s_hat0(e.j - 1, c)));
  }
  return worst;
}

struct LyapunovSample {
  double t = 0.0;
  double v = 0.0;
  bool valid = true;
};

struct LyapunovReport {
  std::vector<LyapunovSample> samples;
  long increases = 0;           // samples with V above previous + slack * previous
  double first_increase_t = -1.0;
};

/// V(x0, x1) with x0 = e0 / L, x1 = e1 / (k0 L) every `decimation` steps.
/// Monotonicity is only judged while V stays above `floor`.
inline LyapunovReport lyapunov_monitor(const Graph& g, const Trace& tr, const GainSet& gains, int decimation = 100,
                                       double slack = 1e-3, double floor = 1e-6, double tol = 1e-8) {
  if (decimation < 1 || decimation % tr.stride != 0)
    throw std::invalid_argument("decimation must be a positive multiple of the record stride");
  Kernel k = Kernel::from_graph(g);
  LyapunovReport rep;
  const long every = decimation / tr.stride;
  for (long c = 0; c < tr.size(); c += every) {
    LyapunovSample s{tr.t[c], 0.0, true};
    AbstractState x{k.project(tr.e0.col(c) / gains.l), k.project(tr.e1.col(c) / (gains.k0 * gains.l))};
    try {
      s.v = lyapunov(k, x, gains.beta, tol);
    } catch (const SolverError&) {
      s.valid = false;
    }
    rep.samples.push_back(s);
  }
  const LyapunovSample* prev = nullptr;
  for (const auto& s : rep.samples) {
    if (!s.valid) continue;
    if (prev && prev->v >= floor && s.v > prev->v * (1.0 + slack)) {
      if (rep.increases == 0) rep.first_increase_t = s.t;
      ++rep.increases;
    }
    prev = &s;
  }
  return rep;
}

/// First sampled time at which V <= level, or -1.
inline double time_to_level(const LyapunovReport& rep, double level) {
  for (const auto& s : rep.samples)
    if (s.valid && s.v <= level) return s.t;
  return -1.0;
}

struct SweepRow {
  double delta = 0.0;
  int rep = 0;
  double sse = 0.0;
  double event_fraction = 0.0;
  long epsilon_violations = 0;
};

/// Replace the threshold of `base` (constant if absent) by delta.
inline ThresholdRule with_delta(const std::optional<ThresholdRule>& base, double delta) {
  if (!base) return ConstantThreshold{delta};
  ThresholdRule r = *base;
  std::visit([&](auto& v) { v.delta = delta; }, r);
  return r;
}

/// One triggered run per (delta, repetition). Repetition r draws its initial
/// states from seed * 1000 + r, so all deltas share the same initial states.
inline std::vector<SweepRow> sweep_delta(const Graph& g, const SignalBank& bank, const GainSet& gains,
                                         const std::optional<ThresholdRule>& base, const SimConfig& cfg,
                                         const std::vector<double>& deltas, int reps, std::uint64_t seed,
                                         unsigned threads = 0) {
  if (deltas.empty()) throw std::invalid_argument("sweep needs at least one delta");
  if (reps < 1) throw std::invalid_argument("sweep needs at least one repetition");
  for (double d : deltas)
    if (!(d >= 0.0)) throw std::invalid_argument("sweep deltas must be nonnegative");

  auto run = [&](double delta, int rep) {
    SimConfig c = cfg;
    c.seed = seed * 1000 + static_cast<std::uint64_t>(rep);
    Trace tr = integrate(g, bank, gains, with_delta(base, delta), c);
    SweepRow row{delta, rep, steady_state_error(tr, c.steady_state_fraction), 0.0, tr.epsilon.violations};
    row.event_fraction = inter_event_stats(tr.channels, c.horizon, c.dt, 0.0).fraction;
    return row;
  };

  std::vector<std::pair<double, int>> jobs;
  for (double d : deltas)
    for (int r = 0; r < reps; ++r) jobs.emplace_back(d, r);
  std::vector<SweepRow> rows(jobs.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  if (threads == 1) {
    for (std::size_t q = 0; q < jobs.size(); ++q) rows[q] = run(jobs[q].first, jobs[q].second);
    return rows;
  }
  for (std::size_t start = 0; start < jobs.size(); start += threads) {
    std::vector<std::future<SweepRow>> batch;
    for (std::size_t q = start; q < std::min(jobs.size(), start + threads); ++q)
      batch.push_back(std::async(std::launch::async, run, jobs[q].first, jobs[q].second));
    for (std::size_t q = 0; q < batch.size(); ++q) rows[start + q] = batch[q].get();
  }
  return rows;
}

}  // namespace netdiff
