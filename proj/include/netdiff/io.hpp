#pragma once

#include "netdiff/config.hpp"
#include "netdiff/sim.hpp"
#include "netdiff/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace netdiff {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

}  // namespace detail

/// Rows every `stride` integrator steps; V is filled on rows that carry a monitor sample.
inline void write_trace_csv(const std::filesystem::path& p, const Trace& tr, int stride = 1,
                            const LyapunovReport* lyap = nullptr) {
  if (stride < 1 || stride % tr.stride != 0) throw std::invalid_argument("CSV stride must be a multiple of the trace stride");
  std::map<long, double> v_at;
  if (lyap)
    for (const auto& s : lyap->samples)
      if (s.valid) v_at[std::lround(s.t / tr.dt)] = s.v;
  auto out = detail::open_out(p);
  out << "t,agent,s_hat0,s_hat1,err1" << (lyap ? ",V" : "") << "\n";
  const long every = stride / tr.stride;
  for (long c = 0; c < tr.size(); c += every) {
    long step = c * tr.stride;
    auto it = v_at.find(step);
    for (Eigen::Index i = 0; i < tr.s_hat0.rows(); ++i) {
      out << detail::num(tr.t[c]) << ',' << i + 1 << ',' << detail::num(tr.s_hat0(i, c)) << ','
          << detail::num(tr.s_hat1(i, c)) << ',' << detail::num(tr.err1(i, c));
      if (lyap) out << ',' << (it != v_at.end() ? detail::num(it->second) : "");
      out << "\n";
    }
  }
}

inline void write_events_csv(const std::filesystem::path& p, const std::vector<EdgeChannel>& channels) {
  struct Row {
    int i, j;
    double t;
  };
  std::vector<Row> rows;
  for (const auto& ch : channels)
    for (double t : ch.event_times) rows.push_back({ch.i, ch.j, t});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  auto out = detail::open_out(p);
  out << "edge_i,edge_j,t_event\n";
  for (const auto& r : rows) out << r.i << ',' << r.j << ',' << detail::num(r.t) << "\n";
}

inline void write_sweep_csv(const std::filesystem::path& p, const std::vector<SweepRow>& rows) {
  auto out = detail::open_out(p);
  out << "delta,rep,sse,event_fraction\n";
  for (const auto& r : rows)
    out << detail::num(r.delta) << ',' << r.rep << ',' << detail::num(r.sse) << ',' << detail::num(r.event_fraction)
        << "\n";
}

struct SweepSummary {
  double delta = 0.0;
  int reps = 0;
  double max_sse = 0.0;
  double mean_sse = 0.0;
  double mean_event_fraction = 0.0;
  double bound = 0.0;  // c1 sqrt(delta)
};

inline std::vector<SweepSummary> summarize_sweep(const std::vector<SweepRow>& rows, double c1) {
  std::vector<SweepSummary> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SweepSummary& s) { return s.delta == r.delta; });
    if (it == out.end()) {
      out.push_back({r.delta, 0, 0.0, 0.0, 0.0, c1 * std::sqrt(r.delta)});
      it = out.end() - 1;
    }
    ++it->reps;
    it->max_sse = std::max(it->max_sse, r.sse);
    it->mean_sse += r.sse;
    it->mean_event_fraction += r.event_fraction;
  }
  for (auto& s : out) {
    s.mean_sse /= s.reps;
    s.mean_event_fraction /= s.reps;
  }
  return out;
}

inline void write_sweep_summary_csv(const std::filesystem::path& p, const std::vector<SweepSummary>& rows) {
  auto out = detail::open_out(p);
  out << "delta,reps,max_sse,mean_sse,mean_event_fraction,bound\n";
  for (const auto& s : rows)
    out << detail::num(s.delta) << ',' << s.reps << ',' << detail::num(s.max_sse) << ',' << detail::num(s.mean_sse)
        << ',' << detail::num(s.mean_event_fraction) << ',' << detail::num(s.bound) << "\n";
}

inline json metrics_json(const Graph& g, const Trace& tr, double fraction, const LyapunovReport* lyap = nullptr) {
  json m;
  m["steady_state_error"] = steady_state_error(tr, fraction);
  m["steady_state_from"] = fraction * tr.horizon();
  m["max_edge_disagreement_late"] = max_edge_disagreement(g, tr, fraction * tr.horizon(), tr.horizon());
  if (tr.triggered) {
    InterEventSummary s = inter_event_stats(tr.channels, tr.horizon(), tr.dt);
    m["event_fraction"] = s.fraction;
    m["total_events"] = s.total_events;
    json w = json::array();
    for (const auto& win : s.windows)
      w.push_back({{"t0", win.t0}, {"t1", win.t1}, {"count", win.count}, {"min", win.min}, {"median", win.median},
                   {"max", win.max}});
    m["inter_event_windows"] = w;
    json e = json::array();
    for (const auto& pe : s.per_edge)
      e.push_back({{"edge", pe.edge}, {"events", pe.events}, {"min", pe.min}, {"mean", pe.mean}, {"max", pe.max}});
    m["inter_event_per_edge"] = e;
    m["epsilon_bound"] = {{"checked", tr.epsilon.checked},
                          {"violations", tr.epsilon.violations},
                          {"worst_ratio", tr.epsilon.worst_ratio}};
  } else {
    m["event_fraction"] = 1.0;
  }
  if (lyap) {
    m["lyapunov"] = {{"samples", lyap->samples.size()},
                     {"v0", lyap->samples.empty() ? 0.0 : lyap->samples.front().v},
                     {"increases", lyap->increases},
                     {"time_to_1e-6", time_to_level(*lyap, 1e-6)}};
  }
  return m;
}

inline void write_json(const std::filesystem::path& p, const json& j) {
  auto out = detail::open_out(p);
  out << j.dump(2) << "\n";
}

}  // namespace netdiff
