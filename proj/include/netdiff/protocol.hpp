#pragma once

#include "netdiff/core.hpp"
#include "netdiff/gain_set.hpp"
#include "netdiff/graph.hpp"
#include "netdiff/signals.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace netdiff {

/// Internal states of every agent. The primed pair is only used by the
/// derivative-free variant and is empty otherwise.
struct ProtocolState {
  Vec eta0;
  Vec eta1;
  Vec eta0p;
  Vec eta1p;

  static ProtocolState zeros(int n, bool variant = false) {
    ProtocolState s{Vec::Zero(n), Vec::Zero(n), Vec(), Vec()};
    if (variant) {
      s.eta0p = Vec::Zero(n);
      s.eta1p = Vec::Zero(n);
    }
    return s;
  }
  bool has_variant() const { return eta0p.size() > 0; }
  int size() const { return static_cast<int>(eta0.size()); }

  ProtocolState& axpy(double a, const ProtocolState& d) {
    eta0 += a * d.eta0;
    eta1 += a * d.eta1;
    if (has_variant()) {
      eta0p += a * d.eta0p;
      eta1p += a * d.eta1p;
    }
    return *this;
  }
  bool finite() const {
    return eta0.allFinite() && eta1.allFinite() && (!has_variant() || (eta0p.allFinite() && eta1p.allFinite()));
  }
};

/// Per-edge pair of shared estimates that an edge differences: instantaneous
/// values under ideal communication, last broadcast values when triggered.
struct EdgeValues {
  Vec at_i;
  Vec at_j;

  static EdgeValues instantaneous(const Graph& g, const Vec& s_hat0) {
    EdgeValues ev{Vec(g.n_edges()), Vec(g.n_edges())};
    for (int l = 0; l < g.n_edges(); ++l) {
      ev.at_i(l) = s_hat0(g.edges()[l].i - 1);
      ev.at_j(l) = s_hat0(g.edges()[l].j - 1);
    }
    return ev;
  }
  Vec differences() const { return at_i - at_j; }
};

namespace detail {

inline double sqrt_sign(double v) { return v >= 0.0 ? std::sqrt(v) : -std::sqrt(-v); }

inline void require_size(const Vec& v, Eigen::Index n, const char* what) {
  if (v.size() != n)
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                                std::to_string(v.size()));
}

}  // namespace detail

inline Vec shared_estimate(const ProtocolState& st, const Vec& s) { return s - st.eta0; }

/// eta0' = k0 sqrt(L) D [D^T v]^(1/2) + eta1 - gamma eta0
/// eta1' = k1 L D sign(D^T v) - gamma eta1
/// with D^T v taken edge by edge from comm.
inline ProtocolState redcho_rhs(const Graph& g, const ProtocolState& st, const EdgeValues& comm, const GainSet& gains) {
  const int n = g.n_agents();
  detail::require_size(st.eta0, n, "redcho_rhs eta0");
  detail::require_size(st.eta1, n, "redcho_rhs eta1");
  detail::require_size(comm.at_i, g.n_edges(), "redcho_rhs comm");
  detail::require_size(comm.at_j, g.n_edges(), "redcho_rhs comm");
  const double a0 = gains.k0 * std::sqrt(gains.l);
  const double a1 = gains.k1 * gains.l;
  ProtocolState d{st.eta1 - gains.gamma * st.eta0, -gains.gamma * st.eta1, Vec(), Vec()};
  for (int l = 0; l < g.n_edges(); ++l) {
    const int i = g.edges()[l].i - 1, j = g.edges()[l].j - 1;
    double diff = comm.at_i(l) - comm.at_j(l);
    double u0 = a0 * detail::sqrt_sign(diff);
    double u1 = a1 * sign(diff);
    d.eta0(i) += u0;
    d.eta0(j) -= u0;
    d.eta1(i) += u1;
    d.eta1(j) -= u1;
  }
  return d;
}

/// Ideal-communication convenience overload.
inline ProtocolState redcho_rhs(const Graph& g, const ProtocolState& st, const Vec& s, const GainSet& gains) {
  return redcho_rhs(g, st, EdgeValues::instantaneous(g, shared_estimate(st, s)), gains);
}

/// Outputs and the consensus/abstract coordinates at one instant.
/// s_hat1 is the differentiator output; e1 is built from the compact form
/// s' + gamma s - eta1, which differs from s_hat1 by gamma * s_hat0.
struct OutputSnapshot {
  Vec s_hat0;
  Vec s_hat1;
  Vec e0;
  Vec e1;
  Vec x0;
  Vec x1;
};

inline OutputSnapshot redcho_outputs(const ProtocolState& st, const SignalBank& bank, double t, const GainSet& gains) {
  Vec s = bank.evaluate(t, 0);
  Vec ds = bank.evaluate(t, 1);
  detail::require_size(st.eta0, s.size(), "redcho_outputs");
  OutputSnapshot o;
  o.s_hat0 = s - st.eta0;
  o.s_hat1 = ds - st.eta1 + gains.gamma * st.eta0;
  o.e0 = project_to_zero_mean(o.s_hat0);
  o.e1 = project_to_zero_mean(ds + gains.gamma * s - st.eta1);
  o.x0 = o.e0 / gains.l;
  o.x1 = o.e1 / (gains.k0 * gains.l);
  return o;
}

/// Disturbance of the error system: P (s'' + 2 gamma s' + gamma^2 s).
inline Vec error_disturbance(const SignalBank& bank, double t, double gamma) {
  return project_to_zero_mean(bank.evaluate(t, 2) + 2.0 * gamma * bank.evaluate(t, 1) +
                              gamma * gamma * bank.evaluate(t, 0));
}

/// e0' = -gamma e0 - k0 sqrt(L) D [D^T e0]^(1/2) + e1
/// e1' = -gamma e1 - k1 L D sign(D^T e0) + d
/// on any kernel; the scalar prototype is the classical super-twisting system.
inline std::pair<Vec, Vec> error_rhs(const Kernel& k, const Vec& e0, const Vec& e1, const Vec& d, const GainSet& gains) {
  for (const Vec* v : {&e0, &e1, &d}) detail::require_size(*v, k.dim(), "error_rhs");
  Vec de0 = -gains.gamma * e0 - gains.k0 * std::sqrt(gains.l) * k.gradient(e0) + e1;
  Vec de1 = -gains.gamma * e1 - gains.k1 * gains.l * k.sign_selection(e0) + d;
  return {de0, de1};
}

inline std::pair<Vec, Vec> error_rhs(const Graph& g, const Vec& e0, const Vec& e1, const Vec& d, const GainSet& gains,
                                     double mean_tol = 1e-8) {
  const int n = g.n_agents();
  detail::require_size(e0, n, "error_rhs e0");
  detail::require_size(e1, n, "error_rhs e1");
  detail::require_size(d, n, "error_rhs d");
  for (const Vec* v : {&e0, &e1, &d}) {
    double scale = std::max(1.0, v->cwiseAbs().maxCoeff());
    if (std::abs(v->mean()) > mean_tol * scale) throw std::invalid_argument("error_rhs: inputs must be zero-mean");
  }
  return error_rhs(Kernel::from_graph(g), e0, e1, d, gains);
}

/// Edge list of the derivative-free variant: the graph's edges between agents
/// plus one edge from each agent to its own virtual node.
/// comm for derivative_free_rhs is indexed [graph edges..., self edges...].
struct VariantValues {
  EdgeValues graph;  // s_hat0' differences along graph edges
  Vec self_real;     // s_hat0'_i, per agent
  Vec self_virtual;  // s_hat0_i = -eta0_i, per agent

  static VariantValues instantaneous(const Graph& g, const ProtocolState& st, const Vec& s) {
    if (!st.has_variant()) throw std::invalid_argument("derivative-free variant needs primed states");
    detail::require_size(s, st.size(), "derivative-free signal");
    Vec primed = s - st.eta0p;
    return {EdgeValues::instantaneous(g, primed), primed, -st.eta0};
  }
};

/// Derivative-free protocol: agent i runs a primed pair coupled to its
/// neighbours and to an unprimed pair acting as a zero-signal virtual node.
inline ProtocolState derivative_free_rhs(const Graph& g, const ProtocolState& st, const VariantValues& comm,
                                         const GainSet& gains) {
  if (!st.has_variant()) throw std::invalid_argument("derivative_free_rhs needs primed states");
  const int n = g.n_agents();
  for (const Vec* v : {&st.eta0, &st.eta1, &st.eta0p, &st.eta1p, &comm.self_real, &comm.self_virtual})
    detail::require_size(*v, n, "derivative_free_rhs");
  const double a0 = gains.k0 * std::sqrt(gains.l);
  const double a1 = gains.k1 * gains.l;

  ProtocolState primed{st.eta0p, st.eta1p, Vec(), Vec()};
  ProtocolState d = ProtocolState::zeros(n, true);
  ProtocolState net = redcho_rhs(g, primed, comm.graph, gains);
  d.eta0p = net.eta0;
  d.eta1p = net.eta1;
  for (int i = 0; i < n; ++i) {
    double diff = comm.self_real(i) - comm.self_virtual(i);
    d.eta0p(i) += a0 * detail::sqrt_sign(diff);
    d.eta1p(i) += a1 * sign(diff);
    d.eta0(i) = -a0 * detail::sqrt_sign(diff) + st.eta1(i) - gains.gamma * st.eta0(i);
    d.eta1(i) = -a1 * sign(diff) - gains.gamma * st.eta1(i);
  }
  return d;
}

inline ProtocolState derivative_free_rhs(const Graph& g, const ProtocolState& st, const Vec& s, const GainSet& gains) {
  return derivative_free_rhs(g, st, VariantValues::instantaneous(g, st, s), gains);
}

/// Shared estimate s' - eta0' and output 2 (gamma eta0 - eta1).
inline OutputSnapshot derivative_free_outputs(const ProtocolState& st, const SignalBank& bank, double t,
                                              const GainSet& gains) {
  Vec s = bank.evaluate(t, 0);
  OutputSnapshot o;
  o.s_hat0 = s - st.eta0p;
  o.s_hat1 = 2.0 * (gains.gamma * st.eta0 - st.eta1);
  o.e0 = project_to_zero_mean(o.s_hat0);
  o.e1 = project_to_zero_mean(o.s_hat1);
  o.x0 = o.e0 / gains.l;
  o.x1 = o.e1 / (gains.k0 * gains.l);
  return o;
}

/// Network on which the derivative-free variant is plain REDCHO: agents 1..N
/// carry the real signals, agents N+1..2N are virtual with zero signal, and
/// each agent i is linked to N+i.
inline Graph augmented_graph(const Graph& g) {
  std::vector<Edge> edges = g.edges();
  for (int i = 1; i <= g.n_agents(); ++i) edges.push_back({i, g.n_agents() + i});
  return Graph(2 * g.n_agents(), edges);
}

}  // namespace netdiff
