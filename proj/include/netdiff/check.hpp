#pragma once

#include "netdiff/core.hpp"
#include "netdiff/gain_set.hpp"
#include "netdiff/graph.hpp"
#include "netdiff/protocol.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace netdiff {

/// The kernel operations a property suite exercises. Swappable so that a
/// deliberately broken implementation can be fed to the suite.
struct KernelView {
  Kernel kernel;
  std::function<double(const Vec&)> potential;
  std::function<Vec(const Vec&)> gradient;
  std::function<Vec(const Vec&)> sign_selection;
  std::function<double(const Vec&)> conjugate;
  std::function<Vec(const Vec&)> conjugate_gradient;

  static KernelView of(const Kernel& k, double tol = 1e-8) {
    KernelView v{k, {}, {}, {}, {}, {}};
    v.potential = [k](const Vec& x) { return k.potential_unchecked(x); };
    v.gradient = [k](const Vec& x) { return k.gradient(x); };
    v.sign_selection = [k](const Vec& x) { return k.sign_selection(x); };
    v.conjugate = [k, tol](const Vec& y) { return k.conjugate(y, tol).value; };
    v.conjugate_gradient = [k, tol](const Vec& y) { return k.conjugate_gradient(y, tol); };
    return v;
  }

  /// Test fixture: S with a flipped sign convention, -D sign(D^T x).
  static KernelView with_sign_bug(const Kernel& k, double tol = 1e-8) {
    KernelView v = of(k, tol);
    v.sign_selection = [k](const Vec& x) { return Vec(-k.sign_selection(x)); };
    return v;
  }
};

struct CheckResult {
  std::string name;
  bool passed = true;
  long samples = 0;
  double worst = 0.0;  // worst observed value of the checked quantity
  std::string detail;
  std::string counterexample;
};

struct CheckOptions {
  std::uint64_t seed = 1;
  std::vector<std::string> only;
  double beta = 7.0;
};

namespace detail {

inline std::string show(const Vec& v) {
  std::ostringstream os;
  os.precision(10);
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
  os << "]";
  return os.str();
}

class Sampler {
 public:
  Sampler(const Kernel& k, std::uint64_t seed) : k_(k), rng_(seed) {}
  /// Random point of X with log-uniform scale in [e^-2, e^2].
  Vec point() {
    Vec a(k_.subspace_dim());
    for (auto& v : a) v = normal_(rng_);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Vec x = k_.from_coords(a);
    return k_.project(x * (std::exp(u(rng_)) / std::max(x.norm(), 1e-300)));
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

 private:
  const Kernel& k_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

inline void fail(CheckResult& r, const std::string& cex) {
  if (r.passed) r.counterexample = cex;
  r.passed = false;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace detail

inline CheckResult check_fenchel(const KernelView& kv, std::uint64_t seed, int pairs = 500) {
  CheckResult r{"fenchel", true, 0, INFINITY, "", ""};
  detail::Sampler smp(kv.kernel, seed);
  for (int s = 0; s < pairs; ++s) {
    Vec x0 = smp.point(), x1 = smp.point();
    double gap = kv.potential(x0) + kv.conjugate(x1) - x0.dot(x1);
    r.worst = std::min(r.worst, gap);
    if (gap < -1e-8) detail::fail(r, "x0=" + detail::show(x0) + " x1=" + detail::show(x1) + " gap=" + std::to_string(gap));
    // equality case x1 = grad U(x0)
    Vec g = kv.gradient(x0);
    double eq = kv.potential(x0) + kv.conjugate(g) - x0.dot(g);
    if (std::abs(eq) > 1e-6 * std::max(1.0, kv.potential(x0)))
      detail::fail(r, "equality case x0=" + detail::show(x0) + " residual=" + std::to_string(eq));
    r.samples += 2;
  }
  r.detail = "min U + U* - <x0,x1> = " + std::to_string(r.worst);
  return r;
}

inline CheckResult check_gradient(const KernelView& kv, std::uint64_t seed, int samples = 300) {
  CheckResult r{"gradient", true, 0, 0.0, "", ""};
  detail::Sampler smp(kv.kernel, seed);
  const Kernel& k = kv.kernel;
  const double h = 1e-6;
  for (int s = 0; s < samples; ++s) {
    Vec x = smp.point();
    Vec z = k.directions().transpose() * x;
    if (z.cwiseAbs().minCoeff() < 1e-3) continue;
    Vec g = kv.gradient(x);
    for (int b = 0; b < k.subspace_dim(); ++b) {
      Vec dir = k.basis().col(b);
      double fd = (kv.potential(x + h * dir) - kv.potential(x - h * dir)) / (2.0 * h);
      double err = std::abs(fd - g.dot(dir)) / std::max(g.norm(), 1e-12);
      r.worst = std::max(r.worst, err);
      if (err > 1e-5) detail::fail(r, "x=" + detail::show(x) + " basis " + std::to_string(b) + " rel=" + std::to_string(err));
    }
    ++r.samples;
  }
  r.detail = "max rel. finite-difference error " + std::to_string(r.worst);
  return r;
}

inline CheckResult check_homogeneity(const KernelView& kv, double beta, std::uint64_t seed, int samples = 100) {
  CheckResult r{"homogeneity", true, 0, 0.0, "", ""};
  detail::Sampler smp(kv.kernel, seed);
  const Kernel& k = kv.kernel;
  auto note = [&](double err, double tol, const std::string& what) {
    r.worst = std::max(r.worst, err);
    if (err > tol) detail::fail(r, what + " rel=" + std::to_string(err));
  };
  GainSet gs;
  gs.beta = beta;
  for (int s = 0; s < samples; ++s) {
    Vec x0 = smp.point(), x1 = smp.point();
    AbstractState x{x0, x1};
    for (double lam : {0.5, 2.0}) {
      note(detail::rel(kv.potential(lam * x0), std::pow(lam, 1.5) * kv.potential(x0)), 1e-12, "U(lam x0), x0=" + detail::show(x0));
      note(detail::rel(kv.conjugate(lam * x1), std::pow(lam, 3) * kv.conjugate(x1)), 1e-4, "U*(lam x1), x1=" + detail::show(x1));
      AbstractState xl = x.dilated(lam);
      note(detail::rel(lyapunov(k, xl, beta), std::pow(lam, 3) * lyapunov(k, x, beta)), 1e-4, "V(Delta x), x0=" + detail::show(x0));
      note(detail::rel(gamma_fn(k, xl), lam * lam * gamma_fn(k, x)), 1e-10, "Gamma(Delta x)");
      note(detail::rel(pi_fn(k, xl, gs), lam * lam * pi_fn(k, x, gs)), 1e-4, "Pi(Delta x), x0=" + detail::show(x0));
    }
    ++r.samples;
  }
  r.detail = "max rel. deviation " + std::to_string(r.worst);
  return r;
}

inline CheckResult check_euler(const KernelView& kv, std::uint64_t seed, int samples = 300) {
  CheckResult r{"euler", true, 0, INFINITY, "", ""};
  detail::Sampler smp(kv.kernel, seed);
  for (int s = 0; s < samples; ++s) {
    Vec x0 = smp.point(), x1 = smp.point();
    double a = kv.gradient(x0).dot(x0) - kv.potential(x0);
    double b = kv.conjugate_gradient(x1).dot(x1) - kv.conjugate(x1);
    r.worst = std::min({r.worst, a, b});
    if (a < -1e-10) detail::fail(r, "<grad U(x0),x0> < U(x0) at x0=" + detail::show(x0));
    if (b < -1e-8) detail::fail(r, "<grad U*(x1),x1> < U*(x1) at x1=" + detail::show(x1));
    ++r.samples;
  }
  r.detail = "min slack " + std::to_string(r.worst);
  return r;
}

inline CheckResult check_beta(const KernelView& kv, double beta, std::uint64_t seed, int samples = 500) {
  CheckResult r{"beta", true, 0, INFINITY, "", ""};
  detail::Sampler smp(kv.kernel, seed);
  for (int s = 0; s < samples; ++s) {
    Vec x0 = smp.point(), x1 = smp.point();
    // hardest direction: x1 aligned with grad U(x0)
    if (s % 2) x1 = kv.gradient(x0) * smp.uniform(0.2, 3.0);
    double v = kv.potential(x0) + (1.0 + beta) * kv.conjugate(x1) - 2.0 * x0.dot(x1);
    r.worst = std::min(r.worst, v);
    if (v < -1e-8) detail::fail(r, "x0=" + detail::show(x0) + " x1=" + detail::show(x1) + " value=" + std::to_string(v));
    ++r.samples;
  }
  r.detail = "min U + (1+beta)U* - 2<x0,x1> = " + std::to_string(r.worst);
  return r;
}

inline CheckResult check_coercivity(const KernelView& kv, std::uint64_t seed, int samples = 1000) {
  CheckResult r{"coercivity", true, 0, INFINITY, "", ""};
  detail::Sampler smp(kv.kernel, seed);
  const double cs = kv.kernel.c_s();
  for (int s = 0; s < samples; ++s) {
    Vec e0 = smp.point();
    double slack = e0.dot(kv.sign_selection(e0)) - cs * e0.norm();
    r.worst = std::min(r.worst, slack / e0.norm());
    if (slack < -1e-12 * e0.norm())
      detail::fail(r, "e0=" + detail::show(e0) + " <e0,S(e0)> - c_S||e0|| = " + std::to_string(slack));
    ++r.samples;
  }
  r.detail = "min (<e0,S(e0)> - c_S||e0||)/||e0|| = " + std::to_string(r.worst);
  return r;
}

inline CheckResult check_definiteness(const KernelView& kv, std::uint64_t seed, int samples = 500) {
  CheckResult r{"definiteness", true, 0, INFINITY, "", ""};
  detail::Sampler smp(kv.kernel, seed);
  if (kv.potential(Vec::Zero(kv.kernel.dim())) != 0.0) detail::fail(r, "U(0) != 0");
  for (int s = 0; s < samples; ++s) {
    Vec e0 = smp.point() * 1e-3;
    double u = kv.potential(e0);
    r.worst = std::min(r.worst, u);
    if (!(u > 0.0)) detail::fail(r, "U vanishes at nonzero e0=" + detail::show(e0));
    ++r.samples;
  }
  r.detail = "min U over small nonzero samples " + std::to_string(r.worst);
  return r;
}

/// Potential, gradient and sign selection do not depend on edge orientation.
inline CheckResult check_orientation(const KernelView& kv, std::uint64_t seed, int samples = 100) {
  CheckResult r{"orientation", true, 0, 0.0, "", ""};
  detail::Sampler smp(kv.kernel, seed);
  const Kernel& k = kv.kernel;
  for (int l = 0; l < k.n_edges(); ++l) {
    Kernel f = k.with_flipped_edge(l);
    for (int s = 0; s < samples; ++s) {
      Vec x = smp.point();
      double err = std::abs(kv.potential(x) - f.potential_unchecked(x)) + (kv.gradient(x) - f.gradient(x)).norm() +
                   (kv.sign_selection(x) - f.sign_selection(x)).norm();
      r.worst = std::max(r.worst, err);
      if (err > 1e-12 * std::max(1.0, x.norm()))
        detail::fail(r, "edge " + std::to_string(l) + " flipped, x=" + detail::show(x));
      ++r.samples;
    }
  }
  r.detail = "max deviation " + std::to_string(r.worst);
  return r;
}

inline CheckResult check_roundtrip(const KernelView& kv, std::uint64_t seed, int samples = 300) {
  CheckResult r{"roundtrip", true, 0, 0.0, "", ""};
  detail::Sampler smp(kv.kernel, seed);
  for (int s = 0; s < samples; ++s) {
    Vec x1 = smp.point();
    double err = (kv.gradient(kv.conjugate_gradient(x1)) - x1).norm() / std::max(1.0, x1.squaredNorm());
    r.worst = std::max(r.worst, err);
    if (err > 1e-8) detail::fail(r, "x1=" + detail::show(x1) + " residual " + std::to_string(err));
    ++r.samples;
  }
  r.detail = "max scaled residual of grad U(grad U*(x1)) - x1: " + std::to_string(r.worst);
  return r;
}

/// Closed-form disturbance share ||w|| against a Monte-Carlo sup over unit d in X.
inline CheckResult check_pi_closed_form(const KernelView& kv, double beta, std::uint64_t seed, int states = 10,
                                        int draws = 10000) {
  CheckResult r{"pi_closed_form", true, 0, 0.0, "", ""};
  detail::Sampler smp(kv.kernel, seed);
  for (int s = 0; s < states; ++s) {
    AbstractState x{smp.point(), smp.point()};
    Vec w = (1.0 + beta) * kv.conjugate_gradient(x.x1) - x.x0;
    double sampled = -INFINITY;
    for (int q = 0; q < draws; ++q) {
      Vec d = smp.point();
      sampled = std::max(sampled, w.dot(d / d.norm()));
    }
    double closed = w.norm();
    double gap = (closed - sampled) / closed;
    r.worst = std::max(r.worst, gap);
    if (sampled > closed * (1.0 + 1e-12) || gap > 0.01)
      detail::fail(r, "x0=" + detail::show(x.x0) + " closed " + std::to_string(closed) + " sampled " +
                          std::to_string(sampled));
    ++r.samples;
  }
  r.detail = "max relative shortfall of the sampled sup " + std::to_string(r.worst);
  return r;
}

/// With gamma = 0 the mean of eta1 is constant: D has zero column sums.
inline CheckResult check_mean_decoupling(const Graph& g, std::uint64_t seed, int samples = 200) {
  CheckResult r{"mean_decoupling", true, 0, 0.0, "", ""};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  GainSet gs;
  gs.gamma = 0.0;
  const int n = g.n_agents(), m = g.n_edges();
  for (int s = 0; s < samples; ++s) {
    ProtocolState st = ProtocolState::zeros(n);
    for (auto& v : st.eta0) v = nd(rng);
    for (auto& v : st.eta1) v = nd(rng);
    EdgeValues ev{Vec(m), Vec(m)};
    for (auto& v : ev.at_i) v = nd(rng);
    for (auto& v : ev.at_j) v = nd(rng);
    double drift = std::abs(redcho_rhs(g, st, ev, gs).eta1.mean());
    r.worst = std::max(r.worst, drift);
    if (drift > 1e-12) detail::fail(r, "eta1=" + detail::show(st.eta1) + " mean drift " + std::to_string(drift));
    ++r.samples;
  }
  r.detail = "max |d/dt mean(eta1)| " + std::to_string(r.worst);
  return r;
}

/// Frozen zero edge differences: mean(eta1) = m1 e^{-gamma t}, mean(eta0) = (m0 + m1 t) e^{-gamma t}.
inline CheckResult check_damping(const Graph& g, std::uint64_t seed) {
  CheckResult r{"damping", true, 0, 0.0, "", ""};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  GainSet gs;
  const int n = g.n_agents(), m = g.n_edges();
  ProtocolState st = ProtocolState::zeros(n);
  for (auto& v : st.eta0) v = nd(rng);
  for (auto& v : st.eta1) v = nd(rng);
  const double m0 = st.eta0.mean(), m1 = st.eta1.mean();
  EdgeValues zero{Vec::Zero(m), Vec::Zero(m)};
  const double dt = 1e-6, horizon = 1.0;
  const long steps = std::lround(horizon / dt);
  for (long k = 1; k <= steps; ++k) {
    st.axpy(dt, redcho_rhs(g, st, zero, gs));
    if (k % 100000 == 0) {
      double t = k * dt;
      double err = std::abs(st.eta1.mean() - m1 * std::exp(-gs.gamma * t)) +
                   std::abs(st.eta0.mean() - (m0 + m1 * t) * std::exp(-gs.gamma * t));
      r.worst = std::max(r.worst, err);
      if (err > 1e-6) detail::fail(r, "t=" + std::to_string(t) + " deviation " + std::to_string(err));
      ++r.samples;
    }
  }
  r.detail = "max deviation from exp(-gamma t) " + std::to_string(r.worst);
  return r;
}

/// Euler integration of the error system keeps (e0, e1) in the zero-mean subspace.
inline CheckResult check_invariance(const Graph& g, std::uint64_t seed) {
  CheckResult r{"invariance", true, 0, 0.0, "", ""};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  GainSet gs;
  const int n = g.n_agents();
  Vec e0(n), e1(n);
  for (auto& v : e0) v = nd(rng);
  for (auto& v : e1) v = nd(rng);
  e0 = project_to_zero_mean(e0);
  e1 = project_to_zero_mean(e1);
  const double dt = 1e-4;
  for (int k = 0; k < 10000; ++k) {
    Vec d(n);
    for (int i = 0; i < n; ++i) d(i) = std::sin(0.3 * i + k * dt * (i + 1));
    d = project_to_zero_mean(d);
    auto [de0, de1] = error_rhs(g, e0, e1, d, gs);
    e0 += dt * de0;
    e1 += dt * de1;
    double mean = std::max(std::abs(e0.mean()), std::abs(e1.mean()));
    r.worst = std::max(r.worst, mean);
    if (mean > 1e-9) {
      detail::fail(r, "step " + std::to_string(k) + " mean " + std::to_string(mean));
      break;
    }
    ++r.samples;
  }
  r.detail = "max |mean| " + std::to_string(r.worst);
  return r;
}

inline std::vector<std::string> check_names() {
  return {"fenchel", "gradient", "homogeneity", "euler", "beta", "coercivity", "definiteness", "orientation",
          "roundtrip", "pi_closed_form", "mean_decoupling", "damping", "invariance"};
}

/// Runs the selected suites (all when opts.only is empty) on graph g.
inline std::vector<CheckResult> run_checks(const Graph& g, const KernelView& kv, const CheckOptions& opts = {}) {
  auto wanted = [&](const std::string& name) {
    if (opts.only.empty()) return true;
    for (const auto& o : opts.only)
      if (o == name) return true;
    return false;
  };
  for (const auto& o : opts.only) {
    bool known = false;
    for (const auto& n : check_names()) known = known || n == o;
    if (!known) throw std::invalid_argument("unknown check '" + o + "'");
  }
  std::vector<CheckResult> out;
  const auto s = opts.seed;
  if (wanted("fenchel")) out.push_back(check_fenchel(kv, s));
  if (wanted("gradient")) out.push_back(check_gradient(kv, s + 1));
  if (wanted("homogeneity")) out.push_back(check_homogeneity(kv, opts.beta, s + 2));
  if (wanted("euler")) out.push_back(check_euler(kv, s + 3));
  if (wanted("beta")) out.push_back(check_beta(kv, opts.beta, s + 4));
  if (wanted("coercivity")) out.push_back(check_coercivity(kv, s + 5));
  if (wanted("definiteness")) out.push_back(check_definiteness(kv, s + 6));
  if (wanted("orientation")) out.push_back(check_orientation(kv, s + 7));
  if (wanted("roundtrip")) out.push_back(check_roundtrip(kv, s + 8));
  if (wanted("pi_closed_form")) out.push_back(check_pi_closed_form(kv, opts.beta, s + 9));
  if (wanted("mean_decoupling")) out.push_back(check_mean_decoupling(g, s + 10));
  if (wanted("damping")) out.push_back(check_damping(g, s + 11));
  if (wanted("invariance")) out.push_back(check_invariance(g, s + 12));
  return out;
}

}  // namespace netdiff
