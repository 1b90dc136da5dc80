#pragma once

#include "netdiff/core.hpp"
#include "netdiff/gain_set.hpp"
#include "netdiff/optimize.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace netdiff {

class CertificationError : public std::runtime_error {
 public:
  CertificationError(const std::string& what, double value) : std::runtime_error(what), value(value) {}
  double value;
};

struct OptimizerSettings {
  int starts = 32;
  int max_evals = 4000;  // per start
  std::uint64_t seed = 1;
  double gamma_floor = 1e-6;
  double conjugate_tol = 1e-8;
  // level-set search for the accuracy constants
  int boundary_samples = 256;
  int corner_samples = 64;
  int bisection_iters = 40;
  double bracket_lo = 1e-4;
  double bracket_hi = 1e4;
  double perturbation = 2.0;  // per-edge box half-width at normalized delta = 1
};

/// Result of a sphere/level-set optimization: value and the point achieving it.
struct Witnessed {
  double value = 0.0;
  AbstractState point;
};

struct K0Bound {
  double k0_lower = 0.0;       // sqrt(k1 * max(sup_ratio, 0))
  double sup_ratio = 0.0;      // sup of Pi_hat / Gamma on the r-sphere, Gamma >= floor
  AbstractState witness;
  double max_pi_near_gamma_zero = 0.0;  // sampled Pi_hat on a neighbourhood of {Gamma = 0}
};

struct AccuracyConstants {
  double theta = 0.0;        // smallest certified level at normalized perturbation
  double x0_extent = 0.0;    // sup ||x0|| on {V <= theta}
  double x1_extent = 0.0;    // sup ||x1|| on {V <= theta}
  double c0 = 0.0;           // ||e0|| <= c0 delta
  double c1 = 0.0;           // ||e1|| <= c1 sqrt(delta)
  double max_vdot_at_theta = 0.0;
};

struct CertifiedConstants {
  double k0_lower = 0.0;
  double k1_lower = 0.0;
  double c = 0.0;
  double v_lower = 0.0;
  double c_psi = 0.0;
  double sigma_max = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double settling_scale = 0.0;  // 3 / (c v_lower); T <= settling_scale * V(0)^(1/3)
  K0Bound k0_detail;
  Witnessed margin_witness;
  Witnessed v_lower_witness;
  Witnessed c_psi_witness;
  AccuracyConstants accuracy;
};

namespace detail {

inline AbstractState state_from_coords(const Kernel& k, const Vec& y) {
  const int m = k.subspace_dim();
  return {k.from_coords(y.head(m)), k.from_coords(y.tail(m))};
}

/// Dilation of x onto the homogeneous unit sphere ||x||_r = 1.
inline AbstractState onto_sphere(const AbstractState& x) {
  double n = x.r_norm();
  return n > 0.0 ? x.dilated(1.0 / n) : x;
}

/// Dilation of x onto the level set V = level.
inline AbstractState onto_level(const Kernel& k, const AbstractState& x, double beta, double level, double tol) {
  double v = lyapunov(k, x, beta, tol);
  return v > 0.0 ? x.dilated(std::cbrt(level / v)) : x;
}

constexpr double kPenalty = 1e12;

}  // namespace detail

/// 1 / c_S, with c_S = sqrt(lambda_G) for graphs and 1 for the scalar prototype.
inline double k1_lower_bound(const Kernel& k) { return 1.0 / k.c_s(); }
inline double k1_lower_bound(const Graph& g) { return 1.0 / std::sqrt(algebraic_connectivity(g)); }

/// Pi scales with k1_tilde = k1 / k0, so "k0 > sup Pi / Gamma" is implicit in
/// k0. With Pi = (k1/k0) Pi_hat the condition reads k0^2 > k1 sup Pi_hat/Gamma.
inline K0Bound k0_lower_bound(const Kernel& k, double k1, double beta, const OptimizerSettings& opts = {}) {
  if (!(k1 > k1_lower_bound(k))) throw std::invalid_argument("k0 bound requires k1 > 1/c_S");
  if (beta < 7.0) throw std::invalid_argument("k0 bound requires beta >= 7");
  const double tol = opts.conjugate_tol;
  auto ratio_at = [&](const AbstractState& x) {
    double gam = gamma_fn(k, x);
    return std::pair{pi_hat(k, x, k1, beta, tol) / gam, gam};
  };
  auto objective = [&](const Vec& y) {
    AbstractState x = detail::onto_sphere(detail::state_from_coords(k, y));
    if (x.r_norm() == 0.0) return detail::kPenalty;
    auto [ratio, gam] = ratio_at(x);
    if (gam < opts.gamma_floor) return detail::kPenalty + (opts.gamma_floor - gam);
    return -ratio;
  };
  opt::Minimum best = opt::multistart(objective, 2 * k.subspace_dim(), opts.starts, opts.seed, opts.max_evals);
  if (!(best.value < detail::kPenalty)) throw CertificationError("k0 bound: no start reached Gamma >= floor", best.value);

  K0Bound out;
  out.witness = detail::onto_sphere(detail::state_from_coords(k, best.x));
  out.sup_ratio = ratio_at(out.witness).first;
  out.k0_lower = std::sqrt(k1 * std::max(out.sup_ratio, 0.0));

  // Pi_hat must be negative where Gamma vanishes; sample x1 = grad U(x0) plus small offsets.
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  out.max_pi_near_gamma_zero = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < 500; ++s) {
    Vec a(k.subspace_dim());
    for (auto& v : a) v = normal(rng);
    Vec x0 = k.from_coords(a);
    Vec off(k.subspace_dim());
    for (auto& v : off) v = normal(rng);
    double scale = s % 5 == 0 ? 0.0 : 1e-4 * (s % 5);
    AbstractState x{x0, k.gradient(x0) + scale * k.gradient(x0).norm() * k.from_coords(off)};
    x = detail::onto_sphere(x);
    out.max_pi_near_gamma_zero = std::max(out.max_pi_near_gamma_zero, pi_hat(k, x, k1, beta, tol));
  }
  return out;
}

/// c = inf over ||x||_r = 1 of k0_tilde Gamma - Pi; throws unless positive.
inline Witnessed margin_c(const Kernel& k, const GainSet& gains, const OptimizerSettings& opts = {}) {
  gains.validate();
  const double tol = opts.conjugate_tol;
  auto value_at = [&](const AbstractState& x) { return gains.k0_tilde() * gamma_fn(k, x) - pi_fn(k, x, gains, tol); };
  auto objective = [&](const Vec& y) {
    AbstractState x = detail::onto_sphere(detail::state_from_coords(k, y));
    if (x.r_norm() == 0.0) return detail::kPenalty;
    return value_at(x);
  };
  opt::Minimum best = opt::multistart(objective, 2 * k.subspace_dim(), opts.starts, opts.seed, opts.max_evals);
  Witnessed out;
  out.point = detail::onto_sphere(detail::state_from_coords(k, best.x));
  out.value = value_at(out.point);
  if (!(out.value > 0.0))
    throw CertificationError("gains do not certify: inf of k0*Gamma - Pi is " + std::to_string(out.value), out.value);
  return out;
}

/// inf of ||x||_r^2 over the level set V = 1.
inline Witnessed v_lower(const Kernel& k, double beta, const OptimizerSettings& opts = {}) {
  if (beta < 7.0) throw std::invalid_argument("v_lower requires beta >= 7");
  const double tol = opts.conjugate_tol;
  auto objective = [&](const Vec& y) {
    AbstractState x = detail::state_from_coords(k, y);
    if (x.r_norm() == 0.0) return detail::kPenalty;
    x = detail::onto_level(k, x, beta, 1.0, tol);
    double n = x.r_norm();
    return n * n;
  };
  opt::Minimum best = opt::multistart(objective, 2 * k.subspace_dim(), opts.starts, opts.seed, opts.max_evals);
  Witnessed out;
  out.point = detail::onto_level(k, detail::state_from_coords(k, best.x), beta, 1.0, tol);
  double n = out.point.r_norm();
  out.value = n * n;
  if (!(out.value > 0.0)) throw CertificationError("v_lower is not positive", out.value);
  return out;
}

/// Integrand of the c_psi bound: k0 |E|^(1/4) ||D||_2 ||grad U(x0) - x1|| sqrt(||D^T x0||).
inline double psi_integrand(const Kernel& k, const AbstractState& x, double k0) {
  Eigen::JacobiSVD<Mat> svd(k.directions());
  double d_norm = svd.singularValues()(0);
  return k0 * std::pow(static_cast<double>(k.n_edges()), 0.25) * d_norm * (k.gradient(x.x0) - x.x1).norm() *
         std::sqrt((k.directions().transpose() * x.x0).norm());
}

/// sup over V = 1 of psi_integrand.
inline Witnessed c_psi(const Kernel& k, const GainSet& gains, const OptimizerSettings& opts = {}) {
  gains.validate();
  const double tol = opts.conjugate_tol;
  auto objective = [&](const Vec& y) {
    AbstractState x = detail::state_from_coords(k, y);
    if (x.r_norm() == 0.0) return detail::kPenalty;
    return -psi_integrand(k, detail::onto_level(k, x, gains.beta, 1.0, tol), gains.k0);
  };
  opt::Minimum best = opt::multistart(objective, 2 * k.subspace_dim(), opts.starts, opts.seed, opts.max_evals);
  Witnessed out;
  out.point = detail::onto_level(k, detail::state_from_coords(k, best.x), gains.beta, 1.0, tol);
  out.value = psi_integrand(k, out.point, gains.k0);
  return out;
}

inline double sigma_max(double c, double v_low, double c_psi_value) {
  if (!(c > 0.0) || !(v_low > 0.0)) throw std::invalid_argument("sigma_max needs positive c and v_lower");
  if (c_psi_value <= 0.0) return 0.25;
  double q = c * v_low / c_psi_value;
  return std::min(0.25, 0.5 / (1.0 + q * q));
}

/// Settling time from dV/dt <= -c v V^(2/3): T <= 3 V(0)^(1/3) / (c v).
inline double settling_bound(double v0, double c, double v_low) {
  if (v0 <= 0.0) return 0.0;
  return 3.0 * std::cbrt(v0) / (c * v_low);
}

/// dV/dt along the triggered abstract dynamics with edge perturbation eps
/// entering the sqrt and sign couplings, maximized over unit disturbances.
inline double vdot_perturbed(const Kernel& k, const AbstractState& x, const Vec& eps, const Vec& grad_conj,
                             const GainSet& gains) {
  const Mat& d = k.directions();
  Vec w = d.transpose() * x.x0 + eps;
  Vec g0 = k.gradient(x.x0) - x.x1;
  Vec w1 = (1.0 + gains.beta) * grad_conj - x.x0;
  Vec dx0 = -gains.gamma * x.x0 - gains.k0_tilde() * (d * signed_power(w, 0.5) - x.x1);
  Vec dx1 = -gains.gamma * x.x1 - gains.k1_tilde() * (d * signed_power(w, 0.0));
  return g0.dot(dx0) + w1.dot(dx1) + gains.k1_tilde() / gains.k1 * w1.norm();
}

/// sup of ||x0|| and ||x1|| on {V <= level}, by homogeneity from the V = 1 sups.
inline std::pair<double, double> level_set_extent(const Kernel& k, double beta, double level,
                                                  const OptimizerSettings& opts = {}) {
  if (level <= 0.0) return {0.0, 0.0};
  const double tol = opts.conjugate_tol;
  auto sup_of = [&](int which) {
    auto objective = [&](const Vec& y) {
      AbstractState x = detail::state_from_coords(k, y);
      if (x.r_norm() == 0.0) return detail::kPenalty;
      x = detail::onto_level(k, x, beta, 1.0, tol);
      return -(which == 0 ? x.x0.norm() : x.x1.norm());
    };
    return -opt::multistart(objective, 2 * k.subspace_dim(), opts.starts, opts.seed + 7, opts.max_evals).value;
  };
  return {std::pow(level, 2.0 / 3.0) * sup_of(0), std::cbrt(level) * sup_of(1)};
}

/// Smallest level theta whose boundary has Vdot < 0 for all sampled edge
/// perturbations in the box [-rho, rho]^|E| (rho = opts.perturbation), then
/// the extents of {V <= theta}. Box corners are used as perturbation samples.
inline AccuracyConstants accuracy_constants(const Kernel& k, const GainSet& gains, const OptimizerSettings& opts = {}) {
  gains.validate();
  AccuracyConstants out;
  if (opts.perturbation <= 0.0) return out;
  const double tol = opts.conjugate_tol;
  const int e = k.n_edges();

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  std::vector<AbstractState> dirs;
  std::vector<Vec> conj;
  for (int s = 0; s < opts.boundary_samples; ++s) {
    Vec y(2 * k.subspace_dim());
    for (auto& v : y) v = normal(rng);
    AbstractState x = detail::onto_level(k, detail::state_from_coords(k, y), gains.beta, 1.0, tol);
    dirs.push_back(x);
    conj.push_back(k.conjugate_gradient(x.x1, tol));
  }
  std::vector<Vec> corners;
  const bool all_corners = e < 31 && (1LL << e) <= opts.corner_samples;
  const long long n_corners = all_corners ? (1LL << e) : opts.corner_samples;
  std::bernoulli_distribution coin;
  for (long long c = 0; c < n_corners; ++c) {
    Vec eps(e);
    for (int l = 0; l < e; ++l) eps(l) = (all_corners ? ((c >> l) & 1) : coin(rng)) ? 1.0 : -1.0;
    corners.push_back(eps);
  }

  // Boundary of {V = theta} is the dilation of the V = 1 samples by theta^(1/3);
  // grad U* has degree 2 in x1.
  auto max_vdot = [&](double theta) {
    double lam = std::cbrt(theta);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < dirs.size(); ++s) {
      AbstractState x = dirs[s].dilated(lam);
      Vec gc = lam * lam * conj[s];
      for (const auto& c : corners) worst = std::max(worst, vdot_perturbed(k, x, opts.perturbation * c, gc, gains));
    }
    return worst;
  };

  double lo = opts.bracket_lo, hi = opts.bracket_hi;
  if (!(max_vdot(hi) < 0.0))
    throw CertificationError("accuracy level search: upper bracket does not certify", max_vdot(hi));
  if (max_vdot(lo) < 0.0) {
    hi = lo;
  } else {
    for (int it = 0; it < opts.bisection_iters; ++it) {
      double mid = std::sqrt(lo * hi);
      (max_vdot(mid) < 0.0 ? hi : lo) = mid;
    }
  }
  out.theta = hi;
  out.max_vdot_at_theta = max_vdot(hi);
  auto [x0_ext, x1_ext] = level_set_extent(k, gains.beta, out.theta, opts);
  out.x0_extent = x0_ext;
  out.x1_extent = x1_ext;
  // perturbation box 2 delta / L in x-coordinates: dilation lambda^2 = delta / L
  out.c0 = x0_ext * 2.0 / opts.perturbation;
  out.c1 = gains.k0 * std::sqrt(gains.l) * x1_ext * std::sqrt(2.0 / opts.perturbation);
  return out;
}

/// Runs every certification step for fixed gains.
inline CertifiedConstants certify(const Kernel& k, const GainSet& gains, const OptimizerSettings& opts = {}) {
  gains.validate();
  CertifiedConstants cc;
  cc.k1_lower = k1_lower_bound(k);
  cc.k0_detail = k0_lower_bound(k, gains.k1, gains.beta, opts);
  cc.k0_lower = cc.k0_detail.k0_lower;
  cc.margin_witness = margin_c(k, gains, opts);
  cc.c = cc.margin_witness.value;
  cc.v_lower_witness = v_lower(k, gains.beta, opts);
  cc.v_lower = cc.v_lower_witness.value;
  cc.c_psi_witness = c_psi(k, gains, opts);
  cc.c_psi = cc.c_psi_witness.value;
  cc.sigma_max = sigma_max(cc.c, cc.v_lower, cc.c_psi);
  cc.settling_scale = 3.0 / (cc.c * cc.v_lower);
  cc.accuracy = accuracy_constants(k, gains, opts);
  cc.c0 = cc.accuracy.c0;
  cc.c1 = cc.accuracy.c1;
  return cc;
}

/// Gain synthesis in dependency order: beta = 7, k1 = max((1 + margin)/c_S, requested), k0 = (1 + margin) k0_lower.
inline GainSet synthesize_gains(const Kernel& k, double k1_requested, double gamma, double l, double margin = 0.1,
                                const OptimizerSettings& opts = {}) {
  GainSet gs;
  gs.beta = 7.0;
  gs.gamma = gamma;
  gs.l = l;
  gs.k1 = std::max((1.0 + margin) * k1_lower_bound(k), k1_requested);
  gs.k0 = (1.0 + margin) * k0_lower_bound(k, gs.k1, gs.beta, opts).k0_lower;
  if (!(gs.k0 > 0.0)) gs.k0 = 1.0 + margin;
  return gs;
}

}  // namespace netdiff
