#pragma once

#include "netdiff/gain_set.hpp"
#include "netdiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <stdexcept>
#include <string>
#include <vector>

namespace netdiff {

/// Elementwise |x|^alpha sign(x), with sign(0) = 0 for every alpha (alpha = 0 included).
inline Vec signed_power(const Vec& x, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("signed_power exponent must be nonnegative");
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = x(i);
    if (v == 0.0) {
      out(i) = 0.0;
    } else {
      double mag = alpha == 0.0 ? 1.0 : (alpha == 0.5 ? std::sqrt(std::abs(v)) : std::pow(std::abs(v), alpha));
      out(i) = v > 0.0 ? mag : -mag;
    }
  }
  return out;
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Weights r = [2 1_N, 1_N] for the stacked state (x0, x1).
inline Vec stacked_weights(int n) {
  Vec r(2 * n);
  r.head(n).setConstant(2.0);
  r.tail(n).setConstant(1.0);
  return r;
}

/// sum_i |x_i|^(1/r_i)
inline double homogeneous_norm(const Vec& x, const Vec& r) {
  if (x.size() != r.size()) throw std::invalid_argument("homogeneous_norm: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(r(i) > 0.0)) throw std::invalid_argument("homogeneous weights must be positive");
    s += r(i) == 2.0 ? std::sqrt(std::abs(x(i))) : std::pow(std::abs(x(i)), 1.0 / r(i));
  }
  return s;
}

/// Abstract-coordinate state: x0 = e0 / L, x1 = e1 / (k0 L).
struct AbstractState {
  Vec x0;
  Vec x1;

  Vec stacked() const {
    Vec s(x0.size() + x1.size());
    s << x0, x1;
    return s;
  }
  /// Delta_lambda: (lambda^2 x0, lambda x1).
  AbstractState dilated(double lambda) const { return {lambda * lambda * x0, lambda * x1}; }
  double r_norm() const {
    return homogeneous_norm(stacked(), stacked_weights(static_cast<int>(x0.size())));
  }
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double best_value, double grad_norm)
      : std::runtime_error(what), best_value(best_value), grad_norm(grad_norm) {}
  double best_value;
  double grad_norm;
};

struct ConjugateResult {
  double value = 0.0;
  Vec argmax;
  double grad_norm = 0.0;
  int iterations = 0;
  int start = 0;
};

/// The super-twisting kernel U(x) = (2/3) sum_l |d_l^T x|^(3/2) on a subspace X,
/// with S(x) = D sign(D^T x). A graph instance uses its incidence matrix and
/// the zero-mean subspace; the scalar prototype uses D = [1] and X = R.
class Kernel {
 public:
  Kernel(Mat directions, Mat basis, double c_s)
      : d_(std::move(directions)), basis_(std::move(basis)), c_s_(c_s) {
    if (d_.rows() != basis_.rows()) throw std::invalid_argument("kernel: basis and directions disagree on dimension");
    if (basis_.cols() + 1 == basis_.rows()) {
      Vec ones = Vec::Ones(basis_.rows());
      zero_mean_ = (basis_.transpose() * ones).norm() <= 1e-10 * std::sqrt(static_cast<double>(ones.size()));
    }
    flow_pinv_ = d_.completeOrthogonalDecomposition().pseudoInverse();
    diff_pinv_ = d_.transpose().completeOrthogonalDecomposition().pseudoInverse();
    // cycle space of D: right singular vectors with zero singular value
    Eigen::JacobiSVD<Mat> svd(d_, Eigen::ComputeFullV);
    svd.setThreshold(1e-10);
    const auto rank = svd.rank();
    cycles_ = svd.matrixV().rightCols(d_.cols() - rank);
    const int ground = static_cast<int>(d_.rows());
    for (Eigen::Index l = 0; l < d_.cols(); ++l) {
      std::vector<int> nz;
      for (Eigen::Index i = 0; i < d_.rows(); ++i)
        if (d_(i, l) != 0.0) nz.push_back(static_cast<int>(i));
      if (nz.empty() || nz.size() > 2) throw std::invalid_argument("kernel: each direction needs one or two nonzeros");
      endpoints_.emplace_back(nz[0], nz.size() == 2 ? nz[1] : ground);
    }
  }

  static Kernel from_graph(const Graph& g) {
    Mat d = incidence(g);
    return Kernel(d, zero_mean_basis(g.n_agents()), std::sqrt(algebraic_connectivity(g)));
  }

  static Kernel scalar() { return Kernel(Mat::Identity(1, 1), Mat::Identity(1, 1), 1.0); }

  /// Same graph with the orientation of edge column l reversed.
  Kernel with_flipped_edge(int l) const {
    Mat d = d_;
    d.col(l) *= -1.0;
    return Kernel(d, basis_, c_s_);
  }

  int dim() const { return static_cast<int>(d_.rows()); }
  int subspace_dim() const { return static_cast<int>(basis_.cols()); }
  int n_edges() const { return static_cast<int>(d_.cols()); }
  const Mat& directions() const { return d_; }
  const Mat& basis() const { return basis_; }
  double c_s() const { return c_s_; }

  /// Orthogonal projection onto X (exact mean removal for the zero-mean subspace).
  Vec project(const Vec& v) const {
    if (basis_.cols() == basis_.rows()) return v;
    if (zero_mean_) return v.array() - v.mean();
    return basis_ * (basis_.transpose() * v);
  }
  Vec from_coords(const Vec& a) const { return basis_ * a; }
  Vec to_coords(const Vec& v) const { return basis_.transpose() * v; }

  bool in_subspace(const Vec& v, double tol = 1e-8) const {
    return (v - project(v)).lpNorm<Eigen::Infinity>() <= tol * std::max(1.0, v.lpNorm<Eigen::Infinity>());
  }

  double potential(const Vec& x0) const {
    require_in_subspace(x0, "potential");
    return potential_unchecked(x0);
  }

  double potential_unchecked(const Vec& x0) const {
    Vec w = d_.transpose() * x0;
    double s = 0.0;
    for (Eigen::Index l = 0; l < w.size(); ++l) s += std::abs(w(l)) * std::sqrt(std::abs(w(l)));
    return 2.0 / 3.0 * s;
  }

  Vec gradient(const Vec& x0) const { return d_ * signed_power(d_.transpose() * x0, 0.5); }

  /// D sign(D^T x0), the sign(0) = 0 selection of the set-valued map.
  Vec sign_selection(const Vec& x0) const { return d_ * signed_power(d_.transpose() * x0, 0.0); }

  /// U*(x1) = sup_{x0 in X} <x0, x1> - U(x0).
  ///
  /// Solved through the edge-flow dual: U*(x1) = min { sum_l |z_l|^3 / 3 : D z = x1 },
  /// whose minimizer gives the argmax via D^T x0 = sign(z) z^2. The flow is
  /// z_p + C t with C spanning the cycle space, so only t is optimized (damped
  /// Newton). Converged when ||x1 - grad U(x0)|| <= tol max(1, ||x1||^2).
  ConjugateResult conjugate(const Vec& x1, double tol = 1e-8) const {
    require_in_subspace(x1, "conjugate");
    ConjugateResult best;
    best.argmax = Vec::Zero(dim());
    const double x1_norm = x1.norm();
    if (x1_norm < 1e-12) return best;
    const double target = tol * std::max(1.0, x1_norm * x1_norm);

    Vec z_p = flow_pinv_ * x1;
    const double zscale = std::max(1e-300, z_p.cwiseAbs().maxCoeff());
    std::vector<Vec> starts;
    starts.push_back(Vec::Zero(cycles_.cols()));
    if (cycles_.cols() > 0) {
      Vec c = Vec::Constant(cycles_.cols(), zscale);
      starts.push_back(0.5 * c);
      starts.push_back(-0.5 * c);
      starts.push_back(2.0 * c);
      starts.push_back(-2.0 * c);
    }

    double best_grad = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < starts.size(); ++s) {
      int iters = 0;
      Vec z = minimize_flow(z_p, starts[s], iters);
      Vec x0 = integrate_differences(z.cwiseAbs().cwiseProduct(z));
      double gn = (x1 - gradient(x0)).norm();
      if (gn < best_grad) {
        best_grad = gn;
        best.argmax = x0;
        best.value = std::max(0.0, x0.dot(x1) - potential_unchecked(x0));
        best.grad_norm = gn;
        best.iterations = iters;
        best.start = static_cast<int>(s);
      }
      if (gn <= target) return best;
    }
    throw SolverError("conjugate solver did not reach residual " + std::to_string(target) +
                          " (best " + std::to_string(best_grad) + ")",
                      best.value, best_grad);
  }

  /// grad U*(x1) = (grad U)^{-1}(x1), the argmax of the conjugate problem.
  Vec conjugate_gradient(const Vec& x1, double tol = 1e-8) const {
    if (x1.norm() < 1e-12) return Vec::Zero(dim());
    return conjugate(x1, tol).argmax;
  }

 private:
  static Mat zero_mean_basis(int n) {
    if (n == 1) return Mat::Zero(1, 0);
    Eigen::SelfAdjointEigenSolver<Mat> es(consensus_projector(n));
    // eigenvalue 0 (all-ones) first, then n-1 eigenvalues equal to 1
    return es.eigenvectors().rightCols(n - 1);
  }

  void require_in_subspace(const Vec& v, const char* who) const {
    if (v.size() != dim()) throw std::invalid_argument(std::string(who) + ": dimension mismatch");
    if (!in_subspace(v)) throw std::invalid_argument(std::string(who) + ": input is not in the consensus subspace");
  }

  /// Node vector x in X with D^T x = w, assuming w is consistent. Differences
  /// are integrated along a spanning tree built from the smallest |w| first, so
  /// edges with w = 0 in the tree come out exactly zero.
  Vec integrate_differences(const Vec& w) const {
    const int n = dim();
    const int ground = n;  // virtual node for single-entry columns (scalar prototype)
    std::vector<int> order(n_edges());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(w(a)) < std::abs(w(b)); });
    std::vector<int> parent(n + 1);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    std::vector<std::vector<int>> tree(n + 1);
    for (int l : order) {
      auto [a, b] = endpoints_[l];
      int ra = find(a), rb = find(b);
      if (ra == rb) continue;
      parent[ra] = rb;
      tree[a].push_back(l);
      tree[b].push_back(l);
    }
    Vec x = Vec::Zero(n + 1);
    std::vector<bool> seen(n + 1, false);
    bool grounded = false;
    for (int root = n; root >= 0; --root) {
      if (seen[root] || (root == ground && tree[ground].empty())) continue;
      grounded = grounded || root == ground;
      std::vector<int> stack{root};
      seen[root] = true;
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int l : tree[v]) {
          auto [a, b] = endpoints_[l];
          int u = a == v ? b : a;
          if (seen[u]) continue;
          // w_l = coef_a x_a + coef_b x_b with the ground node fixed at 0
          double ca = a == ground ? 0.0 : d_(a, l);
          double cb = b == ground ? 0.0 : d_(b, l);
          x(u) = u == a ? (w(l) - cb * x(b)) / ca : (w(l) - ca * x(a)) / cb;
          seen[u] = true;
          stack.push_back(u);
        }
      }
    }
    Vec out = x.head(n);
    return grounded ? out : project(out);
  }

  /// Minimizes sum |z_p + C t|^3 / 3 over the cycle coordinates t.
  Vec minimize_flow(const Vec& z_p, Vec t, int& iters) const {
    iters = 0;
    if (cycles_.cols() == 0) return z_p;
    auto phi = [&](const Vec& z) { return z.cwiseAbs().cwiseProduct(z.cwiseAbs2()).sum() / 3.0; };
    Vec z = z_p + cycles_ * t;
    double f = phi(z);
    for (iters = 0; iters < 200; ++iters) {
      Vec sq = z.cwiseAbs().cwiseProduct(z);
      Vec g = cycles_.transpose() * sq;
      // The gradient is quadratic in flows near zero, so a small gradient
      // still leaves sqrt-sized flow errors. Stop on step length instead.
      double zmax = std::max(1e-300, z.cwiseAbs().maxCoeff());
      if (g.norm() == 0.0) break;
      Mat h = cycles_.transpose() * (2.0 * z.cwiseAbs()).asDiagonal() * cycles_;
      h.diagonal().array() += 1e-30 * zmax;
      Vec p = -h.ldlt().solve(g);
      if (!p.allFinite() || g.dot(p) >= 0.0) p = -g;
      double slope = g.dot(p);
      double step = 1.0;
      bool moved = false;
      for (int k = 0; k < 60; ++k) {
        Vec zt = z_p + cycles_ * (t + step * p);
        double ft = phi(zt);
        if (ft <= f + 1e-4 * step * slope || (ft <= f && step * p.norm() <= 1e-15 * zmax)) {
          t += step * p;
          z = zt;
          f = ft;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved || step * p.norm() <= 1e-15 * zmax) break;
    }
    return z;
  }

  Mat d_;
  Mat basis_;
  double c_s_;
  Mat flow_pinv_;
  Mat diff_pinv_;
  Mat cycles_;
  bool zero_mean_ = false;
  std::vector<std::pair<int, int>> endpoints_;
};

// Graph-level convenience wrappers.

inline double potential(const Graph& g, const Vec& e0) { return Kernel::from_graph(g).potential(e0); }
inline Vec potential_gradient(const Graph& g, const Vec& e0) { return Kernel::from_graph(g).gradient(e0); }
inline Vec sign_selection(const Graph& g, const Vec& e0) { return Kernel::from_graph(g).sign_selection(e0); }
inline double conjugate(const Graph& g, const Vec& x1, double tol = 1e-8) {
  return Kernel::from_graph(g).conjugate(x1, tol).value;
}
inline Vec conjugate_gradient(const Graph& g, const Vec& x1, double tol = 1e-8) {
  return Kernel::from_graph(g).conjugate_gradient(x1, tol);
}

/// Lyapunov function U(x0) + (1 + beta) U*(x1) - <x0, x1>; requires beta >= 7.
inline double lyapunov(const Kernel& k, const AbstractState& x, double beta, double tol = 1e-8) {
  if (beta < 7.0) throw std::invalid_argument("Lyapunov function requires beta >= 7");
  double u_star = k.conjugate(x.x1, tol).value;
  return std::max(0.0, k.potential(x.x0) + (1.0 + beta) * u_star - x.x0.dot(x.x1));
}

/// ||grad U(x0) - x1||^2
inline double gamma_fn(const Kernel& k, const AbstractState& x) { return (k.gradient(x.x0) - x.x1).squaredNorm(); }

/// w = (1 + beta) grad U*(x1) - x0, the co-state paired with the x1 dynamics.
inline Vec pi_costate(const Kernel& k, const AbstractState& x, double beta, double tol = 1e-8) {
  return (1.0 + beta) * k.conjugate_gradient(x.x1, tol) - x.x0;
}

/// Pi with k1_tilde factored out: -<w, S(x0)> + ||w|| / k1.
inline double pi_hat(const Kernel& k, const AbstractState& x, double k1, double beta, double tol = 1e-8) {
  Vec w = pi_costate(k, x, beta, tol);
  return -w.dot(k.sign_selection(x.x0)) + w.norm() / k1;
}

/// sup over unit disturbances d in X of <w, -k1_tilde (S(x0) + d / k1)>, in closed form.
inline double pi_fn(const Kernel& k, const AbstractState& x, const GainSet& gains, double tol = 1e-8) {
  if (!(gains.k0 > 0.0) || !(gains.k1 > 0.0)) throw std::invalid_argument("pi_fn requires positive gains");
  return gains.k1_tilde() * pi_hat(k, x, gains.k1, gains.beta, tol);
}

}  // namespace netdiff
