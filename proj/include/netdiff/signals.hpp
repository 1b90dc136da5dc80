#pragma once

#include "netdiff/graph.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace netdiff {

struct Sinusoid {
  double amp = 1.0;
  double omega = 1.0;
  double phi = 0.0;
};

/// One agent's local signal: offset + sum of sinusoids, or an arbitrary closure
/// returning {s, s', s''} at t. The closure is an extension hook; the
/// assumption checker treats it like any other signal but nothing verifies
/// that its derivatives are consistent.
struct AgentSignal {
  std::vector<Sinusoid> terms;
  double offset = 0.0;
  std::function<std::array<double, 3>(double)> custom;

  double eval(double t, int order) const {
    if (custom) return custom(t)[order];
    double v = order == 0 ? offset : 0.0;
    for (const auto& s : terms) {
      double arg = s.omega * t + s.phi;
      switch (order) {
        case 0: v += s.amp * std::sin(arg); break;
        case 1: v += s.amp * s.omega * std::cos(arg); break;
        default: v -= s.amp * s.omega * s.omega * std::sin(arg); break;
      }
    }
    return v;
  }
};

class SignalBank {
 public:
  SignalBank() = default;
  explicit SignalBank(std::vector<AgentSignal> agents) : agents_(std::move(agents)) {}

  int size() const { return static_cast<int>(agents_.size()); }
  const std::vector<AgentSignal>& agents() const { return agents_; }

  /// s(t), s'(t) or s''(t) for every agent, in closed form.
  Vec evaluate(double t, int order) const {
    if (order < 0 || order > 2) throw std::invalid_argument("derivative order must be 0, 1 or 2");
    Vec out(size());
    for (int i = 0; i < size(); ++i) out(i) = agents_[i].eval(t, order);
    return out;
  }

  double average(double t, int order) const {
    if (order < 0 || order > 1) throw std::invalid_argument("average order must be 0 or 1");
    if (agents_.empty()) return 0.0;
    return evaluate(t, order).mean();
  }

 private:
  std::vector<AgentSignal> agents_;
};

/// Unit-amplitude sinusoids used in the reference five-agent experiment.
inline SignalBank reference_bank() {
  const double omega[] = {1.73, 0.58, 1.12, 0.37, 1.95};
  const double phi[] = {0.27, 1.66, 0.09, 1.92, 0.45};
  std::vector<AgentSignal> agents;
  for (int i = 0; i < 5; ++i) agents.push_back({{{1.0, omega[i], phi[i]}}, 0.0, {}});
  return SignalBank(agents);
}

struct TimeGrid {
  double t0 = 0.0;
  double t1 = 10.0;
  double spacing = 1e-3;

  std::size_t points() const {
    if (!(spacing > 0.0) || t1 < t0) return 0;
    return static_cast<std::size_t>(std::floor((t1 - t0) / spacing + 1e-9)) + 1;
  }
};

struct AssumptionReport {
  double gamma = 0.0;
  double sup_lhs = 0.0;
  double l_required = 0.0;  // sqrt(N) * sup_lhs
  double l = 0.0;
  bool satisfied = false;   // sup_lhs <= l / sqrt(N)
  double argmax_t = 0.0;
  int argmax_agent = 0;
};

/// Grid supremum of |q_bar - q_i| with q = s'' + 2 gamma s' + gamma^2 s.
/// This is an approximation of the true supremum; the grid spacing bounds how
/// much of a peak can be missed.
inline AssumptionReport check_assumption(const SignalBank& bank, double gamma, double l, const TimeGrid& grid) {
  std::size_t npts = grid.points();
  if (npts == 0 || bank.size() == 0) throw std::invalid_argument("assumption check needs a nonempty grid and bank");
  if (grid.spacing > 1e-3) throw std::invalid_argument("assumption grid spacing must be at most 1e-3 s");
  AssumptionReport rep;
  rep.gamma = gamma;
  rep.l = l;
  for (std::size_t k = 0; k < npts; ++k) {
    double t = grid.t0 + static_cast<double>(k) * grid.spacing;
    Vec q = bank.evaluate(t, 2) + 2.0 * gamma * bank.evaluate(t, 1) + gamma * gamma * bank.evaluate(t, 0);
    Vec dev = (q.array() - q.mean()).abs();
    Eigen::Index i = 0;
    double m = dev.maxCoeff(&i);
    if (m > rep.sup_lhs) {
      rep.sup_lhs = m;
      rep.argmax_t = t;
      rep.argmax_agent = static_cast<int>(i) + 1;
    }
  }
  double sqrt_n = std::sqrt(static_cast<double>(bank.size()));
  rep.l_required = sqrt_n * rep.sup_lhs;
  rep.satisfied = rep.sup_lhs <= l / sqrt_n;
  return rep;
}

}  // namespace netdiff
