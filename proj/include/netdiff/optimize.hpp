#pragma once

#include "netdiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace netdiff::opt {

/// Point k (k >= 1) of the Halton sequence in [0,1)^dim.
inline Vec halton(std::uint64_t k, int dim) {
  static constexpr int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43,
                                   47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107};
  Vec p(dim);
  for (int d = 0; d < dim; ++d) {
    const int b = primes[d % 28];
    double f = 1.0, r = 0.0;
    for (std::uint64_t i = k; i > 0; i /= b) {
      f /= b;
      r += f * static_cast<double>(i % b);
    }
    p(d) = r;
  }
  return p;
}

struct Minimum {
  Vec x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

/// Nelder-Mead simplex minimization (standard reflection/expansion/contraction/shrink).
inline Minimum nelder_mead(const std::function<double(const Vec&)>& f, const Vec& start, double step,
                           int max_evals, double ftol = 1e-12) {
  const int n = static_cast<int>(start.size());
  std::vector<Vec> pts(n + 1, start);
  std::vector<double> vals(n + 1);
  int evals = 0;
  auto eval = [&](const Vec& x) {
    ++evals;
    double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  for (int i = 0; i < n; ++i) pts[i + 1](i) += step;
  for (int i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

  std::vector<int> idx(n + 1);
  while (evals < max_evals) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    const int best = idx.front(), worst = idx.back(), second = idx[n - 1];
    if (std::abs(vals[worst] - vals[best]) <= ftol * (std::abs(vals[best]) + 1e-30)) break;

    Vec centroid = Vec::Zero(n);
    for (int i = 0; i < n; ++i) centroid += pts[idx[i]];
    centroid /= n;

    Vec xr = centroid + (centroid - pts[worst]);
    double fr = eval(xr);
    if (fr < vals[best]) {
      Vec xe = centroid + 2.0 * (centroid - pts[worst]);
      double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      const bool outside = fr < vals[worst];
      Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid)) : Vec(centroid + 0.5 * (pts[worst] - centroid));
      double fc = eval(xc);
      if (fc < (outside ? fr : vals[worst])) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          int j = idx[i];
          pts[j] = pts[best] + 0.5 * (pts[j] - pts[best]);
          vals[j] = eval(pts[j]);
        }
      }
    }
  }
  int b = static_cast<int>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {pts[b], vals[b], evals};
}

/// Runs Nelder-Mead from `starts` quasi-random points in [-1,1]^dim (offset
/// into the Halton sequence by `seed`), restarting once from each local
/// optimum, and keeps the best.
inline Minimum multistart(const std::function<double(const Vec&)>& f, int dim, int starts, std::uint64_t seed,
                          int max_evals) {
  Minimum best;
  for (int s = 0; s < starts; ++s) {
    Vec x0 = 2.0 * halton(seed * 1000 + static_cast<std::uint64_t>(s) + 1, dim).array() - 1.0;
    Minimum m = nelder_mead(f, x0, 0.25, max_evals / 2);
    Minimum polished = nelder_mead(f, m.x, 0.05, max_evals / 2);
    polished.evaluations += m.evaluations;
    if (polished.value > m.value) {
      polished.x = m.x;
      polished.value = m.value;
    }
    best.evaluations += polished.evaluations;
    if (polished.value < best.value) {
      best.x = polished.x;
      best.value = polished.value;
    }
  }
  return best;
}

}  // namespace netdiff::opt
