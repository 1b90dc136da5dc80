#pragma once

#include <stdexcept>
#include <string>

namespace netdiff {

/// Protocol parameters. l is the Assumption-1 bound on the signal mismatch;
/// beta weights the conjugate term of the Lyapunov function.
struct GainSet {
  double k0 = 4.0;
  double k1 = 13.0;
  double gamma = 1.0;
  double l = 4.0;
  double beta = 7.0;

  double k0_tilde() const { return k0; }
  double k1_tilde() const { return k1 / k0; }

  void validate() const {
    if (!(k0 > 0.0) || !(k1 > 0.0)) throw std::invalid_argument("gains k0, k1 must be positive");
    if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
    if (!(l >= 0.0)) throw std::invalid_argument("L must be nonnegative");
    if (!(beta >= 7.0)) throw std::invalid_argument("beta must be at least 7, got " + std::to_string(beta));
  }
};

}  // namespace netdiff
