#pragma once

// Per-group pieces shared by the serial and OpenMP kernels.

#include <algorithm>
#include <cmath>

#include "infsus/im.hpp"

namespace infsus::kernels::detail {

struct CascadeTerm {
  double loss = 0.0;  // -(n log p + n~ log(1 - p))
  double h = 0.0;     // d loss / d (I_u . S_v), for every member u
};

/// `exponent` is lambda * sum_u I_u . S_v. p is clamped to
/// [kProbClamp, 1 - kProbClamp] inside the logs; h is the derivative of the
/// clamped loss, so it is 0 wherever the clamp is active.
inline CascadeTerm cascade_term(double exponent, double n, double n_fail, double lambda) {
  const double p = -std::expm1(-exponent);
  double log_p = 0.0;
  double log_q = 0.0;
  double odds = 0.0;  // (1 - p) / p
  if (p < kProbClamp) {
    log_p = std::log(kProbClamp);
    log_q = std::log1p(-kProbClamp);
  } else if (p > 1.0 - kProbClamp) {
    log_p = std::log1p(-kProbClamp);
    log_q = std::log(kProbClamp);
  } else {
    log_p = std::log(p);
    log_q = -exponent;
    odds = 1.0 / std::expm1(exponent);
  }
  const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
  CascadeTerm t;
  t.loss = -(n * log_p + n_fail * log_q);
  t.h = clamped ? 0.0 : lambda * (n_fail - n * odds);
  return t;
}

inline double clamped_log_prob(double log_prob) {
  return std::clamp(log_prob, std::log(kProbClamp), std::log1p(-kProbClamp));
}

}  // namespace infsus::kernels::detail
