// Copyright 2026 petsig authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Ordered logit probabilities for an ordinal response with levels 1..J.
//
// Thresholds are a strictly increasing list c[0] < c[1] < ... < c[J-2];
// identification fixes c[0] = 0 upstream and lets the linear index carry a
// free constant.  With F the logistic CDF,
//
//   P(y = j) = F(c[j-1] - eta) - F(c[j-2] - eta)
//
// where the missing ends are -inf and +inf.  Everything here is written in
// log space so tail probabilities keep full relative precision: the interior
// difference uses F(b) - F(a) = F(b) F(-a) (1 - e^{a-b}), a product of three
// well-scaled positive factors.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "petsig/mathutil.hpp"

namespace petsig {

inline void check_level(int level, std::size_t levels) {
  if (level < 1 || static_cast<std::size_t>(level) > levels) {
    throw std::out_of_range("ordered logit: level out of range");
  }
}

/// P(y = level) for the given linear index and threshold list.
inline double ordered_prob(double eta, const std::vector<double>& cutpoints,
                           int level) {
  const std::size_t levels = cutpoints.size() + 1;
  check_level(level, levels);
  const std::size_t j = static_cast<std::size_t>(level);
  if (j == 1) {
    return logistic_cdf(cutpoints[0] - eta);
  }
  const double a = cutpoints[j - 2] - eta;
  if (j == levels) {
    return logistic_cdf(-a);
  }
  const double b = cutpoints[j - 1] - eta;
  return logistic_cdf(b) * logistic_cdf(-a) * (-std::expm1(a - b));
}

/// log P(y = level), finite even when the probability underflows a double.
inline double ordered_log_prob(double eta,
                               const std::vector<double>& cutpoints,
                               int level) {
  const std::size_t levels = cutpoints.size() + 1;
  check_level(level, levels);
  const std::size_t j = static_cast<std::size_t>(level);
  if (j == 1) {
    return log_logistic_cdf(cutpoints[0] - eta);
  }
  const double a = cutpoints[j - 2] - eta;
  if (j == levels) {
    return log_logistic_cdf(-a);
  }
  const double b = cutpoints[j - 1] - eta;
  return log_logistic_cdf(b) + log_logistic_cdf(-a) + log1mexp(a - b);
}

/// Log probability of one observation with its derivatives.  Only the two
/// thresholds bracketing the observed level enter: dlo is the derivative in
/// c[level-2] (zero for level 1) and dhi in c[level-1] (zero for level J).
struct ObsGrad {
  double logp = 0.0;
  double deta = 0.0;
  double dlo = 0.0;
  double dhi = 0.0;
};

inline ObsGrad ordered_log_prob_grad(double eta,
                                     const std::vector<double>& cutpoints,
                                     int level) {
  const std::size_t levels = cutpoints.size() + 1;
  check_level(level, levels);
  const std::size_t j = static_cast<std::size_t>(level);

  ObsGrad g;
  g.logp = ordered_log_prob(eta, cutpoints, level);
  const double fa = j == 1 ? 0.0 : logistic_cdf(cutpoints[j - 2] - eta);
  const double fb = j == levels ? 1.0 : logistic_cdf(cutpoints[j - 1] - eta);
  g.deta = fa + fb - 1.0;
  if (j < levels) {
    const double b = cutpoints[j - 1] - eta;
    g.dhi = std::exp(log_logistic_cdf(b) + log_logistic_cdf(-b) - g.logp);
  }
  if (j > 1) {
    const double a = cutpoints[j - 2] - eta;
    g.dlo = -std::exp(log_logistic_cdf(a) + log_logistic_cdf(-a) - g.logp);
  }
  return g;
}

namespace detail {

inline void check_ordered_inputs(const std::vector<std::vector<double>>& x,
                                 const std::vector<int>& y,
                                 const std::vector<double>& beta,
                                 const std::vector<double>& cutpoints) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("ordered logit: x and y differ in length");
  }
  if (cutpoints.empty()) {
    throw std::invalid_argument("ordered logit: at least one threshold");
  }
  for (std::size_t i = 0; i + 1 < cutpoints.size(); ++i) {
    if (!(cutpoints[i] < cutpoints[i + 1])) {
      throw std::invalid_argument("ordered logit: thresholds must increase");
    }
  }
  for (const auto& row : x) {
    if (row.size() != beta.size()) {
      throw std::invalid_argument("ordered logit: covariate width mismatch");
    }
  }
}

inline double linear_index(const std::vector<double>& row, double constant,
                           const std::vector<double>& beta) {
  double eta = constant;
  for (std::size_t k = 0; k < beta.size(); ++k) eta += beta[k] * row[k];
  return eta;
}

}  // namespace detail

/// Joint log-likelihood of independent observations.  Rows whose probability
/// falls below prob_floor contribute log(prob_floor) and are counted through
/// the optional out parameter; a non-positive floor disables the clamp.
inline double ordered_loglik(const std::vector<std::vector<double>>& x,
                             const std::vector<int>& y, double constant,
                             const std::vector<double>& beta,
                             const std::vector<double>& cutpoints,
                             double prob_floor = 1e-300,
                             std::size_t* floored = nullptr) {
  detail::check_ordered_inputs(x, y, beta, cutpoints);
  const double log_floor = prob_floor > 0.0
                               ? std::log(prob_floor)
                               : -std::numeric_limits<double>::infinity();
  std::vector<double> logs(x.size());
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eta = detail::linear_index(x[i], constant, beta);
    double lp = ordered_log_prob(eta, cutpoints, y[i]);
    if (lp < log_floor) {
      lp = log_floor;
      ++clamped;
    }
    logs[i] = lp;
  }
  if (floored != nullptr) *floored = clamped;
  return pairwise_sum(logs.data(), logs.size());
}

/// Log-likelihood together with its gradient in the constant, the slopes,
/// and every threshold.  Clamped rows contribute zero gradient.
struct OrderedLoglikGrad {
  double loglik = 0.0;
  double d_constant = 0.0;
  std::vector<double> d_beta;
  std::vector<double> d_cutpoints;
  std::size_t floored = 0;
};

inline OrderedLoglikGrad ordered_loglik_grad(
    const std::vector<std::vector<double>>& x, const std::vector<int>& y,
    double constant, const std::vector<double>& beta,
    const std::vector<double>& cutpoints, double prob_floor = 1e-300) {
  detail::check_ordered_inputs(x, y, beta, cutpoints);
  const double log_floor = prob_floor > 0.0
                               ? std::log(prob_floor)
                               : -std::numeric_limits<double>::infinity();
  OrderedLoglikGrad out;
  out.d_beta.assign(beta.size(), 0.0);
  out.d_cutpoints.assign(cutpoints.size(), 0.0);
  std::vector<double> logs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eta = detail::linear_index(x[i], constant, beta);
    const ObsGrad g = ordered_log_prob_grad(eta, cutpoints, y[i]);
    if (g.logp < log_floor) {
      logs[i] = log_floor;
      ++out.floored;
      continue;
    }
    logs[i] = g.logp;
    out.d_constant += g.deta;
    for (std::size_t k = 0; k < beta.size(); ++k) {
      out.d_beta[k] += g.deta * x[i][k];
    }
    const std::size_t j = static_cast<std::size_t>(y[i]);
    if (j > 1) out.d_cutpoints[j - 2] += g.dlo;
    if (j < cutpoints.size() + 1) out.d_cutpoints[j - 1] += g.dhi;
  }
  out.loglik = pairwise_sum(logs.data(), logs.size());
  return out;
}

}  // namespace petsig
