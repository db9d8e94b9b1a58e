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

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <catch2/catch_amalgamated.hpp>

#include "petsig/ordered_logit.hpp"
#include "petsig/rng.hpp"

namespace {

using petsig::ObsGrad;
using petsig::ordered_log_prob;
using petsig::ordered_log_prob_grad;
using petsig::ordered_loglik;
using petsig::ordered_loglik_grad;
using petsig::ordered_prob;
using petsig::Rng;

using mp50 = boost::multiprecision::cpp_dec_float_50;

// Naive logistic difference, written without any of the library's stable
// rearrangements.
double naive_prob(double eta, const std::vector<double>& cuts, int level) {
  auto cdf = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const std::size_t levels = cuts.size() + 1;
  const std::size_t j = static_cast<std::size_t>(level);
  const double upper = j == levels ? 1.0 : cdf(cuts[j - 1] - eta);
  const double lower = j == 1 ? 0.0 : cdf(cuts[j - 2] - eta);
  return upper - lower;
}

mp50 mp_prob(const mp50& eta, const std::vector<double>& cuts, int level) {
  auto cdf = [](const mp50& z) { return 1 / (1 + exp(-z)); };
  const std::size_t levels = cuts.size() + 1;
  const std::size_t j = static_cast<std::size_t>(level);
  const mp50 upper = j == levels ? mp50(1) : cdf(mp50(cuts[j - 1]) - eta);
  const mp50 lower = j == 1 ? mp50(0) : cdf(mp50(cuts[j - 2]) - eta);
  return upper - lower;
}

// Random strictly increasing thresholds with comfortable gaps, so finite
// difference probes cannot reorder them.
std::vector<double> random_cuts(Rng& rng, std::size_t count) {
  std::vector<double> cuts(count);
  double c = rng.uniform(-2.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    cuts[i] = c;
    c += rng.uniform(0.3, 2.0);
  }
  return cuts;
}

struct SmallData {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  double constant = 0.0;
  std::vector<double> beta;
  std::vector<double> cuts;
};

SmallData sample_dataset(Rng& rng, std::size_t n, std::size_t width,
                      std::size_t levels) {
  SmallData d;
  d.cuts = random_cuts(rng, levels - 1);
  d.constant = rng.uniform(-1.0, 1.0);
  for (std::size_t k = 0; k < width; ++k) {
    d.beta.push_back(rng.uniform(-1.5, 1.5));
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(width);
    for (auto& v : row) v = rng.uniform(-2.0, 2.0);
    d.x.push_back(row);
    d.y.push_back(1 + static_cast<int>(rng.below(levels)));
  }
  return d;
}

}  // namespace

TEST_CASE("zero parameter probabilities") {
  const std::vector<double> cuts = {0.0, 1.0, 2.0, 3.0};
  const std::vector<double> expected = {0.5000, 0.2311, 0.1497, 0.0718,
                                        0.0474};
  double sum = 0.0;
  for (int j = 1; j <= 5; ++j) {
    const double p = ordered_prob(0.0, cuts, j);
    CHECK(p == Catch::Approx(expected[j - 1]).margin(5e-5));
    CHECK(p == Catch::Approx(naive_prob(0.0, cuts, j)).margin(1e-15));
    CHECK(std::exp(ordered_log_prob(0.0, cuts, j)) ==
          Catch::Approx(p).epsilon(1e-13));
    sum += p;
  }
  REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("probabilities sum to one") {
  Rng rng(4101);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t levels = 2 + rng.below(6);
    const auto cuts = random_cuts(rng, levels - 1);
    const double eta = rng.uniform(-30.0, 30.0);
    double sum = 0.0;
    for (std::size_t j = 1; j <= levels; ++j) {
      const double p = ordered_prob(eta, cuts, static_cast<int>(j));
      REQUIRE(p >= 0.0);
      REQUIRE(p <= 1.0);
      sum += p;
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("stable and naive forms agree at moderate scale") {
  Rng rng(4102);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t levels = 2 + rng.below(5);
    const auto cuts = random_cuts(rng, levels - 1);
    const double eta = rng.uniform(-12.0, 12.0);
    for (std::size_t j = 1; j <= levels; ++j) {
      const double p = ordered_prob(eta, cuts, static_cast<int>(j));
      const double q = naive_prob(eta, cuts, static_cast<int>(j));
      REQUIRE(p == Catch::Approx(q).margin(1e-14));
      if (q > 1e-290) {
        REQUIRE(ordered_log_prob(eta, cuts, static_cast<int>(j)) ==
                Catch::Approx(std::log(q)).margin(1e-10));
      }
    }
  }
}

TEST_CASE("log probabilities stay finite in deep tails") {
  const std::vector<double> cuts = {0.0, 1.0, 2.0, 3.0};

  // The naive difference is 0 - 0 here; the log form keeps the exponent.
  REQUIRE(ordered_log_prob(800.0, cuts, 1) == Catch::Approx(-800.0).margin(1e-9));
  const double mid = ordered_log_prob(800.0, cuts, 3);
  REQUIRE(std::isfinite(mid));
  REQUIRE(mid == Catch::Approx(-798.0 + std::log(-std::expm1(-1.0)))
                     .margin(1e-9));
  REQUIRE(ordered_log_prob(-800.0, cuts, 5) ==
          Catch::Approx(-803.0).margin(1e-9));
  REQUIRE(ordered_prob(800.0, cuts, 5) > 1.0 - 1e-12);
  REQUIRE(ordered_log_prob(800.0, cuts, 5) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("single observation log likelihood") {
  const std::vector<std::vector<double>> x = {{}};
  const std::vector<int> y = {1};
  const double ll = ordered_loglik(x, y, 0.0, {}, {0.0, 1.0, 2.0, 3.0});
  REQUIRE(ll == Catch::Approx(std::log(0.5)).margin(1e-15));
  REQUIRE(ll == Catch::Approx(-0.6931).margin(1e-4));
}

TEST_CASE("duplicated data doubles the log likelihood") {
  Rng rng(4103);
  for (int trial = 0; trial < 20; ++trial) {
    auto d = sample_dataset(rng, 25, 2, 4);
    const double once = ordered_loglik(d.x, d.y, d.constant, d.beta, d.cuts);
    auto x2 = d.x;
    auto y2 = d.y;
    x2.insert(x2.end(), d.x.begin(), d.x.end());
    y2.insert(y2.end(), d.y.begin(), d.y.end());
    const double twice = ordered_loglik(x2, y2, d.constant, d.beta, d.cuts);
    REQUIRE(twice ==
            Catch::Approx(2.0 * once).margin(1e-12 * (1.0 + std::fabs(once))));
  }
}

TEST_CASE("analytic gradient matches finite differences") {
  Rng rng(4104);
  for (int trial = 0; trial < 12; ++trial) {
    auto d = sample_dataset(rng, 40, 3, trial % 2 == 0 ? 4 : 5);
    const auto g =
        ordered_loglik_grad(d.x, d.y, d.constant, d.beta, d.cuts, 0.0);
    const double h = 1e-6;
    auto fd_ok = [&](double analytic, double plus, double minus) {
      const double fd = (plus - minus) / (2.0 * h);
      REQUIRE(analytic ==
              Catch::Approx(fd).margin(1e-6 * std::fmax(1.0, std::fabs(fd))));
    };
    fd_ok(g.d_constant,
          ordered_loglik(d.x, d.y, d.constant + h, d.beta, d.cuts, 0.0),
          ordered_loglik(d.x, d.y, d.constant - h, d.beta, d.cuts, 0.0));
    for (std::size_t k = 0; k < d.beta.size(); ++k) {
      auto up = d.beta;
      auto dn = d.beta;
      up[k] += h;
      dn[k] -= h;
      fd_ok(g.d_beta[k],
            ordered_loglik(d.x, d.y, d.constant, up, d.cuts, 0.0),
            ordered_loglik(d.x, d.y, d.constant, dn, d.cuts, 0.0));
    }
    for (std::size_t m = 0; m < d.cuts.size(); ++m) {
      auto up = d.cuts;
      auto dn = d.cuts;
      up[m] += h;
      dn[m] -= h;
      fd_ok(g.d_cutpoints[m],
            ordered_loglik(d.x, d.y, d.constant, d.beta, up, 0.0),
            ordered_loglik(d.x, d.y, d.constant, d.beta, dn, 0.0));
    }
    REQUIRE(g.loglik ==
            ordered_loglik(d.x, d.y, d.constant, d.beta, d.cuts, 0.0));
  }
}

TEST_CASE("per observation derivatives are internally consistent") {
  // The index derivative has two independent closed forms: F(a) + F(b) - 1
  // and the negated sum of the two threshold derivatives.
  Rng rng(4105);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t levels = 2 + rng.below(5);
    const auto cuts = random_cuts(rng, levels - 1);
    const double eta = rng.uniform(-8.0, 8.0);
    const int level = 1 + static_cast<int>(rng.below(levels));
    const ObsGrad g = ordered_log_prob_grad(eta, cuts, level);
    const double scale = 1.0 + std::fabs(g.dlo) + std::fabs(g.dhi);
    REQUIRE(g.deta ==
            Catch::Approx(-(g.dlo + g.dhi)).margin(1e-12 * scale));
    REQUIRE(g.logp == ordered_log_prob(eta, cuts, level));
  }
}

TEST_CASE("fifty digit recomputation agrees") {
  Rng rng(4106);
  for (int dataset = 0; dataset < 100; ++dataset) {
    const std::size_t levels = 3 + rng.below(4);
    auto d = sample_dataset(rng, 30, 2, levels);
    const double ll = ordered_loglik(d.x, d.y, d.constant, d.beta, d.cuts, 0.0);

    mp50 reference = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
      mp50 eta = d.constant;
      for (std::size_t k = 0; k < d.beta.size(); ++k) {
        eta += mp50(d.beta[k]) * mp50(d.x[i][k]);
      }
      reference += log(mp_prob(eta, d.cuts, d.y[i]));
    }
    const double want = reference.convert_to<double>();
    REQUIRE(ll == Catch::Approx(want).margin(
                      1e-9 * std::fmax(1.0, std::fabs(want))));
  }
}

TEST_CASE("probability floor clamps hopeless rows") {
  // eta = 800 puts level 1 at exp(-800), far below the default floor.
  const std::vector<double> cuts = {0.0, 1.0};
  const std::vector<std::vector<double>> x = {{}, {}};
  const std::vector<int> y = {1, 3};

  std::size_t floored = 0;
  const double ll = ordered_loglik(x, y, 800.0, {}, cuts, 1e-300, &floored);
  REQUIRE(floored == 1);
  REQUIRE(ll == Catch::Approx(std::log(1e-300) +
                              ordered_log_prob(800.0, cuts, 3))
                    .margin(1e-9));

  // Disabling the floor keeps the true value.
  floored = 99;
  const double raw = ordered_loglik(x, y, 800.0, {}, cuts, 0.0, &floored);
  REQUIRE(floored == 0);
  REQUIRE(raw == Catch::Approx(-800.0 + ordered_log_prob(800.0, cuts, 3))
                     .margin(1e-9));

  // A clamped row adds nothing to the gradient.
  const auto with_row = ordered_loglik_grad(x, y, 800.0, {}, cuts, 1e-300);
  const auto alone = ordered_loglik_grad({{}}, {3}, 800.0, {}, cuts, 1e-300);
  REQUIRE(with_row.floored == 1);
  REQUIRE(with_row.d_constant == alone.d_constant);
  REQUIRE(with_row.d_cutpoints == alone.d_cutpoints);
}

TEST_CASE("ordered logit input validation") {
  const std::vector<double> cuts = {0.0, 1.0};
  REQUIRE_THROWS_AS(ordered_prob(0.0, cuts, 0), std::out_of_range);
  REQUIRE_THROWS_AS(ordered_prob(0.0, cuts, 4), std::out_of_range);
  REQUIRE_THROWS_AS(ordered_log_prob(0.0, cuts, -1), std::out_of_range);
  REQUIRE_THROWS_AS(ordered_log_prob_grad(0.0, cuts, 9), std::out_of_range);

  REQUIRE_THROWS_AS(ordered_loglik({{1.0}}, {1, 2}, 0.0, {0.5}, cuts),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ordered_loglik({{1.0}}, {1}, 0.0, {0.5}, {1.0, 0.0}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ordered_loglik({{1.0, 2.0}}, {1}, 0.0, {0.5}, cuts),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ordered_loglik({{}}, {1}, 0.0, {}, {}),
                    std::invalid_argument);
}
