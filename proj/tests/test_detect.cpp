// Copyright 2026 The mmdalert Authors
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

#include "doctest.h"

#include "mmd/detect.hpp"

#include <numbers>
#include <random>

using namespace mmd;
using Eigen::VectorXd;

namespace {

VectorXd seasonal_series(Index n, std::mt19937_64& rng, double noise = 1.0) {
  std::normal_distribution<double> g(0.0, noise);
  VectorXd x(n);
  for (Index t = 0; t < n; ++t) {
    x[t] = 100 + 0.05 * t + 10 * std::sin(2 * std::numbers::pi * t / 7) + g(rng);
  }
  return x;
}

MetricSeries as_series(const VectorXd& x) {
  MetricSeries s;
  s.metric_id = "gmv";
  s.dimensions = {{"country", "US"}};
  s.priority = Priority::P2;
  s.values = x;
  for (Index i = 0; i < x.size(); ++i) s.timestamps.push_back(parse_date("2018-01-01") + std::chrono::days{i});
  return s;
}

}  // namespace

TEST_CASE("chebyshev_k") {
  CHECK(chebyshev_k(0.01) == doctest::Approx(10.0));
  CHECK(chebyshev_k(0.25) == doctest::Approx(2.0));
  CHECK(chebyshev_k(1.0 / 16) == doctest::Approx(4.0));
  CHECK_THROWS_AS(chebyshev_k(0.0), InputError);
  CHECK_THROWS_AS(chebyshev_k(1.0), InputError);
  CHECK_THROWS_AS(chebyshev_k(-0.1), InputError);
}

TEST_CASE("robust_stats") {
  DetectorConfig cfg;
  VectorXd r(5);
  r << 1, 2, 3, 4, 5;
  // median 3, deviations (2,1,0,1,2) -> MAD 1
  const auto s = robust_stats(r, cfg);
  CHECK(s.mu_hat == doctest::Approx(3.0));
  CHECK(s.sigma_hat == doctest::Approx(1.4826));

  SUBCASE("zero residuals hit the floor") {
    cfg.min_sigma = 1e-6;
    const auto z = robust_stats(VectorXd::Zero(10), cfg);
    CHECK(z.mu_hat == 0.0);
    CHECK(z.sigma_hat == 1e-6);
  }
  SUBCASE("insensitive to a single huge value") {
    VectorXd big = r;
    big[4] = 1e9;
    const auto b = robust_stats(big, cfg);
    CHECK(b.mu_hat == doctest::Approx(3.0));
    CHECK(b.sigma_hat == doctest::Approx(1.4826));
  }
  CHECK_THROWS_AS(robust_stats(VectorXd::Zero(2), cfg), InputError);
}

TEST_CASE("normal_range") {
  Decomposition d;
  d.trend = VectorXd::Constant(10, 90.0);
  d.seasonal = VectorXd::Constant(10, 10.0);
  d.residual = VectorXd::Zero(10);
  const Band b = normal_range(d, 9, RobustStats{0.0, 2.0}, DetectorConfig{});
  CHECK(b.low == doctest::Approx(80.0));
  CHECK(b.high == doctest::Approx(120.0));
  CHECK(b.contains(80.0));
  CHECK(b.contains(120.0));
  CHECK_FALSE(b.contains(120.5));
  CHECK_THROWS_AS(normal_range(d, 10, RobustStats{0.0, 2.0}, DetectorConfig{}), InputError);
}

TEST_CASE("detect_last flags a large spike") {
  std::mt19937_64 rng(11);
  VectorXd x = seasonal_series(60, rng);
  const auto clean = detect_last(as_series(x), DetectorConfig{}, 7);
  CHECK_FALSE(clean.is_anomaly);
  CHECK(clean.exceed_streak == 0);
  CHECK(clean.band_low < clean.last_value);
  CHECK(clean.last_value < clean.band_high);

  const double spike = 15 * clean.sigma_hat;
  x[59] += spike;
  const auto v = detect_last(as_series(x), DetectorConfig{}, 7);
  CHECK(v.is_anomaly);
  CHECK(v.severity >= 10.0);
  CHECK(v.exceed_streak == 1);
  CHECK(v.last_value > v.band_high);
  CHECK(v.metric_id == "gmv");
  CHECK(v.priority == Priority::P2);
  CHECK(v.date == parse_date("2018-03-01"));
  CHECK(v.period_w == 7);
  CHECK(v.window.size() == 60);
  CHECK(v.window[59] == x[59]);
}

TEST_CASE("severity is the standardized residual") {
  std::mt19937_64 rng(4);
  const VectorXd x = seasonal_series(50, rng);
  const auto p = test_last_point(x, DetectorConfig{}, 7);
  const double k = chebyshev_k(0.01);
  CHECK(p.severity == doctest::Approx(std::abs(p.value - p.center) / p.stats.sigma_hat));
  CHECK(p.band.high - p.band.low == doctest::Approx(2 * k * p.stats.sigma_hat));
  CHECK(p.is_anomaly == (p.severity > k));
}

TEST_CASE("exceed streak counts a sustained shift") {
  std::mt19937_64 rng(21);
  VectorXd x = seasonal_series(70, rng);
  x.tail(3).array() += 40.0;
  const auto v = detect_last(as_series(x), DetectorConfig{}, 7);
  CHECK(v.is_anomaly);
  CHECK(v.exceed_streak == 3);
  CHECK(exceed_streak(x, DetectorConfig{}, 7) == 3);
  CHECK(exceed_streak(x, DetectorConfig{}, 7, Decomposer::MMD, 2) == 2);
}

TEST_CASE("heavy-tailed noise rarely flags") {
  std::mt19937_64 rng(3);
  std::student_t_distribution<double> t3(3.0);
  const int trials = 400;
  int flagged = 0;
  for (int i = 0; i < trials; ++i) {
    VectorXd x(60);
    for (Index t = 0; t < 60; ++t) x[t] = 50 + 5 * std::sin(2 * std::numbers::pi * t / 7) + t3(rng);
    flagged += test_last_point(x, DetectorConfig{}, 7).is_anomaly;
  }
  CHECK(static_cast<double>(flagged) / trials <= 0.02);
}

TEST_CASE("detection properties") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    VectorXd x = seasonal_series(56, rng);
    x[55] += (trial % 3) * 6.0;
    SUBCASE("larger p never removes a flag") {
      bool prev = false;
      for (double p : {0.001, 0.01, 0.05, 0.2, 0.5}) {
        DetectorConfig cfg;
        cfg.p_anom = p;
        const bool flag = test_last_point(x, cfg, 7).is_anomaly;
        CHECK((flag || !prev));
        prev = flag;
      }
    }
    SUBCASE("affine invariance") {
      const auto base = test_last_point(x, DetectorConfig{}, 7);
      const VectorXd y = (3.5 * x).array() - 20.0;
      const auto scaled = test_last_point(y, DetectorConfig{}, 7);
      CHECK(scaled.is_anomaly == base.is_anomaly);
      CHECK(scaled.severity == doctest::Approx(base.severity).epsilon(1e-9));
      CHECK(scaled.band.low == doctest::Approx(3.5 * base.band.low - 20.0).epsilon(1e-9));
    }
    SUBCASE("classical path runs on the same input") {
      const auto c = test_last_point(x, DetectorConfig{}, 7, Decomposer::Classical);
      CHECK(c.stats.sigma_hat > 0.0);
    }
  }
}

TEST_CASE("detect errors") {
  std::mt19937_64 rng(1);
  const VectorXd x = seasonal_series(40, rng);
  CHECK(min_detect_length(7) == 15);
  CHECK_THROWS_AS(test_last_point(x.head(14), DetectorConfig{}, 7), InputError);
  CHECK_NOTHROW(test_last_point(x.head(15), DetectorConfig{}, 7));

  MetricSeries gap = as_series(x);
  gap.values[10] = kMissing;
  CHECK_THROWS_AS(detect_last(gap, DetectorConfig{}, 7), InputError);

  DetectorConfig bad;
  bad.p_anom = 1.5;
  CHECK_THROWS_AS(detect_last(as_series(x), bad, 7), InputError);
  bad = {};
  bad.min_sigma = 0.0;
  CHECK_THROWS_AS(check_config(bad), InputError);
}

TEST_CASE("constant series uses the sigma floor") {
  const VectorXd x = VectorXd::Constant(30, 1000.0);
  const auto p = test_last_point(x, DetectorConfig{}, 7);
  CHECK_FALSE(p.is_anomaly);
  CHECK(p.stats.sigma_hat == doctest::Approx(1e-6));
  VectorXd bumped = x;
  bumped[29] = 1000.001;
  CHECK(test_last_point(bumped, DetectorConfig{}, 7).is_anomaly);
}
