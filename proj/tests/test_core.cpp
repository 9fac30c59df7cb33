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

#include "mmd/core.hpp"

#include <random>

using namespace mmd;

namespace {

Observation obs(const char* date, double value) {
  return {"gmv", {{"country", "US"}}, parse_date(date), value, std::nullopt};
}

}  // namespace

TEST_CASE("dates round-trip through ISO text") {
  CHECK(format_date(parse_date("2018-02-28")) == "2018-02-28");
  CHECK(parse_date("2018-03-01") - parse_date("2018-02-28") == std::chrono::days{1});
  CHECK_THROWS_AS(parse_date("2018-02-30"), InputError);
  CHECK_THROWS_AS(parse_date("2018/02/01"), InputError);
}

TEST_CASE("series key is canonical in dimension order") {
  Dimensions a{{"device", "PC"}, {"country", "US"}};
  CHECK(series_key("gmv", a) == "gmv|country=US;device=PC");
  CHECK(series_key("gmv", {}) == "gmv|");
}

TEST_CASE("validate_series") {
  SUBCASE("in-order records pass through") {
    std::vector<Observation> r{obs("2018-01-01", 1), obs("2018-01-02", 2), obs("2018-01-03", 3)};
    const auto s = validate_series(r);
    CHECK(s.size() == 3);
    CHECK(s.values[2] == 3.0);
    CHECK(s.missing_count() == 0);
  }
  SUBCASE("repeated date keeps the last value and is reported") {
    std::vector<Observation> r{obs("2018-01-02", 5), obs("2018-01-01", 1), obs("2018-01-02", 7),
                               obs("2018-01-03", 3)};
    DuplicateReport rep;
    const auto s = validate_series(r, &rep);
    CHECK(s.size() == 3);
    CHECK(s.values[1] == 7.0);
    CHECK(rep.duplicate_dates == 1);
    CHECK(rep.conflicting_dates == 1);
  }
  SUBCASE("absent days become missing markers") {
    std::vector<Observation> r;
    for (int d = 1; d <= 10; ++d) {
      if (d == 4 || d == 7) continue;
      char buf[16];
      std::snprintf(buf, sizeof buf, "2018-01-%02d", d);
      r.push_back(obs(buf, d));
    }
    const auto s = validate_series(r);
    // calendar days between min and max date, inclusive
    const auto expected = (parse_date("2018-01-10") - parse_date("2018-01-01")).count() + 1;
    CHECK(s.size() == expected);
    CHECK(s.missing_count() == 2);
    CHECK(is_missing(s.values[3]));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(validate_series({}), InputError);
    std::vector<Observation> mixed{obs("2018-01-01", 1), obs("2018-01-02", 2)};
    mixed[1].metric_id = "other";
    CHECK_THROWS_AS(validate_series(mixed), InputError);
  }
  SUBCASE("idempotent") {
    std::vector<Observation> r{obs("2018-01-03", 3), obs("2018-01-01", 1), obs("2018-01-01", 9),
                               obs("2018-01-06", 6)};
    const auto once = validate_series(r);
    const auto twice = validate_series(to_observations(once));
    CHECK(twice.timestamps == once.timestamps);
    CHECK(twice.values.size() == once.values.size());
    for (Index i = 0; i < once.size(); ++i) {
      CHECK((once.values[i] == twice.values[i] ||
             (is_missing(once.values[i]) && is_missing(twice.values[i]))));
    }
  }
}

TEST_CASE("fill_missing") {
  auto make = [](std::vector<double> v) {
    MetricSeries s;
    s.metric_id = "m";
    s.values = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      s.timestamps.push_back(parse_date("2018-01-01") + std::chrono::days{i});
    }
    return s;
  };

  SUBCASE("linear midpoint") {
    const auto f = fill_missing(make({1, kMissing, 3}));
    CHECK(f.values[1] == doctest::Approx(2.0));
  }
  SUBCASE("no gaps is identity") {
    const auto s = make({4, 5, 6});
    const auto f = fill_missing(s);
    CHECK(f.values == s.values);
    CHECK(f.timestamps == s.timestamps);
  }
  SUBCASE("edges dropped, interior interpolated") {
    const auto f = fill_missing(make({kMissing, 5, kMissing, kMissing, 11, kMissing}));
    REQUIRE(f.size() == 4);
    CHECK(f.values[0] == doctest::Approx(5));
    CHECK(f.values[1] == doctest::Approx(7));
    CHECK(f.values[2] == doctest::Approx(9));
    CHECK(f.values[3] == doctest::Approx(11));
    CHECK(f.timestamps.front() == parse_date("2018-01-02"));
  }
  SUBCASE("fewer than two observations") {
    CHECK_THROWS_AS(fill_missing(make({kMissing, 5, kMissing})), InputError);
  }
  SUBCASE("idempotent") {
    const auto once = fill_missing(make({kMissing, 1, kMissing, 4, 5, kMissing, kMissing, 2}));
    const auto twice = fill_missing(once);
    CHECK(twice.values == once.values);
  }
}

TEST_CASE("pearson_corr") {
  Eigen::VectorXd a(4), b(4);
  a << 1, 2, 3, 4;
  b << 1, 2, 3, 10;

  CHECK(pearson_corr(a, a) == doctest::Approx(1.0));
  CHECK(pearson_corr(a, Eigen::VectorXd(-a)) == doctest::Approx(-1.0));
  // deviations (-1.5,-.5,.5,1.5) and (-3,-2,-1,6): cross 14, squares 5 and 50
  CHECK(pearson_corr(a, b) == doctest::Approx(14.0 / std::sqrt(250.0)).epsilon(1e-12));

  CHECK_THROWS_AS(pearson_corr(a, Eigen::VectorXd::Constant(4, 2.0)), UndefinedCorrelation);
  CHECK_THROWS_AS(pearson_corr(a, Eigen::VectorXd(3)), InputError);
}

TEST_CASE("pearson_corr properties on random vectors") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 40;
    Eigen::VectorXd a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
    }
    CHECK(pearson_corr(a, b) == doctest::Approx(pearson_corr(b, a)).epsilon(1e-12));
    const double alpha = (trial % 2 ? 1.0 : -1.0) * (0.1 + std::abs(g(rng)));
    const double beta = g(rng) * 100;
    const Eigen::VectorXd affine = (alpha * a).array() + beta;
    CHECK(pearson_corr(a, affine) == doctest::Approx(alpha > 0 ? 1.0 : -1.0).epsilon(1e-9));
    const double r = pearson_corr(a, b);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("median conventions") {
  Eigen::VectorXd odd(5), even(4);
  odd << 5, 1, 4, 2, 3;
  even << 4, 1, 3, 2;
  CHECK(median(odd) == 3.0);
  CHECK(median(even) == 2.5);
}
