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

#include "mmd/decompose.hpp"

#include <numbers>
#include <random>

using namespace mmd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

// Reference implementations, written directly from the definitions.
double ref_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

VectorXd ref_rolling_median(const VectorXd& x, Index w) {
  VectorXd out(x.size());
  for (Index t = 0; t < x.size(); ++t) {
    std::vector<double> win;
    for (Index j = 0; j <= w; ++j) {
      if (t - j >= 0) win.push_back(x[t - j]);
    }
    out[t] = ref_median(win);
  }
  return out;
}

VectorXd ref_seasonal_median(const VectorXd& x, Index w) {
  VectorXd out(x.size());
  for (Index t = 0; t < x.size(); ++t) {
    std::vector<double> same;
    for (Index i = 0; i < x.size(); ++i) {
      if ((i - t) % w == 0) same.push_back(x[i]);
    }
    out[t] = ref_median(same);
  }
  return out;
}

VectorXd ref_ma(const VectorXd& x, Index w) {
  VectorXd out(x.size());
  const Index h = w / 2;
  for (Index t = 0; t < x.size(); ++t) {
    double s = 0, wt = 0;
    for (Index i = t - h; i <= t + h; ++i) {
      if (i < 0 || i >= x.size()) continue;
      const double c = (w % 2 == 0 && std::abs(i - t) == h) ? 0.5 : 1.0;
      s += c * x[i];
      wt += c;
    }
    out[t] = s / wt;
  }
  return out;
}

VectorXd seasonal_series(Index n, Index w, double slope, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, noise);
  VectorXd x(n);
  for (Index t = 0; t < n; ++t) {
    x[t] = 50 + slope * t + 5 * std::sin(2 * std::numbers::pi * t / w) + (noise > 0 ? g(rng) : 0);
  }
  return x;
}

bool is_periodic(const VectorXd& s, Index w) {
  for (Index t = w; t < s.size(); ++t) {
    if (s[t] != s[t - w]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("symmetric_ma") {
  SUBCASE("constant") {
    const VectorXd c = VectorXd::Constant(20, 3.25);
    for (Index w : {2, 3, 4, 7}) CHECK((symmetric_ma(c, w).array() - 3.25).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("hand example with truncated edges") {
    const VectorXd ma = symmetric_ma(vec({1, 2, 3, 4, 5}), 3);
    CHECK(ma[0] == doctest::Approx(1.5));
    CHECK(ma[1] == doctest::Approx(2));
    CHECK(ma[2] == doctest::Approx(3));
    CHECK(ma[3] == doctest::Approx(4));
    CHECK(ma[4] == doctest::Approx(4.5));
  }
  SUBCASE("odd window reproduces a line in the interior") {
    const VectorXd ramp = VectorXd::LinSpaced(30, 0, 29);
    const VectorXd ma = symmetric_ma(ramp, 5);
    for (Index t = 2; t < 28; ++t) CHECK(ma[t] == doctest::Approx(ramp[t]));
  }
  SUBCASE("even window uses half-weight endpoints") {
    const VectorXd x = seasonal_series(40, 4, 0.3, 1.0, 3);
    const VectorXd ma = symmetric_ma(x, 4);
    const VectorXd ref = ref_ma(x, 4);
    CHECK((ma - ref).cwiseAbs().maxCoeff() < 1e-12);
    // interior: (x[t-2]/2 + x[t-1] + x[t] + x[t+1] + x[t+2]/2) / 4
    const double t10 = (x[8] / 2 + x[9] + x[10] + x[11] + x[12] / 2) / 4;
    CHECK(ma[10] == doctest::Approx(t10));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(symmetric_ma(vec({1, 2}), 3), InputError);
    CHECK_THROWS_AS(symmetric_ma(vec({1, 2, 3}), 1), InputError);
  }
}

TEST_CASE("seasonal_median") {
  SUBCASE("w=2 hand example") {
    const VectorXd s = seasonal_median(vec({1, 5, 3, 7, 2, 6}), 2);
    CHECK(s == vec({2, 6, 2, 6, 2, 6}));
  }
  SUBCASE("exact pattern is reproduced") {
    const VectorXd pattern = vec({3, -1, 4, 1, -5, 9, 2});
    VectorXd x(35);
    for (Index t = 0; t < 35; ++t) x[t] = pattern[t % 7];
    const VectorXd s = seasonal_median(x, 7);
    CHECK(s == x);
  }
  SUBCASE("one corrupted cell does not move the medians") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    VectorXd x(28);
    for (Index t = 0; t < 28; ++t) x[t] = 10 * std::sin(t % 7) + 0.1 * g(rng);
    VectorXd corrupted = x;
    corrupted[9] += 1000;
    const VectorXd clean = seasonal_median(x, 7);
    const VectorXd dirty = seasonal_median(corrupted, 7);
    CHECK((dirty - ref_seasonal_median(corrupted, 7)).cwiseAbs().maxCoeff() == 0.0);
    for (Index t = 0; t < 28; ++t) {
      if (t % 7 != 2) CHECK(dirty[t] == clean[t]);
    }
    // four cycles: the median of the corrupted phase moves to a neighbouring
    // order statistic of the clean values, never towards the outlier
    std::vector<double> phase2;
    for (Index t = 2; t < 28; t += 7) phase2.push_back(x[t]);
    std::sort(phase2.begin(), phase2.end());
    CHECK(dirty[2] <= phase2.back());
  }
  SUBCASE("matches brute force and is periodic") {
    const VectorXd x = seasonal_series(61, 6, 0.1, 2.0, 5);
    const VectorXd s = seasonal_median(x, 6);
    CHECK((s - ref_seasonal_median(x, 6)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(is_periodic(s, 6));
  }
}

TEST_CASE("rolling_median_right") {
  SUBCASE("hand example") {
    const VectorXd r = rolling_median_right(vec({1, 2, 100, 3, 4}), 2);
    CHECK(r == vec({1, 1.5, 2, 3, 4}));
  }
  SUBCASE("constant") {
    const VectorXd r = rolling_median_right(VectorXd::Constant(9, -2.0), 3);
    CHECK((r.array() == -2.0).all());
  }
  SUBCASE("step transition") {
    for (Index w : {2, 3, 4, 7, 8}) {
      const Index step = 20;
      VectorXd x = VectorXd::Zero(40);
      x.tail(40 - step).setOnes();
      const VectorXd r = rolling_median_right(x, w);
      CHECK((r - ref_rolling_median(x, w)).cwiseAbs().maxCoeff() == 0.0);
      Index first = step;
      while (r[first] < 0.5) ++first;
      // samples from the step (inclusive) until the median crosses one half
      CHECK(first - step + 1 == (w + 2) / 2);
    }
  }
  SUBCASE("random inputs match brute force") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
      const Index w = 1 + trial % 12;
      VectorXd x(50);
      for (Index t = 0; t < 50; ++t) x[t] = std::round(g(rng) * 3);  // ties included
      CHECK((rolling_median_right(x, w) - ref_rolling_median(x, w)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("mmd_decompose") {
  SUBCASE("constant series") {
    const auto d = mmd_decompose(VectorXd::Constant(30, 4.0), 7);
    CHECK((d.trend.array() - 4.0).abs().maxCoeff() < 1e-12);
    CHECK(d.seasonal.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(d.residual.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("follows the component formulas") {
    const VectorXd x = seasonal_series(84, 7, 0.2, 1.0, 21);
    const auto d = mmd_decompose(x, 7);
    const VectorXd l_prime = x - ref_ma(x, 7);
    const VectorXd s = ref_seasonal_median(l_prime, 7);
    const VectorXd s_prime = x - s;
    const VectorXd tf = ref_rolling_median(s_prime, 7);
    std::vector<double> dev(s_prime.data(), s_prime.data() + s_prime.size());
    for (Index i = 0; i < x.size(); ++i) dev[i] -= tf[i];
    const double bias = ref_median(dev);
    CHECK((d.seasonal - s).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((d.trend - (tf.array() + bias).matrix()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((d.residual - (x - d.trend - d.seasonal)).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("zero-median residual and reconstruction over random series") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> wdist(2, 20);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 100; ++trial) {
      const Index w = wdist(rng);
      const Index n = 2 * w + trial % 50;
      VectorXd x(n);
      for (Index t = 0; t < n; ++t) x[t] = 1e3 * (trial % 3) + t * g(rng) + 10 * g(rng);
      const auto d = mmd_decompose(x, w);
      CHECK(std::abs(median(d.residual)) <= 1e-9);
      const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
      CHECK((d.trend + d.seasonal + d.residual - x).cwiseAbs().maxCoeff() <= 1e-9 * scale);
      CHECK(is_periodic(d.seasonal, w));
    }
  }
  SUBCASE("deterministic") {
    const VectorXd x = seasonal_series(100, 7, 0.1, 1.0, 8);
    const auto a = mmd_decompose(x, 7);
    const auto b = mmd_decompose(x, 7);
    CHECK(a.trend == b.trend);
    CHECK(a.seasonal == b.seasonal);
    CHECK(a.residual == b.residual);
  }
  SUBCASE("float scalar instantiation") {
    const Eigen::VectorXf x = seasonal_series(50, 5, 0.1, 1.0, 1).cast<float>();
    const auto d = mmd_decompose(x, 5);
    CHECK(std::abs(median(d.residual)) < 1e-4f);
  }
  SUBCASE("too short") {
    CHECK_THROWS_AS(mmd_decompose(VectorXd::Zero(13), 7), InputError);
    CHECK_THROWS_AS(mmd_decompose(VectorXd::Zero(13), 1), InputError);
  }
}

TEST_CASE("seasonal accuracy under outliers: MMD vs classical") {
  const Index n = 140;
  const Index w = 7;
  std::mt19937_64 rng(140);
  std::normal_distribution<double> g(0.0, 0.5);
  VectorXd truth(n), x(n);
  for (Index t = 0; t < n; ++t) {
    truth[t] = 5 * std::sin(2 * std::numbers::pi * t / w);
    x[t] = 20 + 0.1 * t + truth[t] + g(rng);
  }
  x[30] += 20;
  x[71] += 20;
  x[115] += 20;
  const auto robust = mmd_decompose(x, w);
  const auto classical = classical_decompose(x, w);
  const double rmse_mmd = std::sqrt((robust.seasonal - truth).squaredNorm() / n);
  const double rmse_cls = std::sqrt((classical.seasonal - truth).squaredNorm() / n);
  CHECK(rmse_mmd <= rmse_cls);
}

TEST_CASE("classical_decompose") {
  SUBCASE("constant series") {
    const auto d = classical_decompose(VectorXd::Constant(21, -1.5), 7);
    CHECK((d.trend.array() + 1.5).abs().maxCoeff() < 1e-12);
    CHECK(d.seasonal.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(d.residual.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("noiseless line plus season leaves no interior residual") {
    const Index w = 7;
    VectorXd x(70);
    for (Index t = 0; t < 70; ++t) x[t] = 3 + 0.5 * t + 4 * std::sin(2 * std::numbers::pi * t / w);
    const auto d = classical_decompose(x, w);
    // per-phase means are taken over all cycles, edge cells included, so
    // measure against the recentred interior estimate instead of zero
    const VectorXd detrended = x - d.trend;
    CHECK(is_periodic(d.seasonal, w));
    CHECK(std::abs(d.seasonal.head(w).mean()) < 1e-12);
    for (Index t = w; t < 70 - w; ++t) {
      CHECK(std::abs(detrended[t] - 4 * std::sin(2 * std::numbers::pi * t / w)) < 1e-9);
    }
  }
  SUBCASE("an outlier shifts the phase mean by M / cycles") {
    const Index w = 7;
    const Index cycles = 10;
    VectorXd x(w * cycles);
    for (Index t = 0; t < x.size(); ++t) x[t] = 4 * std::sin(2 * std::numbers::pi * t / w);
    VectorXd dirty = x;
    const double M = 700.0;
    dirty[3 * w + 3] += M;
    const auto a = classical_decompose(x, w);
    const auto b = classical_decompose(dirty, w);
    // The outlier enters the detrended series as M(1 - 1/w) at its own phase
    // and -M/w once at every other phase through the moving average. Those
    // shifts sum to zero, so recentring leaves M(1 - 1/w)/cycles at phase 3.
    const double shift = b.seasonal[3] - a.seasonal[3];
    CHECK(shift == doctest::Approx(M * (1.0 - 1.0 / w) / cycles).epsilon(1e-9));
    const auto ra = mmd_decompose(x, w);
    const auto rb = mmd_decompose(dirty, w);
    CHECK(std::abs(rb.seasonal[3] - ra.seasonal[3]) < 1e-9);
  }
  SUBCASE("reconstruction") {
    const VectorXd x = seasonal_series(90, 6, 0.4, 3.0, 77);
    const auto d = classical_decompose(x, 6);
    CHECK((d.trend + d.seasonal + d.residual - x).cwiseAbs().maxCoeff() < 1e-9 * x.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("bounded influence of corrupted same-phase cells") {
  // Clean seasonal + linear trend; corrupt m < cycles/2 cells of phase 2,
  // spaced more than one window apart.
  const Index w = 7;
  const Index cycles = 20;
  const Index n = w * cycles;
  VectorXd x(n);
  for (Index t = 0; t < n; ++t) x[t] = 10 + 0.3 * t + 6 * std::cos(2 * std::numbers::pi * t / w + 0.4);
  const auto clean = mmd_decompose(x, w);
  const auto clean_cls = classical_decompose(x, w);

  for (double magnitude : {100.0, 1000.0, 1e5}) {
    VectorXd dirty = x;
    for (Index c : {3, 8, 13}) dirty[c * w + 2] += magnitude;
    const auto d = mmd_decompose(dirty, w);
    const auto dc = classical_decompose(dirty, w);
    double other = 0;
    for (Index t = 0; t < n; ++t) {
      if (t % w != 2) other = std::max(other, std::abs(d.seasonal[t] - clean.seasonal[t]));
    }
    CHECK(other < 1e-9);  // zero up to rounding in the moving average
    CHECK(std::abs(d.seasonal[2] - clean.seasonal[2]) < 1e-9);
    const double cls_shift = std::abs(dc.seasonal[2] - clean_cls.seasonal[2]);
    CHECK(cls_shift > 3 * magnitude / cycles * 0.5);
  }
}
