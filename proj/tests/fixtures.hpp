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

#pragma once

// Shared synthetic inputs for unit and acceptance tests.

#include "mmd/retrieve.hpp"

#include <random>

namespace mmd::testing {

/// Feedback labelled by a logistic model with the given weights.
inline std::vector<FeedbackRecord> make_feedback(std::size_t n, std::uint64_t seed,
                                                 const RankWeights& truth, double intercept) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> severity(0.0, 3.0);
  std::uniform_int_distribution<int> priority(0, 3);
  std::uniform_int_distribution<int> granularity(0, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FeedbackRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    FeedbackRecord r;
    r.features.f_d = severity(rng);
    r.features.f_p = one_hot(static_cast<Priority>(priority(rng)));
    r.features.f_g = granularity(rng);
    const double z = intercept + score(r.features, truth);
    const double p = 1.0 / (1.0 + std::exp(-z));
    r.is_valid = u(rng) < p;
    out.push_back(r);
  }
  return out;
}

/// Kendall tau-a over all pairs.
inline double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      sum += (da > 0) - (da < 0) == (db > 0) - (db < 0) ? ((da != 0) ? 1.0 : 0.0) : -1.0;
    }
  }
  return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

inline Eigen::VectorXd noise_window(std::mt19937_64& rng, Index n = 60) {
  std::normal_distribution<double> g;
  Eigen::VectorXd w(n);
  for (Index i = 0; i < n; ++i) w[i] = 100.0 + g(rng);
  return w;
}

/// 30 anomalous verdicts over 12 metrics. Within each metric some windows
/// are affine copies of another (|corr| = 1), the rest are independent
/// noise. Streaks range over 1..4.
inline std::vector<AnomalyVerdict> retrieval_fixture(Date day, std::uint64_t seed = 30) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sev(10.0, 40.0);
  const char* countries[] = {"US", "DE", "UK", "FR"};
  std::vector<AnomalyVerdict> out;
  for (int m = 0; m < 12; ++m) {
    const int count = m < 6 ? 3 : 2;
    std::vector<Eigen::VectorXd> windows;
    for (int j = 0; j < count; ++j) {
      AnomalyVerdict v;
      char id[16];
      std::snprintf(id, sizeof id, "metric%02d", m);
      v.metric_id = id;
      v.dimensions = {{"country", countries[j]}};
      if ((m + j) % 3 == 0) v.dimensions["device"] = "PC";
      v.priority = static_cast<Priority>((m + j) % 4);
      v.date = day;
      v.period_w = 7;
      v.is_anomaly = true;
      v.severity = sev(rng);
      v.exceed_streak = 1 + (m * 3 + j) % 4;
      v.last_value = 200.0;
      v.band_low = 90.0;
      v.band_high = 110.0;
      v.sigma_hat = 1.0;
      if (j == 1 && m % 2 == 0) {
        v.window = 2.5 * windows[0].array() + 7.0;
      } else {
        v.window = noise_window(rng);
      }
      windows.push_back(v.window);
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace mmd::testing
