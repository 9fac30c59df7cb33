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

#include "mmd/decompose.hpp"

namespace mmd {

struct DetectorConfig {
  double p_anom = 0.01;
  double mad_scale_b = 1.4826;
  /// Floor on the robust sigma. When unset, detection derives it from the
  /// series as 1e-9 * max(1, |median(X)|).
  std::optional<double> min_sigma;
};

void check_config(const DetectorConfig& cfg);

struct RobustStats {
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
};

/// Half-width multiplier of the normal range: 1 / sqrt(p).
double chebyshev_k(double p_anom);

/// Median and scaled MAD of the residuals, sigma floored at min_sigma.
template <typename Derived>
RobustStats robust_stats(const Eigen::MatrixBase<Derived>& residual, const DetectorConfig& cfg) {
  if (residual.size() < 3) throw InputError("robust_stats: need at least 3 residuals");
  const Vector<double> r = residual.template cast<double>();
  const double mu = median(r);
  const double mad = median((r.array() - mu).abs().matrix());
  const double floor = cfg.min_sigma.value_or(1e-9);
  return {mu, std::max(cfg.mad_scale_b * mad, floor)};
}

struct Band {
  double low = 0.0;
  double high = 0.0;

  bool contains(double v) const { return v >= low && v <= high; }
};

/// T_t + S_t + mu_hat -/+ k * sigma_hat.
Band normal_range(const Decomposition& decomp, Index t, const RobustStats& stats,
                  const DetectorConfig& cfg);

/// Out-of-sample variant: stats come from residuals strictly before t.
Band normal_range(const Decomposition& decomp, Index t, const DetectorConfig& cfg);

struct AnomalyVerdict {
  std::string metric_id;
  Dimensions dimensions;
  Priority priority = Priority::P4;
  Date date{};
  int period_w = 0;
  double band_low = 0.0;
  double band_high = 0.0;
  double last_value = 0.0;
  bool is_anomaly = false;
  double severity = 0.0;
  int exceed_streak = 0;
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  /// Trailing raw values used for correlation in the retrieval phase.
  Eigen::VectorXd window;

  std::string key() const { return series_key(metric_id, dimensions); }
};

/// Minimum series length detect_last accepts for period w.
Index min_detect_length(Index w);

/// Tests the last observation of a gap-filled series against its normal
/// range. Trailing points are re-tested on their own prefixes to measure
/// the exceed streak.
AnomalyVerdict detect_last(const MetricSeries& series, const DetectorConfig& cfg, Index w,
                           Decomposer method = Decomposer::MMD, Index window_length = 60);

/// Core of detect_last on raw values (no metadata, no window, no streak).
struct PointTest {
  Band band;
  RobustStats stats;
  double center = 0.0;  // T + S + mu_hat at the tested point
  double value = 0.0;
  double residual = 0.0;
  bool is_anomaly = false;
  double severity = 0.0;
};
PointTest test_last_point(const Eigen::Ref<const Eigen::VectorXd>& x, const DetectorConfig& cfg,
                          Index w, Decomposer method = Decomposer::MMD);

/// Number of trailing points (ending at x's last index) that lie outside
/// their own out-of-sample band. Stops once prefixes get too short or the
/// count reaches `cap`.
int exceed_streak(const Eigen::Ref<const Eigen::VectorXd>& x, const DetectorConfig& cfg, Index w,
                  Decomposer method = Decomposer::MMD,
                  int cap = std::numeric_limits<int>::max());

}  // namespace mmd
