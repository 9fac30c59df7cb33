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

#include "mmd/detect.hpp"

namespace mmd {

namespace {

DetectorConfig with_floor(const DetectorConfig& cfg, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (cfg.min_sigma) return cfg;
  DetectorConfig out = cfg;
  out.min_sigma = 1e-9 * std::max(1.0, std::abs(median(x)));
  return out;
}

// Trailing out-of-band run, scanning prefixes that end at `end`, `end - 1`, ...
int count_streak(const Eigen::Ref<const Eigen::VectorXd>& x, const DetectorConfig& cfg, Index w,
                 Decomposer method, Index end, int cap) {
  int streak = 0;
  for (Index len = end; len >= min_detect_length(w) && streak < cap; --len) {
    if (!test_last_point(x.head(len), cfg, w, method).is_anomaly) break;
    ++streak;
  }
  return streak;
}

}  // namespace

void check_config(const DetectorConfig& cfg) {
  if (!(cfg.p_anom > 0.0 && cfg.p_anom < 1.0)) {
    throw InputError("detector: p_anom must lie in (0, 1)");
  }
  if (!(cfg.mad_scale_b > 0.0) || !std::isfinite(cfg.mad_scale_b)) {
    throw InputError("detector: mad_scale_b must be positive");
  }
  if (cfg.min_sigma && !(*cfg.min_sigma > 0.0)) {
    throw InputError("detector: min_sigma must be positive");
  }
}

double chebyshev_k(double p_anom) {
  if (!(p_anom > 0.0 && p_anom < 1.0)) {
    throw InputError("chebyshev_k: probability must lie in (0, 1)");
  }
  return 1.0 / std::sqrt(p_anom);
}

Band normal_range(const Decomposition& decomp, Index t, const RobustStats& stats,
                  const DetectorConfig& cfg) {
  if (t < 0 || t >= decomp.size()) throw InputError("normal_range: index out of range");
  const double center = decomp.trend[t] + decomp.seasonal[t] + stats.mu_hat;
  const double half = chebyshev_k(cfg.p_anom) * stats.sigma_hat;
  return {center - half, center + half};
}

Band normal_range(const Decomposition& decomp, Index t, const DetectorConfig& cfg) {
  if (t < 3) throw InputError("normal_range: need at least 3 prior residuals");
  return normal_range(decomp, t, robust_stats(decomp.residual.head(t), cfg), cfg);
}

Index min_detect_length(Index w) { return std::max<Index>(2 * w, w + 1) + 1; }

PointTest test_last_point(const Eigen::Ref<const Eigen::VectorXd>& x, const DetectorConfig& cfg,
                          Index w, Decomposer method) {
  const Index n = x.size();
  if (n < min_detect_length(w)) throw InputError("detect: series too short for period");
  const DetectorConfig floored = with_floor(cfg, x);
  const Decomposition d = decompose(x, w, method);

  PointTest out;
  out.stats = robust_stats(d.residual.head(n - 1), floored);
  out.band = normal_range(d, n - 1, out.stats, floored);
  out.center = d.trend[n - 1] + d.seasonal[n - 1] + out.stats.mu_hat;
  out.value = x[n - 1];
  out.residual = d.residual[n - 1];
  out.is_anomaly = !out.band.contains(out.value);
  out.severity = std::abs(out.residual - out.stats.mu_hat) / out.stats.sigma_hat;
  return out;
}

int exceed_streak(const Eigen::Ref<const Eigen::VectorXd>& x, const DetectorConfig& cfg, Index w,
                  Decomposer method, int cap) {
  return count_streak(x, cfg, w, method, x.size(), cap);
}

AnomalyVerdict detect_last(const MetricSeries& series, const DetectorConfig& cfg, Index w,
                           Decomposer method, Index window_length) {
  check_config(cfg);
  if (series.missing_count() > 0) {
    throw InputError(series.key() + ": detect_last needs a gap-filled series");
  }
  const Eigen::VectorXd& x = series.values;
  const PointTest last = test_last_point(x, cfg, w, method);

  AnomalyVerdict v;
  v.metric_id = series.metric_id;
  v.dimensions = series.dimensions;
  v.priority = series.priority;
  v.date = series.timestamps.back();
  v.period_w = static_cast<int>(w);
  v.band_low = last.band.low;
  v.band_high = last.band.high;
  v.last_value = last.value;
  v.is_anomaly = last.is_anomaly;
  v.severity = last.severity;
  v.mu_hat = last.stats.mu_hat;
  v.sigma_hat = last.stats.sigma_hat;
  if (v.is_anomaly) {
    v.exceed_streak = 1 + count_streak(x, cfg, w, method, x.size() - 1,
                                       std::numeric_limits<int>::max());
  }
  const Index keep = std::min(window_length, x.size());
  v.window = x.tail(keep);
  return v;
}

}  // namespace mmd
