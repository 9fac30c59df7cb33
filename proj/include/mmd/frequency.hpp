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

#include "mmd/core.hpp"

#include <filesystem>
#include <shared_mutex>
#include <unordered_map>

namespace mmd {

/// ESPRIT could not produce a usable estimate (e.g. rank-deficient
/// rotational-invariance system).
class EspritFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PeriodMethod { ESPRIT, Periodogram, Default };

std::string_view to_string(PeriodMethod m);

struct SpectralComponent {
  double freq = 0.0;             // radians per sample, in (0, pi]
  double amplitude = 0.0;
  double energy_fraction = 0.0;  // share of the centred, detrended signal energy
};

struct PeriodEstimate {
  int period_w = 7;
  PeriodMethod method = PeriodMethod::Default;
  double dominant_freq = 0.0;
  double confidence = 0.0;
};

struct FrequencyConfig {
  int max_order = 10;
  double min_confidence = 0.2;
  int default_period = 7;
};

/// Removes the mean and the least-squares line.
Eigen::VectorXd detrend(const Eigen::Ref<const Eigen::VectorXd>& x);

/// Sinusoidal frequencies of x by least-squares ESPRIT on a Hankel matrix of
/// height floor(n/3). Model order is the smallest number of singular values
/// holding 90% of the energy, capped at max_order. Returns components sorted
/// by descending amplitude.
std::vector<SpectralComponent> esprit_frequencies(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                  int max_order = 10);

/// Period from the strongest non-DC bin of the DFT power spectrum.
PeriodEstimate periodogram_period(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  int default_period = 7);

/// ESPRIT first, periodogram fallback, then the configured default.
PeriodEstimate estimate_period(const Eigen::Ref<const Eigen::VectorXd>& x,
                               const FrequencyConfig& cfg = {});
PeriodEstimate estimate_period(const MetricSeries& series, const FrequencyConfig& cfg = {});

/// Thread-safe series-key -> period map, persisted as "key<TAB>period" lines.
class PeriodCache {
 public:
  std::optional<int> find(const std::string& key) const;
  void store(const std::string& key, int period);
  std::size_t size() const;

  /// Cached period, or estimate once and remember it.
  int get_or_estimate(const MetricSeries& series, const FrequencyConfig& cfg);

  /// Merges entries from a cache file; a missing file is not an error.
  void load(const std::filesystem::path& path);
  /// Rewrites the file through a temporary and a rename.
  void save(const std::filesystem::path& path) const;

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, int> periods_;
};

}  // namespace mmd
