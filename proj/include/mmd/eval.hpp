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

#include "mmd/frequency.hpp"
#include "mmd/retrieve.hpp"

#include <cstdint>
#include <random>

namespace mmd {

// ---------------------------------------------------------------------------
// Labels

struct LabelRecord {
  std::string metric_id;
  Dimensions dimensions;
  Date date{};
  std::string labeler_id;
  bool is_alert = false;

  std::string key() const { return series_key(metric_id, dimensions); }
};

struct AggregatedLabel {
  std::string metric_id;
  Dimensions dimensions;
  Date date{};
  double agreement_ratio = 0.0;
  bool is_alert_majority = false;

  std::string key() const { return series_key(metric_id, dimensions); }
};

/// Share of viewers that flagged the point.
double agreement_ratio(std::span<const LabelRecord> labels, int viewers);

/// Groups records by (series, date). The viewers of a series are the distinct
/// labelers that left any record on it; unlisted points are not returned.
std::vector<AggregatedLabel> aggregate_labels(std::span<const LabelRecord> labels);

// ---------------------------------------------------------------------------
// Metrics

struct MetricsReport {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f_beta = 0.0;
  double beta = 2.0;

  std::int64_t total() const { return tp + fp + fn + tn; }
};

/// (1 + b^2) P R / (b^2 P + R); zero when P = R = 0.
double f_beta(double precision, double recall, double beta);

MetricsReport make_report(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn,
                          double beta = 2.0);

// ---------------------------------------------------------------------------
// Corpus

struct LabeledPoint {
  Index index = 0;
  bool is_alert = false;
};

struct LabeledSeries {
  MetricSeries series;
  std::vector<LabeledPoint> labels;
};

using Corpus = std::vector<LabeledSeries>;

/// Attaches majority labels to gap-filled series. Points with agreement of
/// exactly 0.5 are dropped; every other point of a series that has at least
/// one label record is evaluated, unlisted points counting as negatives.
Corpus attach_labels(const std::vector<MetricSeries>& series,
                     std::span<const AggregatedLabel> labels);

/// Splits the labelled points at `cutoff`: train gets dates before it, test
/// gets the rest. Both keep the full series as history.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, Date cutoff);

/// Caches period_w on every series that lacks one.
void assign_periods(Corpus& corpus, const FrequencyConfig& cfg = {});

// ---------------------------------------------------------------------------
// Detector evaluation

struct DetectorSetup {
  Decomposer decomposer = Decomposer::MMD;
  DetectorConfig detector;
  int persist_days = 1;
  int default_period = 7;
};

/// Replays each labelled point as the last observation of its own prefix.
MetricsReport score_detector(const DetectorSetup& setup, const Corpus& corpus,
                             double beta = 2.0);

/// Per-point detection inputs that do not depend on p_anom, computed once
/// per corpus so a parameter grid can be scored cheaply.
class CorpusScan {
 public:
  CorpusScan(const Corpus& corpus, Decomposer decomposer, const DetectorConfig& base,
             int default_period = 7);

  MetricsReport score(double p_anom, int persist_days, double beta = 2.0) const;

 private:
  struct Point {
    double value = 0.0;
    double center = 0.0;  // T + S + mu_hat
    double sigma = 0.0;
  };
  struct Series {
    std::vector<Point> points;  // index i holds the test of prefix [0, first + i]
    Index first = 0;
    std::vector<LabeledPoint> labels;
  };
  std::vector<Series> series_;
  bool has_positive_ = false;
};

struct ParamGrid {
  std::vector<double> p_anom{0.01};
  std::vector<int> persist_days{1};
};

struct GridPoint {
  double p_anom = 0.01;
  int persist_days = 1;
};

struct GridEntry {
  GridPoint params;
  MetricsReport train;
};

struct GridResult {
  GridPoint best;
  MetricsReport train;
  MetricsReport test;
  std::vector<GridEntry> evaluated;
};

/// Max train F-beta; ties go to smaller p_anom, then smaller persist_days.
/// Sees training reports only.
GridPoint select_best(std::span<const GridEntry> train_entries);

GridResult grid_search(const ParamGrid& grid, const Corpus& train, const Corpus& test,
                       Decomposer decomposer, const DetectorConfig& base = {},
                       int default_period = 7, double beta = 2.0);

// ---------------------------------------------------------------------------
// Synthetic corpus

enum class NoiseKind { Gaussian, StudentT3, ShiftedExponential };

std::string_view to_string(NoiseKind k);
NoiseKind parse_noise(std::string_view text);

enum class AnomalyKind : std::uint8_t { None, Spike, LevelShift };

struct CorpusSpec {
  int n_series = 164;
  int n_metrics = 41;
  int length = 212;  // Jan through July
  int period = 7;
  double level = 100.0;
  double trend_slope = 0.05;
  double seasonal_amplitude = 10.0;
  NoiseKind noise = NoiseKind::Gaussian;
  double noise_scale = 1.0;
  double anomaly_rate = 0.01;       // anomaly onsets per day
  double anomaly_magnitude = 8.0;   // in noise standard deviations
  double level_shift_fraction = 0.3;
  int shift_min_days = 3;
  int shift_max_days = 6;
  std::uint64_t seed = 42;
  Date start = Date{std::chrono::year{2018} / 1 / 1};
};

struct GeneratedCorpus {
  std::vector<MetricSeries> series;
  std::vector<std::vector<AnomalyKind>> truth;  // parallel to series

  /// Ground truth as a labelled corpus: every point of every series.
  Corpus labeled() const;
};

GeneratedCorpus gen_corpus(const CorpusSpec& spec);

/// Crowd-style label records: each labeler flags true anomalies and flips
/// each point with probability `flip_prob`. Only positive flags are emitted,
/// plus one negative "seen" record for a labeler who flagged nothing.
std::vector<LabelRecord> simulate_labels(const GeneratedCorpus& corpus, int labelers,
                                         double flip_prob, std::uint64_t seed);

/// Zero-mean, unit-variance noise sample.
double draw_noise(NoiseKind kind, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Benchmark

struct BenchReport {
  Decomposer decomposer = Decomposer::MMD;
  double time_ms_per_100 = 0.0;
  double stddev_ms = 0.0;
  int repetitions = 0;
  std::size_t series = 0;
};

/// Single-threaded wall clock of detect_last over the series, per `batch`
/// series, after one warm-up pass.
BenchReport bench_throughput(Decomposer decomposer, const std::vector<MetricSeries>& series,
                             const DetectorConfig& cfg = {}, int batch = 100,
                             int repetitions = 5, int default_period = 7);

// ---------------------------------------------------------------------------
// Phase comparison

struct PhaseComparison {
  std::int64_t phase_one_alerts = 0;
  std::int64_t phase_one_valid = 0;
  std::int64_t two_phase_alerts = 0;
  std::int64_t two_phase_valid = 0;

  double phase_one_precision() const;
  double two_phase_precision() const;
};

/// Replays the last `days` days of the corpus as daily runs. A phase-one
/// alert is any anomalous verdict; two-phase alerts go through retrieval
/// with a persisted history. Alerts on level-shift days count as valid.
PhaseComparison compare_alerting_phases(const GeneratedCorpus& corpus, int days,
                                        const DetectorConfig& detector,
                                        const RetrievalConfig& retrieval,
                                        const RankWeights& weights, int default_period = 7);

}  // namespace mmd
