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

#include "mmd/eval.hpp"

#include <chrono>
#include <numbers>
#include <set>
#include <unordered_map>

namespace mmd {

double agreement_ratio(std::span<const LabelRecord> labels, int viewers) {
  if (viewers < 1) throw InputError("agreement_ratio: viewers must be >= 1");
  if (static_cast<int>(labels.size()) > viewers) {
    throw InputError("agreement_ratio: more labels than viewers");
  }
  const auto flagged = std::count_if(labels.begin(), labels.end(),
                                     [](const LabelRecord& r) { return r.is_alert; });
  return static_cast<double>(flagged) / static_cast<double>(viewers);
}

std::vector<AggregatedLabel> aggregate_labels(std::span<const LabelRecord> labels) {
  std::map<std::string, std::set<std::string>> viewers;
  std::map<std::pair<std::string, Date>, std::map<std::string, LabelRecord>> points;
  for (const auto& r : labels) {
    viewers[r.key()].insert(r.labeler_id);
    // one record per (series, date, labeler); a later record replaces an earlier one
    points[{r.key(), r.date}][r.labeler_id] = r;
  }

  std::vector<AggregatedLabel> out;
  out.reserve(points.size());
  for (const auto& [id, by_labeler] : points) {
    std::vector<LabelRecord> recs;
    for (const auto& [labeler, rec] : by_labeler) recs.push_back(rec);
    const auto& first = recs.front();
    AggregatedLabel a;
    a.metric_id = first.metric_id;
    a.dimensions = first.dimensions;
    a.date = id.second;
    a.agreement_ratio = agreement_ratio(recs, static_cast<int>(viewers[id.first].size()));
    a.is_alert_majority = a.agreement_ratio > 0.5;
    out.push_back(std::move(a));
  }
  return out;
}

double f_beta(double precision, double recall, double beta) {
  if (precision < 0.0 || precision > 1.0 || recall < 0.0 || recall > 1.0) {
    throw InputError("f_beta: precision and recall must lie in [0, 1]");
  }
  if (precision == 0.0 && recall == 0.0) return 0.0;
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

MetricsReport make_report(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn,
                          double beta) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  r.beta = beta;
  r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f_beta = f_beta(r.precision, r.recall, beta);
  return r;
}

Corpus attach_labels(const std::vector<MetricSeries>& series,
                     std::span<const AggregatedLabel> labels) {
  std::unordered_map<std::string, std::vector<const AggregatedLabel*>> by_key;
  for (const auto& l : labels) by_key[l.key()].push_back(&l);

  Corpus corpus;
  for (const auto& s : series) {
    const auto it = by_key.find(s.key());
    if (it == by_key.end()) continue;
    std::map<Date, const AggregatedLabel*> by_date;
    for (const auto* l : it->second) by_date[l->date] = l;

    LabeledSeries ls;
    ls.series = s;
    for (Index i = 0; i < s.size(); ++i) {
      const auto found = by_date.find(s.timestamps[i]);
      if (found == by_date.end()) {
        ls.labels.push_back({i, false});
        continue;
      }
      if (found->second->agreement_ratio == 0.5) continue;  // tie
      ls.labels.push_back({i, found->second->is_alert_majority});
    }
    corpus.push_back(std::move(ls));
  }
  return corpus;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, Date cutoff) {
  Corpus train;
  Corpus test;
  for (const auto& ls : corpus) {
    LabeledSeries a{ls.series, {}};
    LabeledSeries b{ls.series, {}};
    for (const auto& p : ls.labels) {
      (ls.series.timestamps[p.index] < cutoff ? a.labels : b.labels).push_back(p);
    }
    if (!a.labels.empty()) train.push_back(std::move(a));
    if (!b.labels.empty()) test.push_back(std::move(b));
  }
  return {std::move(train), std::move(test)};
}

void assign_periods(Corpus& corpus, const FrequencyConfig& cfg) {
  for (auto& ls : corpus) {
    if (!ls.series.period_w) ls.series.period_w = estimate_period(ls.series, cfg).period_w;
  }
}

CorpusScan::CorpusScan(const Corpus& corpus, Decomposer decomposer, const DetectorConfig& base,
                       int default_period) {
  for (const auto& ls : corpus) {
    const Index w = ls.series.period_w.value_or(default_period);
    Series s;
    s.first = min_detect_length(w) - 1;
    s.labels = ls.labels;
    Index last = -1;
    for (const auto& p : ls.labels) last = std::max(last, p.index);
    for (Index i = s.first; i <= last; ++i) {
      const PointTest t = test_last_point(ls.series.values.head(i + 1), base, w, decomposer);
      s.points.push_back({t.value, t.center, t.stats.sigma_hat});
    }
    for (const auto& p : ls.labels) has_positive_ |= (p.is_alert && p.index >= s.first);
    series_.push_back(std::move(s));
  }
}

MetricsReport CorpusScan::score(double p_anom, int persist_days, double beta) const {
  if (!has_positive_) throw InputError("score_detector: corpus has no positive labels");
  if (persist_days < 1) throw InputError("score_detector: persist_days must be >= 1");
  const double k = chebyshev_k(p_anom);

  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& s : series_) {
    std::vector<char> out_of_band(s.points.size());
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto& pt = s.points[i];
      // Same arithmetic as normal_range.
      const double half = k * pt.sigma;
      const Band band{pt.center - half, pt.center + half};
      out_of_band[i] = !band.contains(pt.value);
    }
    for (const auto& label : s.labels) {
      if (label.index < s.first) continue;
      const std::size_t pos = static_cast<std::size_t>(label.index - s.first);
      bool flagged = true;
      for (int j = 0; j < persist_days && flagged; ++j) {
        flagged = pos >= static_cast<std::size_t>(j) && out_of_band[pos - j];
      }
      if (flagged) (label.is_alert ? tp : fp) += 1;
      else (label.is_alert ? fn : tn) += 1;
    }
  }
  return make_report(tp, fp, fn, tn, beta);
}

MetricsReport score_detector(const DetectorSetup& setup, const Corpus& corpus, double beta) {
  check_config(setup.detector);
  const CorpusScan scan(corpus, setup.decomposer, setup.detector, setup.default_period);
  return scan.score(setup.detector.p_anom, setup.persist_days, beta);
}

GridPoint select_best(std::span<const GridEntry> train_entries) {
  if (train_entries.empty()) throw InputError("grid_search: empty grid");
  const GridEntry* best = &train_entries.front();
  for (const auto& e : train_entries.subspan(1)) {
    const double a = e.train.f_beta;
    const double b = best->train.f_beta;
    if (a > b) {
      best = &e;
    } else if (a == b) {
      if (e.params.p_anom < best->params.p_anom ||
          (e.params.p_anom == best->params.p_anom &&
           e.params.persist_days < best->params.persist_days)) {
        best = &e;
      }
    }
  }
  return best->params;
}

GridResult grid_search(const ParamGrid& grid, const Corpus& train, const Corpus& test,
                       Decomposer decomposer, const DetectorConfig& base, int default_period,
                       double beta) {
  if (grid.p_anom.empty() || grid.persist_days.empty()) {
    throw InputError("grid_search: empty grid");
  }
  Date train_max = Date::min();
  Date test_min = Date::max();
  for (const auto& ls : train) {
    for (const auto& p : ls.labels) train_max = std::max(train_max, ls.series.timestamps[p.index]);
  }
  for (const auto& ls : test) {
    for (const auto& p : ls.labels) test_min = std::min(test_min, ls.series.timestamps[p.index]);
  }
  if (!(train_max < test_min)) {
    throw InputError("grid_search: train and test date ranges overlap");
  }

  GridResult result;
  {
    const CorpusScan scan(train, decomposer, base, default_period);
    for (double p : grid.p_anom) {
      for (int k : grid.persist_days) {
        result.evaluated.push_back({{p, k}, scan.score(p, k, beta)});
      }
    }
  }
  result.best = select_best(result.evaluated);
  for (const auto& e : result.evaluated) {
    if (e.params.p_anom == result.best.p_anom &&
        e.params.persist_days == result.best.persist_days) {
      result.train = e.train;
    }
  }
  const CorpusScan held_out(test, decomposer, base, default_period);
  result.test = held_out.score(result.best.p_anom, result.best.persist_days, beta);
  return result;
}

std::string_view to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::StudentT3: return "student_t3";
    case NoiseKind::ShiftedExponential: return "shifted_exponential";
  }
  return "gaussian";
}

NoiseKind parse_noise(std::string_view text) {
  if (text == "gaussian") return NoiseKind::Gaussian;
  if (text == "student_t3" || text == "t3") return NoiseKind::StudentT3;
  if (text == "shifted_exponential" || text == "exponential") {
    return NoiseKind::ShiftedExponential;
  }
  throw InputError("unknown noise kind '" + std::string(text) + "'");
}

double draw_noise(NoiseKind kind, std::mt19937_64& rng) {
  switch (kind) {
    case NoiseKind::Gaussian:
      return std::normal_distribution<double>(0.0, 1.0)(rng);
    case NoiseKind::StudentT3:
      // t(3) has variance 3
      return std::student_t_distribution<double>(3.0)(rng) / std::sqrt(3.0);
    case NoiseKind::ShiftedExponential:
      return std::exponential_distribution<double>(1.0)(rng) - 1.0;
  }
  return 0.0;
}

Corpus GeneratedCorpus::labeled() const {
  Corpus corpus;
  for (std::size_t s = 0; s < series.size(); ++s) {
    LabeledSeries ls{series[s], {}};
    for (Index i = 0; i < series[s].size(); ++i) {
      ls.labels.push_back({i, truth[s][i] != AnomalyKind::None});
    }
    corpus.push_back(std::move(ls));
  }
  return corpus;
}

GeneratedCorpus gen_corpus(const CorpusSpec& spec) {
  if (spec.n_series < 1 || spec.n_metrics < 1 || spec.period < 2 ||
      spec.length < 2 * spec.period + 1) {
    throw InputError("gen_corpus: invalid corpus spec");
  }
  static const char* const kCountries[] = {"US", "UK", "DE", "AU", "FR", "IT"};
  static const char* const kDevices[] = {"PC", "Mobile", "Tablet"};

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GeneratedCorpus out;
  out.series.reserve(spec.n_series);
  out.truth.reserve(spec.n_series);

  for (int s = 0; s < spec.n_series; ++s) {
    const int metric = s % spec.n_metrics;
    const int slice = s / spec.n_metrics;
    MetricSeries series;
    char id[32];
    std::snprintf(id, sizeof id, "metric_%03d", metric);
    series.metric_id = id;
    if (slice > 0) series.dimensions["country"] = kCountries[(slice - 1) % 6];
    if (slice > 6) series.dimensions["device"] = kDevices[((slice - 7) / 6) % 3];
    if (slice > 24) series.dimensions["slice"] = std::to_string(slice);
    series.priority = static_cast<Priority>(metric % 4);

    const double level = spec.level * (0.5 + unit(rng));
    const double slope = spec.trend_slope * (2.0 * unit(rng) - 1.0);
    const double amplitude = spec.seasonal_amplitude * (0.5 + unit(rng));
    const double phase = unit(rng) * spec.period;
    const double omega = 2.0 * std::numbers::pi / spec.period;

    series.values.resize(spec.length);
    series.timestamps.reserve(spec.length);
    for (int t = 0; t < spec.length; ++t) {
      series.timestamps.push_back(spec.start + std::chrono::days{t});
      const double tt = t + phase;
      series.values[t] = level + slope * t + amplitude * std::sin(omega * tt) +
                         0.5 * amplitude * std::cos(2.0 * omega * tt) +
                         spec.noise_scale * draw_noise(spec.noise, rng);
    }

    std::vector<AnomalyKind> truth(spec.length, AnomalyKind::None);
    for (int t = 1; t < spec.length; ++t) {
      if (unit(rng) >= spec.anomaly_rate) continue;
      const double sign = unit(rng) < 0.7 ? 1.0 : -1.0;
      const double magnitude =
          sign * spec.anomaly_magnitude * spec.noise_scale * (0.8 + 0.7 * unit(rng));
      if (unit(rng) < spec.level_shift_fraction) {
        const int span = spec.shift_min_days +
                         static_cast<int>(unit(rng) * (spec.shift_max_days - spec.shift_min_days + 1));
        const int end = std::min(spec.length, t + span);
        for (int u = t; u < end; ++u) {
          series.values[u] += magnitude;
          truth[u] = AnomalyKind::LevelShift;
        }
        t = end;  // leave at least one normal day after a shift
      } else {
        series.values[t] += magnitude;
        truth[t] = AnomalyKind::Spike;
        ++t;
      }
    }
    out.series.push_back(std::move(series));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

std::vector<LabelRecord> simulate_labels(const GeneratedCorpus& corpus, int labelers,
                                         double flip_prob, std::uint64_t seed) {
  if (labelers < 1) throw InputError("simulate_labels: need at least one labeler");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<LabelRecord> out;
  for (std::size_t s = 0; s < corpus.series.size(); ++s) {
    const auto& series = corpus.series[s];
    for (int l = 0; l < labelers; ++l) {
      const std::string labeler = "labeler_" + std::to_string(l);
      bool any = false;
      for (Index i = 0; i < series.size(); ++i) {
        bool flag = corpus.truth[s][i] != AnomalyKind::None;
        if (unit(rng) < flip_prob) flag = !flag;
        if (!flag) continue;
        out.push_back({series.metric_id, series.dimensions, series.timestamps[i], labeler, true});
        any = true;
      }
      // Record that this labeler saw the series even without flags.
      if (!any) {
        out.push_back({series.metric_id, series.dimensions, series.timestamps.front(), labeler,
                       false});
      }
    }
  }
  return out;
}

BenchReport bench_throughput(Decomposer decomposer, const std::vector<MetricSeries>& series,
                             const DetectorConfig& cfg, int batch, int repetitions,
                             int default_period) {
  if (series.empty()) throw InputError("bench_throughput: empty corpus");
  if (batch < 1 || repetitions < 1) throw InputError("bench_throughput: invalid batch settings");

  auto run_once = [&] {
    std::size_t flagged = 0;
    for (const auto& s : series) {
      const Index w = s.period_w.value_or(default_period);
      flagged += detect_last(s, cfg, w, decomposer).is_anomaly ? 1 : 0;
    }
    return flagged;
  };

  volatile std::size_t sink = run_once();  // warm-up
  std::vector<double> per_batch;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    sink = sink + run_once();
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    per_batch.push_back(ms * batch / static_cast<double>(series.size()));
  }

  const Eigen::Map<const Eigen::VectorXd> times(per_batch.data(),
                                                static_cast<Index>(per_batch.size()));
  BenchReport report;
  report.decomposer = decomposer;
  report.repetitions = repetitions;
  report.series = series.size();
  report.time_ms_per_100 = times.mean();
  report.stddev_ms = repetitions > 1 ? std::sqrt((times.array() - times.mean()).square().sum() /
                                                 static_cast<double>(repetitions - 1))
                                     : 0.0;
  return report;
}

double PhaseComparison::phase_one_precision() const {
  return phase_one_alerts > 0
             ? static_cast<double>(phase_one_valid) / static_cast<double>(phase_one_alerts)
             : 0.0;
}

double PhaseComparison::two_phase_precision() const {
  return two_phase_alerts > 0
             ? static_cast<double>(two_phase_valid) / static_cast<double>(two_phase_alerts)
             : 0.0;
}

PhaseComparison compare_alerting_phases(const GeneratedCorpus& corpus, int days,
                                        const DetectorConfig& detector,
                                        const RetrievalConfig& retrieval,
                                        const RankWeights& weights, int default_period) {
  if (corpus.series.empty() || days < 1) throw InputError("compare_alerting_phases: no input");
  std::unordered_map<std::string, std::size_t> index_of;
  Index length = std::numeric_limits<Index>::max();
  for (std::size_t s = 0; s < corpus.series.size(); ++s) {
    index_of[corpus.series[s].key()] = s;
    length = std::min(length, corpus.series[s].size());
  }

  PhaseComparison cmp;
  AlertHistory history;
  const Index first_day = std::max<Index>(0, length - days);
  for (Index day = first_day; day < length; ++day) {
    std::vector<AnomalyVerdict> verdicts;
    for (const auto& full : corpus.series) {
      const Index w = full.period_w.value_or(default_period);
      if (day + 1 < min_detect_length(w)) continue;
      MetricSeries prefix = full;
      prefix.values = full.values.head(day + 1);
      prefix.timestamps.resize(day + 1);
      prefix.period_w.reset();
      verdicts.push_back(detect_last(prefix, detector, w, Decomposer::MMD, retrieval.corr_window));
    }
    auto valid = [&](const AnomalyVerdict& v) {
      return corpus.truth[index_of.at(v.key())][day] == AnomalyKind::LevelShift;
    };
    for (const auto& v : verdicts) {
      if (!v.is_anomaly) continue;
      ++cmp.phase_one_alerts;
      cmp.phase_one_valid += valid(v) ? 1 : 0;
    }
    RetrievalResult r = run_retrieval(verdicts, weights, history, retrieval);
    for (const auto& a : r.alerts) {
      ++cmp.two_phase_alerts;
      cmp.two_phase_valid += valid(a.verdict) ? 1 : 0;
    }
    history = std::move(r.history);
  }
  return cmp;
}

}  // namespace mmd
