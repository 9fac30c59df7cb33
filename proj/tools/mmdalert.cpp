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

// mmdalert: batch anomaly detection and alert retrieval.
//
//   mmdalert gen    --output obs.csv --labels labels.csv --seed 42
//   mmdalert detect --input obs.csv --output verdicts.jsonl
//   mmdalert alert  --input verdicts.jsonl --output alerts.jsonl --history history.jsonl
//   mmdalert eval   --input obs.csv --labels labels.csv
//   mmdalert tune   --input obs.csv --labels labels.csv --split 2018-06-01
//   mmdalert bench  --input obs.csv
//   mmdalert fit-weights --input feedback.csv --output weights.json
//
// Exit codes: 0 ok, 1 some records failed, 2 configuration or I/O failure.

#include "mmd/io.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace mmd;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kFatal = 2;

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string input;
  std::string output;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 42;
};

void warn(const std::string& msg) { std::cerr << "mmdalert: warning: " << msg << '\n'; }

void report(const std::string& where, const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    std::cerr << "mmdalert: " << where << ':' << d.line << ": " << d.message << '\n';
  }
}

PipelineConfig load(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
  if (!c.input.empty()) cfg.input_path = c.input;
  if (!c.output.empty()) cfg.output_path = c.output;
  return cfg;
}

fs::path require_input(const PipelineConfig& cfg) {
  if (!cfg.input_path) throw InputError("no input file given (--input or input_path)");
  if (!fs::exists(*cfg.input_path)) throw IoFailure("cannot read " + cfg.input_path->string());
  return *cfg.input_path;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot read " + path.string());
  return in;
}

// Writes to the output path atomically, or to stdout.
void emit(const std::optional<fs::path>& path, const std::string& text) {
  if (path) {
    write_file_atomic(*path, text);
  } else {
    std::cout << text;
    std::cout.flush();
  }
}

std::string json_lines(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) out += r.dump() + '\n';
  return out;
}

// Runs fn(i) for i in [0, n) on `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

struct LoadedSeries {
  std::vector<MetricSeries> series;
  int failures = 0;
};

// Observations -> gap-filled series in first-seen order.
LoadedSeries load_series(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Diagnostic> diags;
  const auto obs = read_observations(in, diags);
  report(path.string(), diags);
  LoadedSeries out;
  out.failures = static_cast<int>(diags.size());
  for (const auto& group : group_by_series(obs)) {
    try {
      out.series.push_back(fill_missing(validate_series(group)));
    } catch (const InputError& e) {
      warn(group.front().metric_id + ": " + e.what());
      ++out.failures;
    }
  }
  return out;
}

void open_cache(PeriodCache& cache, const PipelineConfig& cfg) {
  if (cfg.period_cache_path) cache.load(*cfg.period_cache_path);
}

struct Detection {
  std::vector<AnomalyVerdict> verdicts;
  int failures = 0;
};

Detection detect_all(const std::vector<MetricSeries>& series, const PipelineConfig& cfg,
                     Decomposer decomposer, unsigned workers) {
  PeriodCache cache;
  open_cache(cache, cfg);
  std::vector<std::optional<AnomalyVerdict>> slots(series.size());
  std::vector<std::string> errors(series.size());
  parallel_for(series.size(), workers, [&](std::size_t i) {
    try {
      const int w = cache.get_or_estimate(series[i], cfg.frequency);
      slots[i] = detect_last(series[i], cfg.detector, w, decomposer,
                             cfg.retrieval.corr_window);
    } catch (const std::exception& e) {
      errors[i] = series[i].key() + ": " + e.what();
    }
  });
  if (cfg.period_cache_path) cache.save(*cfg.period_cache_path);

  Detection out;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (slots[i]) {
      out.verdicts.push_back(std::move(*slots[i]));
    } else {
      warn(errors[i]);
      ++out.failures;
    }
  }
  return out;
}

std::vector<AnomalyVerdict> read_verdicts(const fs::path& path, int& failures) {
  auto in = open_in(path);
  std::vector<AnomalyVerdict> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(verdict_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      report(path.string(), {{number, e.what()}});
      ++failures;
    }
  }
  return out;
}

Corpus load_corpus(const PipelineConfig& cfg, const std::string& labels_path, int& failures) {
  auto loaded = load_series(require_input(cfg));
  failures += loaded.failures;
  auto in = open_in(labels_path);
  std::vector<Diagnostic> diags;
  const auto labels = read_labels(in, diags);
  report(labels_path, diags);
  failures += static_cast<int>(diags.size());

  Corpus corpus = attach_labels(loaded.series, aggregate_labels(labels));
  PeriodCache cache;
  open_cache(cache, cfg);
  for (auto& ls : corpus) ls.series.period_w = cache.get_or_estimate(ls.series, cfg.frequency);
  if (cfg.period_cache_path) cache.save(*cfg.period_cache_path);
  return corpus;
}

// ---------------------------------------------------------------------------

int cmd_gen(const Common& c, CorpusSpec spec, const std::string& labels_path, int labelers,
            double flip) {
  spec.seed = c.seed;
  if (c.output.empty()) throw InputError("gen needs --output");
  const auto corpus = gen_corpus(spec);
  std::ostringstream obs;
  write_observations(obs, corpus.series);
  write_file_atomic(c.output, obs.str());
  if (!labels_path.empty()) {
    std::ostringstream lab;
    write_labels(lab, simulate_labels(corpus, labelers, flip, c.seed + 1));
    write_file_atomic(labels_path, lab.str());
  }
  std::cerr << "mmdalert: generated " << corpus.series.size() << " series\n";
  return kOk;
}

int cmd_detect(const Common& c, Decomposer decomposer) {
  const PipelineConfig cfg = load(c);
  auto loaded = load_series(require_input(cfg));
  const auto t0 = std::chrono::steady_clock::now();
  const auto det = detect_all(loaded.series, cfg, decomposer, c.workers);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<json> records;
  for (const auto& v : det.verdicts) records.push_back(to_json(v));
  emit(cfg.output_path, json_lines(records));
  std::cerr << "mmdalert: " << det.verdicts.size() << " series in " << secs << " s\n";
  return loaded.failures + det.failures > 0 ? kPartial : kOk;
}

int cmd_alert(const Common& c, const std::string& history_flag, Decomposer decomposer) {
  PipelineConfig cfg = load(c);
  if (!history_flag.empty()) cfg.history_path = history_flag;
  const fs::path input = require_input(cfg);

  int failures = 0;
  std::vector<AnomalyVerdict> verdicts;
  if (input.extension() == ".csv") {
    auto loaded = load_series(input);
    auto det = detect_all(loaded.series, cfg, decomposer, c.workers);
    failures += loaded.failures + det.failures;
    verdicts = std::move(det.verdicts);
  } else {
    verdicts = read_verdicts(input, failures);
  }

  AlertHistory history;
  if (!cfg.history_path) {
    warn("no history file configured; dedupe sees only this run");
  } else if (!fs::exists(*cfg.history_path)) {
    warn("history " + cfg.history_path->string() + " not found; starting empty");
  } else {
    auto in = open_in(*cfg.history_path);
    history = read_history(in);
  }

  const auto result = run_retrieval(verdicts, cfg.weights, history, cfg.retrieval);
  std::vector<json> records;
  for (std::size_t i = 0; i < result.alerts.size(); ++i) {
    records.push_back(to_json(result.alerts[i], result.alert_traces[i]));
  }
  emit(cfg.output_path, json_lines(records));
  if (cfg.history_path) {
    std::ostringstream out;
    write_history(out, result.history);
    write_file_atomic(*cfg.history_path, out.str());
  }
  std::cerr << "mmdalert: " << result.candidates.size() << " anomalies, " << result.alerts.size()
            << " alerts\n";
  return failures > 0 ? kPartial : kOk;
}

int cmd_eval(const Common& c, const std::string& labels, Decomposer decomposer, double p_anom,
             int persist) {
  PipelineConfig cfg = load(c);
  int failures = 0;
  const Corpus corpus = load_corpus(cfg, labels, failures);
  DetectorSetup setup;
  setup.decomposer = decomposer;
  setup.detector = cfg.detector;
  if (p_anom > 0) setup.detector.p_anom = p_anom;
  setup.persist_days = persist;
  setup.default_period = cfg.frequency.default_period;
  json j = to_json(score_detector(setup, corpus));
  j["decomposer"] = std::string(to_string(decomposer));
  j["p_anom"] = setup.detector.p_anom;
  j["persist_days"] = persist;
  emit(cfg.output_path, j.dump() + '\n');
  return failures > 0 ? kPartial : kOk;
}

int cmd_tune(const Common& c, const std::string& labels, const std::string& split,
             const std::vector<Decomposer>& decomposers, const ParamGrid& grid) {
  PipelineConfig cfg = load(c);
  int failures = 0;
  const Corpus corpus = load_corpus(cfg, labels, failures);
  const auto [train, test] = split_corpus(corpus, parse_date(split));
  std::vector<json> records;
  for (auto d : decomposers) {
    const auto r =
        grid_search(grid, train, test, d, cfg.detector, cfg.frequency.default_period);
    records.push_back({{"decomposer", std::string(to_string(d))},
                       {"p_anom", r.best.p_anom},
                       {"persist_days", r.best.persist_days},
                       {"train", to_json(r.train)},
                       {"test", to_json(r.test)}});
  }
  emit(cfg.output_path, json_lines(records));
  return failures > 0 ? kPartial : kOk;
}

int cmd_bench(const Common& c, int batch, int reps) {
  PipelineConfig cfg = load(c);
  if (c.workers != 1) warn("bench always runs on one thread");
  auto loaded = load_series(require_input(cfg));
  PeriodCache cache;
  open_cache(cache, cfg);
  for (auto& s : loaded.series) s.period_w = cache.get_or_estimate(s, cfg.frequency);
  std::vector<json> records;
  for (auto d : {Decomposer::MMD, Decomposer::Classical}) {
    json j = to_json(bench_throughput(d, loaded.series, cfg.detector, batch, reps,
                                      cfg.frequency.default_period));
    records.push_back(j);
  }
  emit(cfg.output_path, json_lines(records));
  return loaded.failures > 0 ? kPartial : kOk;
}

int cmd_fit_weights(const Common& c, double l2) {
  PipelineConfig cfg = load(c);
  const fs::path input = require_input(cfg);
  auto in = open_in(input);
  std::vector<Diagnostic> diags;
  const auto feedback = read_feedback(in, diags);
  report(input.string(), diags);
  const RankWeights w = fit_weights(feedback, l2);
  emit(cfg.output_path, to_json(w).dump() + '\n');
  return diags.empty() ? kOk : kPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phase metric alerting: anomaly detection and alert retrieval"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--input", common.input, "input file");
    sub->add_option("--output", common.output, "output file (default stdout)");
    sub->add_option("--workers", common.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", common.seed, "random seed");
  };
  std::string decomposer_name = "mmd";
  auto add_decomposer = [&](CLI::App* sub) {
    sub->add_option("--decomposer", decomposer_name, "mmd or classical")
        ->check(CLI::IsMember({"mmd", "classical"}));
  };

  CorpusSpec spec;
  std::string labels_path;
  int labelers = 5;
  double flip = 0.01;
  auto* gen = app.add_subcommand("gen", "write a synthetic corpus and crowd labels");
  add_common(gen);
  gen->add_option("--labels", labels_path, "label file to write");
  gen->add_option("--labelers", labelers, "simulated labelers")->check(CLI::PositiveNumber);
  gen->add_option("--flip-prob", flip, "label noise")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--series", spec.n_series)->check(CLI::PositiveNumber);
  gen->add_option("--metrics", spec.n_metrics)->check(CLI::PositiveNumber);
  gen->add_option("--length", spec.length)->check(CLI::PositiveNumber);
  gen->add_option("--period", spec.period)->check(CLI::Range(2, 1000));
  gen->add_option("--anomaly-rate", spec.anomaly_rate)->check(CLI::Range(0.0, 1.0));

  auto* detect = app.add_subcommand("detect", "phase one: one verdict per series");
  add_common(detect);
  add_decomposer(detect);

  std::string history_path;
  auto* alert = app.add_subcommand("alert", "phase two: rank and filter anomalies");
  add_common(alert);
  add_decomposer(alert);
  alert->add_option("--history", history_path, "alert history file");

  double p_anom = 0.0;
  int persist = 1;
  auto* eval = app.add_subcommand("eval", "score the detector against labels");
  add_common(eval);
  add_decomposer(eval);
  eval->add_option("--labels", labels_path)->required();
  eval->add_option("--p-anom", p_anom)->check(CLI::Range(0.0, 1.0));
  eval->add_option("--persist", persist)->check(CLI::PositiveNumber);

  std::string split = "2018-06-01";
  ParamGrid grid;
  grid.p_anom = {0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2};
  grid.persist_days = {1, 2, 3};
  std::vector<std::string> tune_decomposers{"mmd", "classical"};
  auto* tune = app.add_subcommand("tune", "grid search on a train/test split");
  add_common(tune);
  tune->add_option("--labels", labels_path)->required();
  tune->add_option("--split", split, "first test date");
  tune->add_option("--p-grid", grid.p_anom)->delimiter(',');
  tune->add_option("--persist-grid", grid.persist_days)->delimiter(',');
  tune->add_option("--decomposers", tune_decomposers)
      ->delimiter(',')
      ->check(CLI::IsMember({"mmd", "classical"}));

  int batch = 100;
  int reps = 5;
  auto* bench = app.add_subcommand("bench", "time both decomposers");
  add_common(bench);
  bench->add_option("--batch", batch)->check(CLI::PositiveNumber);
  bench->add_option("--reps", reps)->check(CLI::Range(5, 1000));

  double l2 = 1e-3;
  auto* fit = app.add_subcommand("fit-weights", "learn ranking weights from feedback");
  add_common(fit);
  fit->add_option("--l2", l2)->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kFatal;
  }

  try {
    const Decomposer decomposer = parse_decomposer(decomposer_name);
    if (*gen) return cmd_gen(common, spec, labels_path, labelers, flip);
    if (*detect) return cmd_detect(common, decomposer);
    if (*alert) return cmd_alert(common, history_path, decomposer);
    if (*eval) return cmd_eval(common, labels_path, decomposer, p_anom, persist);
    if (*tune) {
      std::vector<Decomposer> ds;
      for (const auto& name : tune_decomposers) ds.push_back(parse_decomposer(name));
      return cmd_tune(common, labels_path, split, ds, grid);
    }
    if (*bench) return cmd_bench(common, batch, reps);
    if (*fit) return cmd_fit_weights(common, l2);
  } catch (const std::exception& e) {
    std::cerr << "mmdalert: error: " << e.what() << '\n';
    return kFatal;
  }
  return kFatal;
}
