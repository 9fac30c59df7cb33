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

#include "mmd/rank.hpp"

namespace mmd {

struct RetrievalConfig {
  double corr_threshold = 0.9;
  int per_metric_cap = 2;
  int global_cap = 10;
  int dedupe_days_k = 7;
  int persist_days_k = 1;
  int corr_window = 60;
};

void check_config(const RetrievalConfig& cfg);

struct HistoryEntry {
  Date date{};
  Eigen::VectorXd window;
};

/// Previously emitted alerts, keyed by series identity.
struct AlertHistory {
  std::map<std::string, std::vector<HistoryEntry>> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const;
  void append(const std::string& key, Date date, const Eigen::VectorXd& window);
};

/// |corr| over the common trailing span of two windows. Undefined
/// correlations (constant or too-short spans) are reported as 1, i.e.
/// "similar".
double window_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

bool apply_persistence_rule(const AnomalyVerdict& verdict, const RetrievalConfig& cfg);

/// True when the candidate should be kept.
bool apply_dedupe_rule(const AnomalyVerdict& candidate, const AlertHistory& history,
                       const RetrievalConfig& cfg);

/// Descending score, then descending severity, then ascending identity.
bool ranks_before(const RankedAlert& a, const RankedAlert& b);

/// Greedy diversity selection within one metric.
std::vector<RankedAlert> select_per_metric(std::vector<RankedAlert> anomalies,
                                           const RetrievalConfig& cfg);

std::vector<RankedAlert> select_global(const std::vector<std::vector<RankedAlert>>& per_metric,
                                       const RetrievalConfig& cfg);

enum class RuleOutcome { Pass, Suppressed, NotReached };

std::string_view to_string(RuleOutcome o);

struct RuleTrace {
  RuleOutcome persistence = RuleOutcome::NotReached;
  RuleOutcome dedupe = RuleOutcome::NotReached;
  RuleOutcome diversity = RuleOutcome::NotReached;
  RuleOutcome global_cap = RuleOutcome::NotReached;

  bool emitted() const { return global_cap == RuleOutcome::Pass; }
};

struct TracedCandidate {
  RankedAlert alert;
  RuleTrace trace;
};

struct RetrievalResult {
  std::vector<RankedAlert> alerts;
  std::vector<RuleTrace> alert_traces;        // parallel to alerts
  std::vector<TracedCandidate> candidates;    // every anomaly, in input order
  AlertHistory history;
};

/// persistence -> dedupe -> score -> per-metric diversity -> global cap.
/// History entries dated on the run date are ignored during selection;
/// selected alerts already recorded for that date are not emitted again.
/// Emitted alerts are appended to a copy of the history.
RetrievalResult run_retrieval(const std::vector<AnomalyVerdict>& verdicts,
                              const RankWeights& weights, const AlertHistory& history,
                              const RetrievalConfig& cfg);

}  // namespace mmd
