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

#include "mmd/retrieve.hpp"

#include <set>

namespace mmd {

void check_config(const RetrievalConfig& cfg) {
  if (!(cfg.corr_threshold > 0.0 && cfg.corr_threshold <= 1.0)) {
    throw InputError("retrieval: corr_threshold must lie in (0, 1]");
  }
  if (cfg.per_metric_cap < 1 || cfg.global_cap < 1) {
    throw InputError("retrieval: caps must be >= 1");
  }
  if (cfg.dedupe_days_k < 0) throw InputError("retrieval: dedupe_days_k must be >= 0");
  if (cfg.persist_days_k < 1) throw InputError("retrieval: persist_days_k must be >= 1");
  if (cfg.corr_window < 2) throw InputError("retrieval: corr_window must be >= 2");
}

std::size_t AlertHistory::size() const {
  std::size_t n = 0;
  for (const auto& [key, list] : entries) n += list.size();
  return n;
}

void AlertHistory::append(const std::string& key, Date date, const Eigen::VectorXd& window) {
  auto& list = entries[key];
  const auto same_day = std::find_if(list.begin(), list.end(),
                                     [date](const HistoryEntry& e) { return e.date == date; });
  if (same_day != list.end()) {
    same_day->window = window;
    return;
  }
  list.push_back({date, window});
  std::sort(list.begin(), list.end(),
            [](const HistoryEntry& a, const HistoryEntry& b) { return a.date < b.date; });
}

double window_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Index len = std::min(a.size(), b.size());
  if (len < 2) return 1.0;
  try {
    return std::abs(pearson_corr(a.tail(len), b.tail(len)));
  } catch (const UndefinedCorrelation&) {
    return 1.0;
  }
}

namespace {

Eigen::VectorXd trailing(const Eigen::VectorXd& w, int len) {
  return w.tail(std::min<Index>(len, w.size()));
}

}  // namespace

bool apply_persistence_rule(const AnomalyVerdict& verdict, const RetrievalConfig& cfg) {
  return verdict.exceed_streak >= cfg.persist_days_k;
}

bool apply_dedupe_rule(const AnomalyVerdict& candidate, const AlertHistory& history,
                       const RetrievalConfig& cfg) {
  const auto it = history.entries.find(candidate.key());
  if (it == history.entries.end()) return true;
  const Eigen::VectorXd window = trailing(candidate.window, cfg.corr_window);
  for (const auto& entry : it->second) {
    const auto age = (candidate.date - entry.date).count();
    if (age == 0) return false;
    if (age < 0 || age > cfg.dedupe_days_k) continue;
    const double sim = window_similarity(window, trailing(entry.window, cfg.corr_window));
    if (sim >= cfg.corr_threshold) return false;
  }
  return true;
}

bool ranks_before(const RankedAlert& a, const RankedAlert& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.verdict.severity != b.verdict.severity) return a.verdict.severity > b.verdict.severity;
  return a.key() < b.key();
}

std::vector<RankedAlert> select_per_metric(std::vector<RankedAlert> anomalies,
                                           const RetrievalConfig& cfg) {
  std::sort(anomalies.begin(), anomalies.end(), ranks_before);
  std::vector<RankedAlert> selected;
  for (auto& candidate : anomalies) {
    if (static_cast<int>(selected.size()) >= cfg.per_metric_cap) break;
    const Eigen::VectorXd window = trailing(candidate.verdict.window, cfg.corr_window);
    const bool diverse = std::all_of(selected.begin(), selected.end(), [&](const RankedAlert& s) {
      return window_similarity(window, trailing(s.verdict.window, cfg.corr_window)) <
             cfg.corr_threshold;
    });
    if (diverse) selected.push_back(std::move(candidate));
  }
  return selected;
}

std::vector<RankedAlert> select_global(const std::vector<std::vector<RankedAlert>>& per_metric,
                                       const RetrievalConfig& cfg) {
  std::vector<RankedAlert> merged;
  for (const auto& list : per_metric) merged.insert(merged.end(), list.begin(), list.end());
  std::sort(merged.begin(), merged.end(), ranks_before);
  if (static_cast<int>(merged.size()) > cfg.global_cap) merged.resize(cfg.global_cap);
  return merged;
}

std::string_view to_string(RuleOutcome o) {
  switch (o) {
    case RuleOutcome::Pass: return "pass";
    case RuleOutcome::Suppressed: return "suppressed";
    case RuleOutcome::NotReached: return "not_reached";
  }
  return "not_reached";
}

RetrievalResult run_retrieval(const std::vector<AnomalyVerdict>& verdicts,
                              const RankWeights& weights, const AlertHistory& history,
                              const RetrievalConfig& cfg) {
  check_config(cfg);
  RetrievalResult result;
  result.history = history;

  // Selection runs against the history as it stood before the run date, so
  // a same-day rerun reproduces the same choice and only new alerts go out.
  std::set<Date> run_dates;
  for (const auto& v : verdicts) {
    if (v.is_anomaly) run_dates.insert(v.date);
  }
  AlertHistory prior;
  for (const auto& [key, list] : history.entries) {
    for (const auto& e : list) {
      if (!run_dates.contains(e.date)) prior.append(key, e.date, e.window);
    }
  }
  auto sent_today = [&history](const RankedAlert& a) {
    const auto it = history.entries.find(a.key());
    if (it == history.entries.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(),
                       [&a](const HistoryEntry& e) { return e.date == a.verdict.date; });
  };

  std::map<std::string, std::vector<RankedAlert>> by_metric;
  std::map<std::string, std::size_t> candidate_index;
  for (const auto& v : verdicts) {
    if (!v.is_anomaly) continue;
    TracedCandidate c;
    c.alert = rank_alert(v, weights);
    const bool persists = apply_persistence_rule(v, cfg);
    c.trace.persistence = persists ? RuleOutcome::Pass : RuleOutcome::Suppressed;
    if (persists) {
      const bool fresh = apply_dedupe_rule(v, prior, cfg);
      c.trace.dedupe = fresh ? RuleOutcome::Pass : RuleOutcome::Suppressed;
      if (fresh) by_metric[v.metric_id].push_back(c.alert);
    }
    candidate_index[c.alert.key()] = result.candidates.size();
    result.candidates.push_back(std::move(c));
  }

  std::vector<std::vector<RankedAlert>> per_metric;
  for (auto& [metric, list] : by_metric) {
    for (const auto& a : list) {
      result.candidates[candidate_index[a.key()]].trace.diversity = RuleOutcome::Suppressed;
    }
    auto chosen = select_per_metric(std::move(list), cfg);
    for (const auto& a : chosen) {
      auto& trace = result.candidates[candidate_index[a.key()]].trace;
      trace.diversity = RuleOutcome::Pass;
      trace.global_cap = RuleOutcome::Suppressed;
    }
    per_metric.push_back(std::move(chosen));
  }

  for (auto& a : select_global(per_metric, cfg)) {
    auto& trace = result.candidates[candidate_index[a.key()]].trace;
    if (sent_today(a)) {
      trace.dedupe = RuleOutcome::Suppressed;
      trace.diversity = RuleOutcome::NotReached;
      trace.global_cap = RuleOutcome::NotReached;
      continue;
    }
    trace.global_cap = RuleOutcome::Pass;
    result.alert_traces.push_back(trace);
    result.history.append(a.key(), a.verdict.date, trailing(a.verdict.window, cfg.corr_window));
    result.alerts.push_back(std::move(a));
  }
  return result;
}

}  // namespace mmd
