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

// File formats shared by the command-line tool.
//
//   observations  CSV: metric_id,dimensions,date,value[,priority]
//                 dimensions are key=value pairs joined by ';' (empty = rolled up)
//   labels        CSV: metric_id,dimensions,date,labeler_id,is_alert
//   feedback      CSV: f_d,priority,f_g,is_valid
//   verdicts, alerts, history, reports: one JSON object per line
//   period cache  key<TAB>period per line

#include "mmd/eval.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>

namespace mmd {

using json = nlohmann::json;

struct Diagnostic {
  std::size_t line = 0;
  std::string message;
};

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

Dimensions parse_dimensions(std::string_view text);
std::string format_dimensions(const Dimensions& dims);

/// Parses observation rows. Malformed rows are skipped and reported.
std::vector<Observation> read_observations(std::istream& in, std::vector<Diagnostic>& diagnostics);
void write_observations(std::ostream& out, const std::vector<MetricSeries>& series);

/// Groups observations by series identity, preserving first-seen order.
std::vector<std::vector<Observation>> group_by_series(const std::vector<Observation>& obs);

std::vector<LabelRecord> read_labels(std::istream& in, std::vector<Diagnostic>& diagnostics);
void write_labels(std::ostream& out, const std::vector<LabelRecord>& labels);

std::vector<FeedbackRecord> read_feedback(std::istream& in, std::vector<Diagnostic>& diagnostics);

json to_json(const AnomalyVerdict& v);
AnomalyVerdict verdict_from_json(const json& j);

json to_json(const RankedAlert& a, const RuleTrace& trace);
json to_json(const MetricsReport& r);
json to_json(const BenchReport& r);

json to_json(const RankWeights& w);
RankWeights weights_from_json(const json& j);

/// JSON-lines history: {"key", "date", "window"} per emitted alert.
AlertHistory read_history(std::istream& in);
void write_history(std::ostream& out, const AlertHistory& history);

struct PipelineConfig {
  DetectorConfig detector;
  RetrievalConfig retrieval;
  RankWeights weights;
  FrequencyConfig frequency;
  std::optional<std::filesystem::path> weights_path;
  std::optional<std::filesystem::path> period_cache_path;
  std::optional<std::filesystem::path> history_path;
  std::optional<std::filesystem::path> input_path;
  std::optional<std::filesystem::path> output_path;
};

/// Relative paths are resolved against `base_dir`. Unknown fields are
/// rejected so that misspelt options do not pass silently.
PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
json to_json(const PipelineConfig& cfg);

}  // namespace mmd
