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

#include "mmd/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace mmd {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_value(std::string_view s) {
  if (s.empty() || s == "NA" || s == "na" || s == "nan" || s == "NaN" || s == "null") {
    return kMissing;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InputError("invalid number '" + std::string(s) + "'");
  }
  return v;
}

int parse_count(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InputError("invalid integer '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "1" || s == "true" || s == "TRUE" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "FALSE" || s == "no") return false;
  throw InputError("invalid boolean '" + std::string(s) + "'");
}

// Calls `row(fields)` for each data line; exceptions become diagnostics.
template <typename RowFn>
void for_each_row(std::istream& in, std::string_view header_prefix,
                  std::vector<Diagnostic>& diagnostics, RowFn&& row) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (lineno == 1 && view.substr(0, header_prefix.size()) == header_prefix) continue;
    try {
      row(split(view, ','));
    } catch (const std::exception& e) {
      diagnostics.push_back({lineno, e.what()});
    }
  }
}

std::string format_number(double v) {
  if (is_missing(v)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

json window_json(const Eigen::VectorXd& w) {
  json arr = json::array();
  for (Index i = 0; i < w.size(); ++i) arr.push_back(w[i]);
  return arr;
}

Eigen::VectorXd window_from_json(const json& j) {
  Eigen::VectorXd w(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) w[static_cast<Index>(i)] = j[i].get<double>();
  return w;
}

json dims_json(const Dimensions& dims) {
  json o = json::object();
  for (const auto& [k, v] : dims) o[k] = v;
  return o;
}

Dimensions dims_from_json(const json& j) {
  Dimensions d;
  for (const auto& [k, v] : j.items()) d[k] = v.get<std::string>();
  return d;
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw InputError("config: unknown field '" + k + "' in " + std::string(where));
    }
  }
}

}  // namespace

Dimensions parse_dimensions(std::string_view text) {
  Dimensions dims;
  text = trim(text);
  if (text.empty()) return dims;
  for (const auto pair : split(text, ';')) {
    if (pair.empty()) continue;
    const auto eq = pair.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw InputError("invalid dimension pair '" + std::string(pair) + "'");
    }
    dims[std::string(trim(pair.substr(0, eq)))] = std::string(trim(pair.substr(eq + 1)));
  }
  return dims;
}

std::string format_dimensions(const Dimensions& dims) {
  std::string out;
  for (const auto& [k, v] : dims) {
    if (!out.empty()) out += ';';
    out += k + "=" + v;
  }
  return out;
}

std::vector<Observation> read_observations(std::istream& in, std::vector<Diagnostic>& diagnostics) {
  std::vector<Observation> obs;
  for_each_row(in, "metric_id", diagnostics, [&](const std::vector<std::string_view>& f) {
    if (f.size() != 4 && f.size() != 5) {
      throw InputError("expected 4 or 5 fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty()) throw InputError("empty metric_id");
    Observation o;
    o.metric_id = std::string(f[0]);
    o.dimensions = parse_dimensions(f[1]);
    o.date = parse_date(f[2]);
    o.value = parse_value(f[3]);
    if (f.size() == 5 && !f[4].empty()) o.priority = parse_priority(f[4]);
    obs.push_back(std::move(o));
  });
  return obs;
}

void write_observations(std::ostream& out, const std::vector<MetricSeries>& series) {
  out << "metric_id,dimensions,date,value,priority\n";
  for (const auto& s : series) {
    const std::string dims = format_dimensions(s.dimensions);
    for (Index i = 0; i < s.size(); ++i) {
      out << s.metric_id << ',' << dims << ',' << format_date(s.timestamps[i]) << ','
          << format_number(s.values[i]) << ',' << to_string(s.priority) << '\n';
    }
  }
}

std::vector<std::vector<Observation>> group_by_series(const std::vector<Observation>& obs) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<Observation>> groups;
  for (const auto& o : obs) {
    const std::string key = series_key(o.metric_id, o.dimensions);
    auto [it, inserted] = slot.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(o);
  }
  return groups;
}

std::vector<LabelRecord> read_labels(std::istream& in, std::vector<Diagnostic>& diagnostics) {
  std::vector<LabelRecord> labels;
  for_each_row(in, "metric_id", diagnostics, [&](const std::vector<std::string_view>& f) {
    if (f.size() != 5) throw InputError("expected 5 fields, got " + std::to_string(f.size()));
    LabelRecord r;
    r.metric_id = std::string(f[0]);
    r.dimensions = parse_dimensions(f[1]);
    r.date = parse_date(f[2]);
    r.labeler_id = std::string(f[3]);
    r.is_alert = parse_bool(f[4]);
    labels.push_back(std::move(r));
  });
  return labels;
}

void write_labels(std::ostream& out, const std::vector<LabelRecord>& labels) {
  out << "metric_id,dimensions,date,labeler_id,is_alert\n";
  for (const auto& r : labels) {
    out << r.metric_id << ',' << format_dimensions(r.dimensions) << ',' << format_date(r.date)
        << ',' << r.labeler_id << ',' << (r.is_alert ? 1 : 0) << '\n';
  }
}

std::vector<FeedbackRecord> read_feedback(std::istream& in, std::vector<Diagnostic>& diagnostics) {
  std::vector<FeedbackRecord> out;
  for_each_row(in, "f_d", diagnostics, [&](const std::vector<std::string_view>& f) {
    if (f.size() != 4) throw InputError("expected 4 fields, got " + std::to_string(f.size()));
    FeedbackRecord r;
    r.features.f_d = parse_value(f[0]);
    if (is_missing(r.features.f_d)) throw InputError("missing f_d");
    r.features.f_p = one_hot(parse_priority(f[1]));
    r.features.f_g = parse_count(f[2]);
    r.is_valid = parse_bool(f[3]);
    out.push_back(r);
  });
  return out;
}

json to_json(const AnomalyVerdict& v) {
  return json{{"metric_id", v.metric_id},
              {"dimensions", dims_json(v.dimensions)},
              {"priority", std::string(to_string(v.priority))},
              {"date", format_date(v.date)},
              {"period_w", v.period_w},
              {"band_low", v.band_low},
              {"band_high", v.band_high},
              {"last_value", v.last_value},
              {"is_anomaly", v.is_anomaly},
              {"severity", v.severity},
              {"exceed_streak", v.exceed_streak},
              {"mu_hat", v.mu_hat},
              {"sigma_hat", v.sigma_hat},
              {"window", window_json(v.window)}};
}

AnomalyVerdict verdict_from_json(const json& j) {
  AnomalyVerdict v;
  v.metric_id = j.at("metric_id").get<std::string>();
  v.dimensions = dims_from_json(j.value("dimensions", json::object()));
  v.priority = parse_priority(j.value("priority", std::string("P4")));
  v.date = parse_date(j.at("date").get<std::string>());
  v.period_w = j.value("period_w", 0);
  v.band_low = j.at("band_low").get<double>();
  v.band_high = j.at("band_high").get<double>();
  v.last_value = j.at("last_value").get<double>();
  v.is_anomaly = j.at("is_anomaly").get<bool>();
  v.severity = j.at("severity").get<double>();
  v.exceed_streak = j.at("exceed_streak").get<int>();
  v.mu_hat = j.value("mu_hat", 0.0);
  v.sigma_hat = j.value("sigma_hat", 0.0);
  v.window = window_from_json(j.value("window", json::array()));
  return v;
}

json to_json(const RankedAlert& a, const RuleTrace& trace) {
  const auto& v = a.verdict;
  json f_p = json::array();
  for (int i = 0; i < 4; ++i) f_p.push_back(a.features.f_p[i]);
  return json{{"metric_id", v.metric_id},
              {"dimensions", dims_json(v.dimensions)},
              {"priority", std::string(to_string(v.priority))},
              {"date", format_date(v.date)},
              {"band_low", v.band_low},
              {"band_high", v.band_high},
              {"value", v.last_value},
              {"severity", v.severity},
              {"exceed_streak", v.exceed_streak},
              {"f_d", a.features.f_d},
              {"f_p", f_p},
              {"f_g", a.features.f_g},
              {"score", a.score},
              {"rule_trace",
               {{"persistence", std::string(to_string(trace.persistence))},
                {"dedupe", std::string(to_string(trace.dedupe))},
                {"diversity", std::string(to_string(trace.diversity))},
                {"global_cap", std::string(to_string(trace.global_cap))}}}};
}

json to_json(const MetricsReport& r) {
  json j{{"tp", r.tp},
         {"fp", r.fp},
         {"fn", r.fn},
         {"tn", r.tn},
         {"precision", r.precision},
         {"recall", r.recall}};
  if (r.beta == 2.0) {
    j["f2"] = r.f_beta;
  } else {
    j["f_beta"] = r.f_beta;
    j["beta"] = r.beta;
  }
  return j;
}

json to_json(const BenchReport& r) {
  return json{{"decomposer", std::string(to_string(r.decomposer))},
              {"time_ms_per_100", r.time_ms_per_100},
              {"stddev_ms", r.stddev_ms},
              {"repetitions", r.repetitions},
              {"series", r.series}};
}

json to_json(const RankWeights& w) {
  return json{{"w_d", w.w_d}, {"w_p", {w.w_p[0], w.w_p[1], w.w_p[2], w.w_p[3]}}, {"w_g", w.w_g}};
}

RankWeights weights_from_json(const json& j) {
  reject_unknown(j, {"w_d", "w_p", "w_g"}, "weights");
  RankWeights w;
  w.w_d = j.value("w_d", w.w_d);
  w.w_g = j.value("w_g", w.w_g);
  if (j.contains("w_p")) {
    const auto& p = j.at("w_p");
    if (!p.is_array() || p.size() != 4) throw InputError("weights: w_p must have 4 entries");
    for (int i = 0; i < 4; ++i) w.w_p[i] = p[i].get<double>();
  }
  if (!w.all_finite()) throw InputError("weights: non-finite value");
  return w;
}

AlertHistory read_history(std::istream& in) {
  AlertHistory h;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      h.append(j.at("key").get<std::string>(), parse_date(j.at("date").get<std::string>()),
               window_from_json(j.at("window")));
    } catch (const std::exception& e) {
      throw InputError("history line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return h;
}

void write_history(std::ostream& out, const AlertHistory& history) {
  for (const auto& [key, entries] : history.entries) {
    for (const auto& e : entries) {
      out << json{{"key", key}, {"date", format_date(e.date)}, {"window", window_json(e.window)}}
                 .dump()
          << '\n';
    }
  }
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j,
                 {"detector", "retrieval", "weights", "weights_path", "frequency",
                  "period_cache_path", "history_path", "input_path", "output_path",
                  "default_period"},
                 "config");
  PipelineConfig cfg;
  auto resolve = [&](const char* field) -> std::optional<fs::path> {
    if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
    fs::path p = j.at(field).get<std::string>();
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };

  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    reject_unknown(d, {"p_anom", "mad_scale_b", "min_sigma"}, "detector");
    cfg.detector.p_anom = d.value("p_anom", cfg.detector.p_anom);
    cfg.detector.mad_scale_b = d.value("mad_scale_b", cfg.detector.mad_scale_b);
    if (d.contains("min_sigma") && !d.at("min_sigma").is_null()) {
      cfg.detector.min_sigma = d.at("min_sigma").get<double>();
    }
  }
  if (j.contains("retrieval")) {
    const auto& r = j.at("retrieval");
    reject_unknown(r,
                   {"corr_threshold", "per_metric_cap", "global_cap", "dedupe_days_k",
                    "persist_days_k", "corr_window"},
                   "retrieval");
    auto& rc = cfg.retrieval;
    rc.corr_threshold = r.value("corr_threshold", rc.corr_threshold);
    rc.per_metric_cap = r.value("per_metric_cap", rc.per_metric_cap);
    rc.global_cap = r.value("global_cap", rc.global_cap);
    rc.dedupe_days_k = r.value("dedupe_days_k", rc.dedupe_days_k);
    rc.persist_days_k = r.value("persist_days_k", rc.persist_days_k);
    rc.corr_window = r.value("corr_window", rc.corr_window);
  }
  if (j.contains("frequency")) {
    const auto& f = j.at("frequency");
    reject_unknown(f, {"max_order", "min_confidence"}, "frequency");
    cfg.frequency.max_order = f.value("max_order", cfg.frequency.max_order);
    cfg.frequency.min_confidence = f.value("min_confidence", cfg.frequency.min_confidence);
  }
  cfg.frequency.default_period = j.value("default_period", cfg.frequency.default_period);
  if (j.contains("weights")) cfg.weights = weights_from_json(j.at("weights"));
  cfg.weights_path = resolve("weights_path");
  cfg.period_cache_path = resolve("period_cache_path");
  cfg.history_path = resolve("history_path");
  cfg.input_path = resolve("input_path");
  cfg.output_path = resolve("output_path");

  check_config(cfg.detector);
  check_config(cfg.retrieval);
  if (cfg.frequency.default_period < 2) throw InputError("config: default_period must be >= 2");
  if (cfg.frequency.max_order < 1) throw InputError("config: max_order must be >= 1");
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  PipelineConfig cfg = config_from_json(j, path.parent_path());
  if (cfg.weights_path && fs::exists(*cfg.weights_path)) {
    cfg.weights = weights_from_json(json::parse(read_file(*cfg.weights_path)));
  }
  return cfg;
}

json to_json(const PipelineConfig& cfg) {
  json j;
  j["detector"] = {{"p_anom", cfg.detector.p_anom}, {"mad_scale_b", cfg.detector.mad_scale_b}};
  j["detector"]["min_sigma"] = cfg.detector.min_sigma ? json(*cfg.detector.min_sigma) : json();
  const auto& r = cfg.retrieval;
  j["retrieval"] = {{"corr_threshold", r.corr_threshold}, {"per_metric_cap", r.per_metric_cap},
                    {"global_cap", r.global_cap},         {"dedupe_days_k", r.dedupe_days_k},
                    {"persist_days_k", r.persist_days_k}, {"corr_window", r.corr_window}};
  j["frequency"] = {{"max_order", cfg.frequency.max_order},
                    {"min_confidence", cfg.frequency.min_confidence}};
  j["default_period"] = cfg.frequency.default_period;
  j["weights"] = to_json(cfg.weights);
  auto put = [&](const char* field, const std::optional<fs::path>& p) {
    if (p) j[field] = p->string();
  };
  put("weights_path", cfg.weights_path);
  put("period_cache_path", cfg.period_cache_path);
  put("history_path", cfg.history_path);
  put("input_path", cfg.input_path);
  put("output_path", cfg.output_path);
  return j;
}

}  // namespace mmd
