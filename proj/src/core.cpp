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

#include "mmd/core.hpp"

#include <charconv>
#include <cstdio>

namespace mmd {

std::string_view to_string(Priority p) {
  switch (p) {
    case Priority::P1: return "P1";
    case Priority::P2: return "P2";
    case Priority::P3: return "P3";
    case Priority::P4: return "P4";
  }
  return "P4";
}

Priority parse_priority(std::string_view text) {
  if (text == "P1" || text == "p1" || text == "1") return Priority::P1;
  if (text == "P2" || text == "p2" || text == "2") return Priority::P2;
  if (text == "P3" || text == "p3" || text == "3") return Priority::P3;
  if (text == "P4" || text == "p4" || text == "4") return Priority::P4;
  throw InputError("unknown priority '" + std::string(text) + "'");
}

namespace {

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InputError("invalid date '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

Date parse_date(std::string_view iso) {
  // YYYY-MM-DD
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw InputError("invalid date '" + std::string(iso) + "'");
  }
  const std::chrono::year_month_day ymd{
      std::chrono::year{parse_int(iso.substr(0, 4), iso)},
      std::chrono::month{static_cast<unsigned>(parse_int(iso.substr(5, 2), iso))},
      std::chrono::day{static_cast<unsigned>(parse_int(iso.substr(8, 2), iso))}};
  if (!ymd.ok()) throw InputError("invalid date '" + std::string(iso) + "'");
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string series_key(std::string_view metric_id, const Dimensions& dims) {
  std::string key(metric_id);
  key += '|';
  bool first = true;
  for (const auto& [k, v] : dims) {
    if (!first) key += ';';
    key += k;
    key += '=';
    key += v;
    first = false;
  }
  return key;
}

Index MetricSeries::missing_count() const {
  Index n = 0;
  for (Index i = 0; i < values.size(); ++i) n += is_missing(values[i]) ? 1 : 0;
  return n;
}

void check_series(const MetricSeries& series) {
  if (static_cast<Index>(series.timestamps.size()) != series.values.size()) {
    throw InputError(series.key() + ": timestamps and values differ in length");
  }
  for (std::size_t i = 1; i < series.timestamps.size(); ++i) {
    if (series.timestamps[i] <= series.timestamps[i - 1]) {
      throw InputError(series.key() + ": timestamps not strictly increasing");
    }
  }
  if (series.period_w) {
    const int w = *series.period_w;
    if (w < 2 || w > series.size() / 2) {
      throw InputError(series.key() + ": cached period out of range");
    }
  }
}

MetricSeries validate_series(std::span<const Observation> records, DuplicateReport* report) {
  if (records.empty()) throw InputError("validate_series: no records");

  const auto& head = records.front();
  std::map<Date, double> by_date;
  std::map<Date, std::size_t> seen;
  std::map<Date, bool> conflict;
  std::optional<Priority> priority;
  for (const auto& r : records) {
    if (r.metric_id != head.metric_id || r.dimensions != head.dimensions) {
      throw InputError("validate_series: records belong to different series (" +
                       series_key(head.metric_id, head.dimensions) + " vs " +
                       series_key(r.metric_id, r.dimensions) + ")");
    }
    auto [it, inserted] = by_date.try_emplace(r.date, r.value);
    if (!inserted) {
      const bool same = (it->second == r.value) || (is_missing(it->second) && is_missing(r.value));
      if (!same) conflict[r.date] = true;
      it->second = r.value;
    }
    ++seen[r.date];
    if (r.priority) priority = r.priority;
  }

  if (report) {
    *report = {};
    for (const auto& [d, count] : seen) report->duplicate_dates += count > 1 ? 1 : 0;
    report->conflicting_dates = conflict.size();
  }

  MetricSeries out;
  out.metric_id = head.metric_id;
  out.dimensions = head.dimensions;
  out.priority = priority.value_or(Priority::P4);

  const Date first = by_date.begin()->first;
  const Date last = by_date.rbegin()->first;
  const auto span_days = (last - first).count() + 1;
  out.timestamps.reserve(span_days);
  out.values.resize(span_days);
  for (Index i = 0; i < span_days; ++i) {
    const Date d = first + std::chrono::days{i};
    out.timestamps.push_back(d);
    const auto it = by_date.find(d);
    out.values[i] = it == by_date.end() ? kMissing : it->second;
  }
  return out;
}

std::vector<Observation> to_observations(const MetricSeries& series) {
  std::vector<Observation> obs;
  obs.reserve(series.timestamps.size());
  for (Index i = 0; i < series.size(); ++i) {
    if (is_missing(series.values[i])) continue;
    obs.push_back({series.metric_id, series.dimensions, series.timestamps[i],
                   series.values[i], series.priority});
  }
  return obs;
}

MetricSeries fill_missing(const MetricSeries& series) {
  const Index n = series.size();
  std::vector<Index> observed;
  for (Index i = 0; i < n; ++i) {
    if (!is_missing(series.values[i])) observed.push_back(i);
  }
  if (observed.size() < 2) {
    throw InputError(series.key() + ": fewer than 2 observed values");
  }

  const Index lo = observed.front();
  const Index hi = observed.back();
  MetricSeries out = series;
  out.values = series.values.segment(lo, hi - lo + 1);
  out.timestamps.assign(series.timestamps.begin() + lo, series.timestamps.begin() + hi + 1);

  for (std::size_t k = 1; k < observed.size(); ++k) {
    const Index a = observed[k - 1];
    const Index b = observed[k];
    const double va = series.values[a];
    const double vb = series.values[b];
    for (Index i = a + 1; i < b; ++i) {
      const double frac = static_cast<double>(i - a) / static_cast<double>(b - a);
      out.values[i - lo] = va + frac * (vb - va);
    }
  }
  if (out.period_w && *out.period_w > out.size() / 2) out.period_w.reset();
  return out;
}

}  // namespace mmd
