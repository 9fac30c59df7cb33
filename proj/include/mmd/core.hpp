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

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmd {

using Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Date = std::chrono::sys_days;
using Dimensions = std::map<std::string, std::string>;

/// Thrown on malformed or insufficient input data.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Pearson correlation is undefined when either input has zero variance.
class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Priority { P1 = 0, P2 = 1, P3 = 2, P4 = 3 };

std::string_view to_string(Priority p);
Priority parse_priority(std::string_view text);

Date parse_date(std::string_view iso);
std::string format_date(Date d);

/// Canonical series identity: metric id followed by the sorted dimension pairs.
std::string series_key(std::string_view metric_id, const Dimensions& dims);

/// Missing observations are stored as quiet NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

struct MetricSeries {
  std::string metric_id;
  Dimensions dimensions;
  Priority priority = Priority::P4;
  std::vector<Date> timestamps;
  Eigen::VectorXd values;
  std::optional<int> period_w;

  Index size() const { return values.size(); }
  std::string key() const { return series_key(metric_id, dimensions); }
  /// Number of missing markers in values.
  Index missing_count() const;
};

/// One ingested row.
struct Observation {
  std::string metric_id;
  Dimensions dimensions;
  Date date;
  double value = kMissing;
  std::optional<Priority> priority;
};

struct DuplicateReport {
  std::size_t duplicate_dates = 0;     // dates seen more than once
  std::size_t conflicting_dates = 0;   // of those, dates whose values disagree
};

/// Sorts, deduplicates (last write wins) and expands the records onto a
/// contiguous daily calendar, marking absent days as missing.
MetricSeries validate_series(std::span<const Observation> records,
                             DuplicateReport* report = nullptr);

/// Inverse of validate_series for observed (non-missing) entries.
std::vector<Observation> to_observations(const MetricSeries& series);

/// Linear interpolation of interior gaps; leading and trailing gaps dropped.
MetricSeries fill_missing(const MetricSeries& series);

/// Checks the MetricSeries invariants; throws InputError on violation.
void check_series(const MetricSeries& series);

/// Median with the mean-of-middle-pair convention for even sizes.
/// The argument is taken by value and partially reordered.
/// Rearranges v so that v[k] holds the k-th smallest value, everything
/// before it is <= v[k] and everything after is >= v[k]. Partitioning is
/// branch-free so that run time does not depend on the value order.
template <typename Scalar>
void select_nth(std::span<Scalar> v, std::size_t k) {
  std::size_t lo = 0;
  std::size_t hi = v.size();
  while (hi - lo > 16) {
    Scalar a = v[lo], b = v[lo + (hi - lo) / 2], c = v[hi - 1];
    if (b < a) std::swap(a, b);
    if (c < b) b = std::max(a, c);
    const Scalar pivot = b;

    std::size_t less = lo;
    for (std::size_t i = lo; i < hi; ++i) {
      const Scalar x = v[i];
      v[i] = v[less];
      v[less] = x;
      less += static_cast<std::size_t>(x < pivot);
    }
    std::size_t equal = less;
    for (std::size_t i = less; i < hi; ++i) {
      const Scalar x = v[i];
      v[i] = v[equal];
      v[equal] = x;
      equal += static_cast<std::size_t>(!(pivot < x));
    }
    if (k < less) {
      hi = less;
    } else if (k < equal) {
      return;
    } else {
      lo = equal;
    }
  }
  for (std::size_t i = lo + 1; i < hi; ++i) {
    const Scalar x = v[i];
    std::size_t j = i;
    for (; j > lo && x < v[j - 1]; --j) v[j] = v[j - 1];
    v[j] = x;
  }
}

template <typename Scalar>
Scalar median_inplace(std::span<Scalar> v) {
  if (v.empty()) throw InputError("median of empty range");
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  select_nth(v, mid);
  const Scalar upper = v[mid];
  if (n % 2 == 1) return upper;
  const Scalar lower = *std::max_element(v.begin(), v.begin() + mid);
  return (lower + upper) / Scalar(2);
}

template <typename Derived>
typename Derived::Scalar median(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> buf(x.size());
  for (Index i = 0; i < x.size(); ++i) buf[i] = x.derived().coeff(i);
  return median_inplace<Scalar>(buf);
}

/// Pearson product-moment correlation.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson_corr(const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw InputError("pearson_corr: length mismatch");
  if (a.size() < 2) throw InputError("pearson_corr: need at least 2 points");
  const Vector<Scalar> da = a.array() - a.mean();
  const Vector<Scalar> db = b.array() - b.mean();
  const Scalar saa = da.squaredNorm();
  const Scalar sbb = db.squaredNorm();
  if (!(saa > Scalar(0)) || !(sbb > Scalar(0))) {
    throw UndefinedCorrelation("pearson_corr: zero variance input");
  }
  const Scalar r = da.dot(db) / std::sqrt(saa * sbb);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

}  // namespace mmd
