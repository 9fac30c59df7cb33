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

// Moving metric decomposition and the classical additive baseline.
//
// Both decomposers are free functions templated on the Eigen expression type
// of the input, so any dense real vector (or expression producing one) can be
// passed directly. All windows near the series edges are truncated to the
// available points.

#include "mmd/core.hpp"

#include <string>
#include <vector>

namespace mmd {

template <typename Scalar>
struct DecompositionT {
  Vector<Scalar> trend;
  Vector<Scalar> seasonal;
  Vector<Scalar> residual;

  Index size() const { return trend.size(); }
  Vector<Scalar> fitted() const { return trend + seasonal; }
};

using Decomposition = DecompositionT<double>;

enum class Decomposer { MMD, Classical };

std::string_view to_string(Decomposer d);
Decomposer parse_decomposer(std::string_view text);

/// Centered moving average of width w. Even widths use the 2xw form with
/// half-weight endpoints. Edge windows are truncated and renormalised.
template <typename Derived>
Vector<typename Derived::Scalar> symmetric_ma(const Eigen::MatrixBase<Derived>& x, Index w) {
  using Scalar = typename Derived::Scalar;
  if (w < 2) throw InputError("symmetric_ma: window must be >= 2");
  const Index n = x.size();
  if (n < w) throw InputError("symmetric_ma: series shorter than window");

  const Index half = w / 2;
  const bool even = (w % 2 == 0);
  Vector<Scalar> out(n);
  for (Index t = 0; t < n; ++t) {
    const Index lo = std::max<Index>(0, t - half);
    const Index hi = std::min<Index>(n - 1, t + half);
    Scalar sum(0);
    Scalar weight(0);
    for (Index i = lo; i <= hi; ++i) {
      const Scalar wi = (even && (i == t - half || i == t + half)) ? Scalar(0.5) : Scalar(1);
      sum += wi * x.coeff(i);
      weight += wi;
    }
    out[t] = sum / weight;
  }
  return out;
}

/// Per-phase median: every entry sharing t's phase modulo w contributes.
template <typename Derived>
Vector<typename Derived::Scalar> seasonal_median(const Eigen::MatrixBase<Derived>& l_prime,
                                                 Index w) {
  using Scalar = typename Derived::Scalar;
  const Index n = l_prime.size();
  if (w < 2) throw InputError("seasonal_median: period must be >= 2");
  if (n < 2 * w) throw InputError("seasonal_median: need at least two cycles");

  std::vector<Scalar> phase_median(w);
  std::vector<Scalar> buf;
  buf.reserve(n / w + 1);
  for (Index phase = 0; phase < w; ++phase) {
    buf.clear();
    for (Index i = phase; i < n; i += w) buf.push_back(l_prime.coeff(i));
    phase_median[phase] = median_inplace<Scalar>(buf);
  }
  Vector<Scalar> out(n);
  for (Index start = 0; start < n; start += w) {
    const Index len = std::min(w, n - start);
    std::copy_n(phase_median.begin(), len, out.data() + start);
  }
  return out;
}

/// Right-aligned rolling median over indices t-w..t (w+1 points).
template <typename Derived>
Vector<typename Derived::Scalar> rolling_median_right(const Eigen::MatrixBase<Derived>& s_prime,
                                                      Index w) {
  using Scalar = typename Derived::Scalar;
  const Index n = s_prime.size();
  if (w < 1) throw InputError("rolling_median_right: window must be >= 1");
  if (n < w + 1) throw InputError("rolling_median_right: series shorter than window");

  // Sorted copy of the current window; each step drops the leaving value and
  // inserts the entering one with a single shift.
  std::vector<Scalar> window;
  window.reserve(static_cast<std::size_t>(w) + 1);
  Vector<Scalar> out(n);
  for (Index t = 0; t < n; ++t) {
    const Scalar entering = s_prime.coeff(t);
    if (t > w) {
      const auto gone = std::lower_bound(window.begin(), window.end(), s_prime.coeff(t - w - 1));
      const auto slot = std::upper_bound(window.begin(), window.end(), entering);
      if (slot <= gone) {
        std::move_backward(slot, gone, gone + 1);
        *slot = entering;
      } else {
        std::move(gone + 1, slot, gone);
        *(slot - 1) = entering;
      }
    } else {
      window.insert(std::upper_bound(window.begin(), window.end(), entering), entering);
    }
    const std::size_t size = window.size();
    out[t] = (size % 2 == 1) ? window[size / 2]
                             : (window[size / 2 - 1] + window[size / 2]) / Scalar(2);
  }
  return out;
}

/// Moving metric decomposition:
///   L  = symmetric MA of X,      L' = X - L
///   S  = per-phase median of L', S' = X - S
///   Tf = right rolling median of S'
///   T  = Tf + median(S' - Tf),   R  = X - T - S
/// The bias term forces median(R) == 0.
template <typename Derived>
DecompositionT<typename Derived::Scalar> mmd_decompose(const Eigen::MatrixBase<Derived>& x,
                                                       Index w) {
  using Scalar = typename Derived::Scalar;
  if (w < 2) throw InputError("mmd_decompose: period must be >= 2");
  if (x.size() < std::max<Index>(2 * w, w + 1)) {
    throw InputError("mmd_decompose: series shorter than two periods");
  }
  const Vector<Scalar> values = x;
  const Vector<Scalar> l_prime = values - symmetric_ma(values, w);

  DecompositionT<Scalar> d;
  d.seasonal = seasonal_median(l_prime, w);
  const Vector<Scalar> s_prime = values - d.seasonal;
  const Vector<Scalar> trend_f = rolling_median_right(s_prime, w);
  const Vector<Scalar> deviation = s_prime - trend_f;
  const Scalar bias = median(deviation);
  d.trend = trend_f.array() + bias;
  // Equal to X - T - S up to rounding, but keeps the zero median exact.
  d.residual = deviation.array() - bias;
  return d;
}

template <typename Scalar>
DecompositionT<Scalar> mmd_decompose(const MetricSeries& series, Index w) {
  return mmd_decompose(series.values.template cast<Scalar>(), w);
}

/// Additive classical decomposition: moving-average trend and per-phase mean
/// seasonality, re-centred to zero mean over one period.
template <typename Derived>
DecompositionT<typename Derived::Scalar> classical_decompose(const Eigen::MatrixBase<Derived>& x,
                                                             Index w) {
  using Scalar = typename Derived::Scalar;
  if (w < 2) throw InputError("classical_decompose: period must be >= 2");
  const Index n = x.size();
  if (n < std::max<Index>(2 * w, w + 1)) {
    throw InputError("classical_decompose: series shorter than two periods");
  }
  const Vector<Scalar> values = x;

  DecompositionT<Scalar> d;
  d.trend = symmetric_ma(values, w);
  const Vector<Scalar> detrended = values - d.trend;

  Vector<Scalar> phase_mean = Vector<Scalar>::Zero(w);
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(w);
  for (Index t = 0; t < n; ++t) {
    phase_mean[t % w] += detrended[t];
    counts[t % w] += 1;
  }
  phase_mean.array() /= counts.array().template cast<Scalar>();
  phase_mean.array() -= phase_mean.mean();

  d.seasonal.resize(n);
  for (Index t = 0; t < n; ++t) d.seasonal[t] = phase_mean[t % w];
  d.residual = values - d.trend - d.seasonal;
  return d;
}

template <typename Derived>
DecompositionT<typename Derived::Scalar> decompose(const Eigen::MatrixBase<Derived>& x, Index w,
                                                   Decomposer method) {
  return method == Decomposer::MMD ? mmd_decompose(x, w) : classical_decompose(x, w);
}

}  // namespace mmd
