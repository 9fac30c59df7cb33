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

#include "mmd/frequency.hpp"

#include "mmd/io.hpp"

#include <complex>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

namespace mmd {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kEnergyThreshold = 0.9;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Columns [1, t].
MatrixXd line_basis(Index n) {
  MatrixXd basis(n, 2);
  basis.col(0).setOnes();
  basis.col(1) = VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  return basis;
}

// Columns cos(w t), sin(w t) per frequency; the sine column is omitted at pi.
MatrixXd sinusoid_basis(Index n, const std::vector<double>& freqs) {
  Index cols = 0;
  for (double f : freqs) cols += (std::abs(f - std::numbers::pi) < 1e-12) ? 1 : 2;
  MatrixXd basis(n, cols);
  Index c = 0;
  for (double f : freqs) {
    for (Index t = 0; t < n; ++t) basis(t, c) = std::cos(f * static_cast<double>(t));
    ++c;
    if (std::abs(f - std::numbers::pi) >= 1e-12) {
      for (Index t = 0; t < n; ++t) basis(t, c) = std::sin(f * static_cast<double>(t));
      ++c;
    }
  }
  return basis;
}

// Least-squares sinusoid amplitudes of y at the given frequencies.
std::vector<SpectralComponent> fit_amplitudes(const VectorXd& y, const std::vector<double>& freqs) {
  const Index n = y.size();
  const MatrixXd basis = sinusoid_basis(n, freqs);
  const VectorXd coef = basis.colPivHouseholderQr().solve(y);
  const double energy = y.squaredNorm();

  std::vector<SpectralComponent> out;
  Index c = 0;
  for (double f : freqs) {
    const bool at_nyquist = std::abs(f - std::numbers::pi) < 1e-12;
    const Index width = at_nyquist ? 1 : 2;
    const VectorXd component = basis.middleCols(c, width) * coef.segment(c, width);
    SpectralComponent sc;
    sc.freq = f;
    sc.amplitude = coef.segment(c, width).norm();
    sc.energy_fraction = energy > 0.0 ? std::min(1.0, component.squaredNorm() / energy) : 0.0;
    out.push_back(sc);
    c += width;
  }
  return out;
}

// One ESPRIT pass over an already detrended signal.
std::vector<double> esprit_pass(const VectorXd& y, int max_order, double energy_floor) {
  const Index n = y.size();
  if (y.squaredNorm() <= energy_floor) return {};

  const Index height = n / 3;
  const Index width = n - height + 1;
  MatrixXd hankel(height, width);
  for (Index i = 0; i < height; ++i) hankel.row(i) = y.segment(i, width).transpose();

  Eigen::BDCSVD<MatrixXd> svd(hankel, Eigen::ComputeThinU);
  const VectorXd& sv = svd.singularValues();
  const double total = sv.squaredNorm();
  if (!(total > 0.0)) return {};

  Index order = 0;
  double acc = 0.0;
  while (order < sv.size() && acc < kEnergyThreshold * total) {
    acc += sv[order] * sv[order];
    ++order;
  }
  order = std::clamp<Index>(order, 1, std::min<Index>(max_order, height - 1));

  const MatrixXd subspace = svd.matrixU().leftCols(order);
  const MatrixXd upper = subspace.topRows(height - 1);
  const MatrixXd lower = subspace.bottomRows(height - 1);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(upper);
  if (qr.rank() < order) throw EspritFailure("esprit: rank-deficient invariance system");
  const MatrixXd rotation = qr.solve(lower);

  Eigen::EigenSolver<MatrixXd> eig(rotation, false);
  if (eig.info() != Eigen::Success) throw EspritFailure("esprit: eigenvalue iteration failed");

  std::vector<double> freqs;
  for (Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const std::complex<double> z = eig.eigenvalues()[i];
    double f = std::arg(z);
    if (z.imag() == 0.0) f = std::abs(f);
    if (f <= 1e-9) continue;  // DC and the negative half of conjugate pairs
    const bool duplicate = std::any_of(freqs.begin(), freqs.end(),
                                       [f](double g) { return std::abs(f - g) < 1e-8; });
    if (!duplicate) freqs.push_back(f);
  }
  return freqs;
}

double max_shift(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

std::string_view to_string(PeriodMethod m) {
  switch (m) {
    case PeriodMethod::ESPRIT: return "esprit";
    case PeriodMethod::Periodogram: return "periodogram";
    case PeriodMethod::Default: return "default";
  }
  return "default";
}

VectorXd detrend(const Eigen::Ref<const VectorXd>& x) {
  const MatrixXd basis = line_basis(x.size());
  const VectorXd coef = basis.colPivHouseholderQr().solve(x);
  return x - basis * coef;
}

std::vector<SpectralComponent> esprit_frequencies(const Eigen::Ref<const VectorXd>& x,
                                                  int max_order) {
  if (max_order < 1) throw InputError("esprit: max_order must be >= 1");
  const Index n = x.size();
  if (n < 3 * max_order || n < 6) throw InputError("esprit: series too short for model order");

  const double energy_floor = 1e-24 * std::max(1.0, x.squaredNorm());
  VectorXd signal = detrend(x);
  std::vector<double> freqs = esprit_pass(signal, max_order, energy_floor);

  // The straight-line fit leaks part of any sinusoid that does not cover an
  // exact number of half-cycles. Re-estimate the line jointly with the
  // sinusoids found so far, then repeat the subspace pass.
  const MatrixXd line = line_basis(n);
  for (int iter = 0; iter < 8 && !freqs.empty(); ++iter) {
    const MatrixXd waves = sinusoid_basis(n, freqs);
    MatrixXd full(n, 2 + waves.cols());
    full << line, waves;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(full);
    if (qr.rank() < full.cols()) break;
    const VectorXd coef = qr.solve(x);
    VectorXd refined = x - line * coef.head(2);
    refined.array() -= refined.mean();

    std::vector<double> next;
    try {
      next = esprit_pass(refined, max_order, energy_floor);
    } catch (const EspritFailure&) {
      break;
    }
    std::sort(next.begin(), next.end());
    std::vector<double> prev = freqs;
    std::sort(prev.begin(), prev.end());
    const double shift = max_shift(prev, next);
    if (next.empty()) break;
    freqs = std::move(next);
    signal = std::move(refined);
    if (shift < 1e-13) break;
  }

  if (freqs.empty()) return {};
  std::vector<SpectralComponent> comps = fit_amplitudes(signal, freqs);
  std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    return a.amplitude > b.amplitude;
  });
  const std::size_t keep = static_cast<std::size_t>(std::max(1, max_order / 2));
  if (comps.size() > keep) comps.resize(keep);
  return comps;
}

PeriodEstimate periodogram_period(const Eigen::Ref<const VectorXd>& x, int default_period) {
  const Index n = x.size();
  if (n < 8) throw InputError("periodogram: need at least 8 observations");

  PeriodEstimate fallback;
  fallback.period_w = default_period;
  fallback.method = PeriodMethod::Default;

  const VectorXd y = detrend(x);
  if (y.squaredNorm() <= 1e-24 * std::max(1.0, x.squaredNorm())) return fallback;

  const Index bins = n / 2;
  VectorXd power(bins + 1);
  power[0] = 0.0;
  for (Index k = 1; k <= bins; ++k) {
    std::complex<double> acc{0.0, 0.0};
    const double step = kTwoPi * static_cast<double>(k) / static_cast<double>(n);
    for (Index t = 0; t < n; ++t) {
      acc += y[t] * std::polar(1.0, -step * static_cast<double>(t));
    }
    power[k] = std::norm(acc);
  }
  const double total = power.sum();
  if (!(total > 0.0)) return fallback;

  // Bin 1 would be a period of the full length; search only bins whose
  // period fits twice into the series.
  Index best = 2;
  for (Index k = 3; k <= bins; ++k) {
    if (power[k] > power[best]) best = k;
  }
  PeriodEstimate est;
  est.method = PeriodMethod::Periodogram;
  est.dominant_freq = kTwoPi * static_cast<double>(best) / static_cast<double>(n);
  est.period_w = static_cast<int>(std::lround(static_cast<double>(n) / static_cast<double>(best)));
  est.period_w = std::clamp<int>(est.period_w, 2, static_cast<int>(n / 2));
  est.confidence = power[best] / total;
  return est;
}

PeriodEstimate estimate_period(const Eigen::Ref<const VectorXd>& x, const FrequencyConfig& cfg) {
  const Index n = x.size();
  const int max_period = static_cast<int>(n / 2);

  const int order = std::min<int>(cfg.max_order, static_cast<int>(n / 3));
  if (order >= 1 && n >= 6) {
    try {
      const auto comps = esprit_frequencies(x, order);
      if (!comps.empty()) {
        const auto& top = comps.front();
        const long period = std::lround(kTwoPi / top.freq);
        if (top.energy_fraction >= cfg.min_confidence && period >= 2 && period <= max_period) {
          return {static_cast<int>(period), PeriodMethod::ESPRIT, top.freq, top.energy_fraction};
        }
      }
    } catch (const EspritFailure&) {
      // fall through to the periodogram
    }
  }

  PeriodEstimate est = periodogram_period(x, cfg.default_period);
  if (est.method == PeriodMethod::Periodogram && est.confidence >= cfg.min_confidence) return est;

  PeriodEstimate fallback;
  fallback.period_w = std::clamp(cfg.default_period, 2, std::max(2, max_period));
  fallback.method = PeriodMethod::Default;
  fallback.confidence = est.confidence;
  return fallback;
}

PeriodEstimate estimate_period(const MetricSeries& series, const FrequencyConfig& cfg) {
  if (series.missing_count() > 0) {
    throw InputError(series.key() + ": estimate_period needs a gap-filled series");
  }
  return estimate_period(series.values, cfg);
}

std::optional<int> PeriodCache::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  const auto it = periods_.find(key);
  if (it == periods_.end()) return std::nullopt;
  return it->second;
}

void PeriodCache::store(const std::string& key, int period) {
  std::unique_lock lock(mutex_);
  periods_[key] = period;
}

std::size_t PeriodCache::size() const {
  std::shared_lock lock(mutex_);
  return periods_.size();
}

int PeriodCache::get_or_estimate(const MetricSeries& series, const FrequencyConfig& cfg) {
  const std::string key = series.key();
  if (auto cached = find(key); cached && *cached >= 2 && *cached <= series.size() / 2) {
    return *cached;
  }
  const int period = estimate_period(series, cfg).period_w;
  store(key, period);
  return period;
}

void PeriodCache::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  std::unique_lock lock(mutex_);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": malformed period entry");
    }
    periods_[line.substr(0, tab)] = std::stoi(line.substr(tab + 1));
  }
}

void PeriodCache::save(const std::filesystem::path& path) const {
  std::vector<std::pair<std::string, int>> entries;
  {
    std::shared_lock lock(mutex_);
    entries.assign(periods_.begin(), periods_.end());
  }
  std::sort(entries.begin(), entries.end());
  std::ostringstream out;
  for (const auto& [key, period] : entries) out << key << '\t' << period << '\n';
  write_file_atomic(path, out.str());
}

}  // namespace mmd
