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

#include "mmd/rank.hpp"

namespace mmd {

using Vector6d = Eigen::Matrix<double, 6, 1>;

Vector6d AlertFeatures::stacked() const {
  Vector6d v;
  v << f_d, f_p, f_g;
  return v;
}

Vector6d RankWeights::stacked() const {
  Vector6d v;
  v << w_d, w_p, w_g;
  return v;
}

RankWeights RankWeights::from_stacked(const Vector6d& v) {
  RankWeights w;
  w.w_d = v[0];
  w.w_p = v.segment<4>(1);
  w.w_g = v[5];
  return w;
}

bool RankWeights::all_finite() const { return stacked().allFinite(); }

Eigen::Vector4d one_hot(Priority p) {
  Eigen::Vector4d v = Eigen::Vector4d::Zero();
  v[static_cast<int>(p)] = 1.0;
  return v;
}

AlertFeatures extract_features(const AnomalyVerdict& verdict, Priority priority,
                               const Dimensions& dimensions) {
  AlertFeatures f;
  f.f_d = verdict.severity;
  f.f_p = one_hot(priority);
  f.f_g = static_cast<double>(dimensions.size());
  return f;
}

AlertFeatures extract_features(const AnomalyVerdict& verdict) {
  return extract_features(verdict, verdict.priority, verdict.dimensions);
}

double score(const AlertFeatures& f, const RankWeights& w) {
  return w.w_d * f.f_d + w.w_p.dot(f.f_p) + w.w_g * f.f_g;
}

RankedAlert rank_alert(const AnomalyVerdict& verdict, const RankWeights& w) {
  RankedAlert a;
  a.verdict = verdict;
  a.features = extract_features(verdict);
  a.score = score(a.features, w);
  return a;
}

RankWeights fit_weights(std::span<const FeedbackRecord> feedback, double l2) {
  FitOptions opts;
  opts.l2 = l2;
  return fit_weights(feedback, opts);
}

RankWeights fit_weights(std::span<const FeedbackRecord> feedback, const FitOptions& opts) {
  if (feedback.size() < 10) throw InputError("fit_weights: need at least 10 feedback records");
  if (!(opts.l2 >= 0.0)) throw InputError("fit_weights: regularisation must be >= 0");

  // Canonical row order so the summation order (and the result) does not
  // depend on how the records were supplied.
  std::vector<std::pair<Vector6d, bool>> rows;
  rows.reserve(feedback.size());
  std::size_t positives = 0;
  for (const auto& r : feedback) {
    const Vector6d x = r.features.stacked();
    if (!x.allFinite()) throw InputError("fit_weights: non-finite feature");
    rows.emplace_back(x, r.is_valid);
    positives += r.is_valid ? 1 : 0;
  }
  if (positives == 0 || positives == rows.size()) {
    throw InputError("fit_weights: feedback must contain both valid and invalid alerts");
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::lexicographical_compare(a.first.data(), a.first.data() + 6, b.first.data(),
                                        b.first.data() + 6) ||
           (a.first == b.first && a.second < b.second);
  });

  const Index n = static_cast<Index>(rows.size());
  Eigen::MatrixXd design(n, 7);
  Eigen::VectorXd target(n);
  for (Index i = 0; i < n; ++i) {
    design.row(i) << 1.0, rows[i].first.transpose();
    target[i] = rows[i].second ? 1.0 : 0.0;
  }
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(7, opts.l2);
  penalty[0] = 0.0;

  const double inv_n = 1.0 / static_cast<double>(n);
  auto loss = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd z = design * beta;
    double nll = 0.0;
    for (Index i = 0; i < n; ++i) {
      // log(1 + e^z) - y z, evaluated stably
      const double zi = z[i];
      nll += (zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi))) - target[i] * zi;
    }
    return nll * inv_n + 0.5 * (penalty.array() * beta.array().square()).sum();
  };
  auto gradient = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd z = design * beta;
    const Eigen::VectorXd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    return Eigen::VectorXd(design.transpose() * (p - target) * inv_n +
                           (penalty.array() * beta.array()).matrix());
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(7);
  double step = 1.0;
  double f = loss(beta);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Eigen::VectorXd g = gradient(beta);
    const double gg = g.squaredNorm();
    if (std::sqrt(gg) < opts.grad_tol) break;
    step *= 2.0;
    Eigen::VectorXd next;
    double f_next = 0.0;
    while (true) {
      next = beta - step * g;
      f_next = loss(next);
      if (f_next <= f - 0.5 * step * gg || step < 1e-16) break;
      step *= 0.5;
    }
    beta = std::move(next);
    f = f_next;
  }

  Vector6d w = beta.tail<6>();
  if (!w.allFinite()) throw InputError("fit_weights: optimisation diverged");
  return RankWeights::from_stacked(w);
}

}  // namespace mmd
