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

#include "mmd/detect.hpp"

namespace mmd {

struct AlertFeatures {
  double f_d = 0.0;                                  // severity
  Eigen::Vector4d f_p = Eigen::Vector4d::Zero();     // one-hot P1..P4
  double f_g = 0.0;                                  // dimensions not rolled up

  Eigen::Matrix<double, 6, 1> stacked() const;
};

struct RankWeights {
  double w_d = 1.0;
  Eigen::Vector4d w_p{4.0, 3.0, 2.0, 1.0};
  double w_g = 1.0;

  Eigen::Matrix<double, 6, 1> stacked() const;
  static RankWeights from_stacked(const Eigen::Matrix<double, 6, 1>& v);
  bool all_finite() const;
};

struct FeedbackRecord {
  AlertFeatures features;
  bool is_valid = false;
};

struct RankedAlert {
  AnomalyVerdict verdict;
  AlertFeatures features;
  double score = 0.0;

  std::string key() const { return verdict.key(); }
};

Eigen::Vector4d one_hot(Priority p);

AlertFeatures extract_features(const AnomalyVerdict& verdict);
AlertFeatures extract_features(const AnomalyVerdict& verdict, Priority priority,
                               const Dimensions& dimensions);

/// g = w_d f_d + <w_p, f_p> + w_g f_g
double score(const AlertFeatures& f, const RankWeights& w);

RankedAlert rank_alert(const AnomalyVerdict& verdict, const RankWeights& w);

struct FitOptions {
  double l2 = 0.0;
  int max_iter = 200000;
  double grad_tol = 1e-6;
};

/// L2-regularised logistic regression on is_valid, fitted by batch gradient
/// descent with backtracking from all-zero weights. The intercept is
/// unpenalised and dropped from the result.
RankWeights fit_weights(std::span<const FeedbackRecord> feedback, double l2);
RankWeights fit_weights(std::span<const FeedbackRecord> feedback, const FitOptions& opts);

}  // namespace mmd
