/*
 * Copyright 2026 The vflda Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef VFLDA_METRICS_H_
#define VFLDA_METRICS_H_

#include <span>

namespace vflda::metrics {

// Area under the ROC curve via the Mann-Whitney rank statistic; tied scores
// receive their average rank. Throws std::invalid_argument unless both
// classes are present.
double Auc(std::span<const double> scores, std::span<const int> labels);

// Kolmogorov-Smirnov statistic in the credit-scoring sense:
// max over thresholds of |TPR - FPR|.
double Ks(std::span<const double> scores, std::span<const int> labels);

}  // namespace vflda::metrics

#endif  // VFLDA_METRICS_H_
