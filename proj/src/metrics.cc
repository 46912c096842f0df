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

#include "vflda/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace vflda::metrics {
namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts Validate(std::span<const double> scores,
                     std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  ClassCounts c;
  for (int y : labels) {
    if (y == 1) {
      ++c.pos;
    } else if (y == 0) {
      ++c.neg;
    } else {
      throw std::invalid_argument("labels must be 0 or 1");
    }
  }
  if (c.pos == 0 || c.neg == 0) {
    throw std::invalid_argument("both classes must be present");
  }
  return c;
}

std::vector<std::size_t> SortedOrder(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  return order;
}

}  // namespace

double Auc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = Validate(scores, labels);
  const auto order = SortedOrder(scores);
  double rank_sum = 0;  // ranks of positives, 1-based
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) rank_sum += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(c.pos);
  const double nn = static_cast<double>(c.neg);
  return (rank_sum - np * (np + 1) / 2) / (np * nn);
}

double Ks(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = Validate(scores, labels);
  const auto order = SortedOrder(scores);
  // Sweep thresholds from high to low; each distinct score closes a group.
  double tp = 0, fp = 0, best = 0;
  for (std::size_t i = order.size(); i > 0;) {
    std::size_t j = i;
    while (j > 0 && scores[order[j - 1]] == scores[order[i - 1]]) {
      --j;
      (labels[order[j]] == 1 ? tp : fp) += 1;
    }
    best = std::max(best, std::abs(tp / c.pos - fp / c.neg));
    i = j;
  }
  return best;
}

}  // namespace vflda::metrics
