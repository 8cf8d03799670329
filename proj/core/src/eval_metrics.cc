// Copyright 2026 The crisk Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "crisk/eval_metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "crisk/error.h"

namespace crisk {

double clamp_prob(double p) {
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

double cross_entropy(double p, double y) {
  const double q = clamp_prob(p);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

std::string_view subset_name(Subset s) {
  return s == Subset::kAll ? "all" : "positive-risk";
}

double nll(std::span<const double> preds, std::span<const double> labels,
           std::span<const double> weights, Subset subset) {
  if (preds.size() != labels.size() || preds.size() != weights.size()) {
    throw DataError("nll: preds, labels, and weights differ in length");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (subset == Subset::kPositiveRisk && !(labels[i] > 0.0)) continue;
    num += weights[i] * cross_entropy(preds[i], labels[i]);
    den += weights[i];
  }
  if (!(den > 0.0)) {
    throw DataError("nll: the " + std::string(subset_name(subset)) +
                    " subset is empty");
  }
  return num / den;
}

double average_precision(std::span<const double> scores,
                         std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("average_precision: scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (int y : labels) positives += y != 0 ? 1 : 0;
  if (positives == 0) throw DataError("average_precision: no positive labels");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return scores[a] > scores[b];
  });
  double sum = 0.0;
  std::size_t tp = 0;
  std::size_t k = 0;
  while (k < n) {
    std::size_t end = k;
    std::size_t group_pos = 0;
    while (end < n && scores[order[end]] == scores[order[k]]) {
      group_pos += labels[order[end]] != 0 ? 1 : 0;
      ++end;
    }
    tp += group_pos;
    const double precision =
        static_cast<double>(tp) / static_cast<double>(end);
    for (std::size_t j = 0; j < group_pos; ++j) sum += precision;
    k = end;
  }
  return sum / static_cast<double>(positives);
}

}  // namespace crisk
