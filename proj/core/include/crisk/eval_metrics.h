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

#ifndef CRISK_EVAL_METRICS_H_
#define CRISK_EVAL_METRICS_H_

#include <span>
#include <string_view>

namespace crisk {

// Clamp applied to every probability before taking a log.
inline constexpr double kProbEpsilon = 1e-7;

double clamp_prob(double p);

// -[y log p + (1 - y) log(1 - p)] with p clamped to [eps, 1 - eps].
double cross_entropy(double p, double y);

enum class Subset { kAll, kPositiveRisk };
std::string_view subset_name(Subset s);

// Weighted mean cross-entropy sum_i w_i ce_i / sum_i w_i over the subset
// (positive risk: label > 0). Throws DataError for an empty subset or
// mismatched lengths.
double nll(std::span<const double> preds, std::span<const double> labels,
           std::span<const double> weights, Subset subset = Subset::kAll);

// Step average precision over the ranking by descending score. Tied scores
// form one group and every positive in a group gets the precision at the
// group's end. Labels are 0/1; throws DataError without positives.
double average_precision(std::span<const double> scores,
                         std::span<const int> labels);

}  // namespace crisk

#endif  // CRISK_EVAL_METRICS_H_
