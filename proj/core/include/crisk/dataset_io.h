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

// Line-delimited JSON files for datasets and vehicle records. The first line
// of every file is a header holding the kind, seed, and resolved config.

#ifndef CRISK_DATASET_IO_H_
#define CRISK_DATASET_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crisk/features.h"
#include "crisk/risk_estimator.h"
#include "crisk/scene_model.h"

namespace crisk {

struct FileHeader {
  std::string format;  // "crisk-dataset" or "crisk-records"
  std::string kind;
  std::uint64_t seed = 0;
  std::string config_json = "{}";  // must parse as a JSON object
};

struct Dataset {
  FileHeader header;
  int neighbors = kDefaultNeighbors;
  std::vector<WeightedSample> samples;
};

// Writes `path` and the schema sidecar `schema_path(path)`.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
void append_samples(const std::filesystem::path& path,
                    std::span<const WeightedSample> samples);
// Throws DataError on malformed lines, a feature-length mismatch, or a
// header schema hash that does not match the neighbor count.
Dataset read_dataset(const std::filesystem::path& path);

std::filesystem::path schema_path(const std::filesystem::path& data_path);
std::string schema_json(const FeatureSchema& schema);

std::string sample_to_json(const WeightedSample& s);
WeightedSample sample_from_json(std::string_view line);

struct RecordsFile {
  FileHeader header;
  std::vector<VehicleRecord> records;
};

// One record per vehicle that has a leader.
std::vector<VehicleRecord> scene_records(const Scene& scene);

void write_records(const std::filesystem::path& path, const RecordsFile& file);
RecordsFile read_records(const std::filesystem::path& path);

// Creates parent directories; throws DataError on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace crisk

#endif  // CRISK_DATASET_IO_H_
