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

#include "crisk/dataset_io.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "crisk/error.h"
#include "json.hpp"

namespace crisk {

namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kDatasetFormat = "crisk-dataset";
constexpr const char* kRecordsFormat = "crisk-records";
constexpr int kVersion = 1;

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

Json header_json(const FileHeader& h, const char* format) {
  Json j;
  j["format"] = format;
  j["version"] = kVersion;
  j["kind"] = h.kind;
  j["seed"] = h.seed;
  try {
    j["config"] = Json::parse(h.config_json);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("header config is not JSON: ") + e.what());
  }
  return j;
}

FileHeader parse_header(const Json& j, const char* format,
                        const std::string& where) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw DataError(where + ": missing '" + format + "' header");
  }
  if (j.value("version", 0) != kVersion) {
    throw DataError(where + ": unsupported version");
  }
  FileHeader h;
  h.format = format;
  h.kind = j.value("kind", "");
  h.seed = j.value("seed", std::uint64_t{0});
  h.config_json = j.contains("config") ? j["config"].dump() : "{}";
  return h;
}

Json parse_line(const std::string& line, const std::string& where) {
  try {
    return Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw DataError(where + ": " + e.what());
  }
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    fn(line, path.string() + ":" + std::to_string(n));
  }
}

std::ofstream open_out(const std::filesystem::path& path,
                       std::ios::openmode mode) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path schema_path(const std::filesystem::path& data_path) {
  std::filesystem::path p = data_path;
  p += ".schema.json";
  return p;
}

std::string schema_json(const FeatureSchema& schema) {
  Json j;
  j["neighbors"] = schema.neighbors();
  j["hash"] = hex64(schema.hash());
  Json list = Json::array();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const FeatureInfo& f = schema[i];
    list.push_back(
        {{"index", i}, {"name", f.name}, {"unit", f.unit},
         {"behavioral", f.behavioral}});
  }
  j["features"] = std::move(list);
  return j.dump(2) + "\n";
}

std::string sample_to_json(const WeightedSample& s) {
  Json j;
  j["scene_id"] = s.scene_id;
  j["ego_id"] = s.ego_id;
  j["domain"] = domain_name(s.domain);
  j["w"] = s.w;
  j["y"] = s.y;
  j["x"] = s.x;
  j["collision_steps"] = s.collision_steps;
  return j.dump();
}

WeightedSample sample_from_json(std::string_view line) {
  const Json j = parse_line(std::string(line), "sample");
  WeightedSample s;
  try {
    s.scene_id = j.at("scene_id").get<std::int64_t>();
    s.ego_id = j.at("ego_id").get<int>();
    s.domain = domain_from_name(j.at("domain").get<std::string>());
    s.w = j.at("w").get<double>();
    s.y = j.at("y").get<double>();
    s.x = j.at("x").get<std::vector<double>>();
    s.collision_steps = j.value("collision_steps", std::vector<int>{});
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed sample: ") + e.what());
  }
  if (!(s.y >= 0.0 && s.y <= 1.0)) throw DataError("label outside [0, 1]");
  if (!(s.w >= 0.0) || !std::isfinite(s.w)) {
    throw DataError("weight must be finite and >= 0");
  }
  return s;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  const FeatureSchema schema(data.neighbors);
  Json h = header_json(data.header, kDatasetFormat);
  h["neighbors"] = data.neighbors;
  h["features"] = schema.size();
  h["schema_hash"] = hex64(schema.hash());
  std::ofstream out = open_out(path, std::ios::binary | std::ios::trunc);
  out << h.dump() << '\n';
  for (const WeightedSample& s : data.samples) {
    if (s.x.size() != schema.size()) {
      throw DataError("sample feature length " + std::to_string(s.x.size()) +
                      " does not match the schema (" +
                      std::to_string(schema.size()) + ")");
    }
    out << sample_to_json(s) << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
  write_text(schema_path(path), schema_json(schema));
}

void append_samples(const std::filesystem::path& path,
                    std::span<const WeightedSample> samples) {
  if (!std::filesystem::exists(path)) {
    throw DataError("cannot append to missing " + path.string());
  }
  std::ofstream out = open_out(path, std::ios::binary | std::ios::app);
  for (const WeightedSample& s : samples) out << sample_to_json(s) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  Dataset d;
  bool first = true;
  std::size_t dim = 0;
  for_each_line(path, [&](const std::string& line, const std::string& where) {
    if (first) {
      const Json h = parse_line(line, where);
      d.header = parse_header(h, kDatasetFormat, where);
      d.neighbors = h.value("neighbors", kDefaultNeighbors);
      const FeatureSchema schema(d.neighbors);
      dim = schema.size();
      if (h.value("schema_hash", std::string()) != hex64(schema.hash())) {
        throw DataError(where + ": schema hash mismatch");
      }
      first = false;
      return;
    }
    WeightedSample s;
    try {
      s = sample_from_json(line);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (s.x.size() != dim) {
      throw DataError(where + ": expected " + std::to_string(dim) +
                      " features, got " + std::to_string(s.x.size()));
    }
    d.samples.push_back(std::move(s));
  });
  if (first) throw DataError(path.string() + ": empty dataset file");
  return d;
}

std::vector<VehicleRecord> scene_records(const Scene& scene) {
  std::vector<VehicleRecord> out;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto lead = find_leader(scene, i);
    if (!lead) continue;
    const Vehicle& v = scene.vehicles[i];
    const Vehicle& f = scene.vehicles[*lead];
    VehicleRecord r;
    r.fore_distance = bumper_gap(scene.road, v, f);
    r.fore_velocity = f.velocity;
    r.relative_velocity = v.velocity - f.velocity;
    r.length = v.length;
    r.width = v.width;
    r.attentive = v.params.attentive ? 1 : 0;
    r.aggressiveness = v.params.aggressiveness;
    out.push_back(r);
  }
  return out;
}

void write_records(const std::filesystem::path& path, const RecordsFile& file) {
  std::ofstream out = open_out(path, std::ios::binary | std::ios::trunc);
  out << header_json(file.header, kRecordsFormat).dump() << '\n';
  for (const VehicleRecord& r : file.records) {
    Json j;
    for (SceneVar v : kAllSceneVars) {
      const std::string name(scene_var_name(v));
      if (v == SceneVar::kAttentive) {
        j[name] = r.attentive;
      } else {
        j[name] = r.get(v);
      }
    }
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

RecordsFile read_records(const std::filesystem::path& path) {
  RecordsFile f;
  bool first = true;
  for_each_line(path, [&](const std::string& line, const std::string& where) {
    const Json j = parse_line(line, where);
    if (first) {
      f.header = parse_header(j, kRecordsFormat, where);
      first = false;
      return;
    }
    VehicleRecord r;
    try {
      for (SceneVar v : kAllSceneVars) {
        const double x = j.at(std::string(scene_var_name(v))).get<double>();
        if (!std::isfinite(x)) throw DataError("non-finite value");
        r.set(v, x);
      }
    } catch (const Json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    f.records.push_back(r);
  });
  if (first) throw DataError(path.string() + ": empty records file");
  return f;
}

}  // namespace crisk
