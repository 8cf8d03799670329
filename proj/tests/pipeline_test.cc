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

#include "crisk/pipeline.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "crisk/dataset_io.h"
#include "crisk/error.h"
#include "json.hpp"

namespace crisk {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("crisk_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

WeightedSample sample(double y, std::int64_t scene, int ego) {
  WeightedSample s;
  s.x.assign(FeatureSchema().size(), 0.25);
  s.x[0] = 1.0 / 3.0;
  s.y = y;
  s.w = 0.1 + scene;
  s.scene_id = scene;
  s.ego_id = ego;
  s.domain = Domain::kTarget;
  s.collision_steps = {-1, 120};
  return s;
}

TEST(DatasetIo, RoundTripIsExact) {
  const fs::path dir = scratch("dataset");
  Dataset d;
  d.header.kind = "target";
  d.header.seed = 7;
  d.header.config_json = R"({"a":1})";
  for (int i = 0; i < 5; ++i) d.samples.push_back(sample(0.2 * i, i, i + 1));
  write_dataset(dir / "d.jsonl", d);
  ASSERT_TRUE(fs::exists(schema_path(dir / "d.jsonl")));

  const Dataset back = read_dataset(dir / "d.jsonl");
  EXPECT_EQ(back.header.kind, "target");
  EXPECT_EQ(back.header.seed, 7u);
  EXPECT_EQ(back.header.config_json, R"({"a":1})");
  ASSERT_EQ(back.samples.size(), d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].x, d.samples[i].x);
    EXPECT_EQ(back.samples[i].y, d.samples[i].y);
    EXPECT_EQ(back.samples[i].w, d.samples[i].w);
    EXPECT_EQ(back.samples[i].scene_id, d.samples[i].scene_id);
    EXPECT_EQ(back.samples[i].collision_steps, d.samples[i].collision_steps);
    EXPECT_EQ(back.samples[i].domain, Domain::kTarget);
  }
}

TEST(DatasetIo, SchemaSidecarListsFeatures) {
  const fs::path dir = scratch("schema");
  Dataset d;
  d.samples.push_back(sample(0.0, 0, 0));
  write_dataset(dir / "d.jsonl", d);
  const auto j = nlohmann::json::parse(read_text(schema_path(dir / "d.jsonl")));
  const FeatureSchema schema;
  EXPECT_EQ(j["features"].size(), schema.size());
  EXPECT_EQ(j["features"][0]["name"], schema[0].name);
  EXPECT_EQ(j["neighbors"], kDefaultNeighbors);
}

TEST(DatasetIo, MalformedInputIsDataError) {
  const fs::path dir = scratch("malformed");
  Dataset d;
  d.samples.push_back(sample(0.5, 0, 0));
  write_dataset(dir / "d.jsonl", d);
  const std::string good = read_text(dir / "d.jsonl");
  const std::string header = good.substr(0, good.find('\n') + 1);

  write_text(dir / "bad1.jsonl", header + "{not json}\n");
  EXPECT_THROW(read_dataset(dir / "bad1.jsonl"), DataError);
  write_text(dir / "bad2.jsonl",
             header + R"({"scene_id":0,"ego_id":0,"domain":"target",)" +
                 R"("w":1,"y":0.5,"x":[1,2]})" + "\n");
  EXPECT_THROW(read_dataset(dir / "bad2.jsonl"), DataError);
  write_text(dir / "bad3.jsonl", "{\"format\":\"other\"}\n");
  EXPECT_THROW(read_dataset(dir / "bad3.jsonl"), DataError);
  write_text(dir / "empty.jsonl", "");
  EXPECT_THROW(read_dataset(dir / "empty.jsonl"), DataError);
  EXPECT_THROW(read_dataset(dir / "missing.jsonl"), DataError);
  EXPECT_THROW(sample_from_json(
                   R"({"scene_id":0,"ego_id":0,"domain":"source","w":1,)"
                   R"("y":1.5,"x":[]})"),
               DataError);
}

TEST(DatasetIo, RecordsRoundTrip) {
  const fs::path dir = scratch("records");
  RecordsFile f;
  f.header.kind = "records";
  VehicleRecord r;
  r.fore_distance = 12.5;
  r.fore_velocity = 20.1;
  r.relative_velocity = -0.3;
  r.attentive = 1;
  r.aggressiveness = 0.7;
  f.records = {r, r};
  write_records(dir / "r.jsonl", f);
  const RecordsFile back = read_records(dir / "r.jsonl");
  ASSERT_EQ(back.records.size(), 2u);
  for (SceneVar v : kAllSceneVars) {
    EXPECT_EQ(back.records[1].get(v), r.get(v));
  }
}

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig a = default_config();
  const std::string text = config_to_json(a);
  const ExperimentConfig b = config_from_json(text);
  EXPECT_EQ(config_to_json(b), text);
}

TEST(Config, OverridesAndUnknownKeys) {
  const ExperimentConfig c = config_from_json(
      R"({"seed": 9, "cem": {"population": 500}, "sweep": {"lambda": 0.25}})");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.cem.population, 500);
  EXPECT_EQ(c.sweep.lambda, 0.25);
  EXPECT_THROW(config_from_json(R"({"cem": {"popluation": 50}})"), UsageError);
  EXPECT_THROW(config_from_json(R"({"bogus": 1})"), UsageError);
  EXPECT_THROW(config_from_json("{"), UsageError);
}

TEST(Config, ResolveRejectsInconsistentSettings) {
  ExperimentConfig c = default_config();
  c.cem.num_vehicles = 5;
  c.cem.ego_index = 1;
  EXPECT_THROW(c.resolve(), UsageError);
  c = default_config();
  c.threads = 3;
  c.resolve();
  EXPECT_EQ(c.cem.threads, 3);
  EXPECT_EQ(c.target.threads, 3);
}

TEST(SubsamplePositives, KeepsNegativesAndCountPositives) {
  std::vector<WeightedSample> pool;
  for (int i = 0; i < 40; ++i) pool.push_back(sample(i % 4 == 0, i, 0));
  const auto a = subsample_positives(pool, 5, 11);
  const auto b = subsample_positives(pool, 5, 11);
  ASSERT_EQ(a.size(), 30u + 5u);
  int positives = 0;
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    positives += a[i].y == 1.0;
    ids.insert(a[i].scene_id);
    EXPECT_EQ(a[i].scene_id, b[i].scene_id);
  }
  EXPECT_EQ(positives, 5);
  EXPECT_EQ(ids.size(), a.size());
  EXPECT_THROW(subsample_positives(pool, 11, 1), DataError);
  pool[1].y = 0.5;
  EXPECT_THROW(subsample_positives(pool, 1, 1), DataError);
}

TEST(Report, CsvCarriesSeedAndConfig) {
  ExperimentConfig c = default_config();
  c.seed = 42;
  Report r("demo", {"name", "value"});
  r.add({"plain", "1.5"});
  r.add({"has,comma", "say \"hi\""});
  EXPECT_THROW(r.add({"short"}), DataError);
  const std::string csv = r.to_csv(c);
  EXPECT_EQ(csv, r.to_csv(c));
  EXPECT_EQ(csv.rfind("# report: demo\n# seed: 42\n# config: {", 0), 0u);
  EXPECT_NE(csv.find("\nname,value\nplain,1.5\n\"has,comma\",\"say \"\"hi\"\"\"\n"),
            std::string::npos);
  const auto schema = nlohmann::json::parse(r.schema());
  EXPECT_EQ(schema["columns"].size(), 2u);

  const fs::path dir = scratch("report");
  r.write(dir, c);
  EXPECT_EQ(read_text(dir / "demo.csv"), csv);
  EXPECT_TRUE(fs::exists(dir / "demo.csv.schema.json"));
}

}  // namespace
}  // namespace crisk
