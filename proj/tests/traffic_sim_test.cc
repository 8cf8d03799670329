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

#include "crisk/traffic_sim.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "crisk/error.h"
#include "crisk/features.h"

namespace crisk {
namespace {

Vehicle car(int id, double front, double v) {
  Vehicle c;
  c.id = id;
  c.position = front;
  c.velocity = v;
  c.length = 4.5;
  c.width = 1.9;
  return c;
}

// Rear vehicle frozen inattentive with zero acceleration; leader cruising
// at its desired speed. Closing speed 10 m/s over a 30 m gap.
Scene closing_scene() {
  Scene s;
  Vehicle lead = car(0, 100.0, 20.0);
  lead.params.desired_velocity = 20.0;
  lead.params.p_inattentive_given_attentive = 0.0;
  Vehicle rear = car(1, 100.0 - 4.5 - 30.0, 30.0);
  rear.params.attentive = false;
  rear.params.p_inattentive_given_attentive = 1.0;
  rear.params.p_attentive_given_inattentive = 0.0;
  s.vehicles = {lead, rear};
  return s;
}

SimConfig quiet(int h, int horizon) {
  SimConfig c;
  c.collision_start = h;
  c.horizon = horizon;
  c.noise = false;
  c.errors = true;
  return c;
}

TEST(BicycleStep, UniformMotion) {
  KinematicState s;
  s.velocity = 10.0;
  const KinematicState n = bicycle_step(s, 0.0, 0.0, 0.1);
  EXPECT_DOUBLE_EQ(n.position, 1.0);
  EXPECT_EQ(n.velocity, 10.0);
  EXPECT_EQ(n.heading, 0.0);
}

TEST(BicycleStep, NoReversing) {
  KinematicState s;
  const KinematicState n = bicycle_step(s, -5.0, 0.0, 0.1);
  EXPECT_EQ(n.velocity, 0.0);
  EXPECT_EQ(n.position, 0.0);
}

TEST(BicycleStep, ConstantAccelerationFromRest) {
  // Forward Euler with the pre-update velocity: x_50 = sum 0.1 * 0.2 k.
  KinematicState s;
  for (int k = 0; k < 50; ++k) s = bicycle_step(s, 2.0, 0.0, 0.1);
  EXPECT_NEAR(s.velocity, 10.0, 1e-9);
  double euler = 0.0;
  for (int k = 0; k < 50; ++k) euler += 0.1 * (0.2 * k);
  EXPECT_NEAR(s.position, euler, 1e-9);
  EXPECT_NEAR(s.position, 24.5, 1e-9);
  EXPECT_NEAR(0.5 * 2.0 * 5.0 * 5.0 - s.position, 0.5, 1e-9);
}

TEST(BicycleStep, HeadingWrapped) {
  KinematicState s;
  s.velocity = 1.0;
  s.heading = 3.1;
  const KinematicState n = bicycle_step(s, 0.0, 2.0, 0.1);
  EXPECT_GT(n.heading, -M_PI);
  EXPECT_LE(n.heading, M_PI);
  EXPECT_LT(n.heading, 0.0);
  EXPECT_DOUBLE_EQ(wrap_angle(M_PI), M_PI);
  EXPECT_DOUBLE_EQ(wrap_angle(-M_PI), M_PI);
  EXPECT_NEAR(wrap_angle(3 * M_PI + 0.5), -M_PI + 0.5, 1e-12);
}

TEST(DetectCollisions, GapAndOverlap) {
  Scene s;
  s.vehicles = {car(0, 40.0, 0.0), car(1, 30.5, 0.0)};  // fore rear at 35.5
  EXPECT_TRUE(detect_collisions(s).empty());
  s.vehicles[0].position = 34.5;  // fore rear bumper at 30.0
  const auto hits = detect_collisions(s);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0], (std::pair<std::size_t, std::size_t>{0, 1}));
}

TEST(DetectCollisions, TouchingCounts) {
  Scene s;
  s.vehicles = {car(0, 20.0, 0.0), car(1, 15.5, 0.0)};
  EXPECT_EQ(detect_collisions(s).size(), 1u);
}

TEST(DetectCollisions, WrapAroundOnCircularRoad) {
  Scene s;
  s.road.length = 100.0;
  s.road.circular = true;
  s.vehicles = {car(0, 2.0, 0.0), car(1, 98.0, 0.0)};  // fore rear at 97.5
  EXPECT_EQ(detect_collisions(s).size(), 1u);
  s.vehicles[1].position = 96.0;
  EXPECT_TRUE(detect_collisions(s).empty());
}

TEST(DetectCollisions, MatchesBruteForceIntervals) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    Scene s;
    const int n = 2 + static_cast<int>(uniform(rng, 0.0, 30.0));
    for (int i = 0; i < n; ++i) {
      Vehicle v = car(i, uniform(rng, 0.0, 300.0), 0.0);
      v.length = uniform(rng, 3.0, 12.0);
      s.vehicles.push_back(v);
    }
    std::set<std::pair<std::size_t, std::size_t>> expect;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const Vehicle& a = s.vehicles[i];
        const Vehicle& b = s.vehicles[j];
        if (std::max(a.rear(), b.rear()) <= std::min(a.position, b.position)) {
          expect.insert({i, j});
        }
      }
    }
    const auto got = detect_collisions(s);
    const std::set<std::pair<std::size_t, std::size_t>> seen(got.begin(),
                                                             got.end());
    EXPECT_EQ(seen, expect);
    EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
  }
}

TEST(DetectCollisions, CrossLaneRectangles) {
  Scene s;
  s.road.lane_count = 2;
  Vehicle a = car(0, 50.0, 20.0);
  Vehicle b = car(1, 52.0, 20.0);
  b.lane = 1;
  s.vehicles = {a, b};
  EXPECT_TRUE(detect_collisions(s).empty());
  // Drift 1.9 m left: lateral centers 1.85 + 1.9 vs 5.55, widths 1.9.
  s.vehicles[0].lane_offset = 1.9;
  EXPECT_EQ(detect_collisions(s).size(), 1u);
  // Rotated boxes: a vertical car crossing the lane line.
  s.vehicles[0].lane_offset = 3.0;
  s.vehicles[0].heading = M_PI / 2;
  s.vehicles[0].position = 46.0;
  EXPECT_TRUE(detect_collisions(s).empty());
  s.vehicles[0].position = 51.0;
  EXPECT_EQ(detect_collisions(s).size(), 1u);
}

TEST(Rollout, EmptyHorizon) {
  Rng rng(2);
  const RolloutResult r = rollout(closing_scene(), 1, quiet(0, 0), rng);
  EXPECT_FALSE(r.collision);
  EXPECT_EQ(r.steps, 0);
  EXPECT_FALSE(r.collision_step.has_value());
}

TEST(Rollout, ClosingContactAtThreeSeconds) {
  for (const auto& [h, expect] : {std::pair{20, true}, std::pair{40, false}}) {
    Rng rng(3);
    const RolloutResult r = rollout(closing_scene(), 1, quiet(h, 100), rng);
    ASSERT_TRUE(r.collision_step.has_value());
    EXPECT_EQ(*r.collision_step, 30);
    EXPECT_EQ(r.collision, expect);
    EXPECT_TRUE(r.terminated_early);
    EXPECT_EQ(r.partner_id, 0);
  }
}

TEST(Rollout, EgoCollisionIsTerminal) {
  Rng rng(4);
  Trace trace;
  const RolloutResult r =
      rollout(closing_scene(), 1, quiet(0, 100), rng, &trace);
  EXPECT_TRUE(trace.terminated);
  EXPECT_EQ(trace.last_step, 30);
  int max_step = 0;
  for (const TraceRecord& t : trace.records) {
    max_step = std::max(max_step, t.step);
  }
  EXPECT_EQ(max_step, *r.collision_step);
  std::ostringstream os;
  write_trace_jsonl(trace, os);
  const std::string text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'),
            1 + static_cast<long>(trace.records.size()));
}

TEST(Rollout, NonEgoCollisionsContinue) {
  Scene s = closing_scene();
  // Ego far ahead of the colliding pair.
  Vehicle ego = car(2, 500.0, 25.0);
  ego.params.desired_velocity = 25.0;
  ego.params.p_inattentive_given_attentive = 0.0;
  s.vehicles.insert(s.vehicles.begin(), ego);
  Rng rng(5);
  Trace trace;
  const RolloutResult r = rollout(s, 0, quiet(0, 60), rng, &trace);
  EXPECT_FALSE(r.collision_step.has_value());
  EXPECT_FALSE(r.collision);
  EXPECT_EQ(r.steps, 60);
  bool saw_collided = false;
  for (const TraceRecord& t : trace.records) saw_collided |= t.collided;
  EXPECT_TRUE(saw_collided);
}

TEST(Rollout, CollisionAtStartIsImmediate) {
  Scene s = closing_scene();
  s.vehicles[1].position = 98.0;
  Rng rng(6);
  const RolloutResult r = rollout(s, 1, quiet(0, 100), rng);
  EXPECT_EQ(r.collision_step, 0);
  EXPECT_EQ(r.steps, 0);
  EXPECT_TRUE(r.collision);
}

TEST(Rollout, DeterministicGivenSeed) {
  Rng a(7), b(7);
  Rng scene_rng(8);
  RoadSpec road{1000.0, true, 1, 3.7};
  const Scene s = burn_in_scene(road, 30, 50, scene_rng);
  SimConfig c;
  for (std::size_t ego = 0; ego < 5; ++ego) {
    Trace ta, tb;
    const RolloutResult ra = rollout(s, ego, c, a, &ta);
    const RolloutResult rb = rollout(s, ego, c, b, &tb);
    EXPECT_EQ(ra.collision_step, rb.collision_step);
    ASSERT_EQ(ta.records.size(), tb.records.size());
    for (std::size_t k = 0; k < ta.records.size(); ++k) {
      ASSERT_EQ(ta.records[k].position, tb.records[k].position);
      ASSERT_EQ(ta.records[k].velocity, tb.records[k].velocity);
    }
  }
}

TEST(Rollout, CircularConservation) {
  Rng rng(9);
  RoadSpec road{600.0, true, 1, 3.7};
  const Scene s = burn_in_scene(road, 20, 0, rng);
  Trace trace;
  rollout(s, 3, SimConfig{}, rng, &trace);
  std::vector<int> per_step(trace.last_step + 1, 0);
  for (const TraceRecord& t : trace.records) {
    ASSERT_GE(t.position, 0.0);
    ASSERT_LT(t.position, 600.0);
    ++per_step[t.step];
  }
  for (int c : per_step) EXPECT_EQ(c, 20);
}

TEST(Rollout, AllMatchesPerEgoRollouts) {
  // Collided vehicles leave the simulation, so one shared rollout gives
  // the same first-collision step as per-ego rollouts with the same RNG.
  Rng scene_rng(10);
  RoadSpec road{500.0, true, 1, 3.7};
  const Scene s = burn_in_scene(road, 25, 100, scene_rng);
  SimConfig c;
  c.collision_start = 0;
  for (int rep = 0; rep < 5; ++rep) {
    Rng r0(100 + rep);
    const auto all = rollout_all(s, c, r0);
    for (std::size_t ego = 0; ego < s.size(); ++ego) {
      Rng r1(100 + rep);
      const RolloutResult r = rollout(s, ego, c, r1);
      EXPECT_EQ(r.collision_step, all[ego]) << "ego " << ego;
    }
  }
}

TEST(Rollout, LowTtcProbe) {
  // TTC is exactly 3 s at step 0 and 2.9 s after one step.
  SimConfig c = quiet(0, 60);
  LowTtcProbe probe;
  Rng rng(1);
  const auto first = rollout_all(closing_scene(), c, rng, &probe);
  ASSERT_TRUE(first[1].has_value());
  EXPECT_EQ(*first[1], 30);
  EXPECT_EQ(probe.first[1], 1);
  EXPECT_EQ(probe.first[0], 30);  // the leader is struck
  probe.start = 20;
  rollout_all(closing_scene(), c, rng, &probe);
  EXPECT_EQ(probe.first[1], 20);
  probe.start = 40;
  rollout_all(closing_scene(), c, rng, &probe);
  EXPECT_FALSE(probe.first[1].has_value());
  probe.start = 0;
  probe.threshold = 0.0;
  rollout_all(closing_scene(), c, rng, &probe);
  EXPECT_EQ(probe.first[1], 30);
}

TEST(Rollout, BrakingIsClamped) {
  Scene s;
  Vehicle lead = car(0, 100.0, 0.0);
  lead.params.desired_velocity = 0.0;
  s.vehicles = {lead, car(1, 100.0 - 4.5 - 20.0, 30.0)};
  for (double limit : {9.0, 100.0}) {
    SimConfig c = quiet(0, 30);
    c.errors = false;
    c.max_decel = limit;
    Rng rng(5);
    Trace trace;
    rollout(s, 1, c, rng, &trace);
    double hardest = 0.0;
    for (const TraceRecord& r : trace.records) {
      if (r.vehicle == 1) hardest = std::min(hardest, r.accel);
    }
    if (limit == 9.0) {
      EXPECT_DOUBLE_EQ(hardest, -9.0);
    } else {
      EXPECT_LT(hardest, -9.0);
    }
  }
  SimConfig bad;
  bad.max_decel = 0.0;
  EXPECT_THROW(bad.validate(), RangeError);
}

TEST(BurnIn, SingleVehicleCruises) {
  Rng rng(11);
  RoadSpec road{2000.0, true, 1, 3.7};
  const Scene s = burn_in_scene(road, 1, 600, rng);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_FALSE(s.vehicles[0].collided);
  EXPECT_GT(s.vehicles[0].velocity, 0.0);
}

TEST(BurnIn, ZeroStepsIsJitteredSpacing) {
  Rng rng(12);
  RoadSpec road{700.0, true, 1, 3.7};
  const Scene s = burn_in_scene(road, 70, 0, rng);
  ASSERT_EQ(s.size(), 70u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vehicle& v = s.vehicles[i];
    EXPECT_EQ(v.accel, 0.0);
    EXPECT_GE(v.velocity, 10.0);
    EXPECT_LE(v.velocity, 30.0);
    const double nominal = std::fmod((70.0 - i) * 10.0, 700.0);
    const double d = std::abs(std::remainder(v.position - nominal, 700.0));
    EXPECT_LE(d, 0.5 * (10.0 - 5.5 - 1.0) + 1e-9);
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto lead = find_leader(s, i);
    ASSERT_TRUE(lead.has_value());
    EXPECT_GT(bumper_gap(s.road, s.vehicles[i], s.vehicles[*lead]), 0.0);
  }
}

TEST(BurnIn, SeventyVehiclesSixHundredSteps) {
  Rng rng(13);
  RoadSpec road{2000.0, true, 1, 3.7};
  const Scene s = burn_in_scene(road, 70, 600, rng);
  ASSERT_EQ(s.size(), 70u);
  EXPECT_TRUE(detect_collisions(s).empty());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vehicle& v = s.vehicles[i];
    EXPECT_FALSE(v.collided);
    EXPECT_GE(v.position, 0.0);
    EXPECT_LT(v.position, 2000.0);
    const auto lead = find_leader(s, i);
    ASSERT_TRUE(lead.has_value());
    EXPECT_GT(bumper_gap(s.road, v, s.vehicles[*lead]), 0.0);
  }
  EXPECT_NO_THROW(check_finite(s));
}

TEST(BurnIn, PlacementInfeasible) {
  Rng rng(14);
  RoadSpec road{100.0, true, 1, 3.7};
  EXPECT_THROW(burn_in_scene(road, 20, 0, rng), PlacementError);
}

TEST(TtcConsistency, CollisionWithinOneStepOfZeroTtc) {
  Rng rng(15);
  Trace trace;
  const RolloutResult r =
      rollout(closing_scene(), 1, quiet(0, 100), rng, &trace);
  int first_zero = -1;
  for (const TraceRecord& t : trace.records) {
    if (t.vehicle != 1 || !t.has_leader) continue;
    const double ttc =
        time_to_collision(t.leader_gap, t.velocity - t.leader_velocity, 30.0);
    if (ttc <= 1e-6 && first_zero < 0) first_zero = t.step;
  }
  ASSERT_TRUE(r.collision_step.has_value());
  if (first_zero >= 0) {
    EXPECT_LE(std::abs(first_zero - *r.collision_step), 1);
  }
  EXPECT_EQ(label_low_ttc(trace, 1, 3.0, 0, 100), 1);
}

}  // namespace
}  // namespace crisk
