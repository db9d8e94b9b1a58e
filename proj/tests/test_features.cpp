// Copyright 2026 the petsig authors
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

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "petsig/conflicts.hpp"
#include "petsig/features.hpp"
#include "petsig/oracle.hpp"
#include "petsig/rng.hpp"
#include "petsig/signals.hpp"
#include "petsig/trajectory.hpp"
#include "support.hpp"

namespace {

constexpr petsig::SignalState kGreen = petsig::SignalState::green;
constexpr petsig::SignalState kYellow = petsig::SignalState::yellow;
constexpr petsig::SignalState kRedClear = petsig::SignalState::red_clearance;
constexpr petsig::SignalState kAllRed = petsig::SignalState::all_red;
constexpr petsig::SignalState kRed = petsig::SignalState::red;

petsig::TrackSample sample_at(double t, petsig::Point2 center, double heading,
                              double speed_mph, long long lane) {
  return {t,
          center,
          petsig::box_from_pose(center, 16.0, 6.0, heading),
          speed_mph,
          heading,
          lane};
}

petsig::VehicleTrack line_track(long long id, petsig::Point2 start,
                                petsig::Point2 vel, double heading,
                                double speed_mph, double t0, double t1,
                                double rate, long long lane) {
  petsig::VehicleTrack track;
  track.vehicle_id = id;
  const auto steps = static_cast<long long>(std::llround((t1 - t0) * rate));
  for (long long k = 0; k <= steps; ++k) {
    const double offset = static_cast<double>(k) / rate;
    const petsig::Point2 center{start.x + vel.x * offset,
                                start.y + vel.y * offset};
    track.samples.push_back(sample_at(t0 + offset, center, heading, speed_mph, lane));
  }
  return track;
}

/// Timeline from a run of (state, end) boundaries; each boundary double is
/// built once so adjacent intervals share it bit for bit.
petsig::PhaseTimeline make_timeline(
    int phase, const std::vector<std::pair<petsig::SignalState, double>>& spans,
    double t0) {
  petsig::PhaseTimeline timeline;
  timeline.phase = phase;
  double t = t0;
  for (const auto& [state, end] : spans) {
    timeline.intervals.push_back({phase, state, t, end});
    t = end;
  }
  return timeline;
}

petsig::SignalPlan micro_plan() {
  petsig::SignalPlan plan;
  plan.phases.push_back(make_timeline(2,
                                      {{kGreen, 30.0},
                                       {kYellow, 33.5},
                                       {kRedClear, 35.2},
                                       {kAllRed, 36.4},
                                       {kRed, 90.0}},
                                      0.0));
  plan.phases.push_back(make_timeline(6,
                                      {{kRed, 40.0},
                                       {kGreen, 70.0},
                                       {kYellow, 73.5},
                                       {kRedClear, 75.2},
                                       {kAllRed, 90.0}},
                                      0.0));
  return petsig::validate_signal_plan(plan);
}

petsig::SignalPlan volume_plan() {
  petsig::SignalPlan plan;
  plan.phases.push_back(make_timeline(2,
                                      {{kGreen, 295.0},
                                       {kYellow, 299.0},
                                       {kRedClear, 301.5},
                                       {kAllRed, 303.0},
                                       {kRed, 320.0}},
                                      0.0));
  return petsig::validate_signal_plan(plan);
}

petsig::SignalPlan cyclic_plan(int cycles) {
  std::vector<std::pair<petsig::SignalState, double>> p2;
  std::vector<std::pair<petsig::SignalState, double>> p4;
  for (int k = 0; k < cycles; ++k) {
    const double c = 20.0 * k;
    p2.push_back({kGreen, c + 8.0});
    p2.push_back({kYellow, c + 11.0});
    p2.push_back({kRedClear, c + 13.0});
    p2.push_back({kAllRed, c + 15.0});
    p2.push_back({kRed, c + 20.0});
    p4.push_back({kRed, c + 10.0});
    p4.push_back({kGreen, c + 14.0});
    p4.push_back({kYellow, c + 16.0});
    p4.push_back({kRedClear, c + 17.5});
    p4.push_back({kAllRed, c + 18.5});
    p4.push_back({kRed, c + 20.0});
  }
  petsig::SignalPlan plan;
  plan.phases.push_back(make_timeline(2, p2, 0.0));
  plan.phases.push_back(make_timeline(4, p4, 0.0));
  return petsig::validate_signal_plan(plan);
}

petsig::FeatureConfig micro_config() {
  petsig::FeatureConfig config;
  config.speed_limit_mph = 45.0;
  config.distance_cap_ft = 15.0;
  config.intersection_polygon = {{-20.0, -20.0}, {20.0, -20.0}, {20.0, 20.0},
                                 {-20.0, 20.0}};
  config.lane_movement = {{10, 1}, {30, 0}};
  config.phase_of_lane = {{10, 2}, {30, 6}};
  return config;
}

petsig::ConflictRecord record_of(long long leader, long long lagger,
                                 double t_enter, double t_leave, double pet,
                                 petsig::Point2 zone, long long lane,
                                 double speed, double heading) {
  petsig::ConflictRecord r;
  r.leader_id = leader;
  r.lagger_id = lagger;
  r.t_enter = t_enter;
  r.t_leave = t_leave;
  r.pet = pet;
  r.zone_center = zone;
  r.lagger_lane = lane;
  r.lagger_speed_mph = speed;
  r.lagger_heading_deg = heading;
  return r;
}

// Independent re-derivations used by the recount oracle. These favor linear
// scans and bin-edge tables over the library's search structures.

std::optional<int> level_formula(double pet) {
  const std::array<double, 6> edges{0.3, 1.0, 2.0, 3.0, 4.0, 5.0};
  if (pet < edges.front() || pet > edges.back()) {
    return std::nullopt;
  }
  for (int level = 1; level <= 4; ++level) {
    if (pet < edges[static_cast<std::size_t>(level)]) {
      return level;
    }
  }
  return 5;
}

const petsig::TrackSample* linear_nearest(
    const std::vector<petsig::TrackSample>& samples, double t) {
  const petsig::TrackSample* best = nullptr;
  double gap = std::numeric_limits<double>::infinity();
  for (const petsig::TrackSample& s : samples) {
    const double d = std::fabs(s.time - t);
    if (d < gap) {
      gap = d;
      best = &s;
    }
  }
  return best;
}

std::pair<petsig::SignalState, double> linear_state(
    const petsig::SignalPlan& plan, int phase, double t) {
  for (const petsig::PhaseTimeline& timeline : plan.phases) {
    if (timeline.phase != phase) {
      continue;
    }
    for (const petsig::PhaseInterval& iv : timeline.intervals) {
      if (iv.start <= t && t < iv.end) {
        return {iv.state, iv.end - t};
      }
    }
  }
  FAIL("no interval covers t=" << t << " for phase " << phase);
  return {kRed, 0.0};
}

std::array<int, 8> linear_indicators(const petsig::SignalPlan& plan, double t) {
  std::array<int, 8> flags{};
  for (const petsig::PhaseTimeline& timeline : plan.phases) {
    for (const petsig::PhaseInterval& iv : timeline.intervals) {
      if (iv.start <= t && t < iv.end && iv.state != kRed) {
        flags[static_cast<std::size_t>(timeline.phase - 1)] = 1;
      }
    }
  }
  return flags;
}

double countdown_field(const petsig::ObservationRow& row,
                       petsig::SignalState state) {
  switch (state) {
    case kGreen:
      return row.green;
    case kYellow:
      return row.yellow;
    case kRedClear:
      return row.red_clearance;
    case kAllRed:
      return row.all_red;
    case kRed:
      return row.red;
  }
  return -2.0;
}

using RowKey = std::tuple<long long, long long, double>;

/// Replays the assembly rules with independent lookups and checks every
/// record against the produced bundle and report.
void verify_assembly(const std::vector<petsig::ConflictRecord>& records,
                     const petsig::SignalPlan& plan,
                     const std::vector<petsig::VehicleTrack>& tracks,
                     const petsig::FeatureConfig& config,
                     const petsig::DatasetBundle& bundle,
                     const petsig::AssemblyReport& report) {
  REQUIRE(report.records_in == records.size());
  REQUIRE(report.rows_assembled + report.rejected() == report.records_in);

  std::map<RowKey, std::pair<petsig::SignalState, const petsig::ObservationRow*>>
      index;
  std::size_t total = 0;
  for (const petsig::SignalState state : petsig::kSignalStates) {
    const std::vector<petsig::ObservationRow>& rows = bundle.rows_for(state);
    total += rows.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const RowKey key{rows[i].leader_id, rows[i].lagger_id, rows[i].t_enter};
      REQUIRE(index.count(key) == 0);
      index[key] = {state, &rows[i]};
      if (i > 0) {
        const std::tuple<double, long long, long long> before{
            rows[i - 1].t_enter, rows[i - 1].leader_id, rows[i - 1].lagger_id};
        const std::tuple<double, long long, long long> current{
            rows[i].t_enter, rows[i].leader_id, rows[i].lagger_id};
        REQUIRE(before < current);
      }
    }
  }
  REQUIRE(total == report.rows_assembled);

  petsig::AssemblyReport tally;
  tally.records_in = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const petsig::ConflictRecord& record = records[i];
    INFO("record " << i << " pair " << record.leader_id << ":"
                   << record.lagger_id << " t_enter " << record.t_enter);
    const RowKey key{record.leader_id, record.lagger_id, record.t_enter};
    const std::optional<int> level = level_formula(record.pet);
    if (!level.has_value()) {
      record.pet < 0.3 ? ++tally.below_pet_floor : ++tally.above_pet_cap;
      REQUIRE(index.count(key) == 0);
      continue;
    }
    const auto phase_it = config.phase_of_lane.find(record.lagger_lane);
    if (phase_it == config.phase_of_lane.end()) {
      ++tally.lane_without_phase;
      REQUIRE(index.count(key) == 0);
      continue;
    }
    if (record.t_enter < plan.horizon_start ||
        record.t_enter >= plan.horizon_end) {
      ++tally.outside_plan_horizon;
      REQUIRE(index.count(key) == 0);
      continue;
    }
    const petsig::VehicleTrack* leader = nullptr;
    const petsig::VehicleTrack* lagger = nullptr;
    for (const petsig::VehicleTrack& track : tracks) {
      if (track.vehicle_id == record.leader_id) {
        leader = &track;
      }
      if (track.vehicle_id == record.lagger_id) {
        lagger = &track;
      }
    }
    if (leader == nullptr || lagger == nullptr) {
      ++tally.unknown_vehicle;
      REQUIRE(index.count(key) == 0);
      continue;
    }
    const bool inside =
        petsig::point_in_polygon(record.zone_center, config.intersection_polygon);
    int movement = petsig::kMovementAtIntersection;
    if (!inside) {
      const auto move_it = config.lane_movement.find(record.lagger_lane);
      if (move_it == config.lane_movement.end()) {
        ++tally.lane_without_movement;
        REQUIRE(index.count(key) == 0);
        continue;
      }
      movement = move_it->second;
    }
    ++tally.rows_assembled;

    const auto [state, remaining] =
        linear_state(plan, phase_it->second, record.t_enter);
    const auto found = index.find(key);
    REQUIRE(found != index.end());
    CHECK(found->second.first == state);
    const petsig::ObservationRow& row = *found->second.second;

    CHECK(row.pet_level == *level);
    CHECK(row.pet_level >= 1);
    CHECK(row.pet_level <= 5);

    const petsig::TrackSample* lead_enter =
        linear_nearest(leader->samples, record.t_enter);
    const petsig::TrackSample* lag_enter =
        linear_nearest(lagger->samples, record.t_enter);
    const petsig::TrackSample* lead_leave =
        linear_nearest(leader->samples, record.t_leave);
    REQUIRE(lead_enter != nullptr);
    REQUIRE(lag_enter != nullptr);
    REQUIRE(lead_leave != nullptr);
    CHECK(row.distance ==
          std::min(petsig::boundary_distance(lead_enter->box, lag_enter->box),
                   config.distance_cap_ft));
    CHECK(row.distance >= 0.0);
    CHECK(row.distance <= config.distance_cap_ft);

    int active_fields = 0;
    for (const petsig::SignalState s : petsig::kSignalStates) {
      const double value = countdown_field(row, s);
      if (s == state) {
        CHECK(value == remaining);
        CHECK(value > 0.0);
        ++active_fields;
      } else {
        CHECK(value == -1.0);
      }
    }
    CHECK(active_fields == 1);

    CHECK(row.phase == linear_indicators(plan, record.t_enter));
    CHECK(row.speed == record.lagger_speed_mph);
    CHECK(row.heading == record.lagger_heading_deg);
    CHECK(row.lane == record.lagger_lane);
    CHECK(row.volume == petsig::volume_5min(tracks, record.t_enter));
    CHECK(row.intersection == (inside ? 1 : 0));
    CHECK(row.movement == movement);
    CHECK((row.movement == 0 || row.movement == 1 || row.movement == 2));
    CHECK(row.speeding_prop ==
          (lead_leave->speed_mph - config.speed_limit_mph) /
              config.speed_limit_mph);
    CHECK(row.speeding_prop >= -1.0);
  }
  CHECK(tally.rows_assembled == report.rows_assembled);
  CHECK(tally.below_pet_floor == report.below_pet_floor);
  CHECK(tally.above_pet_cap == report.above_pet_cap);
  CHECK(tally.lane_without_phase == report.lane_without_phase);
  CHECK(tally.lane_without_movement == report.lane_without_movement);
  CHECK(tally.outside_plan_horizon == report.outside_plan_horizon);
  CHECK(tally.unknown_vehicle == report.unknown_vehicle);
}

void require_same_bundle(const petsig::DatasetBundle& a,
                         const petsig::DatasetBundle& b) {
  for (const petsig::SignalState state : petsig::kSignalStates) {
    INFO("dataset " << petsig::state_label(state));
    REQUIRE(a.rows_for(state) == b.rows_for(state));
  }
}

}  // namespace

TEST_CASE("pet level bins") {
  CHECK(petsig::pet_level(0.5) == 1);
  CHECK(petsig::pet_level(4.97) == 5);
  CHECK(petsig::pet_level(1.0) == 2);

  CHECK(petsig::pet_level(0.3) == 1);
  CHECK(petsig::pet_level(0.999) == 1);
  CHECK(petsig::pet_level(1.999) == 2);
  CHECK(petsig::pet_level(2.0) == 3);
  CHECK(petsig::pet_level(3.0) == 4);
  CHECK(petsig::pet_level(3.999) == 4);
  CHECK(petsig::pet_level(4.0) == 5);
  CHECK(petsig::pet_level(5.0) == 5);

  CHECK_FALSE(petsig::pet_level(0.299).has_value());
  CHECK_FALSE(petsig::pet_level(0.1).has_value());
  CHECK_FALSE(petsig::pet_level(5.0001).has_value());
  CHECK_FALSE(petsig::pet_level(12.0).has_value());

  CHECK_THROWS_AS(petsig::pet_level(0.0), std::invalid_argument);
  CHECK_THROWS_AS(petsig::pet_level(-1.0), std::invalid_argument);

  petsig::Rng rng(4242);
  for (int i = 0; i < 2000; ++i) {
    const double pet = rng.uniform(0.01, 6.0);
    const std::optional<int> got = petsig::pet_level(pet);
    const std::optional<int> want = level_formula(pet);
    CHECK(got == want);
  }
}

TEST_CASE("speeding proportion") {
  CHECK(petsig::speeding_proportion(45.0, 45.0) == 0.0);
  CHECK(petsig::speeding_proportion(30.0, 45.0) == (30.0 - 45.0) / 45.0);
  CHECK(std::fabs(petsig::speeding_proportion(30.0, 45.0) - (-0.3333)) < 1e-4);
  CHECK(petsig::speeding_proportion(0.0, 45.0) == -1.0);
  CHECK(petsig::speeding_proportion(60.0, 45.0) == (60.0 - 45.0) / 45.0);

  CHECK_THROWS_AS(petsig::speeding_proportion(30.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(petsig::speeding_proportion(30.0, -5.0), std::invalid_argument);

  petsig::Rng rng(909);
  for (int i = 0; i < 2000; ++i) {
    const double speed = rng.uniform(0.0, 100.0);
    const double limit = rng.uniform(1.0, 80.0);
    CHECK(petsig::speeding_proportion(speed, limit) >= -1.0);
  }
}

TEST_CASE("volume per fixed five minute bin") {
  SECTION("no tracks") {
    const std::vector<petsig::VehicleTrack> none;
    CHECK(petsig::volume_5min(none, 0.0) == 0);
    CHECK(petsig::volume_5min(none, 777.0) == 0);
    const petsig::VolumeCounter counter(none);
    CHECK(counter.count_at(10.0) == 0);
  }

  SECTION("one vehicle spanning two bins counts once per bin") {
    const std::vector<petsig::VehicleTrack> tracks{
        line_track(7, {0.0, 0.0}, {30.0, 0.0}, 90.0, 20.0, 290.0, 310.0, 3.0, 10)};
    const petsig::VolumeCounter counter(tracks);
    CHECK(counter.count_at(295.0) == 1);
    CHECK(counter.count_at(305.0) == 1);
    CHECK(counter.count_at(601.0) == 0);
    CHECK(petsig::volume_5min(tracks, 295.0) == 1);
    CHECK(petsig::volume_5min(tracks, 305.0) == 1);
    CHECK(petsig::volume_5min(tracks, 601.0) == 0);
  }

  SECTION("bin boundaries use floor semantics") {
    const std::vector<petsig::VehicleTrack> tracks{
        line_track(1, {0.0, 0.0}, {0.0, 0.0}, 0.0, 0.0, 299.0, 300.0, 1.0, 10)};
    const petsig::VolumeCounter counter(tracks);
    CHECK(counter.bin_of(299.999) == 0);
    CHECK(counter.bin_of(300.0) == 1);
    CHECK(counter.count_at(299.999) == 1);
    CHECK(counter.count_at(300.0) == 1);
  }

  SECTION("random arrivals match the direct recount") {
    petsig::Rng rng(5151);
    std::vector<petsig::VehicleTrack> tracks;
    for (long long id = 1; id <= 40; ++id) {
      const double t0 = rng.uniform(0.0, 2500.0);
      const double t1 = t0 + rng.uniform(5.0, 400.0);
      tracks.push_back(line_track(id, {rng.uniform(-500.0, 500.0), 0.0},
                                  {20.0, 0.0}, 90.0, 15.0, t0, t1, 1.0, 10));
    }
    const petsig::VolumeCounter counter(tracks);
    for (int q = 0; q < 200; ++q) {
      const double t = rng.uniform(0.0, 3000.0);
      CHECK(counter.count_at(t) == petsig::volume_5min(tracks, t));
    }
    for (double t = 0.0; t <= 3000.0; t += 300.0) {
      CHECK(counter.count_at(t) == petsig::volume_5min(tracks, t));
    }
  }

  SECTION("custom bin width") {
    const std::vector<petsig::VehicleTrack> tracks{
        line_track(3, {0.0, 0.0}, {10.0, 0.0}, 90.0, 7.0, 50.0, 130.0, 1.0, 10)};
    const petsig::VolumeCounter counter(tracks, 60.0);
    CHECK(counter.count_at(55.0) == 1);
    CHECK(counter.count_at(125.0) == 1);
    CHECK(counter.count_at(185.0) == 0);
  }

  SECTION("bad bin width") {
    const std::vector<petsig::VehicleTrack> none;
    CHECK_THROWS_AS(petsig::VolumeCounter(none, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(petsig::VolumeCounter(none, -60.0), std::invalid_argument);
  }
}

TEST_CASE("assembly worked example") {
  const petsig::SignalPlan plan = micro_plan();
  const petsig::FeatureConfig config = micro_config();

  petsig::VehicleTrack leader;
  leader.vehicle_id = 1;
  leader.samples.push_back(sample_at(29.0, {0.0, 10.0}, 0.0, 30.0, 10));
  leader.samples.push_back(sample_at(31.0, {0.0, 30.0}, 0.0, 32.0, 10));
  petsig::VehicleTrack lagger;
  lagger.vehicle_id = 2;
  lagger.samples.push_back(sample_at(31.0, {0.0, 10.0}, 0.0, 20.0, 10));
  petsig::VehicleTrack crosser;
  crosser.vehicle_id = 3;
  crosser.samples.push_back(sample_at(31.0, {0.0, 80.0}, 0.0, 22.0, 30));
  const std::vector<petsig::VehicleTrack> tracks{leader, lagger, crosser};

  const std::vector<petsig::ConflictRecord> records{
      record_of(1, 2, 31.0, 29.0, 2.0, {0.0, 10.0}, 10, 20.0, 90.0),
      record_of(1, 2, 10.0, 7.5, 2.5, {0.0, 5.0}, 10, 18.0, 90.0),
      record_of(1, 3, 31.0, 29.5, 1.5, {0.0, 50.0}, 30, 22.0, 90.0)};

  petsig::AssemblyReport report;
  const petsig::DatasetBundle bundle =
      petsig::assemble_observations(records, plan, tracks, config, &report);

  CHECK(report.records_in == 3);
  CHECK(report.rows_assembled == 3);
  CHECK(report.rejected() == 0);
  REQUIRE(bundle.yellow.size() == 1);
  REQUIRE(bundle.green.size() == 1);
  REQUIRE(bundle.red.size() == 1);
  CHECK(bundle.red_clearance.empty());
  CHECK(bundle.all_red.empty());

  petsig::ObservationRow want;
  want.leader_id = 1;
  want.lagger_id = 2;
  want.t_enter = 31.0;
  want.pet_level = 3;
  want.distance = 4.0;
  want.yellow = 2.5;
  want.phase = {0, 1, 0, 0, 0, 0, 0, 0};
  want.speed = 20.0;
  want.heading = 90.0;
  want.lane = 10;
  want.volume = 3;
  want.intersection = 1;
  want.speeding_prop = (30.0 - 45.0) / 45.0;
  want.movement = 2;
  CHECK(bundle.yellow.front() == want);

  want.t_enter = 10.0;
  want.distance = 0.0;
  want.yellow = -1.0;
  want.green = 20.0;
  want.speed = 18.0;
  CHECK(bundle.green.front() == want);

  petsig::ObservationRow crossing;
  crossing.leader_id = 1;
  crossing.lagger_id = 3;
  crossing.t_enter = 31.0;
  crossing.pet_level = 2;
  crossing.distance = 15.0;
  crossing.red = 9.0;
  crossing.phase = {0, 1, 0, 0, 0, 0, 0, 0};
  crossing.speed = 22.0;
  crossing.heading = 90.0;
  crossing.lane = 30;
  crossing.volume = 3;
  crossing.intersection = 0;
  crossing.speeding_prop = (30.0 - 45.0) / 45.0;
  crossing.movement = 0;
  CHECK(bundle.red.front() == crossing);

  verify_assembly(records, plan, tracks, config, bundle, report);
}

TEST_CASE("assembly rejection accounting") {
  const petsig::SignalPlan plan = micro_plan();
  petsig::FeatureConfig config = micro_config();
  config.phase_of_lane[77] = 2;

  petsig::VehicleTrack leader;
  leader.vehicle_id = 1;
  leader.samples.push_back(sample_at(29.0, {0.0, 10.0}, 0.0, 30.0, 10));
  petsig::VehicleTrack lagger;
  lagger.vehicle_id = 2;
  lagger.samples.push_back(sample_at(31.0, {0.0, 40.0}, 0.0, 20.0, 10));
  const std::vector<petsig::VehicleTrack> tracks{leader, lagger};

  const std::vector<petsig::ConflictRecord> records{
      record_of(1, 2, 31.0, 30.8, 0.2, {0.0, 10.0}, 10, 20.0, 90.0),
      record_of(1, 2, 31.0, 25.5, 5.5, {0.0, 10.0}, 10, 20.0, 90.0),
      record_of(1, 2, 31.0, 29.0, 2.0, {0.0, 10.0}, 99, 20.0, 90.0),
      record_of(1, 2, 31.0, 29.0, 2.0, {0.0, 50.0}, 77, 20.0, 90.0),
      record_of(1, 2, 32.0, 31.0, 1.0, {0.0, 10.0}, 77, 20.0, 90.0),
      record_of(1, 2, 95.0, 93.0, 2.0, {0.0, 10.0}, 10, 20.0, 90.0),
      record_of(1, 2, -0.5, -1.5, 1.0, {0.0, 10.0}, 10, 20.0, 90.0),
      record_of(42, 2, 31.0, 29.0, 2.0, {0.0, 10.0}, 10, 20.0, 90.0),
      record_of(1, 43, 31.0, 29.0, 2.0, {0.0, 10.0}, 10, 20.0, 90.0)};

  petsig::AssemblyReport report;
  const petsig::DatasetBundle bundle =
      petsig::assemble_observations(records, plan, tracks, config, &report);

  CHECK(report.records_in == 9);
  CHECK(report.rows_assembled == 1);
  CHECK(report.below_pet_floor == 1);
  CHECK(report.above_pet_cap == 1);
  CHECK(report.lane_without_phase == 1);
  CHECK(report.lane_without_movement == 1);
  CHECK(report.outside_plan_horizon == 2);
  CHECK(report.unknown_vehicle == 2);
  CHECK(report.rejected() == 8);
  CHECK(bundle.total() == 1);
  REQUIRE(bundle.yellow.size() == 1);
  CHECK(bundle.yellow.front().movement == petsig::kMovementAtIntersection);
  CHECK(bundle.yellow.front().lane == 77);

  verify_assembly(records, plan, tracks, config, bundle, report);

  SECTION("non-positive pet is corrupt data") {
    const std::vector<petsig::ConflictRecord> bad{
        record_of(1, 2, 31.0, 31.0, 0.0, {0.0, 10.0}, 10, 20.0, 90.0)};
    CHECK_THROWS_AS(
        petsig::assemble_observations(bad, plan, tracks, config, nullptr),
        petsig::DataError);
  }

  SECTION("mapped phase missing from the plan") {
    petsig::FeatureConfig broken = micro_config();
    broken.phase_of_lane[10] = 3;
    CHECK_THROWS_AS(
        petsig::assemble_observations(records, plan, tracks, broken, nullptr),
        petsig::ConfigError);
  }
}

TEST_CASE("feature config validation") {
  SECTION("good config round trips through json") {
    const petsig::FeatureConfig config = micro_config();
    const petsig::FeatureConfig back =
        petsig::feature_config_from_json(petsig::feature_config_to_json(config));
    CHECK(back.speed_limit_mph == config.speed_limit_mph);
    CHECK(back.distance_cap_ft == config.distance_cap_ft);
    REQUIRE(back.intersection_polygon.size() ==
            config.intersection_polygon.size());
    for (std::size_t i = 0; i < config.intersection_polygon.size(); ++i) {
      CHECK(back.intersection_polygon[i].x == config.intersection_polygon[i].x);
      CHECK(back.intersection_polygon[i].y == config.intersection_polygon[i].y);
    }
    CHECK(back.lane_movement == config.lane_movement);
    CHECK(back.phase_of_lane == config.phase_of_lane);
  }

  SECTION("rejects bad values") {
    petsig::FeatureConfig config = micro_config();
    config.speed_limit_mph = 0.0;
    CHECK_THROWS_AS(petsig::validate_feature_config(config), petsig::ConfigError);

    config = micro_config();
    config.distance_cap_ft = -1.0;
    CHECK_THROWS_AS(petsig::validate_feature_config(config), petsig::ConfigError);

    config = micro_config();
    config.intersection_polygon = {{0.0, 0.0}, {1.0, 0.0}};
    CHECK_THROWS_AS(petsig::validate_feature_config(config), petsig::ConfigError);

    config = micro_config();
    config.lane_movement[40] = 2;
    CHECK_THROWS_AS(petsig::validate_feature_config(config), petsig::ConfigError);

    config = micro_config();
    config.phase_of_lane[40] = 0;
    CHECK_THROWS_AS(petsig::validate_feature_config(config), petsig::ConfigError);

    config = micro_config();
    config.phase_of_lane[40] = 9;
    CHECK_THROWS_AS(petsig::validate_feature_config(config), petsig::ConfigError);
  }

  SECTION("file parsing errors") {
    CHECK_THROWS_AS(
        petsig::parse_feature_config(
            (testsup::temp_dir() / "no_such_config.json").string()),
        petsig::IoError);
    const std::string garbled =
        testsup::write_file("features_garbled.json", "not json at all");
    CHECK_THROWS_AS(petsig::parse_feature_config(garbled), petsig::ConfigError);
    const std::string missing = testsup::write_file(
        "features_missing_key.json", R"({"intersection_polygon": []})");
    CHECK_THROWS_AS(petsig::parse_feature_config(missing), petsig::ConfigError);
  }
}

TEST_CASE("assembly across volume bins") {
  const double speed_mph = 30.0 * 3600.0 / 5280.0;
  const std::vector<petsig::VehicleTrack> tracks{
      line_track(1, {0.0, 0.0}, {30.0, 0.0}, 90.0, speed_mph, 290.0, 310.0, 3.0,
                 10),
      line_track(2, {-60.0, 0.0}, {30.0, 0.0}, 90.0, speed_mph, 290.0, 310.0,
                 3.0, 10),
      line_track(9, {500.0, 500.0}, {0.0, 0.0}, 0.0, 0.0, 295.0, 299.0, 3.0,
                 10)};

  const petsig::DetectResult detected = petsig::detect_conflicts(tracks, 5.0);
  REQUIRE(detected.records.size() > 20);
  CHECK(detected.overlap_events == 0);

  const petsig::SignalPlan plan = volume_plan();
  petsig::FeatureConfig config = micro_config();
  // Single-phase plan, one corridor: map only lane 10 and park the polygon
  // far from every zone center.
  config.phase_of_lane = {{10, 2}};
  config.intersection_polygon = {{900.0, 900.0}, {1000.0, 900.0},
                                 {1000.0, 1000.0}, {900.0, 1000.0}};
  petsig::AssemblyReport report;
  const petsig::DatasetBundle bundle = petsig::assemble_observations(
      detected.records, plan, tracks, config, &report);

  CHECK(report.rows_assembled == detected.records.size());
  CHECK(report.rejected() == 0);
  CHECK_FALSE(bundle.green.empty());
  CHECK_FALSE(bundle.yellow.empty());
  CHECK_FALSE(bundle.red_clearance.empty());
  CHECK_FALSE(bundle.all_red.empty());
  CHECK_FALSE(bundle.red.empty());

  for (const petsig::SignalState state : petsig::kSignalStates) {
    for (const petsig::ObservationRow& row : bundle.rows_for(state)) {
      INFO("t_enter " << row.t_enter);
      CHECK(row.volume == (row.t_enter < 300.0 ? 3 : 2));
      CHECK(row.movement == petsig::kMovementThrough);
      CHECK(row.intersection == 0);
    }
  }

  verify_assembly(detected.records, plan, tracks, config, bundle, report);

  petsig::FeatureConfig threaded = config;
  threaded.threads = 3;
  petsig::AssemblyReport threaded_report;
  const petsig::DatasetBundle threaded_bundle = petsig::assemble_observations(
      detected.records, plan, tracks, threaded, &threaded_report);
  require_same_bundle(bundle, threaded_bundle);
  CHECK(threaded_report.rows_assembled == report.rows_assembled);
}

TEST_CASE("assembly matches direct recount on random scenes") {
  for (const unsigned seed : {3U, 7U, 11U}) {
    DYNAMIC_SECTION("seed " << seed) {
      petsig::Rng rng(seed * 1303 + 7);
      const std::size_t count = 4 + rng.below(5);
      const std::vector<petsig::VehicleTrack> tracks =
          petsig::oracle::random_crossing_scene(rng, count, false);
      const petsig::DetectResult detected = petsig::detect_conflicts(tracks, 5.0);
      REQUIRE_FALSE(detected.records.empty());

      double max_time = 0.0;
      for (const petsig::VehicleTrack& track : tracks) {
        max_time = std::max(max_time, track.samples.back().time);
      }
      const petsig::SignalPlan plan =
          cyclic_plan(static_cast<int>(max_time / 20.0) + 1);

      petsig::FeatureConfig config;
      config.speed_limit_mph = 45.0;
      config.intersection_polygon = {{-12.0, -12.0}, {12.0, -12.0},
                                     {12.0, 12.0},  {-12.0, 12.0}};
      config.lane_movement = {{10, 1}, {30, 0}};
      config.phase_of_lane = {{10, 2}, {30, 4}};

      petsig::AssemblyReport report;
      const petsig::DatasetBundle bundle = petsig::assemble_observations(
          detected.records, plan, tracks, config, &report);
      verify_assembly(detected.records, plan, tracks, config, bundle, report);

      petsig::FeatureConfig threaded = config;
      threaded.threads = 4;
      petsig::AssemblyReport threaded_report;
      const petsig::DatasetBundle threaded_bundle = petsig::assemble_observations(
          detected.records, plan, tracks, threaded, &threaded_report);
      require_same_bundle(bundle, threaded_bundle);
      CHECK(threaded_report.rows_assembled == report.rows_assembled);
      CHECK(threaded_report.rejected() == report.rejected());

      // Dropping one record leaves every other row untouched.
      std::vector<petsig::ConflictRecord> reduced = detected.records;
      const std::size_t dropped = reduced.size() / 2;
      const petsig::ConflictRecord removed = reduced[dropped];
      reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(dropped));
      const petsig::DatasetBundle partial = petsig::assemble_observations(
          reduced, plan, tracks, config, nullptr);
      for (const petsig::SignalState state : petsig::kSignalStates) {
        std::vector<petsig::ObservationRow> kept;
        for (const petsig::ObservationRow& row : bundle.rows_for(state)) {
          if (row.leader_id == removed.leader_id &&
              row.lagger_id == removed.lagger_id &&
              row.t_enter == removed.t_enter) {
            continue;
          }
          kept.push_back(row);
        }
        REQUIRE(partial.rows_for(state) == kept);
      }
    }
  }
}

TEST_CASE("observation csv round trip") {
  const double speed_mph = 30.0 * 3600.0 / 5280.0;
  const std::vector<petsig::VehicleTrack> tracks{
      line_track(1, {0.0, 0.0}, {30.0, 0.0}, 90.0, speed_mph, 290.0, 310.0, 3.0,
                 10),
      line_track(2, {-60.0, 0.0}, {30.0, 0.0}, 90.0, speed_mph, 290.0, 310.0,
                 3.0, 10)};
  const petsig::DetectResult detected = petsig::detect_conflicts(tracks, 5.0);
  petsig::FeatureConfig config = micro_config();
  config.phase_of_lane = {{10, 2}};
  const petsig::DatasetBundle bundle = petsig::assemble_observations(
      detected.records, volume_plan(), tracks, config, nullptr);
  REQUIRE(bundle.total() == detected.records.size());

  SECTION("rows survive bitwise") {
    for (const petsig::SignalState state : petsig::kSignalStates) {
      const std::vector<petsig::ObservationRow>& rows = bundle.rows_for(state);
      const std::string path =
          (testsup::temp_dir() /
           ("obs_rt_" + std::string(petsig::state_label(state)) + ".csv"))
              .string();
      petsig::write_observations(path, rows, {"config=cafe"});
      const std::vector<petsig::ObservationRow> back =
          petsig::read_observations(path);
      REQUIRE(back == rows);

      std::ifstream in(path);
      std::string first;
      std::getline(in, first);
      CHECK(first == "# config=cafe");
    }
  }

  SECTION("schema errors") {
    const std::string missing = testsup::write_file(
        "obs_missing.csv", "pair_id,t_enter,pet_level\n1:2,0,3\n");
    CHECK_THROWS_AS(petsig::read_observations(missing), petsig::DataError);

    std::string header = "pair_id";
    for (std::size_t i = 1; i < petsig::observation_columns().size(); ++i) {
      header += ",";
      header += petsig::observation_columns()[i];
    }
    const std::string bad_pair = testsup::write_file(
        "obs_bad_pair.csv",
        header + "\n12,0,3,1,-1,-1,-1,2.5,-1,0,1,0,0,0,0,0,0,20,90,10,3,1,-0.3,2\n");
    CHECK_THROWS_AS(petsig::read_observations(bad_pair), petsig::DataError);

    const std::string bad_number = testsup::write_file(
        "obs_bad_number.csv",
        header + "\n1:2,0,3,x,-1,-1,-1,2.5,-1,0,1,0,0,0,0,0,0,20,90,10,3,1,-0.3,2\n");
    CHECK_THROWS_AS(petsig::read_observations(bad_number), petsig::DataError);
  }

  SECTION("dataset directory with sidecar") {
    const std::string dir = (testsup::temp_dir() / "dataset_out").string();
    petsig::write_dataset(dir, bundle, config, "beef");
    for (const petsig::SignalState state : petsig::kSignalStates) {
      const std::string path =
          (std::filesystem::path(dir) /
           (std::string(petsig::state_label(state)) + ".csv"))
              .string();
      REQUIRE(std::filesystem::exists(path));
      CHECK(petsig::read_observations(path) == bundle.rows_for(state));
    }
    std::ifstream side((std::filesystem::path(dir) / "dataset.json").string());
    REQUIRE(side.good());
    nlohmann::json doc;
    side >> doc;
    CHECK(doc.at("config_digest").get<std::string>() == "beef");
    CHECK(doc.at("pet_level_floor").get<double>() == 0.3);
    CHECK(doc.at("pet_level_cap").get<double>() == 5.0);
    CHECK(doc.at("volume_bin_seconds").get<double>() == 300.0);
    CHECK(doc.at("config").at("speed_limit_mph").get<double>() == 45.0);
    CHECK(doc.at("config").at("intersection_polygon").size() == 4);
    CHECK(doc.at("config").at("lane_movement").at("10").get<int>() == 1);
    CHECK(doc.at("config").at("phase_of_lane").at("10").get<int>() == 2);
    for (const petsig::SignalState state : petsig::kSignalStates) {
      CHECK(doc.at("rows").at(petsig::state_label(state)).get<std::size_t>() ==
            bundle.rows_for(state).size());
    }
  }
}
