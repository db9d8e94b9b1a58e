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

// Observation assembly. Conflict records are joined with the signal plan and
// the source trajectories into modeling rows, then routed into one dataset
// per signal state of the conflict's governing phase.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "petsig/conflicts.hpp"
#include "petsig/csv.hpp"
#include "petsig/errors.hpp"
#include "petsig/geometry.hpp"
#include "petsig/parallel.hpp"
#include "petsig/signals.hpp"
#include "petsig/trajectory.hpp"
#include "petsig/util.hpp"

namespace petsig {

// Recording floor and cap for the ordinal severity response.
inline constexpr double kPetLevelFloor = 0.3;
inline constexpr double kPetLevelCap = 5.0;

inline constexpr double kVolumeBinSeconds = 300.0;

inline constexpr int kMovementLeftTurn = 0;
inline constexpr int kMovementThrough = 1;
inline constexpr int kMovementAtIntersection = 2;

/// Severity level of a pet value. Levels cover [0.3, 1), [1, 2), [2, 3),
/// [3, 4) and [4, 5]; values below the recording floor or above the cap are
/// rejected rather than clamped.
inline std::optional<int> pet_level(double pet) {
  if (!(pet > 0.0)) {
    throw std::invalid_argument("pet must be positive");
  }
  if (pet < kPetLevelFloor || pet > kPetLevelCap) {
    return std::nullopt;
  }
  if (pet < 1.0) {
    return 1;
  }
  if (pet >= 4.0) {
    return 5;
  }
  return static_cast<int>(std::floor(pet)) + 1;
}

/// Fraction of the limit by which a vehicle exceeds it; negative when below.
inline double speeding_proportion(double speed_mph, double limit_mph) {
  if (!(limit_mph > 0.0)) {
    throw std::invalid_argument("speed limit must be positive");
  }
  return (speed_mph - limit_mph) / limit_mph;
}

/// Distinct-vehicle counts per fixed time bin anchored at t = 0.
class VolumeCounter {
public:
  VolumeCounter() = default;

  explicit VolumeCounter(const std::vector<VehicleTrack>& tracks,
                         double bin_seconds = kVolumeBinSeconds)
      : bin_seconds_(bin_seconds) {
    if (!(bin_seconds_ > 0.0)) {
      throw std::invalid_argument("volume bin width must be positive");
    }
    std::map<long long, std::set<long long>> seen;
    for (const VehicleTrack& track : tracks) {
      for (const TrackSample& sample : track.samples) {
        seen[bin_of(sample.time)].insert(track.vehicle_id);
      }
    }
    for (const auto& [bin, ids] : seen) {
      counts_[bin] = static_cast<long long>(ids.size());
    }
  }

  long long bin_of(double t) const {
    return static_cast<long long>(std::floor(t / bin_seconds_));
  }

  long long count_at(double t) const {
    const auto it = counts_.find(bin_of(t));
    return it == counts_.end() ? 0 : it->second;
  }

  double bin_seconds() const { return bin_seconds_; }

private:
  double bin_seconds_ = kVolumeBinSeconds;
  std::map<long long, long long> counts_;
};

/// Direct scan form of the same count; one query, no precomputation.
inline long long volume_5min(const std::vector<VehicleTrack>& tracks, double t) {
  const auto bin = static_cast<long long>(std::floor(t / kVolumeBinSeconds));
  std::set<long long> ids;
  for (const VehicleTrack& track : tracks) {
    for (const TrackSample& sample : track.samples) {
      if (static_cast<long long>(std::floor(sample.time / kVolumeBinSeconds)) ==
          bin) {
        ids.insert(track.vehicle_id);
        break;
      }
    }
  }
  return static_cast<long long>(ids.size());
}

/// One modeled observation. Countdown fields hold the remaining seconds of
/// the governing phase's state when that state is the active one and -1
/// otherwise.
struct ObservationRow {
  long long leader_id = 0;
  long long lagger_id = 0;
  double t_enter = 0.0;
  int pet_level = 0;
  double distance = 0.0;
  double red_clearance = -1.0;
  double all_red = -1.0;
  double red = -1.0;
  double yellow = -1.0;
  double green = -1.0;
  std::array<int, 8> phase{};
  double speed = 0.0;
  double heading = 0.0;
  long long lane = 0;
  long long volume = 0;
  int intersection = 0;
  double speeding_prop = 0.0;
  int movement = 0;
};

inline bool operator==(const ObservationRow& a, const ObservationRow& b) {
  return a.leader_id == b.leader_id && a.lagger_id == b.lagger_id &&
         a.t_enter == b.t_enter && a.pet_level == b.pet_level &&
         a.distance == b.distance && a.red_clearance == b.red_clearance &&
         a.all_red == b.all_red && a.red == b.red && a.yellow == b.yellow &&
         a.green == b.green && a.phase == b.phase && a.speed == b.speed &&
         a.heading == b.heading && a.lane == b.lane && a.volume == b.volume &&
         a.intersection == b.intersection &&
         a.speeding_prop == b.speeding_prop && a.movement == b.movement;
}

inline bool operator!=(const ObservationRow& a, const ObservationRow& b) {
  return !(a == b);
}

struct FeatureConfig {
  double speed_limit_mph = 45.0;
  double distance_cap_ft = 15.0;
  std::vector<Point2> intersection_polygon;
  std::map<long long, int> lane_movement;
  std::map<long long, int> phase_of_lane;
  int threads = 1;
};

inline void validate_feature_config(const FeatureConfig& config) {
  if (!(config.speed_limit_mph > 0.0)) {
    throw ConfigError("speed limit must be positive");
  }
  if (!(config.distance_cap_ft > 0.0)) {
    throw ConfigError("distance cap must be positive");
  }
  if (config.intersection_polygon.size() < 3) {
    throw ConfigError("intersection polygon needs at least 3 vertices");
  }
  for (const auto& [lane, movement] : config.lane_movement) {
    if (movement != kMovementLeftTurn && movement != kMovementThrough) {
      throw ConfigError("lane " + std::to_string(lane) +
                        " movement must be 0 (left turn) or 1 (through)");
    }
  }
  for (const auto& [lane, phase] : config.phase_of_lane) {
    if (phase < 1 || phase > 8) {
      throw ConfigError("lane " + std::to_string(lane) + " phase " +
                        std::to_string(phase) + " outside 1..8");
    }
  }
}

inline FeatureConfig feature_config_from_json(const nlohmann::json& doc) {
  FeatureConfig config;
  try {
    config.speed_limit_mph = doc.at("speed_limit_mph").get<double>();
    if (doc.contains("distance_cap_ft")) {
      config.distance_cap_ft = doc.at("distance_cap_ft").get<double>();
    }
    for (const nlohmann::json& vertex : doc.at("intersection_polygon")) {
      config.intersection_polygon.push_back(
          {vertex.at(0).get<double>(), vertex.at(1).get<double>()});
    }
    for (const auto& [key, value] : doc.at("lane_movement").items()) {
      long long lane = 0;
      if (!parse_int(key, lane)) {
        throw ConfigError("lane_movement key is not an integer: " + key);
      }
      config.lane_movement[lane] = value.get<int>();
    }
    for (const auto& [key, value] : doc.at("phase_of_lane").items()) {
      long long lane = 0;
      if (!parse_int(key, lane)) {
        throw ConfigError("phase_of_lane key is not an integer: " + key);
      }
      config.phase_of_lane[lane] = value.get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed feature config: ") + e.what());
  }
  validate_feature_config(config);
  return config;
}

inline FeatureConfig parse_feature_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open feature config: " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return feature_config_from_json(doc);
}

inline nlohmann::json feature_config_to_json(const FeatureConfig& config) {
  nlohmann::json doc;
  doc["speed_limit_mph"] = config.speed_limit_mph;
  doc["distance_cap_ft"] = config.distance_cap_ft;
  doc["intersection_polygon"] = nlohmann::json::array();
  for (const Point2& vertex : config.intersection_polygon) {
    doc["intersection_polygon"].push_back({vertex.x, vertex.y});
  }
  doc["lane_movement"] = nlohmann::json::object();
  for (const auto& [lane, movement] : config.lane_movement) {
    doc["lane_movement"][format_int(lane)] = movement;
  }
  doc["phase_of_lane"] = nlohmann::json::object();
  for (const auto& [lane, phase] : config.phase_of_lane) {
    doc["phase_of_lane"][format_int(lane)] = phase;
  }
  return doc;
}

/// The five per-signal-state datasets. A row lives in the dataset matching
/// its governing phase's state at t_enter; per-phase interval tiling makes
/// the states, and so the datasets, mutually exclusive.
struct DatasetBundle {
  std::vector<ObservationRow> green;
  std::vector<ObservationRow> yellow;
  std::vector<ObservationRow> red_clearance;
  std::vector<ObservationRow> all_red;
  std::vector<ObservationRow> red;

  std::vector<ObservationRow>& rows_for(SignalState state) {
    switch (state) {
      case SignalState::green:
        return green;
      case SignalState::yellow:
        return yellow;
      case SignalState::red_clearance:
        return red_clearance;
      case SignalState::all_red:
        return all_red;
      case SignalState::red:
        return red;
    }
    return red;
  }

  const std::vector<ObservationRow>& rows_for(SignalState state) const {
    return const_cast<DatasetBundle*>(this)->rows_for(state);
  }

  std::size_t total() const {
    return green.size() + yellow.size() + red_clearance.size() +
           all_red.size() + red.size();
  }
};

/// Row-level accounting of one assembly run. Rejections are counted by
/// reason; records_in always equals rows_assembled plus the rejects.
struct AssemblyReport {
  std::size_t records_in = 0;
  std::size_t rows_assembled = 0;
  std::size_t below_pet_floor = 0;
  std::size_t above_pet_cap = 0;
  std::size_t lane_without_phase = 0;
  std::size_t lane_without_movement = 0;
  std::size_t outside_plan_horizon = 0;
  std::size_t unknown_vehicle = 0;

  std::size_t rejected() const {
    return below_pet_floor + above_pet_cap + lane_without_phase +
           lane_without_movement + outside_plan_horizon + unknown_vehicle;
  }
};

namespace detail {

enum class RowFate {
  assembled,
  below_pet_floor,
  above_pet_cap,
  lane_without_phase,
  lane_without_movement,
  outside_plan_horizon,
  unknown_vehicle,
};

inline bool observation_order(const ObservationRow& a, const ObservationRow& b) {
  if (a.t_enter != b.t_enter) {
    return a.t_enter < b.t_enter;
  }
  if (a.leader_id != b.leader_id) {
    return a.leader_id < b.leader_id;
  }
  return a.lagger_id < b.lagger_id;
}

}  // namespace detail

/// Join conflicts with the plan, the tracks, and the study configuration.
/// Assembly is row-local: each record either becomes exactly one row in
/// exactly one dataset or is rejected with a counted reason.
inline DatasetBundle assemble_observations(
    const std::vector<ConflictRecord>& records, const SignalPlan& plan,
    const std::vector<VehicleTrack>& tracks, const FeatureConfig& config,
    AssemblyReport* report = nullptr) {
  validate_feature_config(config);
  std::set<int> referenced;
  for (const auto& [lane, phase] : config.phase_of_lane) {
    referenced.insert(phase);
  }
  for (const int phase : referenced) {
    if (plan.timeline_for(phase) == nullptr) {
      throw ConfigError("phase " + std::to_string(phase) +
                        " mapped from a lane is absent from the signal plan");
    }
  }
  std::map<long long, const VehicleTrack*> track_of;
  for (const VehicleTrack& track : tracks) {
    track_of[track.vehicle_id] = &track;
  }
  const VolumeCounter volume(tracks);

  std::vector<detail::RowFate> fates(records.size(),
                                     detail::RowFate::assembled);
  std::vector<std::pair<SignalState, ObservationRow>> slots(records.size());
  parallel_for(records.size(), config.threads, [&](std::size_t begin,
                                                   std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const ConflictRecord& record = records[i];
      if (!(record.pet > 0.0)) {
        throw DataError("conflict record has non-positive pet");
      }
      const std::optional<int> level = pet_level(record.pet);
      if (!level.has_value()) {
        fates[i] = record.pet < kPetLevelFloor
                       ? detail::RowFate::below_pet_floor
                       : detail::RowFate::above_pet_cap;
        continue;
      }
      const auto phase_it = config.phase_of_lane.find(record.lagger_lane);
      if (phase_it == config.phase_of_lane.end()) {
        fates[i] = detail::RowFate::lane_without_phase;
        continue;
      }
      const int phase = phase_it->second;
      if (record.t_enter < plan.horizon_start ||
          record.t_enter >= plan.horizon_end) {
        fates[i] = detail::RowFate::outside_plan_horizon;
        continue;
      }
      const auto leader_it = track_of.find(record.leader_id);
      const auto lagger_it = track_of.find(record.lagger_id);
      if (leader_it == track_of.end() || lagger_it == track_of.end()) {
        fates[i] = detail::RowFate::unknown_vehicle;
        continue;
      }
      const int inside =
          point_in_polygon(record.zone_center, config.intersection_polygon)
              ? 1
              : 0;
      int movement = kMovementAtIntersection;
      if (inside == 0) {
        const auto move_it = config.lane_movement.find(record.lagger_lane);
        if (move_it == config.lane_movement.end()) {
          fates[i] = detail::RowFate::lane_without_movement;
          continue;
        }
        movement = move_it->second;
      }

      const std::vector<TrackSample>& leader_samples = leader_it->second->samples;
      const std::vector<TrackSample>& lagger_samples = lagger_it->second->samples;
      // Nearest samples stand in at t_enter; the leader may have left the view
      // by then, in which case its last observed box is used.
      const TrackSample& leader_at_enter =
          leader_samples[detail::nearest_sample(leader_samples, record.t_enter)];
      const TrackSample& lagger_at_enter =
          lagger_samples[detail::nearest_sample(lagger_samples, record.t_enter)];
      const TrackSample& leader_at_leave =
          leader_samples[detail::nearest_sample(leader_samples, record.t_leave)];

      const SignalSnapshot snapshot = snapshot_at(plan, record.t_enter);

      ObservationRow row;
      row.leader_id = record.leader_id;
      row.lagger_id = record.lagger_id;
      row.t_enter = record.t_enter;
      row.pet_level = *level;
      row.distance =
          std::min(boundary_distance(leader_at_enter.box, lagger_at_enter.box),
                   config.distance_cap_ft);
      row.red_clearance =
          sentinel_countdown(snapshot, phase, SignalState::red_clearance);
      row.all_red = sentinel_countdown(snapshot, phase, SignalState::all_red);
      row.red = sentinel_countdown(snapshot, phase, SignalState::red);
      row.yellow = sentinel_countdown(snapshot, phase, SignalState::yellow);
      row.green = sentinel_countdown(snapshot, phase, SignalState::green);
      row.phase = active_phase_indicators(snapshot);
      row.speed = record.lagger_speed_mph;
      row.heading = record.lagger_heading_deg;
      row.lane = record.lagger_lane;
      row.volume = volume.count_at(record.t_enter);
      row.intersection = inside;
      row.speeding_prop =
          speeding_proportion(leader_at_leave.speed_mph, config.speed_limit_mph);
      row.movement = movement;
      slots[i] = {snapshot.phase_countdown(phase)->state, std::move(row)};
    }
  });

  DatasetBundle bundle;
  AssemblyReport tally;
  tally.records_in = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    switch (fates[i]) {
      case detail::RowFate::assembled:
        ++tally.rows_assembled;
        bundle.rows_for(slots[i].first).push_back(std::move(slots[i].second));
        break;
      case detail::RowFate::below_pet_floor:
        ++tally.below_pet_floor;
        break;
      case detail::RowFate::above_pet_cap:
        ++tally.above_pet_cap;
        break;
      case detail::RowFate::lane_without_phase:
        ++tally.lane_without_phase;
        break;
      case detail::RowFate::lane_without_movement:
        ++tally.lane_without_movement;
        break;
      case detail::RowFate::outside_plan_horizon:
        ++tally.outside_plan_horizon;
        break;
      case detail::RowFate::unknown_vehicle:
        ++tally.unknown_vehicle;
        break;
    }
  }
  for (const SignalState state : kSignalStates) {
    std::vector<ObservationRow>& rows = bundle.rows_for(state);
    std::sort(rows.begin(), rows.end(), detail::observation_order);
  }
  if (report != nullptr) {
    *report = tally;
  }
  return bundle;
}

inline const std::array<const char*, 24>& observation_columns() {
  static const std::array<const char*, 24> columns{
      "pair_id", "t_enter", "pet_level", "distance", "red_clearance",
      "all_red", "red",     "yellow",    "green",    "phase_1",
      "phase_2", "phase_3", "phase_4",   "phase_5",  "phase_6",
      "phase_7", "phase_8", "speed",     "heading",  "lane",
      "volume",  "intersection", "speeding_prop", "movement",
  };
  return columns;
}

inline std::string pair_key(long long leader_id, long long lagger_id) {
  return format_int(leader_id) + ":" + format_int(lagger_id);
}

inline void write_observations(const std::string& path,
                               const std::vector<ObservationRow>& rows,
                               const std::vector<std::string>& comments = {}) {
  CsvWriter writer(path);
  for (const std::string& c : comments) {
    writer.comment(c);
  }
  writer.row(std::vector<std::string>(observation_columns().begin(),
                                      observation_columns().end()));
  for (const ObservationRow& row : rows) {
    std::vector<std::string> fields{
        pair_key(row.leader_id, row.lagger_id),
        format_double(row.t_enter),
        format_int(row.pet_level),
        format_double(row.distance),
        format_double(row.red_clearance),
        format_double(row.all_red),
        format_double(row.red),
        format_double(row.yellow),
        format_double(row.green),
    };
    for (const int flag : row.phase) {
      fields.push_back(format_int(flag));
    }
    fields.push_back(format_double(row.speed));
    fields.push_back(format_double(row.heading));
    fields.push_back(format_int(row.lane));
    fields.push_back(format_int(row.volume));
    fields.push_back(format_int(row.intersection));
    fields.push_back(format_double(row.speeding_prop));
    fields.push_back(format_int(row.movement));
    writer.row(fields);
  }
  writer.close();
}

inline std::vector<ObservationRow> read_observations(const std::string& path) {
  CsvReader reader(path);
  std::vector<int> cols;
  for (const char* name : observation_columns()) {
    const int idx = reader.column(name);
    if (idx < 0) {
      throw DataError(path + ": missing column " + std::string(name));
    }
    cols.push_back(idx);
  }
  const auto required =
      static_cast<std::size_t>(*std::max_element(cols.begin(), cols.end()));
  std::vector<ObservationRow> out;
  std::vector<std::string_view> fields;
  std::vector<std::string_view> pair_parts;
  while (reader.next(fields)) {
    ObservationRow row;
    bool ok = fields.size() > required;
    if (ok) {
      split(fields[cols[0]], ':', pair_parts);
      long long level = 0;
      long long flag = 0;
      ok = pair_parts.size() == 2 &&
           parse_int(pair_parts[0], row.leader_id) &&
           parse_int(pair_parts[1], row.lagger_id) &&
           parse_double(fields[cols[1]], row.t_enter) &&
           parse_int(fields[cols[2]], level) &&
           parse_double(fields[cols[3]], row.distance) &&
           parse_double(fields[cols[4]], row.red_clearance) &&
           parse_double(fields[cols[5]], row.all_red) &&
           parse_double(fields[cols[6]], row.red) &&
           parse_double(fields[cols[7]], row.yellow) &&
           parse_double(fields[cols[8]], row.green);
      row.pet_level = static_cast<int>(level);
      for (int p = 0; p < 8 && ok; ++p) {
        ok = parse_int(fields[cols[9 + static_cast<std::size_t>(p)]], flag);
        row.phase[static_cast<std::size_t>(p)] = static_cast<int>(flag);
      }
      long long intersection = 0;
      long long movement = 0;
      ok = ok && parse_double(fields[cols[17]], row.speed) &&
           parse_double(fields[cols[18]], row.heading) &&
           parse_int(fields[cols[19]], row.lane) &&
           parse_int(fields[cols[20]], row.volume) &&
           parse_int(fields[cols[21]], intersection) &&
           parse_double(fields[cols[22]], row.speeding_prop) &&
           parse_int(fields[cols[23]], movement);
      row.intersection = static_cast<int>(intersection);
      row.movement = static_cast<int>(movement);
    }
    if (!ok) {
      throw DataError(path + ": malformed row at line " +
                      std::to_string(reader.line_number()));
    }
    out.push_back(row);
  }
  return out;
}

/// Write the five datasets plus a provenance sidecar into a directory.
/// Files are named by signal state; the sidecar echoes the configuration
/// that shaped the rows.
inline void write_dataset(const std::string& dir, const DatasetBundle& bundle,
                          const FeatureConfig& config,
                          const std::string& config_digest = "") {
  std::filesystem::create_directories(dir);
  std::vector<std::string> comments;
  if (!config_digest.empty()) {
    comments.push_back("config=" + config_digest);
  }
  nlohmann::json sidecar;
  sidecar["config"] = feature_config_to_json(config);
  sidecar["pet_level_floor"] = kPetLevelFloor;
  sidecar["pet_level_cap"] = kPetLevelCap;
  sidecar["volume_bin_seconds"] = kVolumeBinSeconds;
  if (!config_digest.empty()) {
    sidecar["config_digest"] = config_digest;
  }
  sidecar["rows"] = nlohmann::json::object();
  for (const SignalState state : kSignalStates) {
    const std::string name = state_label(state);
    write_observations((std::filesystem::path(dir) / (name + ".csv")).string(),
                       bundle.rows_for(state), comments);
    sidecar["rows"][name] = bundle.rows_for(state).size();
  }
  const std::string sidecar_path =
      (std::filesystem::path(dir) / "dataset.json").string();
  std::ofstream out(sidecar_path);
  if (!out) {
    throw IoError("cannot open for writing: " + sidecar_path);
  }
  out << sidecar.dump(2) << '\n';
  if (!out) {
    throw IoError("write failed: " + sidecar_path);
  }
}

}  // namespace petsig
