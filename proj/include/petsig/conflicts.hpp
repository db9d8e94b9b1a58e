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

// Post-encroachment-time extraction. A record is emitted per lagging-vehicle
// timestep while its box stands on ground some leader's box vacated within
// the lookback window; contact at the same instant is an overlap event, not
// a PET.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "petsig/csv.hpp"
#include "petsig/errors.hpp"
#include "petsig/geometry.hpp"
#include "petsig/parallel.hpp"
#include "petsig/trajectory.hpp"
#include "petsig/util.hpp"

namespace petsig {

struct ConflictRecord {
  long long leader_id = 0;
  long long lagger_id = 0;
  double t_enter = 0.0;
  double t_leave = 0.0;
  double pet = 0.0;
  Point2 zone_center;
  long long lagger_lane = 0;
  double lagger_speed_mph = 0.0;
  double lagger_heading_deg = 0.0;
};

struct MinPetRecord {
  long long leader_id = 0;
  long long lagger_id = 0;
  double min_pet = 0.0;
  Point2 zone_center;
  double time = 0.0;
};

struct DetectOptions {
  int threads = 1;
  bool all_pairs = false;
};

struct DetectResult {
  std::vector<ConflictRecord> records;
  std::size_t overlap_events = 0;
};

namespace detail {

/// Index of the sample nearest to t, earlier sample on ties; size() if empty.
inline std::size_t nearest_sample(const std::vector<TrackSample>& samples, double t) {
  if (samples.empty()) {
    return samples.size();
  }
  const auto it = std::lower_bound(
      samples.begin(), samples.end(), t,
      [](const TrackSample& s, double value) { return s.time < value; });
  if (it == samples.begin()) {
    return 0;
  }
  if (it == samples.end()) {
    return samples.size() - 1;
  }
  const auto next = static_cast<std::size_t>(it - samples.begin());
  const double gap_prev = std::fabs(samples[next - 1].time - t);
  const double gap_next = std::fabs(samples[next].time - t);
  return gap_next < gap_prev ? next : next - 1;
}

inline bool record_order(const ConflictRecord& a, const ConflictRecord& b) {
  if (a.leader_id != b.leader_id) {
    return a.leader_id < b.leader_id;
  }
  if (a.lagger_id != b.lagger_id) {
    return a.lagger_id < b.lagger_id;
  }
  return a.t_enter < b.t_enter;
}

}  // namespace detail

/// One ordered pair. For each lagger timestep T2, t_leave is the latest
/// leader timestep T1 < T2 whose box intersects the lagger's box at T2,
/// restricted to the pet_max lookback. Same-instant contact suppresses the
/// record and bumps the overlap counter instead.
inline std::vector<ConflictRecord> compute_pet_sequence(
    const VehicleTrack& leader, const VehicleTrack& lagger, double pet_max,
    std::size_t* overlap_events = nullptr) {
  if (pet_max <= 0.0) {
    throw std::invalid_argument("pet_max must be positive");
  }
  const double dt_leader = native_interval(leader);
  const double dt_lagger = native_interval(lagger);
  if (dt_leader > 0.0 && dt_lagger > 0.0 &&
      std::fabs(dt_leader - dt_lagger) > 1e-9) {
    throw std::invalid_argument("tracks are sampled at different rates");
  }
  const double half_step = dt_leader / 2.0 + 1e-12;

  std::vector<ConflictRecord> out;
  for (const TrackSample& lag : lagger.samples) {
    const double t2 = lag.time;
    const std::size_t near = detail::nearest_sample(leader.samples, t2);
    if (near < leader.samples.size() &&
        std::fabs(leader.samples[near].time - t2) <= half_step &&
        boxes_intersect(leader.samples[near].box, lag.box)) {
      if (overlap_events != nullptr) {
        ++*overlap_events;
      }
      continue;
    }
    const auto stop = std::lower_bound(
        leader.samples.begin(), leader.samples.end(), t2,
        [](const TrackSample& s, double value) { return s.time < value; });
    for (auto idx = static_cast<std::size_t>(stop - leader.samples.begin());
         idx-- > 0;) {
      const TrackSample& lead = leader.samples[idx];
      const double pet = t2 - lead.time;
      if (pet > pet_max) {
        break;
      }
      if (pet <= 0.0) {
        continue;
      }
      if (boxes_intersect(lead.box, lag.box)) {
        out.push_back({leader.vehicle_id, lagger.vehicle_id, t2, lead.time, pet,
                       lead.box.centroid(), lag.lane_id, lag.speed_mph,
                       lag.heading_deg});
        break;
      }
    }
  }
  return out;
}

namespace detail {

struct CellKey {
  long long bt = 0;
  long long cx = 0;
  long long cy = 0;
  bool operator==(const CellKey& o) const {
    return bt == o.bt && cx == o.cx && cy == o.cy;
  }
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const long long v : {k.bt, k.cx, k.cy}) {
      h = (h ^ static_cast<std::uint64_t>(v)) * 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

inline double max_circumradius(const std::vector<VehicleTrack>& tracks) {
  double r_max = 0.0;
  for (const VehicleTrack& track : tracks) {
    for (const TrackSample& sample : track.samples) {
      const Point2 c = sample.box.centroid();
      for (const Point2& corner : sample.box.corners()) {
        r_max = std::max(r_max, norm(corner - c));
      }
    }
  }
  return r_max;
}

/// Unordered track pairs whose samples ever come within interaction reach
/// inside the lookback window. A uniform hash over (time bucket, cell) is
/// probed across the 3x3x3 neighborhood; reach is padded so tangent contacts
/// cannot fall out by rounding. Superset of the true interaction set.
inline std::vector<std::pair<std::size_t, std::size_t>> candidate_pairs(
    const std::vector<VehicleTrack>& tracks, double pet_max) {
  const double reach = 2.0 * max_circumradius(tracks) + 1e-6;
  std::unordered_map<CellKey, std::vector<std::pair<std::uint32_t, std::uint32_t>>,
                     CellKeyHash>
      grid;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t k = 0; k < tracks[i].samples.size(); ++k) {
      const TrackSample& s = tracks[i].samples[k];
      const CellKey key{static_cast<long long>(std::floor(s.time / pet_max)),
                        static_cast<long long>(std::floor(s.center.x / reach)),
                        static_cast<long long>(std::floor(s.center.y / reach))};
      grid[key].push_back({static_cast<std::uint32_t>(i),
                           static_cast<std::uint32_t>(k)});
    }
  }
  std::set<std::pair<std::size_t, std::size_t>> found;
  const double time_pad = pet_max + 1e-9;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (const TrackSample& s : tracks[i].samples) {
      const auto bt = static_cast<long long>(std::floor(s.time / pet_max));
      const auto cx = static_cast<long long>(std::floor(s.center.x / reach));
      const auto cy = static_cast<long long>(std::floor(s.center.y / reach));
      for (long long db = -1; db <= 1; ++db) {
        for (long long dx = -1; dx <= 1; ++dx) {
          for (long long dy = -1; dy <= 1; ++dy) {
            const auto it = grid.find(CellKey{bt + db, cx + dx, cy + dy});
            if (it == grid.end()) {
              continue;
            }
            for (const auto& [j, kj] : it->second) {
              if (j == i || (found.count({std::min<std::size_t>(i, j),
                                          std::max<std::size_t>(i, j)}) > 0)) {
                continue;
              }
              const TrackSample& o = tracks[j].samples[kj];
              if (std::fabs(o.time - s.time) > time_pad) {
                continue;
              }
              const Point2 d = o.center - s.center;
              if (d.x * d.x + d.y * d.y <= reach * reach) {
                found.insert({std::min<std::size_t>(i, j),
                              std::max<std::size_t>(i, j)});
              }
            }
          }
        }
      }
    }
  }
  return {found.begin(), found.end()};
}

}  // namespace detail

/// All ordered pairs, pruned by the spatial hash unless all_pairs is set.
/// Output ordering is (leader_id, lagger_id, t_enter) regardless of thread
/// count.
inline DetectResult detect_conflicts(const std::vector<VehicleTrack>& tracks,
                                     double pet_max,
                                     const DetectOptions& options = {}) {
  std::vector<std::pair<std::size_t, std::size_t>> ordered;
  if (options.all_pairs) {
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      for (std::size_t j = 0; j < tracks.size(); ++j) {
        if (i != j) {
          ordered.push_back({i, j});
        }
      }
    }
  } else {
    for (const auto& [i, j] : detail::candidate_pairs(tracks, pet_max)) {
      ordered.push_back({i, j});
      ordered.push_back({j, i});
    }
    std::sort(ordered.begin(), ordered.end());
  }

  std::vector<std::vector<ConflictRecord>> slots(ordered.size());
  std::vector<std::size_t> overlaps(ordered.size(), 0);
  parallel_for(ordered.size(), options.threads,
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t p = begin; p < end; ++p) {
                   slots[p] = compute_pet_sequence(tracks[ordered[p].first],
                                                   tracks[ordered[p].second],
                                                   pet_max, &overlaps[p]);
                 }
               });

  DetectResult result;
  for (std::size_t p = 0; p < ordered.size(); ++p) {
    result.records.insert(result.records.end(), slots[p].begin(), slots[p].end());
    result.overlap_events += overlaps[p];
  }
  std::sort(result.records.begin(), result.records.end(), detail::record_order);
  return result;
}

/// Per ordered pair, the smallest pet with its place and time; ties go to the
/// earliest arrival.
inline std::vector<MinPetRecord> min_pets(const std::vector<ConflictRecord>& records) {
  std::map<std::pair<long long, long long>, const ConflictRecord*> best;
  for (const ConflictRecord& r : records) {
    auto [it, inserted] = best.try_emplace({r.leader_id, r.lagger_id}, &r);
    if (!inserted) {
      const ConflictRecord* cur = it->second;
      if (r.pet < cur->pet || (r.pet == cur->pet && r.t_enter < cur->t_enter)) {
        it->second = &r;
      }
    }
  }
  std::vector<MinPetRecord> out;
  out.reserve(best.size());
  for (const auto& [pair, r] : best) {
    out.push_back({r->leader_id, r->lagger_id, r->pet, r->zone_center, r->t_enter});
  }
  return out;
}

/// Center-point baseline: identical pipeline with every footprint replaced by
/// an axis-aligned square of side 2*epsilon at the vehicle center.
inline DetectResult center_point_conflicts(const std::vector<VehicleTrack>& tracks,
                                           double pet_max, double epsilon,
                                           const DetectOptions& options = {}) {
  if (epsilon <= 0.0) {
    throw std::invalid_argument("epsilon must be positive");
  }
  double min_width = std::numeric_limits<double>::infinity();
  for (const VehicleTrack& track : tracks) {
    for (const TrackSample& sample : track.samples) {
      for (int i = 0; i < 4; ++i) {
        const Point2 e =
            sample.box.corners()[(i + 1) % 4] - sample.box.corners()[i];
        min_width = std::min(min_width, norm(e));
      }
    }
  }
  if (std::isfinite(min_width) && epsilon > min_width / 2.0) {
    throw std::invalid_argument("epsilon exceeds half the minimum vehicle width");
  }
  std::vector<VehicleTrack> shrunk = tracks;
  for (VehicleTrack& track : shrunk) {
    for (TrackSample& sample : track.samples) {
      sample.box = box_from_pose(sample.center, 2.0 * epsilon, 2.0 * epsilon, 0.0);
    }
  }
  return detect_conflicts(shrunk, pet_max, options);
}

/// Cumulative count of values strictly below each threshold.
inline std::vector<std::size_t> threshold_counts(const std::vector<double>& pets,
                                                 const std::vector<double>& thresholds) {
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i - 1] < thresholds[i])) {
      throw std::invalid_argument("thresholds must be strictly increasing");
    }
  }
  std::vector<std::size_t> counts(thresholds.size(), 0);
  for (const double pet : pets) {
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (pet < thresholds[i]) {
        ++counts[i];
      }
    }
  }
  return counts;
}

inline std::vector<double> pets_of(const std::vector<ConflictRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const ConflictRecord& r : records) {
    out.push_back(r.pet);
  }
  return out;
}

inline std::vector<double> pets_of(const std::vector<MinPetRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const MinPetRecord& r : records) {
    out.push_back(r.min_pet);
  }
  return out;
}

struct GridSpec {
  Point2 origin;
  double cell_size = 0.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
};

struct HeatmapGrid {
  GridSpec spec;
  std::vector<std::uint64_t> counts;
  std::uint64_t overflow = 0;

  std::uint64_t binned_total() const {
    std::uint64_t sum = overflow;
    for (const std::uint64_t c : counts) {
      sum += c;
    }
    return sum;
  }
};

/// Bin each qualifying minPET's zone center; out-of-extent records land in
/// the overflow bucket rather than vanishing.
inline HeatmapGrid build_heatmap(const std::vector<MinPetRecord>& records,
                                 const GridSpec& spec, double pet_threshold) {
  if (spec.cell_size <= 0.0) {
    throw std::invalid_argument("cell_size must be positive");
  }
  if (spec.nx == 0 || spec.ny == 0) {
    throw std::invalid_argument("heatmap grid must have cells");
  }
  HeatmapGrid grid;
  grid.spec = spec;
  grid.counts.assign(spec.nx * spec.ny, 0);
  for (const MinPetRecord& r : records) {
    if (!(r.min_pet < pet_threshold)) {
      continue;
    }
    const double fx = std::floor((r.zone_center.x - spec.origin.x) / spec.cell_size);
    const double fy = std::floor((r.zone_center.y - spec.origin.y) / spec.cell_size);
    if (fx < 0.0 || fy < 0.0 || fx >= static_cast<double>(spec.nx) ||
        fy >= static_cast<double>(spec.ny)) {
      ++grid.overflow;
      continue;
    }
    const auto ix = static_cast<std::size_t>(fx);
    const auto iy = static_cast<std::size_t>(fy);
    ++grid.counts[iy * spec.nx + ix];
  }
  return grid;
}

inline void write_conflicts(const std::string& path,
                            const std::vector<ConflictRecord>& records,
                            const std::vector<std::string>& comments = {}) {
  CsvWriter writer(path);
  for (const std::string& c : comments) {
    writer.comment(c);
  }
  writer.row({"leader_id", "lagger_id", "t_leave", "t_enter", "pet", "zone_x",
              "zone_y", "lagger_lane", "lagger_speed", "lagger_heading"});
  for (const ConflictRecord& r : records) {
    writer.row({format_int(r.leader_id), format_int(r.lagger_id),
                format_double(r.t_leave), format_double(r.t_enter),
                format_double(r.pet), format_double(r.zone_center.x),
                format_double(r.zone_center.y), format_int(r.lagger_lane),
                format_double(r.lagger_speed_mph),
                format_double(r.lagger_heading_deg)});
  }
  writer.close();
}

inline std::vector<ConflictRecord> read_conflicts(const std::string& path) {
  CsvReader reader(path);
  const std::vector<std::string> names{"leader_id", "lagger_id", "t_leave",
                                       "t_enter", "pet", "zone_x", "zone_y",
                                       "lagger_lane", "lagger_speed",
                                       "lagger_heading"};
  std::vector<int> cols;
  for (const std::string& name : names) {
    const int idx = reader.column(name);
    if (idx < 0) {
      throw DataError(path + ": missing column " + name);
    }
    cols.push_back(idx);
  }
  std::vector<ConflictRecord> out;
  std::vector<std::string_view> fields;
  while (reader.next(fields)) {
    ConflictRecord r;
    bool ok = fields.size() > static_cast<std::size_t>(
                                  *std::max_element(cols.begin(), cols.end()));
    ok = ok && parse_int(fields[cols[0]], r.leader_id) &&
         parse_int(fields[cols[1]], r.lagger_id) &&
         parse_double(fields[cols[2]], r.t_leave) &&
         parse_double(fields[cols[3]], r.t_enter) &&
         parse_double(fields[cols[4]], r.pet) &&
         parse_double(fields[cols[5]], r.zone_center.x) &&
         parse_double(fields[cols[6]], r.zone_center.y) &&
         parse_int(fields[cols[7]], r.lagger_lane) &&
         parse_double(fields[cols[8]], r.lagger_speed_mph) &&
         parse_double(fields[cols[9]], r.lagger_heading_deg);
    if (!ok) {
      throw DataError(path + ": malformed row at line " +
                      std::to_string(reader.line_number()));
    }
    out.push_back(r);
  }
  return out;
}

inline void write_min_pets(const std::string& path,
                           const std::vector<MinPetRecord>& records,
                           const std::vector<std::string>& comments = {}) {
  CsvWriter writer(path);
  for (const std::string& c : comments) {
    writer.comment(c);
  }
  writer.row({"leader_id", "lagger_id", "min_pet", "zone_x", "zone_y", "time"});
  for (const MinPetRecord& r : records) {
    writer.row({format_int(r.leader_id), format_int(r.lagger_id),
                format_double(r.min_pet), format_double(r.zone_center.x),
                format_double(r.zone_center.y), format_double(r.time)});
  }
  writer.close();
}

inline std::vector<MinPetRecord> read_min_pets(const std::string& path) {
  CsvReader reader(path);
  const std::vector<std::string> names{"leader_id", "lagger_id", "min_pet",
                                       "zone_x", "zone_y", "time"};
  std::vector<int> cols;
  for (const std::string& name : names) {
    const int idx = reader.column(name);
    if (idx < 0) {
      throw DataError(path + ": missing column " + name);
    }
    cols.push_back(idx);
  }
  std::vector<MinPetRecord> out;
  std::vector<std::string_view> fields;
  while (reader.next(fields)) {
    MinPetRecord r;
    bool ok = fields.size() > static_cast<std::size_t>(
                                  *std::max_element(cols.begin(), cols.end()));
    ok = ok && parse_int(fields[cols[0]], r.leader_id) &&
         parse_int(fields[cols[1]], r.lagger_id) &&
         parse_double(fields[cols[2]], r.min_pet) &&
         parse_double(fields[cols[3]], r.zone_center.x) &&
         parse_double(fields[cols[4]], r.zone_center.y) &&
         parse_double(fields[cols[5]], r.time);
    if (!ok) {
      throw DataError(path + ": malformed row at line " +
                      std::to_string(reader.line_number()));
    }
    out.push_back(r);
  }
  return out;
}

/// Plain text grid: a header naming the geometry, its values, then ny rows of
/// nx counts (row j holds cells at origin_y + j*cell_size).
inline void write_heatmap(const std::string& path, const HeatmapGrid& grid,
                          const std::vector<std::string>& comments = {}) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  for (const std::string& c : comments) {
    out << "# " << c << '\n';
  }
  out << "origin_x origin_y cell_size nx ny overflow\n";
  out << format_double(grid.spec.origin.x) << ' ' << format_double(grid.spec.origin.y)
      << ' ' << format_double(grid.spec.cell_size) << ' ' << grid.spec.nx << ' '
      << grid.spec.ny << ' ' << grid.overflow << '\n';
  for (std::size_t iy = 0; iy < grid.spec.ny; ++iy) {
    for (std::size_t ix = 0; ix < grid.spec.nx; ++ix) {
      if (ix > 0) {
        out << ' ';
      }
      out << grid.counts[iy * grid.spec.nx + ix];
    }
    out << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

}  // namespace petsig
