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

// Trajectory ingest and resampling. Tables arrive as one row per vehicle per
// frame; tracks leave as immutable time-ordered sample sequences in seconds
// relative to the first frame of the file.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "petsig/csv.hpp"
#include "petsig/errors.hpp"
#include "petsig/geometry.hpp"
#include "petsig/util.hpp"

namespace petsig {

struct TrackSample {
  double time = 0.0;
  Point2 center;
  OrientedBox box;
  double speed_mph = 0.0;
  double heading_deg = 0.0;
  long long lane_id = 0;
};

struct VehicleTrack {
  long long vehicle_id = 0;
  std::vector<TrackSample> samples;
};

struct IngestReport {
  std::size_t vehicles_loaded = 0;
  std::size_t samples_loaded = 0;
  std::map<std::string, std::size_t> rejected;

  std::size_t rows_rejected() const {
    std::size_t total = 0;
    for (const auto& [reason, count] : rejected) {
      total += count;
    }
    return total;
  }
};

/// Column mapping plus the conversions that depend on the source. Either the
/// four corner columns or the center columns must be set; center mode also
/// needs the fixed box dimensions, since such tables carry no footprint.
struct SchemaConfig {
  std::string frame = "frame";
  std::string vehicle_id = "vehicle_id";
  std::array<std::string, 4> corner_x{};
  std::array<std::string, 4> corner_y{};
  std::string center_x;
  std::string center_y;
  std::string speed = "speed_mph";
  std::string heading = "heading_deg";
  std::string lane = "lane_id";
  double frame_rate = 30.0;
  double unit_scale = 1.0;
  double vehicle_length = 0.0;
  double vehicle_width = 0.0;

  bool corners_mode() const { return !corner_x[0].empty(); }

  static SchemaConfig canonical() {
    SchemaConfig s;
    s.corner_x = {"corner1_x", "corner2_x", "corner3_x", "corner4_x"};
    s.corner_y = {"corner1_y", "corner2_y", "corner3_y", "corner4_y"};
    return s;
  }

  static SchemaConfig citysim() {
    SchemaConfig s;
    s.frame = "frameNum";
    s.vehicle_id = "carId";
    s.corner_x = {"boundingBox1X", "boundingBox2X", "boundingBox3X", "boundingBox4X"};
    s.corner_y = {"boundingBox1Y", "boundingBox2Y", "boundingBox3Y", "boundingBox4Y"};
    s.speed = "speed";
    s.heading = "heading";
    s.lane = "laneId";
    return s;
  }
};

namespace detail {

struct RawRow {
  long long frame = 0;
  long long vehicle_id = 0;
  std::array<Point2, 4> corners{};
  Point2 center;
  double speed = 0.0;
  double heading = 0.0;
  long long lane = 0;
  std::size_t order = 0;
};

inline double wrap_heading(double degrees) {
  double h = std::fmod(degrees, 360.0);
  if (h < 0.0) {
    h += 360.0;
  }
  return h;
}

}  // namespace detail

inline std::pair<std::vector<VehicleTrack>, IngestReport> load_tracks(
    const std::string& path, const SchemaConfig& schema) {
  if (!schema.corners_mode()) {
    if (schema.center_x.empty() || schema.center_y.empty()) {
      throw ConfigError("schema needs corner columns or center columns");
    }
    if (schema.vehicle_length <= 0.0 || schema.vehicle_width <= 0.0) {
      throw ConfigError("center-based schema needs vehicle_length and vehicle_width");
    }
  }
  if (schema.frame_rate <= 0.0) {
    throw ConfigError("frame_rate must be positive");
  }

  CsvReader reader(path);
  auto need = [&](const std::string& name) {
    const int idx = reader.column(name);
    if (idx < 0) {
      throw DataError(path + ": missing column " + name);
    }
    return idx;
  };
  const int col_frame = need(schema.frame);
  const int col_id = need(schema.vehicle_id);
  const int col_speed = need(schema.speed);
  const int col_heading = need(schema.heading);
  const int col_lane = need(schema.lane);
  std::array<int, 4> col_cx{}, col_cy{};
  int col_px = -1, col_py = -1;
  if (schema.corners_mode()) {
    for (int i = 0; i < 4; ++i) {
      col_cx[i] = need(schema.corner_x[i]);
      col_cy[i] = need(schema.corner_y[i]);
    }
  } else {
    col_px = need(schema.center_x);
    col_py = need(schema.center_y);
  }

  int max_col = std::max({col_frame, col_id, col_speed, col_heading, col_lane,
                          col_px, col_py});
  if (schema.corners_mode()) {
    for (int i = 0; i < 4; ++i) {
      max_col = std::max({max_col, col_cx[i], col_cy[i]});
    }
  }

  IngestReport report;
  auto reject = [&report](const char* reason) { ++report.rejected[reason]; };

  std::vector<detail::RawRow> rows;
  std::vector<std::string_view> fields;
  std::size_t order = 0;
  while (reader.next(fields)) {
    if (fields.size() <= static_cast<std::size_t>(max_col)) {
      reject("short_row");
      continue;
    }
    detail::RawRow row;
    row.order = order++;
    bool ok = parse_int(fields[col_frame], row.frame) &&
              parse_int(fields[col_id], row.vehicle_id) &&
              parse_double(fields[col_speed], row.speed) &&
              parse_double(fields[col_heading], row.heading) &&
              parse_int(fields[col_lane], row.lane);
    if (schema.corners_mode()) {
      for (int i = 0; ok && i < 4; ++i) {
        ok = parse_double(fields[col_cx[i]], row.corners[i].x) &&
             parse_double(fields[col_cy[i]], row.corners[i].y);
        row.corners[i].x *= schema.unit_scale;
        row.corners[i].y *= schema.unit_scale;
      }
    } else {
      ok = ok && parse_double(fields[col_px], row.center.x) &&
           parse_double(fields[col_py], row.center.y);
      row.center.x *= schema.unit_scale;
      row.center.y *= schema.unit_scale;
    }
    if (!ok) {
      reject("unparseable_field");
      continue;
    }
    bool finite = std::isfinite(row.speed) && std::isfinite(row.heading);
    if (schema.corners_mode()) {
      for (const Point2& c : row.corners) {
        finite = finite && std::isfinite(c.x) && std::isfinite(c.y);
      }
    } else {
      finite = finite && std::isfinite(row.center.x) && std::isfinite(row.center.y);
    }
    if (!finite) {
      reject("non_finite_value");
      continue;
    }
    if (row.speed < 0.0) {
      reject("negative_speed");
      continue;
    }
    rows.push_back(row);
  }

  long long frame0 = 0;
  if (!rows.empty()) {
    frame0 = rows.front().frame;
    for (const detail::RawRow& row : rows) {
      frame0 = std::min(frame0, row.frame);
    }
  }

  std::map<long long, std::vector<const detail::RawRow*>> grouped;
  for (const detail::RawRow& row : rows) {
    grouped[row.vehicle_id].push_back(&row);
  }

  std::vector<VehicleTrack> tracks;
  tracks.reserve(grouped.size());
  for (auto& [vehicle_id, group] : grouped) {
    std::sort(group.begin(), group.end(),
              [](const detail::RawRow* a, const detail::RawRow* b) {
                if (a->frame != b->frame) {
                  return a->frame < b->frame;
                }
                return a->order < b->order;
              });
    VehicleTrack track;
    track.vehicle_id = vehicle_id;
    long long prev_frame = 0;
    bool have_prev = false;
    for (const detail::RawRow* row : group) {
      if (have_prev && row->frame == prev_frame) {
        reject("duplicate_frame");
        continue;
      }
      const double time = static_cast<double>(row->frame - frame0) / schema.frame_rate;
      const double heading = detail::wrap_heading(row->heading);
      try {
        if (schema.corners_mode()) {
          OrientedBox box = OrientedBox::from_corners(row->corners);
          const Point2 center = box.centroid();
          track.samples.push_back(
              {time, center, std::move(box), row->speed, heading, row->lane});
        } else {
          OrientedBox box = box_from_pose(row->center, schema.vehicle_length,
                                          schema.vehicle_width, heading);
          track.samples.push_back(
              {time, row->center, std::move(box), row->speed, heading, row->lane});
        }
      } catch (const std::invalid_argument&) {
        reject("degenerate_box");
        continue;
      }
      prev_frame = row->frame;
      have_prev = true;
      ++report.samples_loaded;
    }
    if (!track.samples.empty()) {
      tracks.push_back(std::move(track));
    }
  }
  report.vehicles_loaded = tracks.size();
  return {std::move(tracks), std::move(report)};
}

/// Median spacing of consecutive samples; 0 for tracks shorter than 2.
inline double native_interval(const VehicleTrack& track) {
  if (track.samples.size() < 2) {
    return 0.0;
  }
  std::vector<double> gaps;
  gaps.reserve(track.samples.size() - 1);
  for (std::size_t i = 1; i < track.samples.size(); ++i) {
    gaps.push_back(track.samples[i].time - track.samples[i - 1].time);
  }
  std::sort(gaps.begin(), gaps.end());
  const std::size_t mid = gaps.size() / 2;
  if (gaps.size() % 2 == 1) {
    return gaps[mid];
  }
  return 0.5 * (gaps[mid - 1] + gaps[mid]);
}

/// Snap the track onto the grid t0 + k/rate. Each grid point takes the
/// nearest original sample when one lies within half a native interval, the
/// sample is copied verbatim, and a sample serving several consecutive grid
/// points is kept once. No positions are invented.
inline VehicleTrack resample_track(const VehicleTrack& track, double rate) {
  if (rate <= 0.0) {
    throw std::invalid_argument("resample rate must be positive");
  }
  if (track.samples.size() < 2) {
    return track;
  }
  const double dt = native_interval(track);
  const double half_window = dt / 2.0 + 1e-12;
  const double t0 = track.samples.front().time;
  const double t_last = track.samples.back().time;
  const auto count =
      static_cast<std::size_t>(std::floor((t_last - t0) * rate + 1e-9)) + 1;

  VehicleTrack out;
  out.vehicle_id = track.vehicle_id;
  std::size_t last_taken = track.samples.size();
  for (std::size_t k = 0; k < count; ++k) {
    const double tg = t0 + static_cast<double>(k) / rate;
    const auto it = std::lower_bound(
        track.samples.begin(), track.samples.end(), tg,
        [](const TrackSample& s, double t) { return s.time < t; });
    std::size_t best = track.samples.size();
    double best_gap = half_window;
    if (it != track.samples.begin()) {
      const auto prev = static_cast<std::size_t>(it - track.samples.begin()) - 1;
      const double gap = std::fabs(track.samples[prev].time - tg);
      if (gap <= best_gap) {
        best = prev;
        best_gap = gap;
      }
    }
    if (it != track.samples.end()) {
      const auto next = static_cast<std::size_t>(it - track.samples.begin());
      const double gap = std::fabs(track.samples[next].time - tg);
      if (gap < best_gap || (best == track.samples.size() && gap <= best_gap)) {
        best = next;
        best_gap = gap;
      }
    }
    if (best == track.samples.size() || best == last_taken) {
      continue;
    }
    out.samples.push_back(track.samples[best]);
    last_taken = best;
  }
  return out;
}

/// Write tracks in the canonical schema. Frames are recovered from times via
/// the frame rate; leading comment lines go out verbatim.
inline void write_tracks(const std::string& path,
                         const std::vector<VehicleTrack>& tracks,
                         double frame_rate,
                         const std::vector<std::string>& comments = {}) {
  CsvWriter writer(path);
  for (const std::string& comment : comments) {
    writer.comment(comment);
  }
  std::vector<std::string> header{"frame", "vehicle_id"};
  for (int i = 1; i <= 4; ++i) {
    header.push_back("corner" + std::to_string(i) + "_x");
    header.push_back("corner" + std::to_string(i) + "_y");
  }
  header.insert(header.end(), {"speed_mph", "heading_deg", "lane_id"});
  writer.row(header);
  for (const VehicleTrack& track : tracks) {
    for (const TrackSample& sample : track.samples) {
      std::vector<std::string> row;
      row.push_back(format_int(std::llround(sample.time * frame_rate)));
      row.push_back(format_int(track.vehicle_id));
      for (const Point2& corner : sample.box.corners()) {
        row.push_back(format_double(corner.x));
        row.push_back(format_double(corner.y));
      }
      row.push_back(format_double(sample.speed_mph));
      row.push_back(format_double(sample.heading_deg));
      row.push_back(format_int(sample.lane_id));
      writer.row(row);
    }
  }
  writer.close();
}

}  // namespace petsig
