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

// Brute-force generators and reference checkers backing the test suites.
// Nothing in the processing pipeline may include this header; it exists so
// that every pipeline result can be recomputed by an independent route.

#pragma once

#include <array>
#include <cstdint>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "petsig/conflicts.hpp"
#include "petsig/features.hpp"
#include "petsig/geometry.hpp"
#include "petsig/rng.hpp"
#include "petsig/rplogit.hpp"
#include "petsig/signals.hpp"
#include "petsig/trajectory.hpp"

namespace petsig::oracle {

/// Cheap deterministic stream for bulk point sampling.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double splitmix_unit(std::uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

namespace detail {

struct EdgeFrame {
  // Half-plane form of a CCW box: inside iff nx*(p-c0) cross style >= 0
  // for all four edges, stored as a*(x) + b*(y) >= d.
  std::array<double, 4> a{}, b{}, d{};

  explicit EdgeFrame(const OrientedBox& box) {
    for (int i = 0; i < 4; ++i) {
      const Point2 c0 = box.corners()[i];
      const Point2 c1 = box.corners()[(i + 1) % 4];
      const Point2 e = c1 - c0;
      a[i] = -e.y;
      b[i] = e.x;
      d[i] = a[i] * c0.x + b[i] * c0.y;
    }
  }

  bool contains(double x, double y) const {
    for (int i = 0; i < 4; ++i) {
      if (a[i] * x + b[i] * y < d[i]) {
        return false;
      }
    }
    return true;
  }
};

// Uniform point in the triangle (p, q, r) using the parallelogram fold.
inline Point2 triangle_point(Point2 p, Point2 q, Point2 r, double u, double v) {
  if (u + v > 1.0) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  return {p.x + u * (q.x - p.x) + v * (r.x - p.x),
          p.y + u * (q.y - p.y) + v * (r.y - p.y)};
}

}  // namespace detail

/// Containment-based intersection check, independent of the separating-axis
/// route. The sampled points of each box are its four corners (deterministic)
/// plus `samples_per_box` uniform interior points; the boxes intersect iff any
/// sampled point of one lies in the closed region of the other. With vehicle
/// sized boxes every intersection pattern leaves a corner of one box inside
/// the other or an overlap far above the sampling resolution.
inline bool mc_boxes_intersect(const OrientedBox& box_a, const OrientedBox& box_b,
                               std::size_t samples_per_box, std::uint64_t seed) {
  const detail::EdgeFrame fa(box_a);
  const detail::EdgeFrame fb(box_b);
  for (int i = 0; i < 4; ++i) {
    const Point2 ca = box_a.corners()[i];
    const Point2 cb = box_b.corners()[i];
    if (fb.contains(ca.x, ca.y) || fa.contains(cb.x, cb.y)) {
      return true;
    }
  }
  std::uint64_t state = seed ^ 0x5851f42d4c957f2dULL;
  const OrientedBox* boxes[2] = {&box_a, &box_b};
  const detail::EdgeFrame* other[2] = {&fb, &fa};
  for (int side = 0; side < 2; ++side) {
    const auto& c = boxes[side]->corners();
    // Split the quad along c0-c2 and pick the triangle by area share.
    const double a0 = 0.5 * std::fabs(cross(c[1] - c[0], c[2] - c[0]));
    const double a1 = 0.5 * std::fabs(cross(c[2] - c[0], c[3] - c[0]));
    const double share = a0 / (a0 + a1);
    for (std::size_t k = 0; k < samples_per_box; ++k) {
      const double pick = splitmix_unit(state);
      const double u = splitmix_unit(state);
      const double v = splitmix_unit(state);
      const Point2 p = pick < share
                           ? detail::triangle_point(c[0], c[1], c[2], u, v)
                           : detail::triangle_point(c[0], c[2], c[3], u, v);
      if (other[side]->contains(p.x, p.y)) {
        return true;
      }
    }
  }
  return false;
}

/// Signed separation: boundary gap when disjoint, minus the penetration depth
/// (minimum translation along an edge normal) when overlapping.
inline double signed_clearance(const OrientedBox& box_a, const OrientedBox& box_b) {
  if (!boxes_intersect(box_a, box_b)) {
    return boundary_distance(box_a, box_b);
  }
  double depth = std::numeric_limits<double>::infinity();
  const OrientedBox* boxes[2] = {&box_a, &box_b};
  for (const OrientedBox* box : boxes) {
    for (int i = 0; i < 4; ++i) {
      const Point2 c0 = box->corners()[i];
      const Point2 c1 = box->corners()[(i + 1) % 4];
      Point2 axis{-(c1 - c0).y, (c1 - c0).x};
      const double len = norm(axis);
      if (len <= 0.0) {
        continue;
      }
      axis = (1.0 / len) * axis;
      double alo, ahi, blo, bhi;
      petsig::detail::project(box_a, axis, alo, ahi);
      petsig::detail::project(box_b, axis, blo, bhi);
      depth = std::min(depth, std::min(ahi, bhi) - std::max(alo, blo));
    }
  }
  return -depth;
}

/// Vehicle-plausible random box: 8-22 ft long, 4-8.5 ft wide.
inline OrientedBox random_vehicle_box(Rng& rng, Point2 center) {
  const double length = rng.uniform(8.0, 22.0);
  const double width = rng.uniform(4.0, 8.5);
  const double heading = rng.uniform(0.0, 360.0);
  return box_from_pose(center, length, width, heading);
}

struct BoxPair {
  OrientedBox a;
  OrientedBox b;
  double clearance;
};

/// Random pair with |signed clearance| above `tangency_band`; pairs inside
/// the band are regenerated.
inline BoxPair random_box_pair(Rng& rng, double tangency_band) {
  while (true) {
    const Point2 ca{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
    const Point2 cb{ca.x + rng.uniform(-20.0, 20.0), ca.y + rng.uniform(-20.0, 20.0)};
    OrientedBox a = random_vehicle_box(rng, ca);
    OrientedBox b = random_vehicle_box(rng, cb);
    const double clearance = signed_clearance(a, b);
    if (std::fabs(clearance) > tangency_band) {
      return {a, b, clearance};
    }
  }
}

struct BruteResult {
  std::vector<ConflictRecord> records;
  std::size_t overlap_events = 0;
};

/// Exhaustive reference for the conflict pipeline: every ordered pair, every
/// (history sample, lagger sample) combination, nothing but linear scans.
/// Desk-sized scenes only.
inline BruteResult brute_force_pets(const std::vector<VehicleTrack>& tracks,
                                    double pet_max) {
  std::size_t total = 0;
  for (const VehicleTrack& t : tracks) {
    total += t.samples.size();
  }
  if (tracks.size() > 24 || total > 40000) {
    throw std::logic_error("brute_force_pets is for desk-sized scenes");
  }
  BruteResult result;
  for (const VehicleTrack& leader : tracks) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < leader.samples.size(); ++i) {
      gaps.push_back(leader.samples[i].time - leader.samples[i - 1].time);
    }
    std::sort(gaps.begin(), gaps.end());
    double dt = 0.0;
    if (!gaps.empty()) {
      const std::size_t mid = gaps.size() / 2;
      dt = gaps.size() % 2 == 1 ? gaps[mid] : 0.5 * (gaps[mid - 1] + gaps[mid]);
    }
    const double half_step = dt / 2.0 + 1e-12;
    for (const VehicleTrack& lagger : tracks) {
      if (&leader == &lagger) {
        continue;
      }
      for (const TrackSample& lag : lagger.samples) {
        const double t2 = lag.time;
        std::size_t nearest = leader.samples.size();
        double nearest_gap = 0.0;
        for (std::size_t k = 0; k < leader.samples.size(); ++k) {
          const double gap = std::fabs(leader.samples[k].time - t2);
          if (nearest == leader.samples.size() || gap < nearest_gap) {
            nearest = k;
            nearest_gap = gap;
          }
        }
        if (nearest < leader.samples.size() && nearest_gap <= half_step &&
            boxes_intersect(leader.samples[nearest].box, lag.box)) {
          ++result.overlap_events;
          continue;
        }
        std::size_t leave = leader.samples.size();
        for (std::size_t k = 0; k < leader.samples.size(); ++k) {
          const double t1 = leader.samples[k].time;
          if (t1 < t2 && t2 - t1 <= pet_max &&
              boxes_intersect(leader.samples[k].box, lag.box)) {
            if (leave == leader.samples.size() ||
                t1 > leader.samples[leave].time) {
              leave = k;
            }
          }
        }
        if (leave < leader.samples.size()) {
          const TrackSample& lead = leader.samples[leave];
          result.records.push_back({leader.vehicle_id, lagger.vehicle_id, t2,
                                    lead.time, t2 - lead.time,
                                    lead.box.centroid(), lag.lane_id,
                                    lag.speed_mph, lag.heading_deg});
        }
      }
    }
  }
  std::sort(result.records.begin(), result.records.end(),
            [](const ConflictRecord& a, const ConflictRecord& b) {
              if (a.leader_id != b.leader_id) {
                return a.leader_id < b.leader_id;
              }
              if (a.lagger_id != b.lagger_id) {
                return a.lagger_id < b.lagger_id;
              }
              return a.t_enter < b.t_enter;
            });
  return result;
}

/// Alternating east- and northbound streams through one junction, scheduled
/// by crossing time. All vehicles of a direction share one speed, so
/// same-direction spacing never shrinks; with contact disallowed the slot
/// gaps keep the junction occupancy windows disjoint and the scene is
/// collision free by construction. With contact allowed, gaps may be shorter
/// than a transit and vehicles can stand in the junction together.
inline std::vector<VehicleTrack> random_crossing_scene(Rng& rng, std::size_t count,
                                                       bool allow_contact) {
  const double v_east = rng.uniform(25.0, 40.0);
  const double v_north = rng.uniform(25.0, 40.0);
  const double fps = 30.0;
  std::vector<VehicleTrack> tracks;
  double crossing = 4.0;
  bool east = rng.below(2) == 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double length = rng.uniform(14.0, 18.0);
    const double width = rng.uniform(6.0, 8.0);
    const double v = east ? v_east : v_north;
    VehicleTrack track;
    track.vehicle_id = static_cast<long long>(k + 1);
    const auto f0 = std::max<long long>(
        0, static_cast<long long>(std::ceil((crossing - 6.0) * fps - 1e-9)));
    const auto f1 = static_cast<long long>(std::floor((crossing + 6.0) * fps + 1e-9));
    for (auto f = f0; f <= f1; ++f) {
      const double t = static_cast<double>(f) / fps;
      const double s = v * (t - crossing);
      const Point2 p = east ? Point2{s, 0.0} : Point2{0.0, s};
      const double heading = east ? 90.0 : 0.0;
      track.samples.push_back({t, p, box_from_pose(p, length, width, heading),
                               v * (3600.0 / 5280.0), heading,
                               east ? 10LL : 30LL});
    }
    tracks.push_back(std::move(track));
    crossing += allow_contact ? rng.uniform(0.3, 5.2) : rng.uniform(1.4, 5.2);
    east = !east;
  }
  return tracks;
}

struct ScenarioWaypoint {
  double t = 0.0;
  Point2 p;
};

struct ScenarioVehicle {
  long long id = 0;
  double length = 16.0;
  double width = 6.0;
  long long lane = 0;
  double heading0 = 0.0;
  std::vector<ScenarioWaypoint> path;
};

/// Hand-written scene: piecewise-linear motion between timed waypoints, with
/// an `expected` blob of frozen outcomes for the test to assert against.
struct ScenarioScript {
  std::string name;
  double frame_rate = 30.0;
  std::vector<ScenarioVehicle> vehicles;
  nlohmann::json expected;
};

inline ScenarioScript load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open scenario: " + path);
  }
  const nlohmann::json j = nlohmann::json::parse(in);
  ScenarioScript script;
  script.name = j.value("name", std::string{});
  script.frame_rate = j.value("frame_rate", 30.0);
  if (j.contains("expected")) {
    script.expected = j.at("expected");
  }
  for (const auto& jv : j.at("vehicles")) {
    ScenarioVehicle v;
    v.id = jv.at("id").get<long long>();
    v.length = jv.value("length", 16.0);
    v.width = jv.value("width", 6.0);
    v.lane = jv.value("lane", 0LL);
    v.heading0 = jv.value("heading0", 0.0);
    for (const auto& jw : jv.at("path")) {
      v.path.push_back({jw.at("t").get<double>(),
                        Point2{jw.at("x").get<double>(), jw.at("y").get<double>()}});
    }
    if (v.path.empty()) {
      throw std::runtime_error("scenario vehicle without waypoints");
    }
    for (std::size_t i = 1; i < v.path.size(); ++i) {
      if (!(v.path[i - 1].t < v.path[i].t)) {
        throw std::runtime_error("scenario waypoint times must increase");
      }
    }
    script.vehicles.push_back(std::move(v));
  }
  return script;
}

/// Frame-grid tracks for a script. A sample on a waypoint boundary takes the
/// later leg's speed and heading; stationary legs keep the last moving
/// heading, or heading0 before any motion.
inline std::vector<VehicleTrack> generate_scenario(const ScenarioScript& script) {
  std::vector<VehicleTrack> tracks;
  for (const ScenarioVehicle& v : script.vehicles) {
    const std::size_t legs = v.path.size() - 1;
    std::vector<double> leg_speed(legs, 0.0);
    std::vector<double> leg_heading(legs, v.heading0);
    double carry_heading = v.heading0;
    for (std::size_t s = 0; s < legs; ++s) {
      const Point2 d = v.path[s + 1].p - v.path[s].p;
      const double dist = norm(d);
      const double span = v.path[s + 1].t - v.path[s].t;
      if (dist > 0.0) {
        carry_heading = std::fmod(
            std::atan2(d.x, d.y) * (180.0 / std::acos(-1.0)) + 360.0, 360.0);
        leg_speed[s] = dist / span * (3600.0 / 5280.0);
      }
      leg_heading[s] = carry_heading;
    }
    VehicleTrack track;
    track.vehicle_id = v.id;
    const double fps = script.frame_rate;
    const auto f0 = std::llround(v.path.front().t * fps);
    const auto f1 = std::llround(v.path.back().t * fps);
    if (legs == 0) {
      const Point2 p = v.path.front().p;
      track.samples.push_back({static_cast<double>(f0) / fps, p,
                               box_from_pose(p, v.length, v.width, v.heading0),
                               0.0, v.heading0, v.lane});
      tracks.push_back(std::move(track));
      continue;
    }
    for (auto f = f0; f <= f1; ++f) {
      const double t = static_cast<double>(f) / fps;
      std::size_t s = 0;
      while (s + 1 < legs && v.path[s + 1].t <= t) {
        ++s;
      }
      const double span = v.path[s + 1].t - v.path[s].t;
      const double w = (t - v.path[s].t) / span;
      const Point2 p = v.path[s].p + w * (v.path[s + 1].p - v.path[s].p);
      track.samples.push_back({t, p,
                               box_from_pose(p, v.length, v.width, leg_heading[s]),
                               leg_speed[s], leg_heading[s], v.lane});
    }
    tracks.push_back(std::move(track));
  }
  return tracks;
}

/// Synthetic panel drawn from the ordered model itself: covariates uniform
/// on (-1, 1), group-level normal shifts on the trailing sigma.size()
/// coefficients, logistic latent noise thresholded against the cutpoints.
struct OrderedSample {
  ModelData data;
  ModelSpec spec;
};

inline OrderedSample simulate_ordered_data(const OrderedParams& truth,
                                           std::size_t n_groups,
                                           std::size_t obs_per_group,
                                           std::uint64_t seed) {
  const std::size_t n_cov = truth.beta.size();
  const std::size_t n_random = truth.sigma.size();
  if (n_random > n_cov) {
    throw std::invalid_argument("simulate: more sigmas than coefficients");
  }
  if (truth.cutpoints.empty() || truth.cutpoints.front() != 0.0) {
    throw std::invalid_argument("simulate: cutpoints must start at 0");
  }
  for (std::size_t i = 0; i + 1 < truth.cutpoints.size(); ++i) {
    if (!(truth.cutpoints[i] < truth.cutpoints[i + 1])) {
      throw std::invalid_argument("simulate: cutpoints must increase");
    }
  }
  if (n_groups < 1 || obs_per_group < 1) {
    throw std::invalid_argument("simulate: need groups and observations");
  }

  OrderedSample out;
  out.spec.response = "y";
  out.spec.group_key = "unit";
  for (std::size_t k = 0; k < n_cov; ++k) {
    const std::string name = "x" + std::to_string(k + 1);
    if (k < n_cov - n_random) {
      out.spec.fixed.push_back(name);
    } else {
      out.spec.random.push_back(name);
    }
  }

  ModelData& data = out.data;
  data.covariates = out.spec.fixed;
  data.covariates.insert(data.covariates.end(), out.spec.random.begin(),
                         out.spec.random.end());
  data.n_fixed = out.spec.fixed.size();

  Rng rng(seed);
  for (std::size_t g = 0; g < n_groups; ++g) {
    data.group_labels.push_back("g" + std::to_string(g + 1));
    data.rows_of_group.emplace_back();
    std::vector<double> beta_g = truth.beta;
    for (std::size_t s = 0; s < n_random; ++s) {
      beta_g[data.n_fixed + s] += truth.sigma[s] * rng.normal();
    }
    for (std::size_t t = 0; t < obs_per_group; ++t) {
      std::vector<double> row(n_cov);
      double eta = truth.constant;
      for (std::size_t k = 0; k < n_cov; ++k) {
        row[k] = rng.uniform(-1.0, 1.0);
        eta += beta_g[k] * row[k];
      }
      const double latent = eta + rng.logistic();
      int level = 1;
      for (const double cut : truth.cutpoints) {
        if (latent > cut) ++level;
      }
      data.rows_of_group[g].push_back(data.y.size());
      data.y.push_back(level);
      data.x.push_back(std::move(row));
      data.levels = std::max(data.levels, level);
    }
  }
  return out;
}

/// Renders simulated or hand-built model data back into the column layout
/// the fit path ingests.
inline DataTable to_data_table(const ModelData& data, const ModelSpec& spec) {
  DataTable table;
  table.columns.push_back(spec.group_key);
  table.columns.push_back(spec.response);
  for (const auto& name : data.covariates) {
    table.columns.push_back(name);
  }
  for (std::size_t g = 0; g < data.rows_of_group.size(); ++g) {
    for (const std::size_t i : data.rows_of_group[g]) {
      std::vector<std::string> row;
      row.push_back(data.group_labels[g]);
      row.push_back(std::to_string(data.y[i]));
      for (const double v : data.x[i]) {
        row.push_back(format_double(v));
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

/// Two-ring fixed-time plan on a sixty second cycle. Phases 2 and 6 serve the
/// east-west road, phases 4 and 8 the north-south road; every phase cycles
/// through all five states. Red stretches that touch across a cycle boundary
/// are emitted as one interval so countdowns read through the boundary.
inline SignalPlan make_cycle_plan(std::size_t cycles) {
  if (cycles < 1) {
    throw std::invalid_argument("plan needs at least one cycle");
  }
  constexpr double kCycle = 60.0;
  const double horizon = kCycle * static_cast<double>(cycles);
  auto stretch = [](PhaseTimeline& timeline, SignalState state, double start,
                    double end) {
    if (!timeline.intervals.empty() && timeline.intervals.back().state == state &&
        timeline.intervals.back().end == start) {
      timeline.intervals.back().end = end;
      return;
    }
    timeline.intervals.push_back({timeline.phase, state, start, end});
  };
  SignalPlan plan;
  for (const int phase : {2, 4, 6, 8}) {
    PhaseTimeline timeline;
    timeline.phase = phase;
    const bool east_west = phase == 2 || phase == 6;
    for (std::size_t c = 0; c < cycles; ++c) {
      const double t0 = kCycle * static_cast<double>(c);
      if (east_west) {
        stretch(timeline, SignalState::green, t0, t0 + 24.0);
        stretch(timeline, SignalState::yellow, t0 + 24.0, t0 + 27.0);
        stretch(timeline, SignalState::red_clearance, t0 + 27.0, t0 + 29.0);
        stretch(timeline, SignalState::all_red, t0 + 29.0, t0 + 31.0);
        stretch(timeline, SignalState::red, t0 + 31.0, t0 + kCycle);
      } else {
        stretch(timeline, SignalState::red, t0, t0 + 31.0);
        stretch(timeline, SignalState::green, t0 + 31.0, t0 + 52.0);
        stretch(timeline, SignalState::yellow, t0 + 52.0, t0 + 55.0);
        stretch(timeline, SignalState::red_clearance, t0 + 55.0, t0 + 57.0);
        stretch(timeline, SignalState::all_red, t0 + 57.0, t0 + 59.0);
        stretch(timeline, SignalState::red, t0 + 59.0, t0 + kCycle);
      }
    }
    plan.phases.push_back(std::move(timeline));
  }
  plan.horizon_start = 0.0;
  plan.horizon_end = horizon;
  return plan;
}

/// One approach of a four-leg junction: a straight corridor with a fixed
/// travel speed, crossing the opposing road at up to two junction cells.
struct Corridor {
  Point2 direction;
  double speed_fps = 0.0;
  double heading_deg = 0.0;
  long long lane = 0;
  int phase = 0;
};

struct IntersectionScene {
  std::vector<VehicleTrack> tracks;
  SignalPlan plan;
  FeatureConfig features;
  double frame_rate = 30.0;
};

namespace detail {

inline const std::array<Corridor, 4>& scene_corridors() {
  static const std::array<Corridor, 4> corridors{{
      {{1.0, 0.0}, 30.0, 90.0, 10, 2},
      {{-1.0, 0.0}, 32.0, 270.0, 20, 6},
      {{0.0, 1.0}, 28.0, 0.0, 30, 4},
      {{0.0, -1.0}, 34.0, 180.0, 40, 8},
  }};
  return corridors;
}

/// A straight pass through `cell`, centered on the crossing time, sampled at
/// the scene frame rate.
inline VehicleTrack corridor_pass(const Corridor& road, Point2 cell,
                                  double t_cross, long long id, double fps) {
  VehicleTrack track;
  track.vehicle_id = id;
  const auto f0 = static_cast<long long>(std::ceil((t_cross - 3.0) * fps - 1e-9));
  const auto f1 = static_cast<long long>(std::floor((t_cross + 3.0) * fps + 1e-9));
  const double mph = road.speed_fps * (3600.0 / 5280.0);
  for (long long f = f0; f <= f1; ++f) {
    const double t = static_cast<double>(f) / fps;
    const Point2 p = cell + road.speed_fps * (t - t_cross) * road.direction;
    track.samples.push_back({t, p, box_from_pose(p, 16.0, 6.0, road.heading_deg),
                             mph, road.heading_deg, road.lane});
  }
  return track;
}

}  // namespace detail

/// Deterministic crossing traffic for the end-to-end pipeline. Each cycle
/// stages one leader-lagger crossing per signal state at one junction cell,
/// with the lagger arriving while its phase shows that state. Crossing times
/// are kept at least a second apart so no two footprints ever touch; the gaps
/// themselves are drawn wide enough to spread the arrivals over the whole
/// severity range.
inline IntersectionScene build_intersection_scene(std::uint64_t seed,
                                                  std::size_t cycles = 15) {
  IntersectionScene scene;
  scene.plan = validate_signal_plan(make_cycle_plan(cycles));
  scene.features.speed_limit_mph = 20.0;
  scene.features.intersection_polygon = {
      {-12.0, -12.0}, {20.0, -12.0}, {20.0, 42.0}, {-12.0, 42.0}};
  for (const Corridor& road : detail::scene_corridors()) {
    scene.features.lane_movement[road.lane] = kMovementThrough;
    scene.features.phase_of_lane[road.lane] = road.phase;
  }

  // Lagger crossing offsets within the cycle, one per state of its phase.
  const std::array<double, 5> east_west_offsets{10.0, 25.5, 28.0, 30.0, 45.0};
  const std::array<double, 5> north_south_offsets{41.0, 53.5, 56.0, 58.0, 15.0};
  const std::array<Point2, 4> cells{{{0.0, 0.0}, {8.0, 0.0}, {0.0, 30.0},
                                     {8.0, 30.0}}};

  Rng rng(seed);
  long long next_id = 1;
  for (std::size_t c = 0; c < cycles; ++c) {
    const Point2 cell = cells[c % 4];
    const auto& roads = detail::scene_corridors();
    const Corridor& east_west = c % 4 < 2 ? roads[0] : roads[1];
    const Corridor& north_south = c % 4 == 0 || c % 4 == 2 ? roads[2] : roads[3];
    const bool lagger_on_ew = c % 2 == 0;
    const Corridor& lagger_road = lagger_on_ew ? east_west : north_south;
    const Corridor& leader_road = lagger_on_ew ? north_south : east_west;
    const auto& offsets = lagger_on_ew ? east_west_offsets : north_south_offsets;

    std::vector<double> scheduled(offsets.begin(), offsets.end());
    for (const double offset : offsets) {
      double gap = 0.0;
      for (int attempt = 0;; ++attempt) {
        if (attempt >= 1000) {
          throw std::logic_error("could not place a conflict gap");
        }
        gap = rng.uniform(1.3, 5.6);
        bool clear = true;
        for (const double other : scheduled) {
          if (std::abs(offset - gap - other) < 1.0) {
            clear = false;
            break;
          }
        }
        if (clear) {
          break;
        }
      }
      scheduled.push_back(offset - gap);
      const double t0 = 60.0 * static_cast<double>(c);
      scene.tracks.push_back(detail::corridor_pass(
          leader_road, cell, t0 + offset - gap, next_id++, scene.frame_rate));
      scene.tracks.push_back(detail::corridor_pass(
          lagger_road, cell, t0 + offset, next_id++, scene.frame_rate));
    }
  }
  return scene;
}

}  // namespace petsig::oracle
