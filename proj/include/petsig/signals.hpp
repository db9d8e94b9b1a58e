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

// Signal plans for an eight-phase intersection. Each phase owns a gapless
// run of half-open state intervals over a shared horizon; snapshots answer
// countdown queries at an instant. Absent countdowns are typed absence here;
// the -1 sentinel exists only where rows are written out.

#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "petsig/errors.hpp"

namespace petsig {

enum class SignalState { green, yellow, red_clearance, all_red, red };

inline constexpr std::array<SignalState, 5> kSignalStates{
    SignalState::green, SignalState::yellow, SignalState::red_clearance,
    SignalState::all_red, SignalState::red};

inline const char* state_label(SignalState s) {
  switch (s) {
    case SignalState::green:
      return "green";
    case SignalState::yellow:
      return "yellow";
    case SignalState::red_clearance:
      return "red_clearance";
    case SignalState::all_red:
      return "all_red";
    case SignalState::red:
      return "red";
  }
  return "red";
}

inline std::optional<SignalState> parse_state_label(const std::string& label) {
  for (const SignalState s : kSignalStates) {
    if (label == state_label(s)) {
      return s;
    }
  }
  return std::nullopt;
}

struct PhaseInterval {
  int phase = 0;
  SignalState state = SignalState::red;
  double start = 0.0;
  double end = 0.0;
};

struct PhaseTimeline {
  int phase = 0;
  std::vector<PhaseInterval> intervals;
};

struct SignalPlan {
  std::optional<double> frame_rate_reference;
  std::vector<PhaseTimeline> phases;
  double horizon_start = 0.0;
  double horizon_end = 0.0;

  std::vector<int> phases_present() const {
    std::vector<int> out;
    out.reserve(phases.size());
    for (const PhaseTimeline& timeline : phases) {
      out.push_back(timeline.phase);
    }
    return out;
  }

  const PhaseTimeline* timeline_for(int phase) const {
    for (const PhaseTimeline& timeline : phases) {
      if (timeline.phase == phase) {
        return &timeline;
      }
    }
    return nullptr;
  }
};

struct PhaseCountdown {
  int phase = 0;
  SignalState state = SignalState::red;
  double remaining = 0.0;
};

struct SignalSnapshot {
  double time = 0.0;
  std::vector<PhaseCountdown> phases;

  const PhaseCountdown* phase_countdown(int phase) const {
    for (const PhaseCountdown& pc : phases) {
      if (pc.phase == phase) {
        return &pc;
      }
    }
    return nullptr;
  }
};

/// Remaining seconds of `state` for `phase`, absent unless that state is the
/// active one.
inline std::optional<double> countdown(const SignalSnapshot& snapshot, int phase,
                                       SignalState state) {
  const PhaseCountdown* pc = snapshot.phase_countdown(phase);
  if (pc == nullptr || pc->state != state) {
    return std::nullopt;
  }
  return pc->remaining;
}

/// Serialization-boundary view of the same query: -1 stands for absence.
inline double sentinel_countdown(const SignalSnapshot& snapshot, int phase,
                                 SignalState state) {
  const std::optional<double> value = countdown(snapshot, phase, state);
  return value.has_value() ? *value : -1.0;
}

namespace detail {

inline std::string interval_text(const PhaseInterval& iv) {
  std::ostringstream out;
  out << "phase " << iv.phase << ' ' << state_label(iv.state) << " [" << iv.start
      << ", " << iv.end << ")";
  return out.str();
}

}  // namespace detail

/// Validate interval structure and fill the derived fields. Every phase must
/// tile one shared horizon with no gap or overlap.
inline SignalPlan validate_signal_plan(SignalPlan plan) {
  if (plan.phases.empty()) {
    throw DataError("signal plan has no phases");
  }
  std::sort(plan.phases.begin(), plan.phases.end(),
            [](const PhaseTimeline& a, const PhaseTimeline& b) {
              return a.phase < b.phase;
            });
  for (std::size_t i = 1; i < plan.phases.size(); ++i) {
    if (plan.phases[i].phase == plan.phases[i - 1].phase) {
      throw DataError("signal plan repeats phase " +
                      std::to_string(plan.phases[i].phase));
    }
  }
  for (PhaseTimeline& timeline : plan.phases) {
    if (timeline.phase < 1 || timeline.phase > 8) {
      throw DataError("phase id " + std::to_string(timeline.phase) +
                      " outside 1..8");
    }
    if (timeline.intervals.empty()) {
      throw DataError("phase " + std::to_string(timeline.phase) +
                      " has no intervals");
    }
    std::sort(timeline.intervals.begin(), timeline.intervals.end(),
              [](const PhaseInterval& a, const PhaseInterval& b) {
                return a.start < b.start;
              });
    for (const PhaseInterval& iv : timeline.intervals) {
      if (!(iv.start < iv.end)) {
        throw DataError("empty interval: " + detail::interval_text(iv));
      }
    }
    for (std::size_t i = 1; i < timeline.intervals.size(); ++i) {
      const PhaseInterval& prev = timeline.intervals[i - 1];
      const PhaseInterval& cur = timeline.intervals[i];
      if (cur.start < prev.end) {
        throw DataError("overlapping intervals: " + detail::interval_text(prev) +
                        " and " + detail::interval_text(cur));
      }
      if (cur.start > prev.end) {
        throw DataError("gap between intervals: " + detail::interval_text(prev) +
                        " and " + detail::interval_text(cur));
      }
    }
  }
  plan.horizon_start = plan.phases.front().intervals.front().start;
  plan.horizon_end = plan.phases.front().intervals.back().end;
  for (const PhaseTimeline& timeline : plan.phases) {
    if (timeline.intervals.front().start != plan.horizon_start ||
        timeline.intervals.back().end != plan.horizon_end) {
      throw DataError("phase " + std::to_string(timeline.phase) +
                      " does not span the shared horizon: " +
                      detail::interval_text(timeline.intervals.front()) + " .. " +
                      detail::interval_text(timeline.intervals.back()));
    }
  }
  return plan;
}

inline SignalPlan signal_plan_from_json(const nlohmann::json& doc) {
  SignalPlan plan;
  try {
    if (doc.contains("frame_rate_reference")) {
      plan.frame_rate_reference = doc.at("frame_rate_reference").get<double>();
    }
    for (const nlohmann::json& phase_doc : doc.at("phases")) {
      PhaseTimeline timeline;
      timeline.phase = phase_doc.at("phase").get<int>();
      for (const nlohmann::json& iv_doc : phase_doc.at("intervals")) {
        PhaseInterval iv;
        iv.phase = timeline.phase;
        const auto label = iv_doc.at("state").get<std::string>();
        const std::optional<SignalState> state = parse_state_label(label);
        if (!state.has_value()) {
          throw DataError("unknown signal state label: " + label);
        }
        iv.state = *state;
        iv.start = iv_doc.at("start").get<double>();
        iv.end = iv_doc.at("end").get<double>();
        timeline.intervals.push_back(iv);
      }
      plan.phases.push_back(std::move(timeline));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed signal plan: ") + e.what());
  }
  return validate_signal_plan(std::move(plan));
}

inline SignalPlan parse_signal_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open signal plan: " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return signal_plan_from_json(doc);
}

inline nlohmann::json signal_plan_to_json(const SignalPlan& plan) {
  nlohmann::json doc;
  if (plan.frame_rate_reference.has_value()) {
    doc["frame_rate_reference"] = *plan.frame_rate_reference;
  }
  doc["phases"] = nlohmann::json::array();
  for (const PhaseTimeline& timeline : plan.phases) {
    nlohmann::json phase_doc;
    phase_doc["phase"] = timeline.phase;
    phase_doc["intervals"] = nlohmann::json::array();
    for (const PhaseInterval& iv : timeline.intervals) {
      phase_doc["intervals"].push_back(
          {{"state", state_label(iv.state)}, {"start", iv.start}, {"end", iv.end}});
    }
    doc["phases"].push_back(std::move(phase_doc));
  }
  return doc;
}

/// Countdown state of every phase at time t; half-open intervals make the
/// state at boundaries unique.
inline SignalSnapshot snapshot_at(const SignalPlan& plan, double t) {
  if (t < plan.horizon_start || t >= plan.horizon_end) {
    throw std::out_of_range("query time outside the plan horizon");
  }
  SignalSnapshot snapshot;
  snapshot.time = t;
  snapshot.phases.reserve(plan.phases.size());
  for (const PhaseTimeline& timeline : plan.phases) {
    const auto it = std::upper_bound(
        timeline.intervals.begin(), timeline.intervals.end(), t,
        [](double value, const PhaseInterval& iv) { return value < iv.start; });
    const PhaseInterval& active = *(it - 1);
    snapshot.phases.push_back({timeline.phase, active.state, active.end - t});
  }
  return snapshot;
}

/// Default notion of an active phase: anything but the long red.
inline const std::set<SignalState>& default_active_states() {
  static const std::set<SignalState> states{
      SignalState::green, SignalState::yellow, SignalState::red_clearance,
      SignalState::all_red};
  return states;
}

/// Binary flag per phase 1..8; absent phases stay 0. The activity definition
/// is a parameter because "active" is a modeling choice, not an observation.
inline std::array<int, 8> active_phase_indicators(
    const SignalSnapshot& snapshot,
    const std::set<SignalState>& active_states = default_active_states()) {
  std::array<int, 8> flags{};
  for (const PhaseCountdown& pc : snapshot.phases) {
    if (pc.phase >= 1 && pc.phase <= 8 && active_states.count(pc.state) > 0) {
      flags[pc.phase - 1] = 1;
    }
  }
  return flags;
}

}  // namespace petsig
