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
//
// Command layer: one function per subcommand, orchestrating the library
// stages over a shared run configuration. Every artifact a command writes
// carries the digest of the configuration that produced it, and each stage
// records the digests of its own outputs so a later report can prove the
// chain is intact.

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "petsig/conflicts.hpp"
#include "petsig/digest.hpp"
#include "petsig/errors.hpp"
#include "petsig/features.hpp"
#include "petsig/rplogit.hpp"
#include "petsig/signals.hpp"
#include "petsig/trajectory.hpp"
#include "petsig/util.hpp"

namespace petsig {

// ---------------------------------------------------------------------------
// Run configuration

/// Everything a run needs beyond the input files themselves. The thread
/// count is deliberately not part of the configuration digest: results are
/// identical at any thread count, so it carries no provenance.
struct RunConfig {
  std::string trajectories;
  std::string signal_plan;
  std::string model;
  double rate_hz = 3.0;
  double pet_max = 5.0;
  std::string method = "bbox";
  double epsilon = 2.5;
  double heatmap_cell_ft = 5.0;
  SchemaConfig schema = SchemaConfig::canonical();
  std::optional<FeatureConfig> features;
  std::uint64_t seed = 1;
  int threads = 1;
};

inline nlohmann::json schema_config_to_json(const SchemaConfig& schema) {
  nlohmann::json doc;
  doc["frame"] = schema.frame;
  doc["vehicle_id"] = schema.vehicle_id;
  doc["corner_x"] = schema.corner_x;
  doc["corner_y"] = schema.corner_y;
  doc["center_x"] = schema.center_x;
  doc["center_y"] = schema.center_y;
  doc["speed"] = schema.speed;
  doc["heading"] = schema.heading;
  doc["lane"] = schema.lane;
  doc["frame_rate"] = schema.frame_rate;
  doc["unit_scale"] = schema.unit_scale;
  doc["vehicle_length"] = schema.vehicle_length;
  doc["vehicle_width"] = schema.vehicle_width;
  return doc;
}

/// Either a preset name ("canonical", "citysim") or an explicit mapping.
inline SchemaConfig schema_config_from_json(const nlohmann::json& doc) {
  if (doc.is_string()) {
    const std::string name = doc.get<std::string>();
    if (name == "canonical") {
      return SchemaConfig::canonical();
    }
    if (name == "citysim") {
      return SchemaConfig::citysim();
    }
    throw ConfigError("unknown schema preset: " + name);
  }
  SchemaConfig schema;
  try {
    if (doc.contains("frame")) schema.frame = doc.at("frame").get<std::string>();
    if (doc.contains("vehicle_id")) schema.vehicle_id = doc.at("vehicle_id").get<std::string>();
    if (doc.contains("corner_x")) schema.corner_x = doc.at("corner_x").get<std::array<std::string, 4>>();
    if (doc.contains("corner_y")) schema.corner_y = doc.at("corner_y").get<std::array<std::string, 4>>();
    if (doc.contains("center_x")) schema.center_x = doc.at("center_x").get<std::string>();
    if (doc.contains("center_y")) schema.center_y = doc.at("center_y").get<std::string>();
    if (doc.contains("speed")) schema.speed = doc.at("speed").get<std::string>();
    if (doc.contains("heading")) schema.heading = doc.at("heading").get<std::string>();
    if (doc.contains("lane")) schema.lane = doc.at("lane").get<std::string>();
    if (doc.contains("frame_rate")) schema.frame_rate = doc.at("frame_rate").get<double>();
    if (doc.contains("unit_scale")) schema.unit_scale = doc.at("unit_scale").get<double>();
    if (doc.contains("vehicle_length")) schema.vehicle_length = doc.at("vehicle_length").get<double>();
    if (doc.contains("vehicle_width")) schema.vehicle_width = doc.at("vehicle_width").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed schema block: ") + e.what());
  }
  return schema;
}

/// Canonical form: every digest-relevant field present, keys sorted by the
/// JSON library. The thread count is excluded on purpose.
inline nlohmann::json run_config_to_json(const RunConfig& config) {
  nlohmann::json doc;
  doc["trajectories"] = config.trajectories;
  doc["signal_plan"] = config.signal_plan;
  doc["model"] = config.model;
  doc["rate_hz"] = config.rate_hz;
  doc["pet_max"] = config.pet_max;
  doc["method"] = config.method;
  doc["epsilon"] = config.epsilon;
  doc["heatmap_cell_ft"] = config.heatmap_cell_ft;
  doc["schema"] = schema_config_to_json(config.schema);
  if (config.features.has_value()) {
    doc["features"] = feature_config_to_json(*config.features);
  }
  doc["seed"] = config.seed;
  return doc;
}

inline void validate_run_config(const RunConfig& config) {
  if (config.rate_hz <= 0.0) {
    throw ConfigError("rate_hz must be positive");
  }
  if (config.pet_max <= 0.0) {
    throw ConfigError("pet_max must be positive");
  }
  if (config.method != "bbox" && config.method != "center") {
    throw ConfigError("method must be bbox or center, got " + config.method);
  }
  if (config.epsilon <= 0.0) {
    throw ConfigError("epsilon must be positive");
  }
  if (config.heatmap_cell_ft <= 0.0) {
    throw ConfigError("heatmap_cell_ft must be positive");
  }
  if (config.threads < 1) {
    throw ConfigError("threads must be at least one");
  }
}

inline RunConfig run_config_from_json(const nlohmann::json& doc) {
  RunConfig config;
  try {
    if (doc.contains("trajectories")) config.trajectories = doc.at("trajectories").get<std::string>();
    if (doc.contains("signal_plan")) config.signal_plan = doc.at("signal_plan").get<std::string>();
    if (doc.contains("model")) config.model = doc.at("model").get<std::string>();
    if (doc.contains("rate_hz")) config.rate_hz = doc.at("rate_hz").get<double>();
    if (doc.contains("pet_max")) config.pet_max = doc.at("pet_max").get<double>();
    if (doc.contains("method")) config.method = doc.at("method").get<std::string>();
    if (doc.contains("epsilon")) config.epsilon = doc.at("epsilon").get<double>();
    if (doc.contains("heatmap_cell_ft")) config.heatmap_cell_ft = doc.at("heatmap_cell_ft").get<double>();
    if (doc.contains("schema")) config.schema = schema_config_from_json(doc.at("schema"));
    if (doc.contains("features")) config.features = feature_config_from_json(doc.at("features"));
    if (doc.contains("seed")) config.seed = doc.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  validate_run_config(config);
  return config;
}

inline RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open run config: " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(doc);
}

inline std::string run_config_digest(const RunConfig& config) {
  return json_digest(run_config_to_json(config));
}

// ---------------------------------------------------------------------------
// Shared plumbing

namespace detail {

inline constexpr std::array<double, 5> kSummaryThresholds{1.0, 2.0, 3.0, 4.0,
                                                          5.0};

inline void write_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return doc;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::vector<VehicleTrack> load_resampled(const RunConfig& config,
                                                IngestReport* report = nullptr) {
  if (config.trajectories.empty()) {
    throw ConfigError("run config does not name a trajectory file");
  }
  auto [tracks, ingest] = load_tracks(config.trajectories, config.schema);
  for (VehicleTrack& track : tracks) {
    track = resample_track(track, config.rate_hz);
  }
  if (report != nullptr) {
    *report = ingest;
  }
  return tracks;
}

inline DetectResult run_detection(const RunConfig& config,
                                  const std::vector<VehicleTrack>& tracks,
                                  const std::string& method) {
  DetectOptions options;
  options.threads = config.threads;
  if (method == "center") {
    try {
      return center_point_conflicts(tracks, config.pet_max, config.epsilon,
                                    options);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("center method rejected: ") + e.what());
    }
  }
  return detect_conflicts(tracks, config.pet_max, options);
}

inline nlohmann::json counts_json(const std::vector<std::size_t>& counts) {
  nlohmann::json out = nlohmann::json::array();
  for (const std::size_t c : counts) {
    out.push_back(c);
  }
  return out;
}

/// Smallest cell-aligned grid covering every qualifying zone center across
/// the given record sets; a single empty cell when nothing qualifies.
inline GridSpec derive_grid(
    const std::vector<const std::vector<MinPetRecord>*>& sets, double cell,
    double threshold) {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();
  for (const auto* records : sets) {
    for (const MinPetRecord& r : *records) {
      if (r.min_pet >= threshold) {
        continue;
      }
      min_x = std::min(min_x, r.zone_center.x);
      min_y = std::min(min_y, r.zone_center.y);
      max_x = std::max(max_x, r.zone_center.x);
      max_y = std::max(max_y, r.zone_center.y);
    }
  }
  GridSpec spec;
  spec.cell_size = cell;
  if (!std::isfinite(min_x)) {
    spec.origin = {0.0, 0.0};
    spec.nx = 1;
    spec.ny = 1;
    return spec;
  }
  spec.origin = {std::floor(min_x / cell) * cell, std::floor(min_y / cell) * cell};
  spec.nx = static_cast<std::size_t>(std::floor((max_x - spec.origin.x) / cell)) + 1;
  spec.ny = static_cast<std::size_t>(std::floor((max_y - spec.origin.y) / cell)) + 1;
  return spec;
}

inline std::string threshold_table(const std::vector<std::size_t>& conflicts,
                                   const std::vector<std::size_t>& min_pets) {
  std::string out = "threshold_s  conflicts  pairs\n";
  char line[64];
  for (std::size_t i = 0; i < kSummaryThresholds.size(); ++i) {
    std::snprintf(line, sizeof(line), "< %-9.0f  %9zu  %5zu\n",
                  kSummaryThresholds[i], conflicts[i], min_pets[i]);
    out += line;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// detect

/// Detect conflicts with the configured method and write the conflict table,
/// the per-pair minimums, and a summary of cumulative counts below each
/// whole-second threshold.
inline void cmd_detect(const RunConfig& config, const std::string& out_dir) {
  validate_run_config(config);
  const std::string digest = run_config_digest(config);
  std::filesystem::create_directories(out_dir);

  IngestReport ingest;
  const std::vector<VehicleTrack> tracks = detail::load_resampled(config, &ingest);
  const DetectResult result = detail::run_detection(config, tracks, config.method);
  const std::vector<MinPetRecord> minima = min_pets(result.records);

  const std::vector<double> thresholds(detail::kSummaryThresholds.begin(),
                                       detail::kSummaryThresholds.end());
  const std::vector<std::size_t> conflict_counts =
      threshold_counts(pets_of(result.records), thresholds);
  const std::vector<std::size_t> min_pet_counts =
      threshold_counts(pets_of(minima), thresholds);

  const std::vector<std::string> comments{"config=" + digest};
  const auto conflicts_path = std::filesystem::path(out_dir) / "conflicts.csv";
  const auto minpet_path = std::filesystem::path(out_dir) / "minpet.csv";
  write_conflicts(conflicts_path.string(), result.records, comments);
  write_min_pets(minpet_path.string(), minima, comments);

  nlohmann::json summary;
  summary["config_digest"] = digest;
  summary["method"] = config.method;
  summary["rate_hz"] = config.rate_hz;
  summary["pet_max"] = config.pet_max;
  summary["vehicles"] = ingest.vehicles_loaded;
  summary["samples"] = ingest.samples_loaded;
  summary["rows_rejected"] = ingest.rows_rejected();
  summary["records"] = result.records.size();
  summary["pairs"] = minima.size();
  summary["overlap_events"] = result.overlap_events;
  summary["thresholds_s"] = thresholds;
  summary["conflicts_below"] = detail::counts_json(conflict_counts);
  summary["min_pets_below"] = detail::counts_json(min_pet_counts);
  summary["outputs"]["conflicts.csv"] = sha256_file(conflicts_path.string());
  summary["outputs"]["minpet.csv"] = sha256_file(minpet_path.string());
  detail::write_json_file(
      (std::filesystem::path(out_dir) / "detect_summary.json").string(), summary);

  std::printf("%zu conflicts across %zu pairs (%zu overlap events)\n",
              result.records.size(), minima.size(), result.overlap_events);
  std::fputs(detail::threshold_table(conflict_counts, min_pet_counts).c_str(),
             stdout);
}

// ---------------------------------------------------------------------------
// heatmap

/// Run both detection methods over the same tracks, bin the per-pair minimum
/// locations on a shared grid, and compare cumulative counts. The footprint
/// method can only see more conflicts than the shrunken center squares, so a
/// center count above the footprint count means the inputs were inconsistent.
inline void cmd_heatmap(const RunConfig& config, const std::string& out_dir) {
  validate_run_config(config);
  const std::string digest = run_config_digest(config);
  std::filesystem::create_directories(out_dir);

  const std::vector<VehicleTrack> tracks = detail::load_resampled(config);
  const DetectResult bbox = detail::run_detection(config, tracks, "bbox");
  const DetectResult center = detail::run_detection(config, tracks, "center");
  const std::vector<MinPetRecord> bbox_min = min_pets(bbox.records);
  const std::vector<MinPetRecord> center_min = min_pets(center.records);

  const GridSpec grid = detail::derive_grid({&bbox_min, &center_min},
                                            config.heatmap_cell_ft,
                                            config.pet_max);
  const HeatmapGrid bbox_grid = build_heatmap(bbox_min, grid, config.pet_max);
  const HeatmapGrid center_grid = build_heatmap(center_min, grid, config.pet_max);

  const std::vector<double> thresholds(detail::kSummaryThresholds.begin(),
                                       detail::kSummaryThresholds.end());
  const std::vector<std::size_t> bbox_counts =
      threshold_counts(pets_of(bbox_min), thresholds);
  const std::vector<std::size_t> center_counts =
      threshold_counts(pets_of(center_min), thresholds);
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (bbox_counts[i] < center_counts[i]) {
      throw DataError("center method found more conflicts than footprints at " +
                      format_double(thresholds[i]) +
                      " s; the scene must contain overlapping footprints");
    }
  }

  const std::vector<std::string> comments{"config=" + digest};
  const auto bbox_path = std::filesystem::path(out_dir) / "heatmap_bbox.txt";
  const auto center_path = std::filesystem::path(out_dir) / "heatmap_center.txt";
  write_heatmap(bbox_path.string(), bbox_grid, comments);
  write_heatmap(center_path.string(), center_grid, comments);

  nlohmann::json summary;
  summary["config_digest"] = digest;
  summary["cell_ft"] = config.heatmap_cell_ft;
  summary["pet_max"] = config.pet_max;
  summary["thresholds_s"] = thresholds;
  summary["bbox_below"] = detail::counts_json(bbox_counts);
  summary["center_below"] = detail::counts_json(center_counts);
  summary["bbox_pairs"] = bbox_min.size();
  summary["center_pairs"] = center_min.size();
  summary["outputs"]["heatmap_bbox.txt"] = sha256_file(bbox_path.string());
  summary["outputs"]["heatmap_center.txt"] = sha256_file(center_path.string());
  detail::write_json_file(
      (std::filesystem::path(out_dir) / "heatmap_summary.json").string(),
      summary);

  auto print_counts = [](const char* label, const std::vector<std::size_t>& c) {
    std::printf("%-7s", label);
    for (const std::size_t v : c) {
      std::printf(" %6zu", v);
    }
    std::printf("\n");
  };
  std::printf("pairs below thresholds 1..5 s\n");
  print_counts("bbox", bbox_counts);
  print_counts("center", center_counts);
}

// ---------------------------------------------------------------------------
// dataset

/// Join a conflict table with the signal plan and the trajectories into the
/// five per-state observation datasets.
inline void cmd_dataset(const RunConfig& config, const std::string& conflicts_path,
                        const std::string& out_dir) {
  validate_run_config(config);
  if (!config.features.has_value()) {
    throw ConfigError("run config has no features block");
  }
  if (config.signal_plan.empty()) {
    throw ConfigError("run config does not name a signal plan");
  }
  const std::string digest = run_config_digest(config);
  std::filesystem::create_directories(out_dir);

  const std::vector<ConflictRecord> records = read_conflicts(conflicts_path);
  const SignalPlan plan = parse_signal_plan(config.signal_plan);
  const std::vector<VehicleTrack> tracks = detail::load_resampled(config);

  FeatureConfig features = *config.features;
  features.threads = config.threads;
  AssemblyReport report;
  const DatasetBundle bundle =
      assemble_observations(records, plan, tracks, features, &report);

  const auto dataset_dir = std::filesystem::path(out_dir) / "dataset";
  write_dataset(dataset_dir.string(), bundle, features, digest);

  // Extend the sidecar with provenance: input and output digests plus the
  // row-level accounting of the assembly.
  const std::string sidecar_path = (dataset_dir / "dataset.json").string();
  nlohmann::json sidecar = detail::read_json_file(sidecar_path);
  sidecar["conflicts_sha256"] = sha256_file(conflicts_path);
  for (const SignalState state : kSignalStates) {
    const std::string name = state_label(state);
    sidecar["outputs"][name + ".csv"] =
        sha256_file((dataset_dir / (name + ".csv")).string());
  }
  sidecar["assembly"] = {
      {"records_in", report.records_in},
      {"rows_assembled", report.rows_assembled},
      {"below_pet_floor", report.below_pet_floor},
      {"above_pet_cap", report.above_pet_cap},
      {"lane_without_phase", report.lane_without_phase},
      {"lane_without_movement", report.lane_without_movement},
      {"outside_plan_horizon", report.outside_plan_horizon},
      {"unknown_vehicle", report.unknown_vehicle},
  };
  detail::write_json_file(sidecar_path, sidecar);

  std::printf("%zu records in, %zu rows assembled, %zu rejected\n",
              report.records_in, report.rows_assembled, report.rejected());
  for (const SignalState state : kSignalStates) {
    std::printf("  %-14s %5zu\n", state_label(state),
                bundle.rows_for(state).size());
  }
}

// ---------------------------------------------------------------------------
// fit

/// Estimate the configured model on one dataset and write the machine report
/// plus the aligned text table. A fit that fails to converge is still a
/// result; only unreadable or degenerate inputs are errors.
inline void cmd_fit(const RunConfig& config, const std::string& data_path,
                    const std::string& model_path, const std::string& out_path,
                    std::optional<std::uint64_t> seed_override = std::nullopt) {
  validate_run_config(config);
  if (model_path.empty()) {
    throw ConfigError("no model file given");
  }
  const std::string digest = run_config_digest(config);

  ModelSpec spec = parse_model_spec(model_path);
  if (seed_override.has_value()) {
    spec.seed = *seed_override;
  }
  const DataTable table = read_data_table(data_path);
  const FitResult result = fit(table, spec, config.threads);

  nlohmann::json doc = fit_result_to_json(result);
  doc["config_digest"] = digest;
  doc["data_file"] = std::filesystem::path(data_path).filename().string();
  doc["data_sha256"] = sha256_file(data_path);
  if (const auto parent = std::filesystem::path(out_path).parent_path();
      !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  detail::write_json_file(out_path, doc);

  const std::string text = fit_result_table(result);
  const auto table_path =
      std::filesystem::path(out_path).replace_extension(".txt");
  std::ofstream table_out(table_path);
  if (!table_out) {
    throw IoError("cannot open for writing: " + table_path.string());
  }
  table_out << "# config=" << digest << '\n' << text;
  if (!table_out) {
    throw IoError("write failed: " + table_path.string());
  }

  std::fputs(text.c_str(), stdout);
  if (!result.convergence.converged) {
    std::printf("warning: optimizer stopped without converging\n");
  }
}

// ---------------------------------------------------------------------------
// report

/// Aggregate every stage artifact under one manifest and verify the chain:
/// inputs are digested, each stage's recorded output digests are recomputed,
/// and each artifact must carry the digest of this same configuration.
/// Missing artifacts are listed and make the run fail, as does any mismatch.
inline void cmd_report(const RunConfig& config, const std::string& out_dir) {
  validate_run_config(config);
  const std::string digest = run_config_digest(config);
  const std::filesystem::path base(out_dir);

  nlohmann::json manifest;
  manifest["generated_at"] = detail::utc_timestamp();
  manifest["config"] = run_config_to_json(config);
  manifest["config_digest"] = digest;

  std::vector<std::string> missing;
  std::vector<std::string> digest_mismatches;

  auto file_entry = [&](const std::string& path) {
    nlohmann::json entry;
    if (!std::filesystem::exists(path)) {
      entry["absent"] = true;
      missing.push_back(path);
      return entry;
    }
    entry["sha256"] = sha256_file(path);
    return entry;
  };

  manifest["inputs"]["trajectories"] = file_entry(config.trajectories);
  manifest["inputs"]["signal_plan"] = file_entry(config.signal_plan);
  if (!config.model.empty()) {
    manifest["inputs"]["model"] = file_entry(config.model);
  }

  // Recompute a file's digest and compare with what its producing stage
  // recorded at write time.
  auto check_recorded = [&](const nlohmann::json& outputs,
                            const std::filesystem::path& dir,
                            const std::string& name) {
    const std::string path = (dir / name).string();
    if (!std::filesystem::exists(path)) {
      missing.push_back(path);
      return;
    }
    if (!outputs.contains(name)) {
      digest_mismatches.push_back(path + " (not recorded)");
      return;
    }
    if (outputs.at(name).get<std::string>() != sha256_file(path)) {
      digest_mismatches.push_back(path);
    }
  };

  auto check_config_digest = [&](const nlohmann::json& doc,
                                 const std::string& path) {
    if (!doc.contains("config_digest") ||
        doc.at("config_digest").get<std::string>() != digest) {
      digest_mismatches.push_back(path + " (config digest)");
    }
  };

  const std::string detect_path = (base / "detect_summary.json").string();
  if (std::filesystem::exists(detect_path)) {
    const nlohmann::json detect = detail::read_json_file(detect_path);
    check_config_digest(detect, detect_path);
    if (detect.contains("outputs")) {
      check_recorded(detect.at("outputs"), base, "conflicts.csv");
      check_recorded(detect.at("outputs"), base, "minpet.csv");
    }
    manifest["stages"]["detect"] = detect;
  } else {
    missing.push_back(detect_path);
  }

  const std::string heatmap_path = (base / "heatmap_summary.json").string();
  if (std::filesystem::exists(heatmap_path)) {
    const nlohmann::json heatmap = detail::read_json_file(heatmap_path);
    check_config_digest(heatmap, heatmap_path);
    if (heatmap.contains("outputs")) {
      check_recorded(heatmap.at("outputs"), base, "heatmap_bbox.txt");
      check_recorded(heatmap.at("outputs"), base, "heatmap_center.txt");
    }
    manifest["stages"]["heatmap"] = heatmap;
  }

  const std::filesystem::path dataset_dir = base / "dataset";
  const std::string sidecar_path = (dataset_dir / "dataset.json").string();
  std::array<std::string, 5> bundle_sha{};
  if (std::filesystem::exists(sidecar_path)) {
    const nlohmann::json sidecar = detail::read_json_file(sidecar_path);
    check_config_digest(sidecar, sidecar_path);
    std::size_t state_index = 0;
    for (const SignalState state : kSignalStates) {
      const std::string name = std::string(state_label(state)) + ".csv";
      if (sidecar.contains("outputs")) {
        check_recorded(sidecar.at("outputs"), dataset_dir, name);
      }
      const std::string csv_path = (dataset_dir / name).string();
      if (std::filesystem::exists(csv_path)) {
        bundle_sha[state_index] = sha256_file(csv_path);
      }
      ++state_index;
    }
    manifest["stages"]["dataset"] = sidecar;
  } else {
    missing.push_back(sidecar_path);
  }

  std::size_t state_index = 0;
  for (const SignalState state : kSignalStates) {
    const std::string name = state_label(state);
    const std::string fit_path = (base / "fits" / (name + ".json")).string();
    if (!std::filesystem::exists(fit_path)) {
      missing.push_back(fit_path);
      ++state_index;
      continue;
    }
    const nlohmann::json fit_doc = detail::read_json_file(fit_path);
    check_config_digest(fit_doc, fit_path);
    // The fit recorded the digest of the dataset it consumed; that dataset
    // must still hash to the same value now.
    if (!bundle_sha[state_index].empty() && fit_doc.contains("data_sha256") &&
        fit_doc.at("data_sha256").get<std::string>() != bundle_sha[state_index]) {
      digest_mismatches.push_back(fit_path + " (stale dataset)");
    }
    manifest["stages"]["fits"][name] = fit_doc;
    ++state_index;
  }

  std::sort(missing.begin(), missing.end());
  std::sort(digest_mismatches.begin(), digest_mismatches.end());
  manifest["missing"] = missing;
  manifest["digest_mismatches"] = digest_mismatches;
  const bool ok = missing.empty() && digest_mismatches.empty();
  manifest["ok"] = ok;

  std::filesystem::create_directories(out_dir);
  detail::write_json_file((base / "report.json").string(), manifest);

  std::printf("report %s: %zu missing, %zu digest mismatches\n",
              ok ? "ok" : "FAILED", missing.size(), digest_mismatches.size());
  for (const std::string& m : missing) {
    std::printf("  missing: %s\n", m.c_str());
  }
  for (const std::string& m : digest_mismatches) {
    std::printf("  mismatch: %s\n", m.c_str());
  }
  if (!ok) {
    throw DataError("incomplete or inconsistent pipeline outputs under " +
                    out_dir);
  }
}

}  // namespace petsig
