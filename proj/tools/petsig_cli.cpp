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
// Command line front end. Exit codes: 0 success, 2 usage or configuration
// error, 3 data error, 4 I/O error.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <petsig.hpp>

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

petsig::RunConfig effective_config(const GlobalArgs& args) {
  if (args.config_path.empty()) {
    throw petsig::ConfigError("no --config file given");
  }
  petsig::RunConfig config = petsig::parse_run_config(args.config_path);
  if (args.seed.has_value()) {
    config.seed = *args.seed;
  }
  if (args.threads.has_value()) {
    config.threads = *args.threads;
  }
  petsig::validate_run_config(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"post encroachment conflicts, signal joins, ordered fits"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "run configuration JSON");
  app.add_option("--out", args.out_dir, "output directory");
  app.add_option("--seed", args.seed, "override the configured seed");
  app.add_option("--threads", args.threads, "worker thread count");

  CLI::App* detect = app.add_subcommand("detect", "find conflicts");
  CLI::App* heatmap =
      app.add_subcommand("heatmap", "compare footprint and center methods");

  std::string conflicts_path;
  CLI::App* dataset =
      app.add_subcommand("dataset", "assemble per-state observation tables");
  dataset->add_option("--conflicts", conflicts_path,
                      "conflict table (default <out>/conflicts.csv)");

  std::string fit_data;
  std::string fit_model;
  std::string fit_out;
  CLI::App* fit = app.add_subcommand("fit", "estimate an ordered model");
  fit->add_option("--data", fit_data, "observation table")->required();
  fit->add_option("--model", fit_model, "model spec (default from config)");
  fit->add_option("--out-file", fit_out, "report path (default <out>/fit.json)");

  CLI::App* report =
      app.add_subcommand("report", "verify and aggregate all stage outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const petsig::RunConfig config = effective_config(args);
    if (detect->parsed()) {
      petsig::cmd_detect(config, args.out_dir);
    } else if (heatmap->parsed()) {
      petsig::cmd_heatmap(config, args.out_dir);
    } else if (dataset->parsed()) {
      if (conflicts_path.empty()) {
        conflicts_path = args.out_dir + "/conflicts.csv";
      }
      petsig::cmd_dataset(config, conflicts_path, args.out_dir);
    } else if (fit->parsed()) {
      if (fit_model.empty()) {
        fit_model = config.model;
      }
      if (fit_out.empty()) {
        fit_out = args.out_dir + "/fit.json";
      }
      petsig::cmd_fit(config, fit_data, fit_model, fit_out, args.seed);
    } else if (report->parsed()) {
      petsig::cmd_report(config, args.out_dir);
    }
  } catch (const petsig::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const petsig::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const petsig::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
