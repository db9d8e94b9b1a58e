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

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

namespace testsup {

inline std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "petsig_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string write_file(const std::string& name, const std::string& content) {
  const auto path = temp_dir() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

inline std::string fixture_path(const std::string& relative) {
  return std::string(PETSIG_FIXTURE_DIR) + "/" + relative;
}

inline bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace testsup
