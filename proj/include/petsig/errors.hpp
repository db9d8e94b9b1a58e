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

#include <stdexcept>
#include <string>

namespace petsig {

/// Bad command line usage or a semantically invalid configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input data that cannot be processed: schema mismatches, malformed
/// tables, values outside the documented domain.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem failures: unreadable inputs, unwritable outputs.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace petsig
