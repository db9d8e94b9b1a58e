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

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "petsig/errors.hpp"
#include "petsig/util.hpp"

namespace petsig {

// Minimal comma-separated reader: one header line, '#' comment lines
// ignored, fields trimmed. Quoting is not supported; none of the formats
// handled here produce quoted fields.
class CsvReader {
public:
  explicit CsvReader(const std::string& path) : in_(path) {
    if (!in_) {
      throw IoError("cannot open " + path);
    }
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      const std::string_view t = trim(line);
      if (t.empty() || t.front() == '#') {
        continue;
      }
      std::vector<std::string_view> fields;
      split(t, ',', fields);
      header_.reserve(fields.size());
      for (const auto f : fields) {
        header_.emplace_back(trim(f));
      }
      return;
    }
    throw DataError("no header row in " + path);
  }

  const std::vector<std::string>& header() const { return header_; }

  /// Index of a header column, -1 if absent.
  int column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == name) {
        return static_cast<int>(i);
      }
    }
    return -1;
  }

  /// Fills fields (views into an internal buffer valid until the next call).
  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, line_)) {
      ++lineno_;
      const std::string_view t = trim(line_);
      if (t.empty() || t.front() == '#') {
        continue;
      }
      split(t, ',', fields);
      for (auto& f : fields) {
        f = trim(f);
      }
      return true;
    }
    return false;
  }

  std::size_t line_number() const { return lineno_; }

private:
  std::ifstream in_;
  std::string line_;
  std::vector<std::string> header_;
  std::size_t lineno_ = 0;
};

class CsvWriter {
public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) {
      throw IoError("cannot write " + path);
    }
  }

  void comment(std::string_view text) { out_ << "# " << text << "\n"; }

  void line(std::string_view text) { out_ << text << "\n"; }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) {
        out_ << ',';
      }
      out_ << fields[i];
    }
    out_ << "\n";
  }

  void close() {
    out_.close();
    if (out_.fail()) {
      throw IoError("write failure on close");
    }
  }

private:
  std::ofstream out_;
};

}  // namespace petsig
