// Copyright 2026 The ngw-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "ngw/estimator.hpp"

namespace ngw {

class IoError : public Error {
 public:
  using Error::Error;
};

// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) throw IoError("cannot format value");
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw IoError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

/// Writes to a sibling temporary and renames it over `path`, so readers never
/// see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(parent, ec)) {
    throw IoError("output directory does not exist: " + parent.string());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

inline std::string samples_to_csv(const SampleSet& data) {
  std::string s = "x_a,x_b\n";
  s.reserve(data.size() * 40 + 8);
  for (const auto& p : data.pairs) {
    s += format_double(p[0]);
    s += ',';
    s += format_double(p[1]);
    s += '\n';
  }
  return s;
}

inline void write_samples_csv(const std::filesystem::path& path, const SampleSet& data) {
  write_file_atomic(path, samples_to_csv(data));
}

inline SampleSet samples_from_csv(std::istream& in) {
  SampleSet out;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty sample file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x_a,x_b") throw IoError("sample file header must be 'x_a,x_b'");
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("row " + std::to_string(row) + ": expected 2 columns");
    const double a = parse_double(std::string_view(line).substr(0, comma));
    const double b = parse_double(std::string_view(line).substr(comma + 1));
    if (!std::isfinite(a) || !std::isfinite(b)) {
      throw IoError("row " + std::to_string(row) + ": non-finite value");
    }
    out.pairs.push_back({a, b});
  }
  return out;
}

inline SampleSet read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return samples_from_csv(in);
}

}  // namespace ngw
