//
// Copyright 2026 The DPDM Lab Authors
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
//

#ifndef DPDM_TOOLS_RUN_IO_H_
#define DPDM_TOOLS_RUN_IO_H_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dpdm/gmm_oracle.h"
#include "dpdm/types.h"

namespace dpdm::cli {

// Environment variable naming the default root for run outputs.
inline constexpr const char* kOutputRootEnv = "DPDM_OUTPUT_ROOT";

// Lowercase hex SHA-256 of a file's bytes. Throws std::runtime_error when the
// file cannot be read.
std::string Sha256File(const std::filesystem::path& path);

// Writes `contents` to a temporary sibling and renames it over `path`, so
// readers never observe a partially written file.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents);

// $DPDM_OUTPUT_ROOT if set and non-empty, else "runs".
std::filesystem::path OutputRoot();

// `requested` if non-empty (relative paths are taken relative to the output
// root), else OutputRoot() / fallback.
std::filesystem::path ResolveOutputDir(const std::string& requested,
                                       const std::string& fallback);

// Collects output files and renders them, with hashes, for a manifest.
class OutputFiles {
 public:
  void Add(std::string role, std::filesystem::path path);
  // {role: {"path": ..., "sha256": ...}} in insertion order of roles.
  nlohmann::ordered_json ToJson() const;

 private:
  std::vector<std::pair<std::string, std::filesystem::path>> files_;
};

// Scatter plot of 2D samples with the mixture means marked.
std::string ScatterSvg(std::span<const Point2> points, const GmmSpec& spec);

// Log-log line plot of y against x with markers.
std::string LogLogSvg(std::span<const double> x, std::span<const double> y,
                      std::string_view x_label, std::string_view y_label);

}  // namespace dpdm::cli

#endif  // DPDM_TOOLS_RUN_IO_H_
