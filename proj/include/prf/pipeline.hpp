/* Copyright 2026 The PRF Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef PRF_PIPELINE_HPP_
#define PRF_PIPELINE_HPP_

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace prf::pipeline {

// Command names accepted by default_config() and run().
const std::vector<std::string>& commands();

// Fully populated default configuration of a command. Config files may set
// any subset of these keys; anything else is rejected.
nlohmann::json default_config(const std::string& command);

// Request layout shared by every command:
//   {"config": {...}, "overrides": {...}, "out": "<dir>", "threads": 1,
//    "inputs": {...command-specific paths...}}
// Overrides are applied on top of config, and the result on top of the
// defaults. Outputs are written under "out" and read back for validation.
// Returns a summary object; throws prf::Error subclasses on failure.
struct Result {
  nlohmann::json summary;
  // Nonzero when outputs were written but a check inside the command failed
  // (self-check tolerance exceeded); maps to the numeric-failure code.
  bool failed = false;
};

Result run(const std::string& command, const nlohmann::json& request);

// The configuration run() would use for this request, fully populated and
// validated, without touching the filesystem.
nlohmann::json resolve_config(const std::string& command, const nlohmann::json& request);

// Writes `content` to `path`, then reads it back and compares.
void write_verified(const std::string& path, const std::string& content);

}  // namespace prf::pipeline

#endif  // PRF_PIPELINE_HPP_
