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

#ifndef PRF_SELFCHECK_HPP_
#define PRF_SELFCHECK_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace prf {

// Finite-difference verification of the analytic loss and encoder gradients
// on small random problems.
struct SelfCheckConfig {
  std::uint64_t seed = 0;
  int seeds = 50;
  double step = 1e-5;
  double loss_tolerance = 1e-4;
  double encoder_tolerance = 1e-3;
  // Relative errors are |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

nlohmann::json to_json(const SelfCheckConfig& c);
SelfCheckConfig self_check_config_from_json(const nlohmann::json& j);

struct GradientCheck {
  std::string name;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  int worst_seed = -1;
  std::int64_t coordinates = 0;
  // Coordinates whose perturbation crossed a ReLU kink; not compared.
  std::int64_t skipped = 0;
  bool pass() const { return max_rel_error < tolerance; }
};

struct SelfCheckReport {
  int seeds = 0;
  std::vector<GradientCheck> checks;
  bool pass() const;
};

double relative_error(double analytic, double numeric, double floor);

SelfCheckReport run_self_check(const SelfCheckConfig& cfg);
nlohmann::json to_json(const SelfCheckReport& r);

}  // namespace prf

#endif  // PRF_SELFCHECK_HPP_
