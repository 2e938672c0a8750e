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

#include "prf/json_util.hpp"

#include "prf/common.hpp"

namespace prf {

nlohmann::json strict_merge(const nlohmann::json& defaults, const nlohmann::json& overrides,
                            const std::string& path) {
  if (overrides.is_null()) return defaults;
  if (!overrides.is_object()) {
    throw InvalidArgument("config " + (path.empty() ? std::string("root") : path) +
                          " must be a JSON object");
  }
  nlohmann::json out = defaults;
  for (const auto& [key, value] : overrides.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) throw InvalidArgument("unknown config key '" + where + "'");
    const auto& d = defaults.at(key);
    if (d.is_object() && value.is_object()) {
      out[key] = strict_merge(d, value, where);
    } else {
      const bool num_ok = d.is_number() && value.is_number();
      if (!num_ok && d.type() != value.type() && !d.is_null()) {
        throw InvalidArgument("config key '" + where + "' has the wrong type");
      }
      out[key] = value;
    }
  }
  return out;
}

}  // namespace prf
