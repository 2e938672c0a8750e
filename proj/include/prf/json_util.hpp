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

#ifndef PRF_JSON_UTIL_HPP_
#define PRF_JSON_UTIL_HPP_

#include <string>

#include <nlohmann/json.hpp>

namespace prf {

// Overlays `overrides` onto `defaults`, recursing into objects. Any key not
// present in `defaults` is rejected with InvalidArgument naming its path.
nlohmann::json strict_merge(const nlohmann::json& defaults, const nlohmann::json& overrides,
                            const std::string& path = "");

}  // namespace prf

#endif  // PRF_JSON_UTIL_HPP_
