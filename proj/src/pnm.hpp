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

#ifndef PRF_SRC_PNM_HPP_
#define PRF_SRC_PNM_HPP_

#include <istream>
#include <string>

namespace prf::detail {

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

// Parses "Px <w> <h> <maxval>" with '#' comments and consumes the single
// whitespace byte that precedes the raster.
PnmHeader read_pnm_header(std::istream& in, const std::string& source);

}  // namespace prf::detail

#endif  // PRF_SRC_PNM_HPP_
