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

#ifndef PRF_IMAGE_HPP_
#define PRF_IMAGE_HPP_

#include <cstddef>
#include <filesystem>
#include <vector>

namespace prf {

// Interleaved RGB raster, channel values in [0, 1].
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), data(std::size_t(h) * w * 3, 0.0) {}

  double& at(int r, int c, int ch) { return data[(std::size_t(r) * width + c) * 3 + ch]; }
  double at(int r, int c, int ch) const {
    return data[(std::size_t(r) * width + c) * 3 + ch];
  }

  bool operator==(const RgbImage&) const = default;
};

// Binary P6, maxval 255. Values are quantized with round-to-nearest.
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& path);

}  // namespace prf

#endif  // PRF_IMAGE_HPP_
