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

#ifndef PRF_PANORAMA_HPP_
#define PRF_PANORAMA_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prf/image.hpp"
#include "prf/panoptic.hpp"

namespace prf {

// Equirectangular 360 degree panorama; column 0 adjoins column width-1.
struct Panorama {
  RgbImage rgb;
  PanopticMap labels;
};

inline constexpr int kReferenceHeight = 400;
inline constexpr int kReferenceWidth = 2048;

// round(fov / 360 * width), halves rounded up.
int fov_crop_width(double fov_degrees, int width);

// First column of the window of `crop_width` columns centred on
// `center_col`, wrapped into [0, width).
int fov_crop_start(int crop_width, int center_col, int width);

// Contiguous full-height column window with wraparound. fov must be in
// (0, 360]; 360 returns the map as stored.
PanopticMap crop_fov(const PanopticMap& map, double fov_degrees, int center_col);
RgbImage crop_fov(const RgbImage& img, double fov_degrees, int center_col);
Panorama crop_fov(const Panorama& p, double fov_degrees, int center_col);

struct FovSweepConfig {
  std::vector<double> fovs = {140, 170, 205, 237, 271, 304, 338};
  // Defaults to width / 2.
  std::optional<int> center_col;
};

struct FovSweepRow {
  double fov = 0.0;
  int crop_width = 0;
  PQReport report;
};

// One dataset-level evaluation per FoV, rows in ascending FoV order.
std::vector<FovSweepRow> fov_sweep(std::span<const PanopticMap> preds,
                                   std::span<const PanopticMap> gts, const ClassTable& table,
                                   const FovSweepConfig& cfg, int threads = 1);

// Header fov_deg,pq,pq_stuff,pq_things.
std::string fov_sweep_csv(const std::vector<FovSweepRow>& rows);

struct SyntheticSceneSpec {
  std::uint64_t seed = 0;
  int height = kReferenceHeight;
  int width = kReferenceWidth;
  int min_cars = 2, max_cars = 6;
  int min_persons = 2, max_persons = 8;
  // Semi-axes as fractions of the panorama height.
  double car_half_width_min = 0.08, car_half_width_max = 0.16;
  double car_half_height_min = 0.04, car_half_height_max = 0.07;
  double person_half_width_min = 0.012, person_half_width_max = 0.025;
  double person_half_height_min = 0.04, person_half_height_max = 0.08;
  // Street band starts around this fraction of the height and spans all columns.
  double street_top = 0.62;
  double horizon = 0.42;
  int min_islands = 1, max_islands = 3;
  double noise = 0.03;

  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSceneSpec& s);
// Rejects unknown keys; missing keys keep their defaults.
void from_json(const nlohmann::json& j, SyntheticSceneSpec& s);

// Street band, bow-shaped sidewalk islands, elliptical cars/persons with
// unique instance ids, and RGB textures keyed to the labels.
Panorama generate_synthetic(const SyntheticSceneSpec& spec);

// Nominal mean colour of the texture family drawn for each class; void is
// the sky/background family.
struct TextureFamily {
  int class_id;  // kVoidId for background
  double rgb[3];
};
const std::vector<TextureFamily>& texture_families();

// Two interleaved textures over Voronoi regions; labels are 0 or 1 per pixel.
struct TextureMosaic {
  RgbImage rgb;
  std::vector<std::uint8_t> labels;
};
TextureMosaic generate_texture_mosaic(std::uint64_t seed, int height, int width,
                                      int regions = 6);

}  // namespace prf

#endif  // PRF_PANORAMA_HPP_
