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

#ifndef PRF_VIEWGEOM_HPP_
#define PRF_VIEWGEOM_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prf/common.hpp"
#include "prf/image.hpp"

namespace prf {

// Photometric settings actually applied to one view. Factors equal to their
// neutral value (1 for brightness/contrast/saturation, 0 for hue) mean the
// transform was skipped.
struct AugmentationParams {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;
  bool grayscale = false;
  bool solarize = false;
  double solarize_threshold = 0.5;

  bool operator==(const AugmentationParams&) const = default;
};

// Crop rectangle in source pixels plus the augmentation applied to it.
struct ViewSpec {
  int origin_row = 0;
  int origin_col = 0;
  int height = 0;
  int width = 0;
  bool flip_horizontal = false;
  AugmentationParams aug;

  bool operator==(const ViewSpec&) const = default;
};

void to_json(nlohmann::json& j, const ViewSpec& spec);
void from_json(const nlohmann::json& j, ViewSpec& spec);

struct AugmentedView {
  RgbImage pixels;
  ViewSpec spec;
};

struct GridShape {
  int rows = 0;
  int cols = 0;
  int cells() const { return rows * cols; }
  bool operator==(const GridShape&) const = default;
};

struct ViewSamplerConfig {
  double min_scale = 0.2;
  double max_scale = 1.0;
  double min_aspect = 3.0 / 4.0;
  double max_aspect = 4.0 / 3.0;
  int out_height = 64;
  int out_width = 128;
  // Total downsampling of the encoder; crops are at least this large.
  int feature_stride = 8;

  double jitter_prob = 0.8;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
  double grayscale_prob = 0.2;
  double solarize_prob = 0.2;
  double solarize_threshold = 0.5;
  double flip_prob = 0.5;
};

// Random crop + resize + photometric augmentation of two views of `image`.
// Throws InvalidArgument if the image is smaller than twice the feature
// stride in either dimension.
std::pair<AugmentedView, AugmentedView> sample_view_pair(const RgbImage& image, Rng& rng,
                                                         const ViewSamplerConfig& cfg);

// Deterministic rendering of a spec: crop, bilinear resize, flip, augment.
RgbImage render_view(const RgbImage& image, const ViewSpec& spec, int out_height,
                     int out_width);

// In-place photometric augmentation; output stays in [0, 1].
void apply_photometric(RgbImage& img, const AugmentationParams& aug);

// Same crop/flip geometry applied to an integer label raster (nearest
// neighbour). Photometric parameters are ignored.
std::vector<std::uint16_t> render_labels(const std::vector<std::uint16_t>& labels,
                                         int src_height, int src_width, const ViewSpec& spec,
                                         int out_height, int out_width);

struct SourcePoint {
  double row = 0.0;
  double col = 0.0;
};

// Center of feature cell (row, col) mapped back through crop/resize/flip into
// source-image pixel coordinates. Throws IndexError outside the grid.
SourcePoint cell_center_in_source(const ViewSpec& spec, int row, int col, GridShape grid);

// Source-space diagonal of one feature cell of this view.
double bin_diagonal(const ViewSpec& spec, GridShape grid);

// Positive/negative partition of view-B cells for every view-A cell.
struct CorrespondenceSet {
  GridShape grid_a;
  GridShape grid_b;
  double threshold_ratio = 0.0;
  // threshold_ratio times the larger bin diagonal, in source pixels.
  double threshold = 0.0;
  std::vector<std::vector<int>> positives;
  std::vector<std::vector<int>> negatives;
  // Row-major grid_a.cells() x grid_b.cells() membership mask.
  std::vector<std::uint8_t> positive_mask;

  bool is_positive(int i, int j) const {
    return positive_mask[std::size_t(i) * grid_b.cells() + j] != 0;
  }
  std::size_t positive_pair_count() const;
  bool empty() const { return positive_pair_count() == 0; }

  // The same relation seen from view B.
  CorrespondenceSet swapped() const;
};

CorrespondenceSet build_correspondence(const ViewSpec& spec_a, const ViewSpec& spec_b,
                                       GridShape grid_a, GridShape grid_b,
                                       double threshold_ratio = 0.7);

}  // namespace prf

#endif  // PRF_VIEWGEOM_HPP_
