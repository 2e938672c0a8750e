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

#ifndef PRF_CONTRASTIVE_HPP_
#define PRF_CONTRASTIVE_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "prf/viewgeom.hpp"

namespace prf {

enum class Provenance { kUnspecified, kRegular, kMomentum };

// rows x cols cells of `channels`-dimensional features, cell-major
// (channels contiguous per cell).
struct FeatureGrid {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<double> values;
  Provenance provenance = Provenance::kUnspecified;

  FeatureGrid() = default;
  FeatureGrid(int r, int c, int ch, Provenance p = Provenance::kUnspecified)
      : rows(r), cols(c), channels(ch), values(std::size_t(r) * c * ch, 0.0), provenance(p) {}

  int cells() const { return rows * cols; }
  GridShape shape() const { return {rows, cols}; }
  std::span<double> cell(int i) {
    return {values.data() + std::size_t(i) * channels, std::size_t(channels)};
  }
  std::span<const double> cell(int i) const {
    return {values.data() + std::size_t(i) * channels, std::size_t(channels)};
  }
  bool same_shape(const FeatureGrid& o) const {
    return rows == o.rows && cols == o.cols && channels == o.channels;
  }
  // Throws NumericError on NaN/Inf.
  void check_finite(const char* what) const;
};

// The per-cell linear map applied to features before propagation.
struct SmoothingTransform {
  int channels = 0;
  // Row-major channels x channels; output = matrix * input.
  std::vector<double> matrix;

  static SmoothingTransform identity(int channels);
};

struct LossConfig {
  double tau = 0.3;
  double alpha = 1.0;

  void validate() const;
};

// Cosine similarity; 0 when either vector has zero norm.
double cosine(std::span<const double> x, std::span<const double> y);

// x_i <- sum_j max(cos(x_i, x_j), 0)^2 * g(x_j), j over every cell of the
// grid including i. No weight normalization.
FeatureGrid smooth_features(const FeatureGrid& f, const SmoothingTransform& g);

// Backward pass of smooth_features: accumulates into grad_f and grad_g.
void smooth_features_backward(const FeatureGrid& f, const SmoothingTransform& g,
                              const FeatureGrid& grad_smoothed, FeatureGrid& grad_f,
                              std::vector<double>& grad_g);

// One direction of the spatial contrastive loss: every query cell with a
// nonempty positive set is an anchor against all key cells. Value is the
// mean over anchors.
struct DirectedSpatialLoss {
  double value = 0.0;
  int counted_cells = 0;
  FeatureGrid grad_query;
  FeatureGrid grad_key;
};

DirectedSpatialLoss spatial_loss_directed(const FeatureGrid& query, const FeatureGrid& key,
                                          const CorrespondenceSet& corr, double tau);

struct SpatialLoss {
  double value = 0.0;
  int counted_cells = 0;
  FeatureGrid grad_a;
  FeatureGrid grad_b;
};

// Both directions averaged. Throws NoPositivePairs if no cell has a
// positive partner.
SpatialLoss spatial_contrastive_loss(const FeatureGrid& f_a, const FeatureGrid& f_b,
                                     const CorrespondenceSet& corr, const LossConfig& cfg);

// Propagation loss with the smoothed side and the target side given
// separately: mean over positive pairs (i, j) of
//   -cos(smooth(query_a)_i, key_b_j) - cos(smooth(query_b)_j, key_a_i).
struct DirectedGloProLoss {
  double value = 0.0;
  std::size_t pairs = 0;
  FeatureGrid grad_query_a, grad_query_b, grad_key_a, grad_key_b;
  std::vector<double> grad_g;
};

DirectedGloProLoss glopro_loss_directed(const FeatureGrid& query_a, const FeatureGrid& query_b,
                                        const FeatureGrid& key_a, const FeatureGrid& key_b,
                                        const CorrespondenceSet& corr,
                                        const SmoothingTransform& g);

struct GloProLoss {
  double value = 0.0;
  std::size_t pairs = 0;
  FeatureGrid grad_a;
  FeatureGrid grad_b;
  std::vector<double> grad_g;
};

// Single-grid-per-view form: each grid is both smoothed and used as target.
GloProLoss global_propagation_loss(const FeatureGrid& f_a, const FeatureGrid& f_b,
                                   const CorrespondenceSet& corr, const SmoothingTransform& g);

struct LossReport {
  double alpha = 1.0;
  double l_spatial = 0.0;
  double l_glopro = 0.0;
  double l_total = 0.0;
  int counted_cells = 0;
  FeatureGrid grad_a;
  FeatureGrid grad_b;
  std::vector<double> grad_g;
};

LossReport combined_loss(const FeatureGrid& f_a, const FeatureGrid& f_b,
                         const CorrespondenceSet& corr, const SmoothingTransform& g,
                         const LossConfig& cfg);

// Training form with regular-encoder grids (queries) and momentum-encoder
// grids (keys) for both views. Gradients in the report are with respect to
// the query grids; keys receive none.
LossReport pretrain_loss(const FeatureGrid& query_a, const FeatureGrid& query_b,
                         const FeatureGrid& key_a, const FeatureGrid& key_b,
                         const CorrespondenceSet& corr, const SmoothingTransform& g,
                         const LossConfig& cfg);

void to_json(nlohmann::json& j, const LossReport& r);

}  // namespace prf

#endif  // PRF_CONTRASTIVE_HPP_
