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

#ifndef PRF_ENCODER_HPP_
#define PRF_ENCODER_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prf/common.hpp"
#include "prf/contrastive.hpp"
#include "prf/image.hpp"

namespace prf {

struct ConvStage {
  int out_channels = 0;
  int stride = 1;
  bool operator==(const ConvStage&) const = default;
};

// Backbone of 3x3 conv + ReLU stages followed by the projection head
// 1x1 linear -> batch norm -> ReLU -> 1x1 linear.
struct EncoderArch {
  int in_channels = 3;
  std::vector<ConvStage> stages = {{8, 2}, {16, 2}, {32, 2}};
  int head_hidden = 64;
  int head_out = 16;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  int total_stride() const;
  int backbone_channels() const;
  void validate() const;
  bool operator==(const EncoderArch&) const = default;
};

void to_json(nlohmann::json& j, const EncoderArch& a);
void from_json(const nlohmann::json& j, EncoderArch& a);

enum class ParamKind { kWeight, kBias, kNorm };

struct ParamTensor {
  std::string name;
  ParamKind kind = ParamKind::kWeight;
  std::vector<int> shape;
  std::vector<double> values;
};

struct ParameterSet {
  std::vector<ParamTensor> tensors;

  std::size_t scalar_count() const;
  bool same_layout(const ParameterSet& other) const;
  ParameterSet zeros_like() const;
  ParamTensor& get(const std::string& name);
  const ParamTensor& get(const std::string& name) const;
};

enum class Mode { kTrain, kEval };

// Activations retained by a training-mode forward pass for backward().
struct ForwardCache;

class Encoder {
 public:
  // Kaiming fan-in init for linear/conv weights, zero biases, unit BN scale.
  Encoder(const EncoderArch& arch, Rng& rng);

  const EncoderArch& arch() const { return arch_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  // Batch-norm running statistics.
  ParameterSet& buffers() { return buffers_; }
  const ParameterSet& buffers() const { return buffers_; }

  GridShape grid_shape(int height, int width) const;

  // Batched forward. Train mode normalizes with batch statistics over every
  // cell of every image and updates the running statistics. Throws
  // ShapeError if a view is not divisible by the total stride.
  std::vector<FeatureGrid> forward(std::span<const RgbImage> batch, Mode mode,
                                   ForwardCache* cache = nullptr);
  FeatureGrid forward(const RgbImage& view, Mode mode);

  // Same as forward() without touching running statistics.
  std::vector<FeatureGrid> forward_const(std::span<const RgbImage> batch, Mode mode,
                                         ForwardCache* cache = nullptr) const;

  // Parameter gradients for upstream gradients on every output grid.
  ParameterSet backward(const ForwardCache& cache, std::span<const FeatureGrid> grad_out) const;

 private:
  EncoderArch arch_;
  ParameterSet params_;
  ParameterSet buffers_;
};

struct ForwardCache {
  struct Tensor {
    int h = 0, w = 0, c = 0;
    std::vector<double> data;
  };
  Mode mode = Mode::kTrain;
  // inputs[s][b]: input to stage s (s == stages.size() is the head input).
  std::vector<std::vector<Tensor>> stage_inputs;
  std::vector<std::vector<Tensor>> stage_preact;
  std::vector<Tensor> head_hidden;   // fc1 output
  std::vector<Tensor> head_normed;   // xhat
  std::vector<Tensor> head_relu_in;  // gamma * xhat + beta
  std::vector<double> inv_std;
};

// Momentum encoder: an exponential moving average of the regular encoder.
struct EncoderPair {
  Encoder online;
  Encoder momentum;
  double beta = 0.99;

  // Both start from identical weights.
  EncoderPair(const EncoderArch& arch, Rng& rng, double beta = 0.99);
};

// momentum <- beta * momentum + (1 - beta) * online, element-wise.
void ema_update(ParameterSet& momentum, const ParameterSet& online, double beta);

// Applies ema_update to the parameters and copies batch-norm running
// statistics verbatim.
void ema_update(EncoderPair& pair);

}  // namespace prf

#endif  // PRF_ENCODER_HPP_
