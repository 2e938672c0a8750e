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

#ifndef PRF_PRETRAIN_HPP_
#define PRF_PRETRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prf/contrastive.hpp"
#include "prf/encoder.hpp"
#include "prf/optim.hpp"
#include "prf/panoptic.hpp"
#include "prf/viewgeom.hpp"

namespace prf {

// Defaults are the reference settings at desk scale: 90 epochs, LARS with
// cosine restarts, inputs 1/4 of 256x512, batch 100 scaled down to 4.
struct TrainConfig {
  int epochs = 90;
  int batch_size = 4;
  // 2 doubles the batch ("LARS large").
  int batch_scale = 1;
  int height = 64;
  int width = 128;
  std::uint64_t seed = 0;
  double alpha = 1.0;
  double tau = 0.3;
  double threshold_ratio = 0.7;
  double beta = 0.99;
  // 0 means no cap beyond the epoch count.
  int max_steps = 0;
  int max_resample = 8;
  bool warm_start = false;
  double warm_start_lr = 0.05;
  OptimizerConfig optimizer = OptimizerConfig::lars();
  EncoderArch arch;
  ViewSamplerConfig sampler;

  int effective_batch() const { return batch_size * batch_scale; }
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
// Strict: unknown keys are rejected, missing keys keep defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TraceRow {
  int step = 0;
  int epoch = 0;
  double lr = 0.0;
  double l_spatial = 0.0;
  double l_glopro = 0.0;
  double l_total = 0.0;
};

// Header step,epoch,lr,l_spatial,l_glopro,l_total.
std::string trace_csv(std::span<const TraceRow> rows);

struct TrainImage {
  RgbImage rgb;
  // Optional labels, used only by the supervised warm start.
  std::optional<PanopticMap> labels;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<TrainImage> dataset);

  // Runs until the epoch budget (or max_steps) is exhausted.
  void run();
  // One optimization step; false once training is complete.
  bool step();
  bool done() const;

  const TrainConfig& config() const { return cfg_; }
  EncoderPair& encoders() { return pair_; }
  const EncoderPair& encoders() const { return pair_; }
  SmoothingTransform& smoothing() { return smoothing_; }
  const SmoothingTransform& smoothing() const { return smoothing_; }
  Optimizer& optimizer() { return optimizer_; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  int steps_done() const { return global_step_; }
  int epoch() const { return epoch_; }
  int steps_per_epoch() const;
  // View pairs that had to be resampled for lack of positive cells.
  int resampled_pairs() const { return resampled_; }
  // Images dropped from a batch after exhausting resamples.
  int dropped_images() const { return dropped_; }

  // Mean per-cell cross-entropy after the warm start, if it ran.
  std::optional<double> warm_start_loss() const { return warm_start_loss_; }

  // Versioned binary container: magic, JSON header, little-endian float64
  // blobs. Restoring resumes the exact same trajectory.
  void save_checkpoint(const std::filesystem::path& path) const;
  static Trainer load_checkpoint(const std::filesystem::path& path,
                                 std::vector<TrainImage> dataset);
  static nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

 private:
  void begin_epoch();
  void supervised_warm_start();

  TrainConfig cfg_;
  std::vector<TrainImage> dataset_;
  Rng init_rng_;
  EncoderPair pair_;
  SmoothingTransform smoothing_;
  Optimizer optimizer_;
  Rng data_rng_;
  std::vector<int> order_;
  int epoch_ = 0;
  int cursor_ = 0;
  int global_step_ = 0;
  int resampled_ = 0;
  int dropped_ = 0;
  std::optional<double> warm_start_loss_;
  std::vector<TraceRow> trace_;
};

// Loads every NNN.ppm (and NNN.pgm when present) from a directory.
std::vector<TrainImage> load_dataset(const std::filesystem::path& dir);

// Mean pairwise cosine of projection features between cells of the same
// label and of different labels. Cells take the majority label of their
// pixel bin.
struct SeparationStats {
  double intra = 0.0;
  double inter = 0.0;
  double gap() const { return intra - inter; }
};

SeparationStats feature_separation(Encoder& encoder, std::span<const RgbImage> images,
                                   std::span<const std::vector<std::uint8_t>> labels);

}  // namespace prf

#endif  // PRF_PRETRAIN_HPP_
