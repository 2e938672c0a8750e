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

#ifndef PRF_OPTIM_HPP_
#define PRF_OPTIM_HPP_

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prf/encoder.hpp"

namespace prf {

enum class OptimizerKind { kSgd, kLars };
enum class ScheduleKind { kStepDecay, kCosineRestarts };

struct Schedule {
  ScheduleKind kind = ScheduleKind::kCosineRestarts;
  // StepDecay divides by `factor` every `period_epochs`; CosineRestarts
  // anneals from base to zero over `period_epochs` and restarts.
  double factor = 10.0;
  int period_epochs = 30;

  // Pure function of the epoch; `step` is accepted for the (epoch, step)
  // contract but the schedules change only at epoch boundaries.
  double learning_rate(double base_lr, int epoch, int step = 0) const;
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kLars;
  double base_lr = 0.4;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  // LARS only.
  double trust_coefficient = 1e-3;
  double eps = 1e-9;
  Schedule schedule;

  // LARS, base lr 0.4, cosine restarts every 30 epochs.
  static OptimizerConfig lars();
  // SGD with momentum, lr 1e-3 divided by 10 every 30 epochs.
  static OptimizerConfig sgd();
  void validate() const;
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);
std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

// A trainable tensor as seen by the optimizer.
struct ParamSlot {
  const std::string* name = nullptr;
  ParamKind kind = ParamKind::kWeight;
  std::span<double> values;
  std::span<const double> grads;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg);

  const OptimizerConfig& config() const { return cfg_; }

  // SGD:  v <- m v + g + wd w;            w <- w - lr v
  // LARS: v <- m v + lr * trust * (g + wd w); w <- w - v, where
  //       trust = eta ||w|| / (||g|| + wd ||w|| + eps) for weights; biases
  //       and normalization parameters use trust 1 and no weight decay.
  // Throws NumericError (before touching anything) on non-finite grads.
  void step(std::span<const ParamSlot> slots, int epoch, int step = 0);

  // LARS local learning-rate multiplier for one tensor.
  double trust_ratio(std::span<const double> w, std::span<const double> g, ParamKind kind) const;

  const std::vector<std::vector<double>>& velocity() const { return velocity_; }
  std::vector<std::vector<double>>& velocity() { return velocity_; }

 private:
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace prf

#endif  // PRF_OPTIM_HPP_
