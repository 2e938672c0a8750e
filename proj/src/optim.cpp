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

#include "prf/optim.hpp"

#include <algorithm>
#include <cmath>

namespace prf {

double Schedule::learning_rate(double base_lr, int epoch, int /*step*/) const {
  if (epoch < 0) throw InvalidArgument("epoch must be non-negative");
  switch (kind) {
    case ScheduleKind::kStepDecay:
      return base_lr * std::pow(factor, -static_cast<double>(epoch / period_epochs));
    case ScheduleKind::kCosineRestarts: {
      const double phase = static_cast<double>(epoch % period_epochs) / period_epochs;
      return base_lr * 0.5 * (1.0 + std::cos(M_PI * phase));
    }
  }
  return base_lr;
}

OptimizerConfig OptimizerConfig::lars() {
  OptimizerConfig c;
  c.kind = OptimizerKind::kLars;
  c.base_lr = 0.4;
  c.schedule = {ScheduleKind::kCosineRestarts, 10.0, 30};
  return c;
}

OptimizerConfig OptimizerConfig::sgd() {
  OptimizerConfig c;
  c.kind = OptimizerKind::kSgd;
  c.base_lr = 1e-3;
  c.schedule = {ScheduleKind::kStepDecay, 10.0, 30};
  return c;
}

void OptimizerConfig::validate() const {
  if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) {
    throw InvalidArgument("learning rate must be non-negative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight decay must be non-negative");
  if (!(trust_coefficient > 0.0) || !(eps > 0.0)) {
    throw InvalidArgument("LARS trust coefficient and eps must be positive");
  }
  if (schedule.period_epochs <= 0 || !(schedule.factor > 0.0)) {
    throw InvalidArgument("schedule period and factor must be positive");
  }
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "lars"; }

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "lars") return OptimizerKind::kLars;
  throw InvalidArgument("unknown optimizer '" + s + "' (expected sgd or lars)");
}

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = nlohmann::json{
      {"kind", to_string(c.kind)},
      {"base_lr", c.base_lr},
      {"momentum", c.momentum},
      {"weight_decay", c.weight_decay},
      {"trust_coefficient", c.trust_coefficient},
      {"eps", c.eps},
      {"schedule",
       {{"kind", c.schedule.kind == ScheduleKind::kStepDecay ? "step" : "cosine"},
        {"factor", c.schedule.factor},
        {"period_epochs", c.schedule.period_epochs}}},
  };
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  c.kind = optimizer_kind_from_string(j.at("kind").get<std::string>());
  j.at("base_lr").get_to(c.base_lr);
  j.at("momentum").get_to(c.momentum);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("trust_coefficient").get_to(c.trust_coefficient);
  j.at("eps").get_to(c.eps);
  const auto& s = j.at("schedule");
  const auto kind = s.at("kind").get<std::string>();
  if (kind == "step") {
    c.schedule.kind = ScheduleKind::kStepDecay;
  } else if (kind == "cosine") {
    c.schedule.kind = ScheduleKind::kCosineRestarts;
  } else {
    throw InvalidArgument("unknown schedule '" + kind + "'");
  }
  s.at("factor").get_to(c.schedule.factor);
  s.at("period_epochs").get_to(c.schedule.period_epochs);
  c.validate();
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

namespace {

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double Optimizer::trust_ratio(std::span<const double> w, std::span<const double> g,
                              ParamKind kind) const {
  if (kind != ParamKind::kWeight) return 1.0;
  const double wn = l2(w);
  const double gn = l2(g);
  if (wn <= 0.0 || gn <= 0.0) return 1.0;
  return cfg_.trust_coefficient * wn / (gn + cfg_.weight_decay * wn + cfg_.eps);
}

void Optimizer::step(std::span<const ParamSlot> slots, int epoch, int step) {
  for (const auto& s : slots) {
    if (s.values.size() != s.grads.size()) throw ShapeError("gradient size mismatch");
    for (double g : s.grads) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in " + (s.name ? *s.name : std::string("?")) +
                           " at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
      }
    }
  }
  if (velocity_.empty()) {
    velocity_.reserve(slots.size());
    for (const auto& s : slots) velocity_.emplace_back(s.values.size(), 0.0);
  } else if (velocity_.size() != slots.size()) {
    throw ShapeError("optimizer was initialized for a different parameter list");
  }

  const double lr = cfg_.schedule.learning_rate(cfg_.base_lr, epoch, step);
  const double m = cfg_.momentum;
  for (std::size_t t = 0; t < slots.size(); ++t) {
    const auto& s = slots[t];
    auto& v = velocity_[t];
    if (v.size() != s.values.size()) throw ShapeError("optimizer state size mismatch");
    if (cfg_.kind == OptimizerKind::kSgd) {
      const double wd = cfg_.weight_decay;
      for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = m * v[k] + s.grads[k] + wd * s.values[k];
        s.values[k] -= lr * v[k];
      }
    } else {
      const bool decayed = s.kind == ParamKind::kWeight;
      const double wd = decayed ? cfg_.weight_decay : 0.0;
      const double local = lr * trust_ratio(s.values, s.grads, s.kind);
      for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = m * v[k] + local * (s.grads[k] + wd * s.values[k]);
        s.values[k] -= v[k];
      }
    }
  }
}

}  // namespace prf
