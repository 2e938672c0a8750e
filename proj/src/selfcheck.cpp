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

#include "prf/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "prf/contrastive.hpp"
#include "prf/encoder.hpp"
#include "prf/json_util.hpp"
#include "prf/viewgeom.hpp"

namespace prf {

nlohmann::json to_json(const SelfCheckConfig& c) {
  return {{"seed", c.seed},
          {"seeds", c.seeds},
          {"step", c.step},
          {"loss_tolerance", c.loss_tolerance},
          {"encoder_tolerance", c.encoder_tolerance},
          {"floor", c.floor}};
}

SelfCheckConfig self_check_config_from_json(const nlohmann::json& j) {
  const auto m = strict_merge(to_json(SelfCheckConfig{}), j);
  SelfCheckConfig c;
  c.seed = m.at("seed").get<std::uint64_t>();
  m.at("seeds").get_to(c.seeds);
  m.at("step").get_to(c.step);
  m.at("loss_tolerance").get_to(c.loss_tolerance);
  m.at("encoder_tolerance").get_to(c.encoder_tolerance);
  m.at("floor").get_to(c.floor);
  if (c.seeds <= 0 || !(c.step > 0.0) || !(c.loss_tolerance > 0.0) ||
      !(c.encoder_tolerance > 0.0) || !(c.floor > 0.0)) {
    throw InvalidArgument("self-check settings must be positive");
  }
  return c;
}

bool SelfCheckReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass(); });
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace {

struct Problem {
  FeatureGrid a, b;
  CorrespondenceSet corr;
  SmoothingTransform g;
  double alpha = 1.0;
};

FeatureGrid random_grid(GridShape s, int channels, Rng& rng) {
  FeatureGrid f(s.rows, s.cols, channels);
  for (double& v : f.values) v = rng.normal();
  return f;
}

ViewSpec random_spec(Rng& rng, int src) {
  ViewSpec v;
  v.height = static_cast<int>(rng.uniform_int(src / 4, src));
  v.width = static_cast<int>(rng.uniform_int(src / 4, src));
  v.origin_row = static_cast<int>(rng.uniform_int(0, src - v.height));
  v.origin_col = static_cast<int>(rng.uniform_int(0, src - v.width));
  v.flip_horizontal = rng.bernoulli(0.5);
  return v;
}

CorrespondenceSet random_correspondence(Rng& rng, GridShape ga, GridShape gb) {
  for (;;) {
    auto c = build_correspondence(random_spec(rng, 64), random_spec(rng, 64), ga, gb,
                                  rng.uniform(0.7, 1.5));
    if (!c.empty()) return c;
  }
}

Problem random_problem(Rng& rng) {
  Problem p;
  const int channels = static_cast<int>(rng.uniform_int(1, 8));
  const GridShape ga{static_cast<int>(rng.uniform_int(1, 4)), static_cast<int>(rng.uniform_int(1, 4))};
  const GridShape gb{static_cast<int>(rng.uniform_int(1, 4)), static_cast<int>(rng.uniform_int(1, 4))};
  p.a = random_grid(ga, channels, rng);
  p.b = random_grid(gb, channels, rng);
  p.corr = random_correspondence(rng, ga, gb);
  p.g = SmoothingTransform::identity(channels);
  for (double& v : p.g.matrix) v += 0.3 * rng.normal();
  p.alpha = rng.uniform(0.25, 4.0);
  return p;
}

using Signature = std::vector<std::uint8_t>;

// Compares analytic gradients with central differences of `loss` for every
// coordinate of each tensor in `params`. When `signature` is given, a
// coordinate whose perturbation flips any ReLU input sign is skipped: the
// difference quotient straddles a kink there.
void compare(GradientCheck& check, int seed, double step, double floor,
             const std::vector<std::vector<double>*>& params,
             const std::vector<const std::vector<double>*>& grads,
             const std::function<double(Signature*)>& loss, bool kink_aware = false) {
  Signature base, sig_up, sig_down;
  if (kink_aware) loss(&base);
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = *params[t];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p[k];
      p[k] = saved + step;
      const double up = loss(kink_aware ? &sig_up : nullptr);
      p[k] = saved - step;
      const double down = loss(kink_aware ? &sig_down : nullptr);
      p[k] = saved;
      if (kink_aware && (sig_up != base || sig_down != base)) {
        ++check.skipped;
        continue;
      }
      const double err = relative_error((*grads[t])[k], (up - down) / (2.0 * step), floor);
      ++check.coordinates;
      if (err > check.max_rel_error || check.worst_seed < 0) {
        check.max_rel_error = std::max(check.max_rel_error, err);
        check.worst_seed = seed;
      }
    }
  }
}

void check_losses(Problem p, int seed, const SelfCheckConfig& cfg, GradientCheck& spatial,
                  GradientCheck& glopro, GradientCheck& total) {
  const LossConfig lc{0.3, p.alpha};
  {
    const auto r = spatial_contrastive_loss(p.a, p.b, p.corr, lc);
    compare(spatial, seed, cfg.step, cfg.floor, {&p.a.values, &p.b.values},
            {&r.grad_a.values, &r.grad_b.values},
            [&](Signature*) { return spatial_contrastive_loss(p.a, p.b, p.corr, lc).value; });
  }
  {
    const auto r = global_propagation_loss(p.a, p.b, p.corr, p.g);
    compare(glopro, seed, cfg.step, cfg.floor, {&p.a.values, &p.b.values, &p.g.matrix},
            {&r.grad_a.values, &r.grad_b.values, &r.grad_g},
            [&](Signature*) { return global_propagation_loss(p.a, p.b, p.corr, p.g).value; });
  }
  {
    const auto r = combined_loss(p.a, p.b, p.corr, p.g, lc);
    compare(total, seed, cfg.step, cfg.floor, {&p.a.values, &p.b.values, &p.g.matrix},
            {&r.grad_a.values, &r.grad_b.values, &r.grad_g},
            [&](Signature*) { return combined_loss(p.a, p.b, p.corr, p.g, lc).l_total; });
  }
}

RgbImage random_image(int h, int w, Rng& rng) {
  RgbImage img(h, w);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

void check_encoder(Rng& rng, int seed, const SelfCheckConfig& cfg, GradientCheck& check) {
  EncoderArch arch;
  arch.stages = {{4, 2}, {6, 2}};
  arch.head_hidden = 8;
  arch.head_out = 4;
  Encoder enc(arch, rng);
  // Zero biases put dead ReLU patches exactly on the kink and can yield
  // exactly-zero features; move off those points.
  for (auto& t : enc.params().tensors) {
    if (t.kind == ParamKind::kBias) {
      for (double& v : t.values) v = 0.1 * rng.normal();
    }
  }
  const int h = 8 * static_cast<int>(rng.uniform_int(1, 2));
  const int w = 8 * static_cast<int>(rng.uniform_int(1, 2));
  const std::vector<RgbImage> va = {random_image(h, w, rng)};
  const std::vector<RgbImage> vb = {random_image(h, w, rng)};
  const GridShape grid = enc.grid_shape(h, w);
  const auto corr = random_correspondence(rng, grid, grid);
  auto g = SmoothingTransform::identity(arch.head_out);
  for (double& v : g.matrix) v += 0.3 * rng.normal();
  const LossConfig lc{0.3, rng.uniform(0.25, 4.0)};

  auto loss = [&](Signature* sig) {
    ForwardCache ca, cb;
    const auto fa = enc.forward_const(va, Mode::kTrain, &ca);
    const auto fb = enc.forward_const(vb, Mode::kTrain, &cb);
    if (sig) {
      sig->clear();
      for (const auto* c : {&ca, &cb}) {
        for (const auto& stage : c->stage_preact)
          for (const auto& t : stage)
            for (double v : t.data) sig->push_back(v > 0.0);
        for (const auto& t : c->head_relu_in)
          for (double v : t.data) sig->push_back(v > 0.0);
      }
    }
    return combined_loss(fa[0], fb[0], corr, g, lc).l_total;
  };
  ForwardCache ca, cb;
  const auto fa = enc.forward_const(va, Mode::kTrain, &ca);
  const auto fb = enc.forward_const(vb, Mode::kTrain, &cb);
  const auto r = combined_loss(fa[0], fb[0], corr, g, lc);
  auto grads = enc.backward(ca, std::span<const FeatureGrid>(&r.grad_a, 1));
  const auto gb = enc.backward(cb, std::span<const FeatureGrid>(&r.grad_b, 1));
  for (std::size_t t = 0; t < grads.tensors.size(); ++t) {
    for (std::size_t k = 0; k < grads.tensors[t].values.size(); ++k) {
      grads.tensors[t].values[k] += gb.tensors[t].values[k];
    }
  }
  std::vector<std::vector<double>*> params;
  std::vector<const std::vector<double>*> analytic;
  for (std::size_t t = 0; t < grads.tensors.size(); ++t) {
    params.push_back(&enc.params().tensors[t].values);
    analytic.push_back(&grads.tensors[t].values);
  }
  compare(check, seed, cfg.step, cfg.floor, params, analytic, loss, true);
}

}  // namespace

SelfCheckReport run_self_check(const SelfCheckConfig& cfg) {
  SelfCheckReport report;
  report.seeds = cfg.seeds;
  GradientCheck spatial{"spatial_contrastive", cfg.loss_tolerance};
  GradientCheck glopro{"global_propagation", cfg.loss_tolerance};
  GradientCheck total{"combined", cfg.loss_tolerance};
  GradientCheck encoder{"encoder_end_to_end", cfg.encoder_tolerance};
  for (int s = 0; s < cfg.seeds; ++s) {
    Rng rng(cfg.seed * 1000003ull + static_cast<std::uint64_t>(s));
    check_losses(random_problem(rng), s, cfg, spatial, glopro, total);
    check_encoder(rng, s, cfg, encoder);
  }
  report.checks = {spatial, glopro, total, encoder};
  return report;
}

nlohmann::json to_json(const SelfCheckReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"tolerance", c.tolerance},
                      {"max_rel_error", c.max_rel_error},
                      {"worst_seed", c.worst_seed},
                      {"coordinates", c.coordinates},
                      {"skipped_at_kinks", c.skipped},
                      {"pass", c.pass()}});
  }
  return {{"seeds", r.seeds}, {"checks", checks}, {"pass", r.pass()}};
}

}  // namespace prf
