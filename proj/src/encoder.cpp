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

#include "prf/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace prf {

int EncoderArch::total_stride() const {
  int s = 1;
  for (const auto& st : stages) s *= st.stride;
  return s;
}

int EncoderArch::backbone_channels() const {
  return stages.empty() ? in_channels : stages.back().out_channels;
}

void EncoderArch::validate() const {
  if (in_channels <= 0 || head_hidden <= 0 || head_out <= 0) {
    throw InvalidArgument("encoder dimensions must be positive");
  }
  for (const auto& st : stages) {
    if (st.out_channels <= 0 || st.stride <= 0) {
      throw InvalidArgument("conv stages need positive channels and stride");
    }
  }
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0) || !(bn_eps > 0.0)) {
    throw InvalidArgument("invalid batch-norm settings");
  }
}

void to_json(nlohmann::json& j, const EncoderArch& a) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : a.stages) stages.push_back({s.out_channels, s.stride});
  j = nlohmann::json{{"in_channels", a.in_channels}, {"stages", stages},
                     {"head_hidden", a.head_hidden}, {"head_out", a.head_out},
                     {"bn_momentum", a.bn_momentum}, {"bn_eps", a.bn_eps}};
}

void from_json(const nlohmann::json& j, EncoderArch& a) {
  static const std::vector<std::string> kKeys = {"in_channels", "stages",      "head_hidden",
                                                 "head_out",    "bn_momentum", "bn_eps"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) {
      throw InvalidArgument("unknown arch key '" + k + "'");
    }
  }
  a = EncoderArch{};
  if (j.contains("in_channels")) j.at("in_channels").get_to(a.in_channels);
  if (j.contains("stages")) {
    a.stages.clear();
    for (const auto& s : j.at("stages")) {
      a.stages.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    }
  }
  if (j.contains("head_hidden")) j.at("head_hidden").get_to(a.head_hidden);
  if (j.contains("head_out")) j.at("head_out").get_to(a.head_out);
  if (j.contains("bn_momentum")) j.at("bn_momentum").get_to(a.bn_momentum);
  if (j.contains("bn_eps")) j.at("bn_eps").get_to(a.bn_eps);
  a.validate();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (tensors.size() != other.tensors.size()) return false;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    if (tensors[k].name != other.tensors[k].name ||
        tensors[k].values.size() != other.tensors[k].values.size()) {
      return false;
    }
  }
  return true;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet z = *this;
  for (auto& t : z.tensors) std::fill(t.values.begin(), t.values.end(), 0.0);
  return z;
}

ParamTensor& ParameterSet::get(const std::string& name) {
  for (auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw InvalidArgument("no parameter named " + name);
}

const ParamTensor& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

namespace {

using Tensor = ForwardCache::Tensor;

ParamTensor make_param(std::string name, ParamKind kind, std::vector<int> shape, double fill) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return {std::move(name), kind, std::move(shape), std::vector<double>(n, fill)};
}

void kaiming(ParamTensor& t, int fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / fan_in);
  for (double& v : t.values) v = sd * rng.normal();
}

std::string stage_name(std::size_t s, const char* leaf) {
  return "stage" + std::to_string(s) + "." + leaf;
}

// 3x3 conv, padding 1. Weight layout [out][in][ky][kx].
Tensor conv3x3(const Tensor& in, const ParamTensor& weight, const ParamTensor& bias, int stride) {
  const int out_c = weight.shape[0];
  Tensor out;
  out.h = (in.h - 1) / stride + 1;
  out.w = (in.w - 1) / stride + 1;
  out.c = out_c;
  out.data.assign(std::size_t(out.h) * out.w * out_c, 0.0);
  // Reorder to [ky][kx][in][out] so the innermost loop is contiguous.
  std::vector<double> wt(weight.values.size());
  for (int o = 0; o < out_c; ++o)
    for (int i = 0; i < in.c; ++i)
      for (int k = 0; k < 9; ++k)
        wt[(std::size_t(k) * in.c + i) * out_c + o] = weight.values[(std::size_t(o) * in.c + i) * 9 + k];

  for (int oy = 0; oy < out.h; ++oy) {
    for (int ox = 0; ox < out.w; ++ox) {
      double* dst = &out.data[(std::size_t(oy) * out.w + ox) * out_c];
      for (int o = 0; o < out_c; ++o) dst[o] = bias.values[o];
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride + ky - 1;
        if (iy < 0 || iy >= in.h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox * stride + kx - 1;
          if (ix < 0 || ix >= in.w) continue;
          const double* src = &in.data[(std::size_t(iy) * in.w + ix) * in.c];
          const double* wk = &wt[std::size_t(ky * 3 + kx) * in.c * out_c];
          for (int i = 0; i < in.c; ++i) {
            const double v = src[i];
            if (v == 0.0) continue;
            const double* wi = wk + std::size_t(i) * out_c;
            for (int o = 0; o < out_c; ++o) dst[o] += v * wi[o];
          }
        }
      }
    }
  }
  return out;
}

void conv3x3_backward(const Tensor& in, const Tensor& grad_out, const ParamTensor& weight,
                      int stride, std::vector<double>& grad_w, std::vector<double>& grad_b,
                      Tensor* grad_in) {
  const int out_c = weight.shape[0];
  if (grad_in) {
    grad_in->h = in.h;
    grad_in->w = in.w;
    grad_in->c = in.c;
    grad_in->data.assign(in.data.size(), 0.0);
  }
  for (int oy = 0; oy < grad_out.h; ++oy) {
    for (int ox = 0; ox < grad_out.w; ++ox) {
      const double* g = &grad_out.data[(std::size_t(oy) * grad_out.w + ox) * out_c];
      for (int o = 0; o < out_c; ++o) grad_b[o] += g[o];
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride + ky - 1;
        if (iy < 0 || iy >= in.h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox * stride + kx - 1;
          if (ix < 0 || ix >= in.w) continue;
          const std::size_t base = (std::size_t(iy) * in.w + ix) * in.c;
          const int k = ky * 3 + kx;
          for (int o = 0; o < out_c; ++o) {
            const double go = g[o];
            if (go == 0.0) continue;
            for (int i = 0; i < in.c; ++i) {
              const std::size_t widx = (std::size_t(o) * in.c + i) * 9 + k;
              grad_w[widx] += go * in.data[base + i];
              if (grad_in) grad_in->data[base + i] += go * weight.values[widx];
            }
          }
        }
      }
    }
  }
}

// Per-cell dense layer: out[cell][o] = sum_i W[o][i] in[cell][i] (+ b[o]).
Tensor dense(const Tensor& in, const ParamTensor& weight, const ParamTensor* bias) {
  const int out_c = weight.shape[0];
  Tensor out{in.h, in.w, out_c, std::vector<double>(std::size_t(in.h) * in.w * out_c, 0.0)};
  const int cells = in.h * in.w;
  for (int p = 0; p < cells; ++p) {
    const double* x = &in.data[std::size_t(p) * in.c];
    double* y = &out.data[std::size_t(p) * out_c];
    for (int o = 0; o < out_c; ++o) {
      double acc = bias ? bias->values[o] : 0.0;
      const double* w = &weight.values[std::size_t(o) * in.c];
      for (int i = 0; i < in.c; ++i) acc += w[i] * x[i];
      y[o] = acc;
    }
  }
  return out;
}

void dense_backward(const Tensor& in, const Tensor& grad_out, const ParamTensor& weight,
                    std::vector<double>& grad_w, std::vector<double>* grad_b, Tensor& grad_in) {
  const int out_c = weight.shape[0];
  grad_in = Tensor{in.h, in.w, in.c, std::vector<double>(in.data.size(), 0.0)};
  const int cells = in.h * in.w;
  for (int p = 0; p < cells; ++p) {
    const double* x = &in.data[std::size_t(p) * in.c];
    const double* g = &grad_out.data[std::size_t(p) * out_c];
    double* gx = &grad_in.data[std::size_t(p) * in.c];
    for (int o = 0; o < out_c; ++o) {
      if (grad_b) (*grad_b)[o] += g[o];
      const double* w = &weight.values[std::size_t(o) * in.c];
      double* gw = &grad_w[std::size_t(o) * in.c];
      for (int i = 0; i < in.c; ++i) {
        gw[i] += g[o] * x[i];
        gx[i] += g[o] * w[i];
      }
    }
  }
}

void relu_inplace(Tensor& t) {
  for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

}  // namespace

Encoder::Encoder(const EncoderArch& arch, Rng& rng) : arch_(arch) {
  arch_.validate();
  int in_c = arch_.in_channels;
  for (std::size_t s = 0; s < arch_.stages.size(); ++s) {
    const int out_c = arch_.stages[s].out_channels;
    auto w = make_param(stage_name(s, "weight"), ParamKind::kWeight, {out_c, in_c, 3, 3}, 0.0);
    kaiming(w, in_c * 9, rng);
    params_.tensors.push_back(std::move(w));
    params_.tensors.push_back(make_param(stage_name(s, "bias"), ParamKind::kBias, {out_c}, 0.0));
    in_c = out_c;
  }
  auto fc1 = make_param("head.fc1.weight", ParamKind::kWeight, {arch_.head_hidden, in_c}, 0.0);
  kaiming(fc1, in_c, rng);
  params_.tensors.push_back(std::move(fc1));
  params_.tensors.push_back(make_param("head.bn.gamma", ParamKind::kNorm, {arch_.head_hidden}, 1.0));
  params_.tensors.push_back(make_param("head.bn.beta", ParamKind::kNorm, {arch_.head_hidden}, 0.0));
  auto fc2 = make_param("head.fc2.weight", ParamKind::kWeight,
                        {arch_.head_out, arch_.head_hidden}, 0.0);
  kaiming(fc2, arch_.head_hidden, rng);
  params_.tensors.push_back(std::move(fc2));
  params_.tensors.push_back(make_param("head.fc2.bias", ParamKind::kBias, {arch_.head_out}, 0.0));

  buffers_.tensors.push_back(
      make_param("head.bn.running_mean", ParamKind::kNorm, {arch_.head_hidden}, 0.0));
  buffers_.tensors.push_back(
      make_param("head.bn.running_var", ParamKind::kNorm, {arch_.head_hidden}, 1.0));
}

GridShape Encoder::grid_shape(int height, int width) const {
  const int s = arch_.total_stride();
  if (height <= 0 || width <= 0 || height % s != 0 || width % s != 0) {
    throw ShapeError("view " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by the encoder stride " + std::to_string(s));
  }
  return {height / s, width / s};
}

namespace {

struct BatchStats {
  std::vector<double> mean, var;
  std::size_t count = 0;
};

}  // namespace

std::vector<FeatureGrid> Encoder::forward_const(std::span<const RgbImage> batch, Mode mode,
                                                ForwardCache* cache) const {
  if (batch.empty()) throw InvalidArgument("empty batch");
  const auto grid = grid_shape(batch[0].height, batch[0].width);
  for (const auto& img : batch) {
    if (img.height != batch[0].height || img.width != batch[0].width) {
      throw ShapeError("all views in a batch must share one resolution");
    }
  }
  if (arch_.in_channels != 3) throw ShapeError("encoder input must have 3 channels");
  const std::size_t nb = batch.size();
  const std::size_t ns = arch_.stages.size();

  std::vector<Tensor> x(nb);
  for (std::size_t b = 0; b < nb; ++b) x[b] = Tensor{batch[b].height, batch[b].width, 3, batch[b].data};
  if (cache) {
    cache->mode = mode;
    cache->stage_inputs.assign(ns + 1, {});
    cache->stage_preact.assign(ns, {});
  }
  for (std::size_t s = 0; s < ns; ++s) {
    const auto& w = params_.tensors[2 * s];
    const auto& bias = params_.tensors[2 * s + 1];
    for (std::size_t b = 0; b < nb; ++b) {
      Tensor z = conv3x3(x[b], w, bias, arch_.stages[s].stride);
      if (cache) {
        cache->stage_inputs[s].push_back(std::move(x[b]));
        cache->stage_preact[s].push_back(z);
      }
      relu_inplace(z);
      x[b] = std::move(z);
    }
  }

  const std::size_t head = 2 * ns;
  const auto& fc1 = params_.tensors[head];
  const auto& gamma = params_.tensors[head + 1];
  const auto& beta = params_.tensors[head + 2];
  const auto& fc2 = params_.tensors[head + 3];
  const auto& fc2b = params_.tensors[head + 4];
  const int hid = arch_.head_hidden;

  std::vector<Tensor> h(nb);
  for (std::size_t b = 0; b < nb; ++b) h[b] = dense(x[b], fc1, nullptr);

  std::vector<double> mean(hid, 0.0), var(hid, 0.0);
  if (mode == Mode::kTrain) {
    std::size_t count = 0;
    for (const auto& t : h) {
      const int cells = t.h * t.w;
      count += cells;
      for (int p = 0; p < cells; ++p)
        for (int c = 0; c < hid; ++c) mean[c] += t.data[std::size_t(p) * hid + c];
    }
    for (double& m : mean) m /= static_cast<double>(count);
    for (const auto& t : h) {
      const int cells = t.h * t.w;
      for (int p = 0; p < cells; ++p)
        for (int c = 0; c < hid; ++c) {
          const double d = t.data[std::size_t(p) * hid + c] - mean[c];
          var[c] += d * d;
        }
    }
    for (double& v : var) v /= static_cast<double>(count);
  } else {
    mean = buffers_.tensors[0].values;
    var = buffers_.tensors[1].values;
  }
  std::vector<double> inv_std(hid);
  for (int c = 0; c < hid; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + arch_.bn_eps);

  std::vector<FeatureGrid> out;
  out.reserve(nb);
  if (cache) {
    cache->stage_inputs[ns] = x;
    cache->head_hidden = h;
    cache->head_normed.clear();
    cache->head_relu_in.clear();
    cache->inv_std = inv_std;
  }
  for (std::size_t b = 0; b < nb; ++b) {
    Tensor xhat = h[b];
    const int cells = xhat.h * xhat.w;
    for (int p = 0; p < cells; ++p)
      for (int c = 0; c < hid; ++c) {
        double& v = xhat.data[std::size_t(p) * hid + c];
        v = (v - mean[c]) * inv_std[c];
      }
    Tensor y = xhat;
    for (int p = 0; p < cells; ++p)
      for (int c = 0; c < hid; ++c) {
        double& v = y.data[std::size_t(p) * hid + c];
        v = gamma.values[c] * v + beta.values[c];
      }
    if (cache) {
      cache->head_normed.push_back(std::move(xhat));
      cache->head_relu_in.push_back(y);
    }
    relu_inplace(y);
    Tensor z = dense(y, fc2, &fc2b);
    FeatureGrid g(grid.rows, grid.cols, arch_.head_out, Provenance::kUnspecified);
    g.values = std::move(z.data);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<FeatureGrid> Encoder::forward(std::span<const RgbImage> batch, Mode mode,
                                          ForwardCache* cache) {
  ForwardCache local;
  ForwardCache* c = cache ? cache : (mode == Mode::kTrain ? &local : nullptr);
  auto out = forward_const(batch, mode, c);
  if (mode == Mode::kTrain) {
    // Running statistics from the cached hidden activations.
    const int hid = arch_.head_hidden;
    std::vector<double> mean(hid, 0.0), var(hid, 0.0);
    std::size_t count = 0;
    for (const auto& t : c->head_hidden) {
      const int cells = t.h * t.w;
      count += cells;
      for (int p = 0; p < cells; ++p)
        for (int k = 0; k < hid; ++k) mean[k] += t.data[std::size_t(p) * hid + k];
    }
    for (double& m : mean) m /= static_cast<double>(count);
    for (const auto& t : c->head_hidden) {
      const int cells = t.h * t.w;
      for (int p = 0; p < cells; ++p)
        for (int k = 0; k < hid; ++k) {
          const double d = t.data[std::size_t(p) * hid + k] - mean[k];
          var[k] += d * d;
        }
    }
    const double unbias = count > 1 ? 1.0 / static_cast<double>(count - 1) : 0.0;
    const double m = arch_.bn_momentum;
    auto& rm = buffers_.tensors[0].values;
    auto& rv = buffers_.tensors[1].values;
    for (int k = 0; k < hid; ++k) {
      rm[k] = (1.0 - m) * rm[k] + m * mean[k];
      rv[k] = (1.0 - m) * rv[k] + m * var[k] * unbias;
    }
  }
  return out;
}

FeatureGrid Encoder::forward(const RgbImage& view, Mode mode) {
  return std::move(forward(std::span<const RgbImage>(&view, 1), mode)[0]);
}

ParameterSet Encoder::backward(const ForwardCache& cache,
                               std::span<const FeatureGrid> grad_out) const {
  const std::size_t nb = grad_out.size();
  const std::size_t ns = arch_.stages.size();
  if (cache.head_hidden.size() != nb) throw ShapeError("gradient batch does not match cache");
  ParameterSet grads = params_.zeros_like();
  const std::size_t head = 2 * ns;
  const auto& fc1 = params_.tensors[head];
  const auto& gamma = params_.tensors[head + 1];
  const auto& fc2 = params_.tensors[head + 3];
  const int hid = arch_.head_hidden;

  // fc2 and ReLU, then batch-norm affine.
  std::vector<Tensor> d_xhat(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& y = cache.head_relu_in[b];
    Tensor relu_out = y;
    relu_inplace(relu_out);
    Tensor g_out{y.h, y.w, arch_.head_out, grad_out[b].values};
    if (g_out.data.size() != std::size_t(y.h) * y.w * arch_.head_out) {
      throw ShapeError("output gradient has the wrong shape");
    }
    Tensor d_relu;
    dense_backward(relu_out, g_out, fc2, grads.tensors[head + 3].values,
                   &grads.tensors[head + 4].values, d_relu);
    const auto& xhat = cache.head_normed[b];
    const int cells = y.h * y.w;
    d_xhat[b] = Tensor{y.h, y.w, hid, std::vector<double>(d_relu.data.size())};
    for (int p = 0; p < cells; ++p)
      for (int c = 0; c < hid; ++c) {
        const std::size_t k = std::size_t(p) * hid + c;
        const double dy = y.data[k] > 0.0 ? d_relu.data[k] : 0.0;
        grads.tensors[head + 1].values[c] += dy * xhat.data[k];
        grads.tensors[head + 2].values[c] += dy;
        d_xhat[b].data[k] = dy * gamma.values[c];
      }
  }

  // Normalization: batch statistics couple every cell of every image.
  std::vector<Tensor> d_hidden(nb);
  if (cache.mode == Mode::kTrain) {
    std::vector<double> sum_d(hid, 0.0), sum_dx(hid, 0.0);
    std::size_t count = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      const int cells = d_xhat[b].h * d_xhat[b].w;
      count += cells;
      for (int p = 0; p < cells; ++p)
        for (int c = 0; c < hid; ++c) {
          const std::size_t k = std::size_t(p) * hid + c;
          sum_d[c] += d_xhat[b].data[k];
          sum_dx[c] += d_xhat[b].data[k] * cache.head_normed[b].data[k];
        }
    }
    const double inv_m = 1.0 / static_cast<double>(count);
    for (std::size_t b = 0; b < nb; ++b) {
      d_hidden[b] = d_xhat[b];
      const int cells = d_xhat[b].h * d_xhat[b].w;
      for (int p = 0; p < cells; ++p)
        for (int c = 0; c < hid; ++c) {
          const std::size_t k = std::size_t(p) * hid + c;
          d_hidden[b].data[k] = cache.inv_std[c] * (d_xhat[b].data[k] - inv_m * sum_d[c] -
                                                    cache.head_normed[b].data[k] * inv_m * sum_dx[c]);
        }
    }
  } else {
    for (std::size_t b = 0; b < nb; ++b) {
      d_hidden[b] = d_xhat[b];
      const int cells = d_xhat[b].h * d_xhat[b].w;
      for (int p = 0; p < cells; ++p)
        for (int c = 0; c < hid; ++c) d_hidden[b].data[std::size_t(p) * hid + c] *= cache.inv_std[c];
    }
  }

  for (std::size_t b = 0; b < nb; ++b) {
    Tensor d_x;
    dense_backward(cache.stage_inputs[ns][b], d_hidden[b], fc1, grads.tensors[head].values,
                   nullptr, d_x);
    for (std::size_t s = ns; s-- > 0;) {
      const auto& z = cache.stage_preact[s][b];
      for (std::size_t k = 0; k < d_x.data.size(); ++k) {
        if (z.data[k] <= 0.0) d_x.data[k] = 0.0;
      }
      Tensor d_in;
      conv3x3_backward(cache.stage_inputs[s][b], d_x, params_.tensors[2 * s],
                       arch_.stages[s].stride, grads.tensors[2 * s].values,
                       grads.tensors[2 * s + 1].values, s > 0 ? &d_in : nullptr);
      d_x = std::move(d_in);
    }
  }
  return grads;
}

EncoderPair::EncoderPair(const EncoderArch& arch, Rng& rng, double beta_)
    : online(arch, rng), momentum(online), beta(beta_) {}

void ema_update(ParameterSet& momentum, const ParameterSet& online, double beta) {
  if (!momentum.same_layout(online)) {
    throw ShapeError("momentum and regular parameters differ in layout");
  }
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("beta must lie in [0, 1]");
  const double w = 1.0 - beta;
  for (std::size_t t = 0; t < momentum.tensors.size(); ++t) {
    auto& m = momentum.tensors[t].values;
    const auto& o = online.tensors[t].values;
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = m[k] * beta + w * o[k];
  }
}

void ema_update(EncoderPair& pair) {
  ema_update(pair.momentum.params(), pair.online.params(), pair.beta);
  if (!pair.momentum.buffers().same_layout(pair.online.buffers())) {
    throw ShapeError("momentum and regular buffers differ in layout");
  }
  pair.momentum.buffers() = pair.online.buffers();
}

}  // namespace prf
