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

#include "prf/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace prf {

void FeatureGrid::check_finite(const char* what) const {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
  }
}

SmoothingTransform SmoothingTransform::identity(int channels) {
  SmoothingTransform g;
  g.channels = channels;
  g.matrix.assign(std::size_t(channels) * channels, 0.0);
  for (int c = 0; c < channels; ++c) g.matrix[std::size_t(c) * channels + c] = 1.0;
  return g;
}

void LossConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("alpha must be non-negative");
  }
}

namespace {

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  return s;
}

// Norms and unit vectors of every cell; zero-norm cells keep a zero unit
// vector so all their cosines (and cosine gradients) vanish.
struct Normalized {
  std::vector<double> norm;
  std::vector<double> unit;
  int channels = 0;

  explicit Normalized(const FeatureGrid& f)
      : norm(f.cells()), unit(f.values.size(), 0.0), channels(f.channels) {
    for (int i = 0; i < f.cells(); ++i) {
      const auto x = f.cell(i);
      norm[i] = std::sqrt(dot(x, x));
      if (norm[i] > 0.0) {
        for (int c = 0; c < channels; ++c) unit[std::size_t(i) * channels + c] = x[c] / norm[i];
      }
    }
  }
  std::span<const double> u(int i) const {
    return {unit.data() + std::size_t(i) * channels, std::size_t(channels)};
  }
};

// grad += scale * d cos(x, y) / dx  with x the cell i of `nx`, y cell j of `ny`.
void add_cos_grad(const Normalized& nx, int i, const Normalized& ny, int j, double c,
                  double scale, std::span<double> grad) {
  if (nx.norm[i] <= 0.0 || ny.norm[j] <= 0.0 || scale == 0.0) return;
  const auto ux = nx.u(i);
  const auto uy = ny.u(j);
  const double s = scale / nx.norm[i];
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += s * (uy[k] - c * ux[k]);
}

void check_corr_shapes(const FeatureGrid& a, const FeatureGrid& b,
                       const CorrespondenceSet& corr) {
  if (!(a.shape() == corr.grid_a) || !(b.shape() == corr.grid_b)) {
    throw ShapeError("feature grids do not match the correspondence grid shapes");
  }
  if (a.channels != b.channels || a.channels <= 0) {
    throw ShapeError("feature grids must share a positive channel count");
  }
}

void axpy(double s, const FeatureGrid& x, FeatureGrid& y) {
  for (std::size_t k = 0; k < y.values.size(); ++k) y.values[k] += s * x.values[k];
}

}  // namespace

double cosine(std::span<const double> x, std::span<const double> y) {
  const double nx = std::sqrt(dot(x, x));
  const double ny = std::sqrt(dot(y, y));
  if (nx <= 0.0 || ny <= 0.0) return 0.0;
  return dot(x, y) / (nx * ny);
}

namespace {

struct SmoothingForward {
  Normalized norms;
  std::vector<double> weights;   // N x N, max(cos, 0)^2
  std::vector<double> cosines;   // N x N
  FeatureGrid weighted_inputs;   // xbar_i = sum_j w_ij x_j
  FeatureGrid smoothed;          // G * xbar_i

  SmoothingForward(const FeatureGrid& f, const SmoothingTransform& g)
      : norms(f),
        weights(std::size_t(f.cells()) * f.cells()),
        cosines(std::size_t(f.cells()) * f.cells()),
        weighted_inputs(f.rows, f.cols, f.channels, f.provenance),
        smoothed(f.rows, f.cols, f.channels, f.provenance) {
    if (g.channels != f.channels || g.matrix.size() != std::size_t(f.channels) * f.channels) {
      throw ShapeError("smoothing transform does not match the feature channels");
    }
    const int n = f.cells();
    const int ch = f.channels;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double c = dot(norms.u(i), norms.u(j));
        const double r = std::max(c, 0.0);
        cosines[std::size_t(i) * n + j] = c;
        weights[std::size_t(i) * n + j] = r * r;
      }
    }
    for (int i = 0; i < n; ++i) {
      auto xb = weighted_inputs.cell(i);
      for (int j = 0; j < n; ++j) {
        const double w = weights[std::size_t(i) * n + j];
        if (w == 0.0) continue;
        const auto xj = f.cell(j);
        for (int c = 0; c < ch; ++c) xb[c] += w * xj[c];
      }
      auto s = smoothed.cell(i);
      for (int r = 0; r < ch; ++r) {
        double acc = 0.0;
        for (int c = 0; c < ch; ++c) acc += g.matrix[std::size_t(r) * ch + c] * xb[c];
        s[r] = acc;
      }
    }
  }

  void backward(const FeatureGrid& f, const SmoothingTransform& g,
                const FeatureGrid& grad_smoothed, FeatureGrid& grad_f,
                std::vector<double>& grad_g) const {
    const int n = f.cells();
    const int ch = f.channels;
    if (grad_g.size() != std::size_t(ch) * ch) grad_g.assign(std::size_t(ch) * ch, 0.0);
    std::vector<double> grad_xbar(std::size_t(n) * ch, 0.0);
    for (int i = 0; i < n; ++i) {
      const auto ds = grad_smoothed.cell(i);
      const auto xb = weighted_inputs.cell(i);
      for (int r = 0; r < ch; ++r) {
        if (ds[r] == 0.0) continue;
        for (int c = 0; c < ch; ++c) {
          grad_g[std::size_t(r) * ch + c] += ds[r] * xb[c];
          grad_xbar[std::size_t(i) * ch + c] += g.matrix[std::size_t(r) * ch + c] * ds[r];
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      const std::span<const double> dxb(grad_xbar.data() + std::size_t(i) * ch,
                                        std::size_t(ch));
      for (int j = 0; j < n; ++j) {
        const std::size_t ij = std::size_t(i) * n + j;
        const double w = weights[ij];
        if (w == 0.0) continue;
        auto gj = grad_f.cell(j);
        for (int c = 0; c < ch; ++c) gj[c] += w * dxb[c];
        const double dw = dot(dxb, f.cell(j));
        const double dc = 2.0 * std::max(cosines[ij], 0.0) * dw;
        add_cos_grad(norms, i, norms, j, cosines[ij], dc, grad_f.cell(i));
        add_cos_grad(norms, j, norms, i, cosines[ij], dc, grad_f.cell(j));
      }
    }
  }
};

}  // namespace

FeatureGrid smooth_features(const FeatureGrid& f, const SmoothingTransform& g) {
  f.check_finite("feature grid");
  return SmoothingForward(f, g).smoothed;
}

void smooth_features_backward(const FeatureGrid& f, const SmoothingTransform& g,
                              const FeatureGrid& grad_smoothed, FeatureGrid& grad_f,
                              std::vector<double>& grad_g) {
  if (!grad_smoothed.same_shape(f) || !grad_f.same_shape(f)) {
    throw ShapeError("gradient grids must match the smoothed grid");
  }
  SmoothingForward(f, g).backward(f, g, grad_smoothed, grad_f, grad_g);
}

DirectedSpatialLoss spatial_loss_directed(const FeatureGrid& query, const FeatureGrid& key,
                                          const CorrespondenceSet& corr, double tau) {
  check_corr_shapes(query, key, corr);
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  query.check_finite("query grid");
  key.check_finite("key grid");

  DirectedSpatialLoss out;
  out.grad_query = FeatureGrid(query.rows, query.cols, query.channels, query.provenance);
  out.grad_key = FeatureGrid(key.rows, key.cols, key.channels, key.provenance);
  const Normalized nq(query), nk(key);
  const int na = query.cells(), nb = key.cells();

  for (int i = 0; i < na; ++i) {
    if (!corr.positives[i].empty()) ++out.counted_cells;
  }
  if (out.counted_cells == 0) throw NoPositivePairs();
  const double inv_count = 1.0 / out.counted_cells;

  std::vector<double> cosv(nb), logits(nb), coef(nb);
  double total = 0.0;
  for (int i = 0; i < na; ++i) {
    if (corr.positives[i].empty()) continue;
    double max_all = -std::numeric_limits<double>::infinity();
    double max_pos = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < nb; ++j) {
      cosv[j] = dot(nq.u(i), nk.u(j));
      logits[j] = cosv[j] / tau;
      max_all = std::max(max_all, logits[j]);
      if (corr.is_positive(i, j)) max_pos = std::max(max_pos, logits[j]);
    }
    double sum_all = 0.0, sum_pos = 0.0;
    for (int j = 0; j < nb; ++j) {
      sum_all += std::exp(logits[j] - max_all);
      if (corr.is_positive(i, j)) sum_pos += std::exp(logits[j] - max_pos);
    }
    const double lse_all = max_all + std::log(sum_all);
    const double lse_pos = max_pos + std::log(sum_pos);
    total += lse_all - lse_pos;

    // dL/dlogit_j = softmax_all_j - [j in P] softmax_P_j
    for (int j = 0; j < nb; ++j) {
      double d = std::exp(logits[j] - lse_all);
      if (corr.is_positive(i, j)) d -= std::exp(logits[j] - lse_pos);
      coef[j] = d * inv_count / tau;
    }
    auto gq = out.grad_query.cell(i);
    for (int j = 0; j < nb; ++j) {
      add_cos_grad(nq, i, nk, j, cosv[j], coef[j], gq);
      add_cos_grad(nk, j, nq, i, cosv[j], coef[j], out.grad_key.cell(j));
    }
  }
  out.value = total * inv_count;
  return out;
}

SpatialLoss spatial_contrastive_loss(const FeatureGrid& f_a, const FeatureGrid& f_b,
                                     const CorrespondenceSet& corr, const LossConfig& cfg) {
  cfg.validate();
  check_corr_shapes(f_a, f_b, corr);
  const auto ab = spatial_loss_directed(f_a, f_b, corr, cfg.tau);
  const auto ba = spatial_loss_directed(f_b, f_a, corr.swapped(), cfg.tau);
  SpatialLoss out;
  out.value = 0.5 * (ab.value + ba.value);
  out.counted_cells = ab.counted_cells + ba.counted_cells;
  out.grad_a = FeatureGrid(f_a.rows, f_a.cols, f_a.channels, f_a.provenance);
  out.grad_b = FeatureGrid(f_b.rows, f_b.cols, f_b.channels, f_b.provenance);
  axpy(0.5, ab.grad_query, out.grad_a);
  axpy(0.5, ba.grad_key, out.grad_a);
  axpy(0.5, ab.grad_key, out.grad_b);
  axpy(0.5, ba.grad_query, out.grad_b);
  return out;
}

DirectedGloProLoss glopro_loss_directed(const FeatureGrid& query_a, const FeatureGrid& query_b,
                                        const FeatureGrid& key_a, const FeatureGrid& key_b,
                                        const CorrespondenceSet& corr,
                                        const SmoothingTransform& g) {
  check_corr_shapes(query_a, query_b, corr);
  check_corr_shapes(key_a, key_b, corr);
  if (query_a.channels != key_a.channels) throw ShapeError("query/key channel mismatch");
  for (const auto* f : {&query_a, &query_b, &key_a, &key_b}) f->check_finite("feature grid");

  DirectedGloProLoss out;
  out.pairs = corr.positive_pair_count();
  if (out.pairs == 0) throw NoPositivePairs();

  const SmoothingForward sa(query_a, g), sb(query_b, g);
  const Normalized ns_a(sa.smoothed), ns_b(sb.smoothed), nk_a(key_a), nk_b(key_b);
  FeatureGrid grad_sa(query_a.rows, query_a.cols, query_a.channels);
  FeatureGrid grad_sb(query_b.rows, query_b.cols, query_b.channels);
  out.grad_key_a = FeatureGrid(key_a.rows, key_a.cols, key_a.channels, key_a.provenance);
  out.grad_key_b = FeatureGrid(key_b.rows, key_b.cols, key_b.channels, key_b.provenance);

  const double scale = -1.0 / static_cast<double>(out.pairs);
  double total = 0.0;
  for (int i = 0; i < query_a.cells(); ++i) {
    for (int j : corr.positives[i]) {
      const double c1 = dot(ns_a.u(i), nk_b.u(j));
      const double c2 = dot(ns_b.u(j), nk_a.u(i));
      total -= c1 + c2;
      add_cos_grad(ns_a, i, nk_b, j, c1, scale, grad_sa.cell(i));
      add_cos_grad(nk_b, j, ns_a, i, c1, scale, out.grad_key_b.cell(j));
      add_cos_grad(ns_b, j, nk_a, i, c2, scale, grad_sb.cell(j));
      add_cos_grad(nk_a, i, ns_b, j, c2, scale, out.grad_key_a.cell(i));
    }
  }
  out.value = total / static_cast<double>(out.pairs);

  out.grad_query_a = FeatureGrid(query_a.rows, query_a.cols, query_a.channels,
                                 query_a.provenance);
  out.grad_query_b = FeatureGrid(query_b.rows, query_b.cols, query_b.channels,
                                 query_b.provenance);
  out.grad_g.assign(std::size_t(g.channels) * g.channels, 0.0);
  sa.backward(query_a, g, grad_sa, out.grad_query_a, out.grad_g);
  sb.backward(query_b, g, grad_sb, out.grad_query_b, out.grad_g);
  return out;
}

GloProLoss global_propagation_loss(const FeatureGrid& f_a, const FeatureGrid& f_b,
                                   const CorrespondenceSet& corr, const SmoothingTransform& g) {
  auto d = glopro_loss_directed(f_a, f_b, f_a, f_b, corr, g);
  GloProLoss out;
  out.value = d.value;
  out.pairs = d.pairs;
  out.grad_a = std::move(d.grad_query_a);
  axpy(1.0, d.grad_key_a, out.grad_a);
  out.grad_b = std::move(d.grad_query_b);
  axpy(1.0, d.grad_key_b, out.grad_b);
  out.grad_g = std::move(d.grad_g);
  return out;
}

LossReport combined_loss(const FeatureGrid& f_a, const FeatureGrid& f_b,
                         const CorrespondenceSet& corr, const SmoothingTransform& g,
                         const LossConfig& cfg) {
  cfg.validate();
  auto ls = spatial_contrastive_loss(f_a, f_b, corr, cfg);
  auto lg = global_propagation_loss(f_a, f_b, corr, g);
  LossReport r;
  r.alpha = cfg.alpha;
  r.l_spatial = ls.value;
  r.l_glopro = lg.value;
  r.l_total = ls.value + cfg.alpha * lg.value;
  r.counted_cells = ls.counted_cells;
  r.grad_a = std::move(ls.grad_a);
  axpy(cfg.alpha, lg.grad_a, r.grad_a);
  r.grad_b = std::move(ls.grad_b);
  axpy(cfg.alpha, lg.grad_b, r.grad_b);
  r.grad_g = std::move(lg.grad_g);
  for (double& v : r.grad_g) v *= cfg.alpha;
  return r;
}

LossReport pretrain_loss(const FeatureGrid& query_a, const FeatureGrid& query_b,
                         const FeatureGrid& key_a, const FeatureGrid& key_b,
                         const CorrespondenceSet& corr, const SmoothingTransform& g,
                         const LossConfig& cfg) {
  cfg.validate();
  const auto ab = spatial_loss_directed(query_a, key_b, corr, cfg.tau);
  const auto ba = spatial_loss_directed(query_b, key_a, corr.swapped(), cfg.tau);
  auto lg = glopro_loss_directed(query_a, query_b, key_a, key_b, corr, g);

  LossReport r;
  r.alpha = cfg.alpha;
  r.l_spatial = 0.5 * (ab.value + ba.value);
  r.l_glopro = lg.value;
  r.l_total = r.l_spatial + cfg.alpha * r.l_glopro;
  r.counted_cells = ab.counted_cells + ba.counted_cells;
  r.grad_a = FeatureGrid(query_a.rows, query_a.cols, query_a.channels, query_a.provenance);
  r.grad_b = FeatureGrid(query_b.rows, query_b.cols, query_b.channels, query_b.provenance);
  axpy(0.5, ab.grad_query, r.grad_a);
  axpy(cfg.alpha, lg.grad_query_a, r.grad_a);
  axpy(0.5, ba.grad_query, r.grad_b);
  axpy(cfg.alpha, lg.grad_query_b, r.grad_b);
  r.grad_g = std::move(lg.grad_g);
  for (double& v : r.grad_g) v *= cfg.alpha;
  return r;
}

namespace {

nlohmann::json grid_json(const FeatureGrid& f) {
  return {{"rows", f.rows}, {"cols", f.cols}, {"channels", f.channels}, {"values", f.values}};
}

}  // namespace

void to_json(nlohmann::json& j, const LossReport& r) {
  j = nlohmann::json{
      {"alpha", r.alpha},
      {"l_spatial", r.l_spatial},
      {"l_glopro", r.l_glopro},
      {"l_total", r.l_total},
      {"counted_cells", r.counted_cells},
      {"grad_a", grid_json(r.grad_a)},
      {"grad_b", grid_json(r.grad_b)},
      {"grad_g", r.grad_g},
  };
}

}  // namespace prf
