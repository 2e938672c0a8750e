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

#include "prf/viewgeom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace prf {

void to_json(nlohmann::json& j, const ViewSpec& spec) {
  j = nlohmann::json{
      {"origin_row", spec.origin_row},
      {"origin_col", spec.origin_col},
      {"height", spec.height},
      {"width", spec.width},
      {"flip", spec.flip_horizontal},
      {"aug",
       {{"brightness", spec.aug.brightness},
        {"contrast", spec.aug.contrast},
        {"saturation", spec.aug.saturation},
        {"hue", spec.aug.hue},
        {"grayscale", spec.aug.grayscale},
        {"solarize", spec.aug.solarize},
        {"solarize_threshold", spec.aug.solarize_threshold}}},
  };
}

void from_json(const nlohmann::json& j, ViewSpec& spec) {
  j.at("origin_row").get_to(spec.origin_row);
  j.at("origin_col").get_to(spec.origin_col);
  j.at("height").get_to(spec.height);
  j.at("width").get_to(spec.width);
  j.at("flip").get_to(spec.flip_horizontal);
  const auto& a = j.at("aug");
  a.at("brightness").get_to(spec.aug.brightness);
  a.at("contrast").get_to(spec.aug.contrast);
  a.at("saturation").get_to(spec.aug.saturation);
  a.at("hue").get_to(spec.aug.hue);
  a.at("grayscale").get_to(spec.aug.grayscale);
  a.at("solarize").get_to(spec.aug.solarize);
  a.at("solarize_threshold").get_to(spec.aug.solarize_threshold);
}

namespace {

double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = std::fmod((g - b) / d, 6.0) / 6.0;
  } else if (mx == g) {
    h = ((b - r) / d + 2.0) / 6.0;
  } else {
    h = ((r - g) / d + 4.0) / 6.0;
  }
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = h * 6.0;
  const int sector = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

void validate_spec(const ViewSpec& spec) {
  if (spec.height <= 0 || spec.width <= 0) {
    throw InvalidArgument("view spec must have positive extent");
  }
}

void validate_grid(GridShape g) {
  if (g.rows <= 0 || g.cols <= 0) throw ShapeError("feature grid must be non-empty");
}

}  // namespace

void apply_photometric(RgbImage& img, const AugmentationParams& aug) {
  const std::size_t n = std::size_t(img.height) * img.width;
  auto* px = img.data.data();

  if (aug.brightness != 1.0) {
    for (std::size_t k = 0; k < 3 * n; ++k) px[k] = clamp01(px[k] * aug.brightness);
  }
  if (aug.contrast != 1.0) {
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += luminance(px[3 * k], px[3 * k + 1], px[3 * k + 2]);
    mean /= static_cast<double>(std::max<std::size_t>(n, 1));
    for (std::size_t k = 0; k < 3 * n; ++k) {
      px[k] = clamp01((px[k] - mean) * aug.contrast + mean);
    }
  }
  if (aug.saturation != 1.0) {
    for (std::size_t k = 0; k < n; ++k) {
      const double gray = luminance(px[3 * k], px[3 * k + 1], px[3 * k + 2]);
      for (int c = 0; c < 3; ++c) {
        px[3 * k + c] = clamp01(gray + aug.saturation * (px[3 * k + c] - gray));
      }
    }
  }
  if (aug.hue != 0.0) {
    for (std::size_t k = 0; k < n; ++k) {
      double h, s, v;
      rgb_to_hsv(px[3 * k], px[3 * k + 1], px[3 * k + 2], h, s, v);
      h = std::fmod(h + aug.hue + 1.0, 1.0);
      hsv_to_rgb(h, s, v, px[3 * k], px[3 * k + 1], px[3 * k + 2]);
      for (int c = 0; c < 3; ++c) px[3 * k + c] = clamp01(px[3 * k + c]);
    }
  }
  if (aug.grayscale) {
    for (std::size_t k = 0; k < n; ++k) {
      const double gray = clamp01(luminance(px[3 * k], px[3 * k + 1], px[3 * k + 2]));
      px[3 * k] = px[3 * k + 1] = px[3 * k + 2] = gray;
    }
  }
  if (aug.solarize) {
    for (std::size_t k = 0; k < 3 * n; ++k) {
      if (px[k] >= aug.solarize_threshold) px[k] = 1.0 - px[k];
    }
  }
}

RgbImage render_view(const RgbImage& image, const ViewSpec& spec, int out_height,
                     int out_width) {
  validate_spec(spec);
  if (spec.origin_row < 0 || spec.origin_col < 0 ||
      spec.origin_row + spec.height > image.height ||
      spec.origin_col + spec.width > image.width) {
    throw InvalidArgument("crop rectangle exceeds the source image");
  }
  RgbImage out(out_height, out_width);
  const double sy = static_cast<double>(spec.height) / out_height;
  const double sx = static_cast<double>(spec.width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, spec.height - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, spec.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const int xs = spec.flip_horizontal ? out_width - 1 - x : x;
      const double fx = std::clamp((xs + 0.5) * sx - 0.5, 0.0, spec.width - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, spec.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const int r0 = spec.origin_row + y0, r1 = spec.origin_row + y1;
        const int c0 = spec.origin_col + x0, c1 = spec.origin_col + x1;
        const double top = image.at(r0, c0, c) * (1.0 - wx) + image.at(r0, c1, c) * wx;
        const double bot = image.at(r1, c0, c) * (1.0 - wx) + image.at(r1, c1, c) * wx;
        out.at(y, x, c) = clamp01(top * (1.0 - wy) + bot * wy);
      }
    }
  }
  apply_photometric(out, spec.aug);
  return out;
}

std::vector<std::uint16_t> render_labels(const std::vector<std::uint16_t>& labels,
                                         int src_height, int src_width, const ViewSpec& spec,
                                         int out_height, int out_width) {
  validate_spec(spec);
  if (labels.size() != std::size_t(src_height) * src_width) {
    throw ShapeError("label raster size does not match its dimensions");
  }
  if (spec.origin_row + spec.height > src_height || spec.origin_col + spec.width > src_width) {
    throw InvalidArgument("crop rectangle exceeds the source labels");
  }
  std::vector<std::uint16_t> out(std::size_t(out_height) * out_width);
  for (int y = 0; y < out_height; ++y) {
    const int ry = std::min(static_cast<int>((y + 0.5) * spec.height / out_height),
                            spec.height - 1);
    for (int x = 0; x < out_width; ++x) {
      const int xs = spec.flip_horizontal ? out_width - 1 - x : x;
      const int rx = std::min(static_cast<int>((xs + 0.5) * spec.width / out_width),
                              spec.width - 1);
      out[std::size_t(y) * out_width + x] =
          labels[std::size_t(spec.origin_row + ry) * src_width + spec.origin_col + rx];
    }
  }
  return out;
}

namespace {

ViewSpec sample_spec(const RgbImage& image, Rng& rng, const ViewSamplerConfig& cfg) {
  ViewSpec spec;
  const double scale = rng.uniform(cfg.min_scale, cfg.max_scale);
  const double aspect =
      std::exp(rng.uniform(std::log(cfg.min_aspect), std::log(cfg.max_aspect)));
  const int h = static_cast<int>(std::lround(image.height * std::sqrt(scale / aspect)));
  const int w = static_cast<int>(std::lround(image.width * std::sqrt(scale * aspect)));
  spec.height = std::clamp(h, cfg.feature_stride, image.height);
  spec.width = std::clamp(w, cfg.feature_stride, image.width);
  spec.origin_row = static_cast<int>(rng.uniform_int(0, image.height - spec.height));
  spec.origin_col = static_cast<int>(rng.uniform_int(0, image.width - spec.width));
  spec.flip_horizontal = rng.bernoulli(cfg.flip_prob);

  // Draws happen unconditionally so the stream layout is fixed.
  const bool jitter = rng.bernoulli(cfg.jitter_prob);
  const double b = rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness);
  const double c = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast);
  const double s = rng.uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation);
  const double hue = rng.uniform(-cfg.hue, cfg.hue);
  if (jitter) {
    spec.aug.brightness = b;
    spec.aug.contrast = c;
    spec.aug.saturation = s;
    spec.aug.hue = hue;
  }
  spec.aug.grayscale = rng.bernoulli(cfg.grayscale_prob);
  spec.aug.solarize = rng.bernoulli(cfg.solarize_prob);
  spec.aug.solarize_threshold = cfg.solarize_threshold;
  return spec;
}

}  // namespace

std::pair<AugmentedView, AugmentedView> sample_view_pair(const RgbImage& image, Rng& rng,
                                                         const ViewSamplerConfig& cfg) {
  if (cfg.feature_stride <= 0 || cfg.out_height <= 0 || cfg.out_width <= 0) {
    throw InvalidArgument("sampler needs positive stride and output size");
  }
  if (image.height < 2 * cfg.feature_stride || image.width < 2 * cfg.feature_stride) {
    throw InvalidArgument("image " + std::to_string(image.height) + "x" +
                          std::to_string(image.width) +
                          " is smaller than the minimum crop of twice the feature stride");
  }
  if (!(cfg.min_scale > 0.0 && cfg.min_scale <= cfg.max_scale && cfg.max_scale <= 1.0)) {
    throw InvalidArgument("crop scale range must satisfy 0 < min <= max <= 1");
  }
  if (!(cfg.min_aspect > 0.0 && cfg.min_aspect <= cfg.max_aspect)) {
    throw InvalidArgument("aspect range must satisfy 0 < min <= max");
  }
  AugmentedView a, b;
  a.spec = sample_spec(image, rng, cfg);
  b.spec = sample_spec(image, rng, cfg);
  a.pixels = render_view(image, a.spec, cfg.out_height, cfg.out_width);
  b.pixels = render_view(image, b.spec, cfg.out_height, cfg.out_width);
  return {std::move(a), std::move(b)};
}

SourcePoint cell_center_in_source(const ViewSpec& spec, int row, int col, GridShape grid) {
  validate_spec(spec);
  validate_grid(grid);
  if (row < 0 || row >= grid.rows || col < 0 || col >= grid.cols) {
    throw IndexError("cell (" + std::to_string(row) + ", " + std::to_string(col) +
                     ") outside a " + std::to_string(grid.rows) + "x" +
                     std::to_string(grid.cols) + " grid");
  }
  const double bin_h = static_cast<double>(spec.height) / grid.rows;
  const double bin_w = static_cast<double>(spec.width) / grid.cols;
  SourcePoint p;
  p.row = spec.origin_row + (row + 0.5) * bin_h;
  const double offset = (col + 0.5) * bin_w;
  p.col = spec.flip_horizontal ? spec.origin_col + spec.width - offset
                               : spec.origin_col + offset;
  return p;
}

double bin_diagonal(const ViewSpec& spec, GridShape grid) {
  validate_spec(spec);
  validate_grid(grid);
  return std::hypot(static_cast<double>(spec.height) / grid.rows,
                    static_cast<double>(spec.width) / grid.cols);
}

std::size_t CorrespondenceSet::positive_pair_count() const {
  std::size_t n = 0;
  for (const auto& p : positives) n += p.size();
  return n;
}

CorrespondenceSet CorrespondenceSet::swapped() const {
  CorrespondenceSet s;
  s.grid_a = grid_b;
  s.grid_b = grid_a;
  s.threshold_ratio = threshold_ratio;
  s.threshold = threshold;
  const int na = grid_a.cells(), nb = grid_b.cells();
  s.positives.assign(nb, {});
  s.negatives.assign(nb, {});
  s.positive_mask.assign(std::size_t(nb) * na, 0);
  for (int j = 0; j < nb; ++j) {
    for (int i = 0; i < na; ++i) {
      if (is_positive(i, j)) {
        s.positives[j].push_back(i);
        s.positive_mask[std::size_t(j) * na + i] = 1;
      } else {
        s.negatives[j].push_back(i);
      }
    }
  }
  return s;
}

CorrespondenceSet build_correspondence(const ViewSpec& spec_a, const ViewSpec& spec_b,
                                       GridShape grid_a, GridShape grid_b,
                                       double threshold_ratio) {
  if (!(threshold_ratio > 0.0)) throw InvalidArgument("threshold_ratio must be positive");
  CorrespondenceSet cs;
  cs.grid_a = grid_a;
  cs.grid_b = grid_b;
  cs.threshold_ratio = threshold_ratio;
  cs.threshold =
      threshold_ratio * std::max(bin_diagonal(spec_a, grid_a), bin_diagonal(spec_b, grid_b));

  std::vector<SourcePoint> centers_b;
  centers_b.reserve(grid_b.cells());
  for (int r = 0; r < grid_b.rows; ++r) {
    for (int c = 0; c < grid_b.cols; ++c) {
      centers_b.push_back(cell_center_in_source(spec_b, r, c, grid_b));
    }
  }
  const int na = grid_a.cells(), nb = grid_b.cells();
  cs.positives.assign(na, {});
  cs.negatives.assign(na, {});
  cs.positive_mask.assign(std::size_t(na) * nb, 0);
  const double thr2 = cs.threshold * cs.threshold;
  for (int i = 0; i < na; ++i) {
    const auto pa = cell_center_in_source(spec_a, i / grid_a.cols, i % grid_a.cols, grid_a);
    for (int j = 0; j < nb; ++j) {
      const double dr = pa.row - centers_b[j].row;
      const double dc = pa.col - centers_b[j].col;
      if (dr * dr + dc * dc <= thr2) {
        cs.positives[i].push_back(j);
        cs.positive_mask[std::size_t(i) * nb + j] = 1;
      } else {
        cs.negatives[i].push_back(j);
      }
    }
  }
  return cs;
}

}  // namespace prf
