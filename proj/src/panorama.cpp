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

#include "prf/panorama.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "prf/common.hpp"

namespace prf {

int fov_crop_width(double fov_degrees, int width) {
  if (!(fov_degrees > 0.0) || fov_degrees > 360.0) {
    throw InvalidArgument("field of view must lie in (0, 360], got " + format_double(fov_degrees));
  }
  if (width <= 0) throw InvalidArgument("panorama width must be positive");
  const int w = static_cast<int>(std::floor(fov_degrees / 360.0 * width + 0.5));
  return std::clamp(w, 1, width);
}

int fov_crop_start(int crop_width, int center_col, int width) {
  const int start = center_col - crop_width / 2;
  return ((start % width) + width) % width;
}

namespace {

template <typename T>
std::vector<T> crop_columns(const std::vector<T>& data, int height, int width, int channels,
                            int start, int crop_width) {
  std::vector<T> out(std::size_t(height) * crop_width * channels);
  for (int r = 0; r < height; ++r) {
    for (int k = 0; k < crop_width; ++k) {
      const int c = (start + k) % width;
      for (int ch = 0; ch < channels; ++ch) {
        out[(std::size_t(r) * crop_width + k) * channels + ch] =
            data[(std::size_t(r) * width + c) * channels + ch];
      }
    }
  }
  return out;
}

}  // namespace

PanopticMap crop_fov(const PanopticMap& map, double fov_degrees, int center_col) {
  const int cw = fov_crop_width(fov_degrees, map.width);
  if (fov_degrees == 360.0) return map;
  PanopticMap out;
  out.height = map.height;
  out.width = cw;
  out.ids = crop_columns(map.ids, map.height, map.width, 1,
                         fov_crop_start(cw, center_col, map.width), cw);
  return out;
}

RgbImage crop_fov(const RgbImage& img, double fov_degrees, int center_col) {
  const int cw = fov_crop_width(fov_degrees, img.width);
  if (fov_degrees == 360.0) return img;
  RgbImage out;
  out.height = img.height;
  out.width = cw;
  out.data = crop_columns(img.data, img.height, img.width, 3,
                          fov_crop_start(cw, center_col, img.width), cw);
  return out;
}

Panorama crop_fov(const Panorama& p, double fov_degrees, int center_col) {
  if (p.rgb.height != p.labels.height || p.rgb.width != p.labels.width) {
    throw ShapeError("panorama RGB and labels differ in size");
  }
  return {crop_fov(p.rgb, fov_degrees, center_col), crop_fov(p.labels, fov_degrees, center_col)};
}

std::vector<FovSweepRow> fov_sweep(std::span<const PanopticMap> preds,
                                   std::span<const PanopticMap> gts, const ClassTable& table,
                                   const FovSweepConfig& cfg, int threads) {
  if (preds.size() != gts.size() || gts.empty()) {
    throw DataError("fov sweep needs equally many (and at least one) predictions and labels");
  }
  std::vector<double> fovs = cfg.fovs;
  std::sort(fovs.begin(), fovs.end());
  std::vector<FovSweepRow> rows;
  for (double fov : fovs) {
    std::vector<PanopticMap> cp, cg;
    for (std::size_t k = 0; k < gts.size(); ++k) {
      if (preds[k].width != gts[k].width || preds[k].height != gts[k].height) {
        throw DataError("prediction " + std::to_string(k) + " is not at panorama resolution");
      }
      const int center = cfg.center_col.value_or(gts[k].width / 2);
      cp.push_back(crop_fov(preds[k], fov, center));
      cg.push_back(crop_fov(gts[k], fov, center));
    }
    rows.push_back({fov, cg.front().width, evaluate_pairs(cp, cg, table, threads)});
  }
  return rows;
}

std::string fov_sweep_csv(const std::vector<FovSweepRow>& rows) {
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ostringstream os;
  os << "fov_deg,pq,pq_stuff,pq_things\n";
  for (const auto& r : rows) {
    os << format_double(r.fov) << ',' << cell(r.report.pq_all) << ','
       << cell(r.report.pq_stuff) << ',' << cell(r.report.pq_things) << '\n';
  }
  return os.str();
}

void SyntheticSceneSpec::validate() const {
  if (height < 16 || width < 16) throw InvalidArgument("synthetic panorama must be at least 16x16");
  if (min_cars < 0 || max_cars < min_cars || min_persons < 0 || max_persons < min_persons ||
      min_islands < 0 || max_islands < min_islands) {
    throw InvalidArgument("synthetic object counts must satisfy 0 <= min <= max");
  }
  if (max_cars >= kInstanceDivisor || max_persons >= kInstanceDivisor) {
    throw InvalidArgument("at most 999 instances per class");
  }
  if (!(horizon > 0.0 && horizon < street_top && street_top < 1.0)) {
    throw InvalidArgument("need 0 < horizon < street_top < 1");
  }
  if (!(noise >= 0.0 && noise <= 0.5)) throw InvalidArgument("noise must lie in [0, 0.5]");
}

void to_json(nlohmann::json& j, const SyntheticSceneSpec& s) {
  j = nlohmann::json{{"seed", s.seed},
                     {"height", s.height},
                     {"width", s.width},
                     {"min_cars", s.min_cars},
                     {"max_cars", s.max_cars},
                     {"min_persons", s.min_persons},
                     {"max_persons", s.max_persons},
                     {"car_half_width_min", s.car_half_width_min},
                     {"car_half_width_max", s.car_half_width_max},
                     {"car_half_height_min", s.car_half_height_min},
                     {"car_half_height_max", s.car_half_height_max},
                     {"person_half_width_min", s.person_half_width_min},
                     {"person_half_width_max", s.person_half_width_max},
                     {"person_half_height_min", s.person_half_height_min},
                     {"person_half_height_max", s.person_half_height_max},
                     {"street_top", s.street_top},
                     {"horizon", s.horizon},
                     {"min_islands", s.min_islands},
                     {"max_islands", s.max_islands},
                     {"noise", s.noise}};
}

void from_json(const nlohmann::json& j, SyntheticSceneSpec& s) {
  nlohmann::json defaults = SyntheticSceneSpec{};
  for (const auto& [k, v] : j.items()) {
    if (!defaults.contains(k)) throw InvalidArgument("unknown scene key '" + k + "'");
    defaults[k] = v;
  }
  const auto& d = defaults;
  s.seed = d.at("seed").get<std::uint64_t>();
  d.at("height").get_to(s.height);
  d.at("width").get_to(s.width);
  d.at("min_cars").get_to(s.min_cars);
  d.at("max_cars").get_to(s.max_cars);
  d.at("min_persons").get_to(s.min_persons);
  d.at("max_persons").get_to(s.max_persons);
  d.at("car_half_width_min").get_to(s.car_half_width_min);
  d.at("car_half_width_max").get_to(s.car_half_width_max);
  d.at("car_half_height_min").get_to(s.car_half_height_min);
  d.at("car_half_height_max").get_to(s.car_half_height_max);
  d.at("person_half_width_min").get_to(s.person_half_width_min);
  d.at("person_half_width_max").get_to(s.person_half_width_max);
  d.at("person_half_height_min").get_to(s.person_half_height_min);
  d.at("person_half_height_max").get_to(s.person_half_height_max);
  d.at("street_top").get_to(s.street_top);
  d.at("horizon").get_to(s.horizon);
  d.at("min_islands").get_to(s.min_islands);
  d.at("max_islands").get_to(s.max_islands);
  d.at("noise").get_to(s.noise);
  s.validate();
}

const std::vector<TextureFamily>& texture_families() {
  static const std::vector<TextureFamily> kFamilies = {
      {kVoidId, {0.55, 0.70, 0.90}},
      {wildpps::kStreet, {0.33, 0.33, 0.35}},
      {wildpps::kSidewalk, {0.72, 0.46, 0.36}},
      {wildpps::kPerson, {0.35, 0.65, 0.25}},
      {wildpps::kCar, {0.15, 0.25, 0.65}},
  };
  return kFamilies;
}

namespace {

const double* family_rgb(int class_id) {
  for (const auto& f : texture_families()) {
    if (f.class_id == class_id) return f.rgb;
  }
  return texture_families().front().rgb;
}

// Horizontal distance on the wrapped column axis.
double wrap_dx(double x, double cx, int width) {
  double d = std::fabs(x - cx);
  d = std::fmod(d, static_cast<double>(width));
  return std::min(d, width - d);
}

struct Blob {
  double cx, cy, ax, ay;
  bool contains(int r, int c, int width) const {
    const double dx = wrap_dx(c, cx, width) / ax;
    const double dy = (r - cy) / ay;
    return dx * dx + dy * dy <= 1.0;
  }
};

}  // namespace

Panorama generate_synthetic(const SyntheticSceneSpec& spec) {
  spec.validate();
  const int H = spec.height, W = spec.width;
  Rng rng(spec.seed);
  Panorama p{RgbImage(H, W), PanopticMap(H, W, kVoidId)};

  const std::uint16_t street = PanopticMap::encode(wildpps::kStreet, 0);
  const std::uint16_t sidewalk = PanopticMap::encode(wildpps::kSidewalk, 0);

  // Street band across every column; its upper edge undulates with an
  // integer number of periods so the seam stays continuous.
  const int waves = static_cast<int>(rng.uniform_int(1, 3));
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  const double amp = 0.03 * H;
  std::vector<double> street_row(W);
  for (int c = 0; c < W; ++c) {
    street_row[c] = spec.street_top * H + amp * std::sin(2.0 * M_PI * waves * c / W + phase);
  }
  const double strip = std::max(2.0, (spec.street_top - spec.horizon) * H * 0.45);

  // Sidewalk strips along the kerb over random column intervals.
  std::vector<std::uint8_t> has_strip(W, 0);
  const int intervals = static_cast<int>(rng.uniform_int(2, 4));
  for (int k = 0; k < intervals; ++k) {
    const int start = static_cast<int>(rng.uniform_int(0, W - 1));
    const int len = static_cast<int>(rng.uniform(0.08, 0.2) * W);
    for (int c = 0; c < len; ++c) has_strip[(start + c) % W] = 1;
  }
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (r >= street_row[c]) {
        p.labels.at(r, c) = street;
      } else if (has_strip[c] && r >= street_row[c] - strip) {
        p.labels.at(r, c) = sidewalk;
      }
    }
  }

  // Bow-shaped islands: an ellipse minus a lower-shifted copy, placed in the
  // central half of the panorama.
  const int islands = static_cast<int>(rng.uniform_int(spec.min_islands, spec.max_islands));
  for (int k = 0; k < islands; ++k) {
    Blob outer{rng.uniform(0.25, 0.75) * W, 0.0, rng.uniform(0.15, 0.3) * H,
               rng.uniform(0.06, 0.1) * H};
    outer.cy = spec.street_top * H + rng.uniform(0.1, 0.22) * H;
    Blob inner{outer.cx, outer.cy + 0.6 * outer.ay, outer.ax * 0.9, outer.ay};
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        if (r >= street_row[c] && outer.contains(r, c, W) && !inner.contains(r, c, W)) {
          p.labels.at(r, c) = sidewalk;
        }
      }
    }
  }

  struct Thing {
    Blob blob;
    std::uint16_t id;
    double shade;
  };
  std::vector<Thing> things;
  const int cars = static_cast<int>(rng.uniform_int(spec.min_cars, spec.max_cars));
  for (int k = 0; k < cars; ++k) {
    Blob b{rng.uniform(0.0, W), 0.0, rng.uniform(spec.car_half_width_min, spec.car_half_width_max) * H,
           rng.uniform(spec.car_half_height_min, spec.car_half_height_max) * H};
    b.cy = std::min(H - 1.0, street_row[static_cast<int>(b.cx) % W] + rng.uniform(0.05, 0.25) * H);
    things.push_back({b, PanopticMap::encode(wildpps::kCar, k + 1), rng.uniform(-0.06, 0.06)});
  }
  const int persons = static_cast<int>(rng.uniform_int(spec.min_persons, spec.max_persons));
  for (int k = 0; k < persons; ++k) {
    Blob b{rng.uniform(0.0, W), 0.0,
           rng.uniform(spec.person_half_width_min, spec.person_half_width_max) * H,
           rng.uniform(spec.person_half_height_min, spec.person_half_height_max) * H};
    b.cy = street_row[static_cast<int>(b.cx) % W] - rng.uniform(0.0, 0.05) * H;
    things.push_back({b, PanopticMap::encode(wildpps::kPerson, k + 1), rng.uniform(-0.06, 0.06)});
  }
  std::vector<double> shade_of(65536, 0.0);
  for (const auto& t : things) {
    shade_of[t.id] = t.shade;
    const int r0 = std::max(0, static_cast<int>(std::floor(t.blob.cy - t.blob.ay)));
    const int r1 = std::min(H - 1, static_cast<int>(std::ceil(t.blob.cy + t.blob.ay)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = 0; c < W; ++c) {
        if (t.blob.contains(r, c, W)) p.labels.at(r, c) = t.id;
      }
    }
  }

  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const auto id = p.labels.at(r, c);
      const int cls = id == kVoidId ? kVoidId : PanopticMap::class_of(id);
      const double* base = family_rgb(cls);
      double offset = 0.0;
      if (cls == kVoidId) {
        offset = -0.04 * r / H;
      } else if (cls == wildpps::kSidewalk) {
        const bool mortar = r % 6 == 0 || (c + 6 * ((r / 6) % 2)) % 12 == 0;
        offset = mortar ? -0.07 : 0.0;
      } else if (cls == wildpps::kCar || cls == wildpps::kPerson) {
        offset = shade_of[id] + ((r / 3) % 3 == 0 ? -0.04 : 0.0);
      }
      for (int ch = 0; ch < 3; ++ch) {
        const double v = base[ch] + offset + rng.uniform(-spec.noise, spec.noise);
        p.rgb.at(r, c, ch) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return p;
}

TextureMosaic generate_texture_mosaic(std::uint64_t seed, int height, int width, int regions) {
  if (height <= 0 || width <= 0 || regions < 2) {
    throw InvalidArgument("mosaic needs a positive size and at least two regions");
  }
  Rng rng(seed);
  struct Site {
    double r, c;
    std::uint8_t label;
  };
  std::vector<Site> sites;
  for (int k = 0; k < regions; ++k) {
    sites.push_back({rng.uniform(0.0, height), rng.uniform(0.0, width),
                     static_cast<std::uint8_t>(k % 2)});
  }
  TextureMosaic m{RgbImage(height, width), std::vector<std::uint8_t>(std::size_t(height) * width)};
  static const double kStripeA[3] = {0.75, 0.55, 0.30}, kStripeB[3] = {0.55, 0.38, 0.20};
  static const double kCheckA[3] = {0.30, 0.45, 0.70}, kCheckB[3] = {0.18, 0.30, 0.52};
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double best = 1e300;
      std::uint8_t label = 0;
      for (const auto& s : sites) {
        const double d = (r - s.r) * (r - s.r) + (c - s.c) * (c - s.c);
        if (d < best) best = d, label = s.label;
      }
      m.labels[std::size_t(r) * width + c] = label;
      const double* col = label == 0 ? ((r / 3) % 2 ? kStripeA : kStripeB)
                                     : (((r / 4) + (c / 4)) % 2 ? kCheckA : kCheckB);
      for (int ch = 0; ch < 3; ++ch) {
        m.rgb.at(r, c, ch) = std::clamp(col[ch] + rng.uniform(-0.03, 0.03), 0.0, 1.0);
      }
    }
  }
  return m;
}

}  // namespace prf
