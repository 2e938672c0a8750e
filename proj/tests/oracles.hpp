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

// Reference implementations used only by tests. Each is written
// independently of the library code it checks: straight-line loops, no
// shared helpers, brute force where the library is clever.
#ifndef PRF_TESTS_ORACLES_HPP_
#define PRF_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "prf/common.hpp"
#include "prf/contrastive.hpp"
#include "prf/panoptic.hpp"
#include "prf/viewgeom.hpp"

namespace oracle {

// Central difference of f at x for every coordinate.
inline std::vector<double> numeric_gradient(std::vector<double>& x,
                                            const std::function<double()>& f,
                                            double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + h;
    const double up = f();
    x[k] = saved - h;
    const double down = f();
    x[k] = saved;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& n,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = std::abs(a[k] - n[k]) / std::max({std::abs(a[k]), std::abs(n[k]), floor});
    worst = std::max(worst, d);
  }
  return worst;
}

// Positive relation between feature cells computed from first principles.
inline std::vector<std::vector<bool>> correspondence(const prf::ViewSpec& a, const prf::ViewSpec& b,
                                                     prf::GridShape ga, prf::GridShape gb,
                                                     double ratio) {
  auto center = [](const prf::ViewSpec& v, prf::GridShape g, int r, int c) {
    const double bh = double(v.height) / g.rows, bw = double(v.width) / g.cols;
    const double row = v.origin_row + (r + 0.5) * bh;
    double col = v.origin_col + (c + 0.5) * bw;
    if (v.flip_horizontal) col = v.origin_col + v.width - (c + 0.5) * bw;
    return std::pair<double, double>{row, col};
  };
  const double da = std::hypot(double(a.height) / ga.rows, double(a.width) / ga.cols);
  const double db = std::hypot(double(b.height) / gb.rows, double(b.width) / gb.cols);
  const double thr = ratio * std::max(da, db);
  std::vector<std::vector<bool>> pos(ga.cells(), std::vector<bool>(gb.cells(), false));
  for (int i = 0; i < ga.cells(); ++i) {
    const auto [ri, ci] = center(a, ga, i / ga.cols, i % ga.cols);
    for (int j = 0; j < gb.cells(); ++j) {
      const auto [rj, cj] = center(b, gb, j / gb.cols, j % gb.cols);
      pos[i][j] = std::hypot(ri - rj, ci - cj) <= thr;
    }
  }
  return pos;
}

using Vec = std::vector<long double>;

inline long double cos_ld(const Vec& x, const Vec& y) {
  long double xy = 0, xx = 0, yy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    xy += x[k] * y[k];
    xx += x[k] * x[k];
    yy += y[k] * y[k];
  }
  if (xx == 0 || yy == 0) return 0;
  return xy / std::sqrt(xx * yy);
}

inline std::vector<Vec> cells_ld(const prf::FeatureGrid& f) {
  std::vector<Vec> out(f.cells(), Vec(f.channels));
  for (int i = 0; i < f.cells(); ++i)
    for (int c = 0; c < f.channels; ++c) out[i][c] = f.values[std::size_t(i) * f.channels + c];
  return out;
}

inline std::vector<Vec> smooth_ld(const std::vector<Vec>& x, const prf::SmoothingTransform& g) {
  const int ch = g.channels;
  std::vector<Vec> out(x.size(), Vec(ch, 0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      long double w = std::max(cos_ld(x[i], x[j]), 0.0L);
      w *= w;
      for (int r = 0; r < ch; ++r) {
        long double gx = 0;
        for (int c = 0; c < ch; ++c) gx += (long double)g.matrix[std::size_t(r) * ch + c] * x[j][c];
        out[i][r] += w * gx;
      }
    }
  }
  return out;
}

// Propagation loss with extended precision, single grid per view.
inline long double glopro_ld(const prf::FeatureGrid& fa, const prf::FeatureGrid& fb,
                             const std::vector<std::vector<bool>>& pos,
                             const prf::SmoothingTransform& g) {
  const auto xa = cells_ld(fa), xb = cells_ld(fb);
  const auto sa = smooth_ld(xa, g), sb = smooth_ld(xb, g);
  long double sum = 0;
  long double pairs = 0;
  for (std::size_t i = 0; i < xa.size(); ++i)
    for (std::size_t j = 0; j < xb.size(); ++j) {
      if (!pos[i][j]) continue;
      sum += -cos_ld(sa[i], xb[j]) - cos_ld(sb[j], xa[i]);
      pairs += 1;
    }
  return sum / pairs;
}

// One direction of the spatial loss, extended precision.
inline long double spatial_directed_ld(const prf::FeatureGrid& q, const prf::FeatureGrid& k,
                                       const std::vector<std::vector<bool>>& pos, long double tau,
                                       int* counted = nullptr) {
  const auto xq = cells_ld(q), xk = cells_ld(k);
  long double total = 0;
  int n = 0;
  for (std::size_t i = 0; i < xq.size(); ++i) {
    long double num = 0, den = 0;
    bool any = false;
    for (std::size_t j = 0; j < xk.size(); ++j) {
      const long double e = std::exp(cos_ld(xq[i], xk[j]) / tau);
      den += e;
      if (pos[i][j]) {
        num += e;
        any = true;
      }
    }
    if (!any) continue;
    total += -std::log(num / den);
    ++n;
  }
  if (counted) *counted = n;
  return total / n;
}

inline std::vector<std::vector<bool>> transpose(const std::vector<std::vector<bool>>& m) {
  if (m.empty()) return {};
  std::vector<std::vector<bool>> t(m[0].size(), std::vector<bool>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) t[j][i] = m[i][j];
  return t;
}

inline long double spatial_ld(const prf::FeatureGrid& a, const prf::FeatureGrid& b,
                              const std::vector<std::vector<bool>>& pos, long double tau) {
  return 0.5L * (spatial_directed_ld(a, b, pos, tau) + spatial_directed_ld(b, a, transpose(pos), tau));
}

// Brute-force segment matching: enumerate every (pred, gt) segment pair and
// count pixels directly.
struct BruteMatch {
  std::uint16_t pred, gt;
  std::int64_t inter, uni;
};

struct BruteResult {
  std::vector<BruteMatch> matches;  // sorted by (gt, pred)
  std::vector<std::uint16_t> fp, fn, discarded;
};

inline BruteResult match(const prf::PanopticMap& pred, const prf::PanopticMap& gt) {
  std::set<std::uint16_t> ps, gs;
  for (auto v : pred.ids)
    if (v != prf::kVoidId) ps.insert(v);
  for (auto v : gt.ids)
    if (v != prf::kVoidId) gs.insert(v);
  BruteResult r;
  std::set<std::uint16_t> mp, mg;
  for (auto g : gs) {
    for (auto p : ps) {
      if (p / 1000 != g / 1000) continue;
      std::int64_t inter = 0, uni = 0;
      for (std::size_t k = 0; k < pred.ids.size(); ++k) {
        const bool in_p = pred.ids[k] == p && gt.ids[k] != prf::kVoidId;
        const bool in_g = gt.ids[k] == g;
        inter += in_p && in_g;
        uni += in_p || in_g;
      }
      if (2 * inter > uni) {
        r.matches.push_back({p, g, inter, uni});
        mp.insert(p);
        mg.insert(g);
      }
    }
  }
  for (auto g : gs)
    if (!mg.count(g)) r.fn.push_back(g);
  for (auto p : ps) {
    if (mp.count(p)) continue;
    std::int64_t area = 0, on_void = 0;
    for (std::size_t k = 0; k < pred.ids.size(); ++k) {
      if (pred.ids[k] != p) continue;
      ++area;
      on_void += gt.ids[k] == prf::kVoidId;
    }
    (2 * on_void > area ? r.discarded : r.fp).push_back(p);
  }
  return r;
}

// Per-class PQ straight from the definition.
struct BrutePQ {
  std::map<int, double> pq;
  std::map<int, std::int64_t> tp, fp, fn;
};

inline BrutePQ pq(const std::vector<BruteResult>& results) {
  std::map<int, double> iou;
  BrutePQ out;
  for (const auto& r : results) {
    for (const auto& m : r.matches) {
      iou[m.gt / 1000] += double(m.inter) / double(m.uni);
      ++out.tp[m.gt / 1000];
    }
    for (auto p : r.fp) ++out.fp[p / 1000];
    for (auto g : r.fn) ++out.fn[g / 1000];
  }
  std::set<int> classes;
  for (auto& [c, v] : out.tp) classes.insert(c);
  for (auto& [c, v] : out.fp) classes.insert(c);
  for (auto& [c, v] : out.fn) classes.insert(c);
  for (int c : classes) {
    const double den = out.tp[c] + 0.5 * out.fp[c] + 0.5 * out.fn[c];
    out.pq[c] = den > 0 ? iou[c] / den : 0.0;
  }
  return out;
}

// Random map with at most `max_segments` segments from the default schema
// drawn as overlapping rectangles, plus void patches.
inline prf::PanopticMap random_map(prf::Rng& rng, int h, int w, int max_segments,
                                   bool with_void = true) {
  static const int kClasses[] = {0, 1, 11, 13};
  prf::PanopticMap m(h, w, prf::kVoidId);
  const int n = static_cast<int>(rng.uniform_int(1, max_segments));
  int next_instance[14] = {};
  for (int s = 0; s < n; ++s) {
    const int cls = kClasses[rng.uniform_int(0, 3)];
    const bool thing = cls >= 11;
    const int inst = thing ? ++next_instance[cls] : 0;
    const auto id = static_cast<std::uint16_t>(cls * 1000 + inst);
    const int r0 = static_cast<int>(rng.uniform_int(0, h - 1));
    const int c0 = static_cast<int>(rng.uniform_int(0, w - 1));
    const int r1 = static_cast<int>(rng.uniform_int(r0 + 1, h));
    const int c1 = static_cast<int>(rng.uniform_int(c0 + 1, w));
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c) m.at(r, c) = id;
  }
  if (with_void && rng.bernoulli(0.5)) {
    const int r0 = static_cast<int>(rng.uniform_int(0, h - 1));
    const int c0 = static_cast<int>(rng.uniform_int(0, w - 1));
    const int r1 = static_cast<int>(rng.uniform_int(r0 + 1, h));
    const int c1 = static_cast<int>(rng.uniform_int(c0 + 1, w));
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c) m.at(r, c) = prf::kVoidId;
  }
  return m;
}

// Perturbation of `gt`: shifted copy with some segments relabeled or
// dropped, so that matches, misses and spurious segments all occur.
inline prf::PanopticMap perturb(prf::Rng& rng, const prf::PanopticMap& gt) {
  prf::PanopticMap p(gt.height, gt.width, prf::kVoidId);
  const int dr = static_cast<int>(rng.uniform_int(-4, 4));
  const int dc = static_cast<int>(rng.uniform_int(-8, 8));
  for (int r = 0; r < gt.height; ++r)
    for (int c = 0; c < gt.width; ++c) {
      const int sr = r - dr, sc = c - dc;
      if (sr >= 0 && sr < gt.height && sc >= 0 && sc < gt.width) p.at(r, c) = gt.at(sr, sc);
    }
  if (rng.bernoulli(0.5)) {
    prf::Rng local(rng.next_u64());
    auto extra = random_map(local, gt.height, gt.width, 2, false);
    for (std::size_t k = 0; k < p.ids.size(); ++k) {
      // Thing instances above 100 cannot collide with the shifted ids.
      if (extra.ids[k] != prf::kVoidId && rng.bernoulli(0.02)) {
        const int cls = extra.ids[k] / 1000;
        p.ids[k] = static_cast<std::uint16_t>(cls * 1000 + (cls >= 11 ? 100 + extra.ids[k] % 1000 : 0));
      }
    }
  }
  return p;
}

}  // namespace oracle

#endif  // PRF_TESTS_ORACLES_HPP_
