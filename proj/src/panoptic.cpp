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

#include "prf/panoptic.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "pnm.hpp"
#include "prf/common.hpp"

namespace prf {

namespace fs = std::filesystem;

ClassTable ClassTable::wildpps() {
  ClassTable t;
  t.add({wildpps::kStreet, "street", ClassKind::kStuff});
  t.add({wildpps::kSidewalk, "sidewalk", ClassKind::kStuff});
  t.add({wildpps::kPerson, "person", ClassKind::kThing});
  t.add({wildpps::kCar, "car", ClassKind::kThing});
  return t;
}

void ClassTable::add(ClassInfo info) {
  if (info.id < 0 || info.id > kMaxClassId) {
    throw DataError("class id " + std::to_string(info.id) + " outside [0, 65]");
  }
  if (!classes_.emplace(info.id, info).second) {
    throw InvalidArgument("duplicate class id " + std::to_string(info.id));
  }
}

const ClassInfo* ClassTable::find(int id) const {
  auto it = classes_.find(id);
  return it == classes_.end() ? nullptr : &it->second;
}

ClassTable ClassTable::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("class table must be a JSON object");
  ClassTable t;
  for (const auto& [key, val] : j.items()) {
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw DataError("class table key '" + key + "' is not an integer id");
    }
    for (const auto& [k, _] : val.items()) {
      if (k != "name" && k != "kind") throw DataError("unknown class table field '" + k + "'");
    }
    const auto kind = val.at("kind").get<std::string>();
    if (kind != "stuff" && kind != "thing") {
      throw DataError("class kind must be stuff or thing, got '" + kind + "'");
    }
    t.add({id, val.at("name").get<std::string>(),
           kind == "stuff" ? ClassKind::kStuff : ClassKind::kThing});
  }
  return t;
}

ClassTable ClassTable::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open class table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ClassTable::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, info] : classes_) {
    j[std::to_string(id)] = {{"name", info.name},
                             {"kind", info.kind == ClassKind::kStuff ? "stuff" : "thing"}};
  }
  return j;
}

std::uint16_t PanopticMap::encode(int class_id, int instance_id) {
  if (class_id < 0 || class_id > kMaxClassId || instance_id < 0 ||
      instance_id >= kInstanceDivisor) {
    throw InvalidArgument("segment (" + std::to_string(class_id) + ", " +
                          std::to_string(instance_id) + ") outside the id schema");
  }
  const int id = class_id * kInstanceDivisor + instance_id;
  if (id >= kVoidId) throw InvalidArgument("encoded id collides with the void sentinel");
  return static_cast<std::uint16_t>(id);
}

void PanopticMap::validate(const ClassTable& table) const {
  if (ids.size() != std::size_t(height) * width) throw DataError("raster size mismatch");
  std::unordered_set<std::uint16_t> seen;
  for (auto id : ids) {
    if (id == kVoidId || !seen.insert(id).second) continue;
    const auto* info = table.find(class_of(id));
    if (!info) throw DataError("pixel id " + std::to_string(id) + " has an unknown class");
    const int inst = instance_of(id);
    if (info->kind == ClassKind::kStuff && inst != 0) {
      throw DataError("stuff class " + info->name + " carries instance id " +
                      std::to_string(inst));
    }
    if (info->kind == ClassKind::kThing && inst == 0) {
      throw DataError("thing class " + info->name + " segment without an instance id");
    }
  }
}

void write_pgm(const fs::path& path, const PanopticMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "P5\n" << map.width << " " << map.height << "\n65535\n";
  std::vector<unsigned char> bytes(map.ids.size() * 2);
  for (std::size_t k = 0; k < map.ids.size(); ++k) {
    bytes[2 * k] = static_cast<unsigned char>(map.ids[k] >> 8);
    bytes[2 * k + 1] = static_cast<unsigned char>(map.ids[k] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

PanopticMap read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  const auto h = detail::read_pnm_header(in, path.string());
  if (h.magic != "P5" || h.maxval != 65535) {
    throw DataError(path.string() + ": expected 16-bit binary P5 with maxval 65535");
  }
  PanopticMap map(h.height, h.width);
  std::vector<unsigned char> bytes(map.ids.size() * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw DataError(path.string() + ": truncated raster");
  }
  for (std::size_t k = 0; k < map.ids.size(); ++k) {
    map.ids[k] = static_cast<std::uint16_t>((bytes[2 * k] << 8) | bytes[2 * k + 1]);
  }
  return map;
}

MatchResult match_segments(const PanopticMap& pred, const PanopticMap& gt,
                           const ClassTable& table) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw DataError("prediction " + std::to_string(pred.height) + "x" +
                    std::to_string(pred.width) + " vs ground truth " +
                    std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  pred.validate(table);
  gt.validate(table);

  std::unordered_map<std::uint32_t, std::int64_t> joint;
  std::unordered_map<std::uint16_t, std::int64_t> pred_area, gt_area, pred_on_void;
  for (std::size_t k = 0; k < pred.ids.size(); ++k) {
    const auto p = pred.ids[k];
    const auto g = gt.ids[k];
    if (p != kVoidId) {
      ++pred_area[p];
      if (g == kVoidId) {
        ++pred_on_void[p];
        continue;
      }
    }
    if (g != kVoidId) {
      ++gt_area[g];
      if (p != kVoidId) ++joint[(std::uint32_t(p) << 16) | g];
    }
  }

  MatchResult out;
  std::unordered_set<std::uint16_t> matched_pred, matched_gt;
  for (const auto& [key, inter] : joint) {
    const auto p = static_cast<std::uint16_t>(key >> 16);
    const auto g = static_cast<std::uint16_t>(key & 0xffff);
    if (PanopticMap::class_of(p) != PanopticMap::class_of(g)) continue;
    const std::int64_t uni = pred_area[p] + gt_area[g] - inter - pred_on_void[p];
    const double iou = static_cast<double>(inter) / static_cast<double>(uni);
    if (iou > 0.5) {
      out.matches.push_back({p, g, inter, uni, iou});
      matched_pred.insert(p);
      matched_gt.insert(g);
    }
  }
  for (const auto& [g, area] : gt_area) {
    if (!matched_gt.count(g)) out.unmatched_gt.push_back({g, area});
  }
  for (const auto& [p, area] : pred_area) {
    if (matched_pred.count(p)) continue;
    auto it = pred_on_void.find(p);
    const std::int64_t on_void = it == pred_on_void.end() ? 0 : it->second;
    if (2 * on_void > area) {
      out.discarded_pred.push_back({p, area});
    } else {
      out.unmatched_pred.push_back({p, area});
    }
  }
  auto by_id = [](const SegmentArea& a, const SegmentArea& b) { return a.id < b.id; };
  std::sort(out.matches.begin(), out.matches.end(), [](const auto& a, const auto& b) {
    return a.gt_id != b.gt_id ? a.gt_id < b.gt_id : a.pred_id < b.pred_id;
  });
  std::sort(out.unmatched_gt.begin(), out.unmatched_gt.end(), by_id);
  std::sort(out.unmatched_pred.begin(), out.unmatched_pred.end(), by_id);
  std::sort(out.discarded_pred.begin(), out.discarded_pred.end(), by_id);
  return out;
}

std::map<int, ClassStats> class_stats(const MatchResult& m) {
  std::map<int, ClassStats> stats;
  for (const auto& s : m.matches) {
    auto& st = stats[PanopticMap::class_of(s.gt_id)];
    ++st.tp;
    st.iou_sum += s.iou;
  }
  for (const auto& s : m.unmatched_pred) ++stats[PanopticMap::class_of(s.id)].fp;
  for (const auto& s : m.unmatched_gt) ++stats[PanopticMap::class_of(s.id)].fn;
  return stats;
}

void aggregate(PQReport& r) {
  struct Mean {
    double pq = 0, sq = 0, rq = 0;
    int n = 0;
  } all, stuff, things;
  for (const auto& c : r.classes) {
    for (Mean* m : {&all, c.kind == ClassKind::kStuff ? &stuff : &things}) {
      m->pq += c.pq;
      m->sq += c.sq;
      m->rq += c.rq;
      ++m->n;
    }
  }
  auto set = [](const Mean& m, std::optional<double>& pq, std::optional<double>& sq,
                std::optional<double>& rq) {
    if (m.n == 0) {
      pq = sq = rq = std::nullopt;
    } else {
      pq = m.pq / m.n;
      sq = m.sq / m.n;
      rq = m.rq / m.n;
    }
  };
  set(all, r.pq_all, r.sq_all, r.rq_all);
  set(stuff, r.pq_stuff, r.sq_stuff, r.rq_stuff);
  set(things, r.pq_things, r.sq_things, r.rq_things);
}

PQReport report_from_stats(const std::map<int, ClassStats>& stats, const ClassTable& table,
                           std::int64_t images) {
  PQReport r;
  r.images = images;
  for (const auto& [id, info] : table.classes()) {
    auto it = stats.find(id);
    if (it == stats.end() || it->second.tp + it->second.fp + it->second.fn == 0) {
      r.excluded_classes.push_back(id);
      continue;
    }
    const auto& st = it->second;
    ClassPQ c;
    c.class_id = id;
    c.name = info.name;
    c.kind = info.kind;
    c.stats = st;
    const double denom = st.tp + 0.5 * st.fp + 0.5 * st.fn;
    c.pq = st.iou_sum / denom;
    c.sq = st.tp > 0 ? st.iou_sum / st.tp : 0.0;
    c.rq = st.tp / denom;
    r.classes.push_back(std::move(c));
  }
  aggregate(r);
  return r;
}

PQReport compute_pq(const MatchResult& m, const ClassTable& table) {
  return report_from_stats(class_stats(m), table, 1);
}

PQReport evaluate_pairs(std::span<const PanopticMap> preds, std::span<const PanopticMap> gts,
                        const ClassTable& table, int threads) {
  if (preds.size() != gts.size()) throw DataError("prediction/ground-truth count mismatch");
  const std::size_t n = preds.size();
  std::vector<std::map<int, ClassStats>> per_image(n);
  std::vector<std::string> errors(n);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < n; k += stride) {
      try {
        per_image[k] = class_stats(match_segments(preds[k], gts[k], table));
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const std::size_t t = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (t <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < t; ++w) pool.emplace_back(work, w, t);
    for (auto& th : pool) th.join();
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!errors[k].empty()) throw DataError("pair " + std::to_string(k) + ": " + errors[k]);
  }
  // Reduction in image order keeps the floating-point sums reproducible.
  std::map<int, ClassStats> total;
  for (const auto& m : per_image)
    for (const auto& [id, st] : m) total[id] += st;
  return report_from_stats(total, table, static_cast<std::int64_t>(n));
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& extension) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == extension) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

MapPairs load_map_pairs(const fs::path& pred_dir, const fs::path& gt_dir) {
  const auto gt_files = list_files(gt_dir, ".pgm");
  const auto pred_files = list_files(pred_dir, ".pgm");
  std::vector<std::string> missing;
  for (const auto& g : gt_files) {
    if (!fs::exists(pred_dir / g.filename())) missing.push_back((pred_dir / g.filename()).string());
  }
  for (const auto& p : pred_files) {
    if (!fs::exists(gt_dir / p.filename())) missing.push_back((gt_dir / p.filename()).string());
  }
  if (!missing.empty()) {
    std::string msg = "missing counterpart file(s):";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  if (gt_files.empty()) throw DataError("no .pgm label maps in " + gt_dir.string());
  MapPairs pairs;
  for (const auto& g : gt_files) {
    pairs.gts.push_back(read_pgm(g));
    pairs.preds.push_back(read_pgm(pred_dir / g.filename()));
  }
  return pairs;
}

PQReport evaluate_dataset(const fs::path& pred_dir, const fs::path& gt_dir,
                          const ClassTable& table, int threads) {
  const auto pairs = load_map_pairs(pred_dir, gt_dir);
  return evaluate_pairs(pairs.preds, pairs.gts, table, threads);
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string opt_str(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

const char* kind_name(ClassKind k) { return k == ClassKind::kStuff ? "stuff" : "thing"; }

}  // namespace

nlohmann::json report_to_json(const PQReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"class_id", c.class_id},
                       {"name", c.name},
                       {"kind", kind_name(c.kind)},
                       {"tp", c.stats.tp},
                       {"fp", c.stats.fp},
                       {"fn", c.stats.fn},
                       {"sum_matched_iou", c.stats.iou_sum},
                       {"pq", c.pq},
                       {"sq", c.sq},
                       {"rq", c.rq}});
  }
  return {{"images", r.images},
          {"classes", classes},
          {"excluded_classes", r.excluded_classes},
          {"pq_all", opt(r.pq_all)},
          {"pq_stuff", opt(r.pq_stuff)},
          {"pq_things", opt(r.pq_things)},
          {"sq_all", opt(r.sq_all)},
          {"sq_stuff", opt(r.sq_stuff)},
          {"sq_things", opt(r.sq_things)},
          {"rq_all", opt(r.rq_all)},
          {"rq_stuff", opt(r.rq_stuff)},
          {"rq_things", opt(r.rq_things)}};
}

std::string report_to_csv(const PQReport& r) {
  std::ostringstream os;
  os << "row,name,kind,pq,sq,rq,tp,fp,fn\n";
  for (const auto& c : r.classes) {
    os << c.class_id << ',' << c.name << ',' << kind_name(c.kind) << ',' << format_double(c.pq)
       << ',' << format_double(c.sq) << ',' << format_double(c.rq) << ',' << c.stats.tp << ','
       << c.stats.fp << ',' << c.stats.fn << '\n';
  }
  os << "all,PQ,," << opt_str(r.pq_all) << ',' << opt_str(r.sq_all) << ','
     << opt_str(r.rq_all) << ",,,\n";
  os << "stuff,PQ Stuff,stuff," << opt_str(r.pq_stuff) << ',' << opt_str(r.sq_stuff) << ','
     << opt_str(r.rq_stuff) << ",,,\n";
  os << "things,PQ Things,thing," << opt_str(r.pq_things) << ',' << opt_str(r.sq_things) << ','
     << opt_str(r.rq_things) << ",,,\n";
  return os.str();
}

}  // namespace prf
