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

#ifndef PRF_PANOPTIC_HPP_
#define PRF_PANOPTIC_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace prf {

// Encoded pixel id = class_id * 1000 + instance_id; 65535 marks void.
inline constexpr std::uint16_t kVoidId = 65535;
inline constexpr int kInstanceDivisor = 1000;
inline constexpr int kMaxClassId = 65;

enum class ClassKind { kStuff, kThing };

struct ClassInfo {
  int id = 0;
  std::string name;
  ClassKind kind = ClassKind::kStuff;
};

class ClassTable {
 public:
  ClassTable() = default;

  // street/sidewalk (stuff) and person/car (things), Cityscapes train ids.
  static ClassTable wildpps();
  // {"<id>": {"name": ..., "kind": "stuff"|"thing"}}
  static ClassTable from_json(const nlohmann::json& j);
  static ClassTable load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  void add(ClassInfo info);
  const ClassInfo* find(int id) const;
  const std::map<int, ClassInfo>& classes() const { return classes_; }

 private:
  std::map<int, ClassInfo> classes_;
};

namespace wildpps {
inline constexpr int kStreet = 0;
inline constexpr int kSidewalk = 1;
inline constexpr int kPerson = 11;
inline constexpr int kCar = 13;
}  // namespace wildpps

struct PanopticMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint16_t> ids;

  PanopticMap() = default;
  PanopticMap(int h, int w, std::uint16_t fill = kVoidId)
      : height(h), width(w), ids(std::size_t(h) * w, fill) {}

  static std::uint16_t encode(int class_id, int instance_id);
  static int class_of(std::uint16_t id) { return id / kInstanceDivisor; }
  static int instance_of(std::uint16_t id) { return id % kInstanceDivisor; }

  std::uint16_t& at(int r, int c) { return ids[std::size_t(r) * width + c]; }
  std::uint16_t at(int r, int c) const { return ids[std::size_t(r) * width + c]; }

  // Throws DataError for unknown classes or stuff/thing instance rules.
  void validate(const ClassTable& table) const;

  bool operator==(const PanopticMap&) const = default;
};

// Binary P5, maxval 65535, big-endian samples.
void write_pgm(const std::filesystem::path& path, const PanopticMap& map);
PanopticMap read_pgm(const std::filesystem::path& path);

struct SegmentMatch {
  std::uint16_t pred_id = 0;
  std::uint16_t gt_id = 0;
  std::int64_t intersection = 0;
  std::int64_t union_area = 0;
  double iou = 0.0;
};

struct SegmentArea {
  std::uint16_t id = 0;
  std::int64_t area = 0;
};

struct MatchResult {
  std::vector<SegmentMatch> matches;
  std::vector<SegmentArea> unmatched_pred;  // false positives
  std::vector<SegmentArea> unmatched_gt;    // false negatives
  // Unmatched predictions lying mostly on ground-truth void; not counted.
  std::vector<SegmentArea> discarded_pred;
};

// Joint-histogram matching: same-class pairs with IoU > 0.5, unions exclude
// prediction pixels that fall on ground-truth void.
MatchResult match_segments(const PanopticMap& pred, const PanopticMap& gt,
                           const ClassTable& table);

struct ClassStats {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double iou_sum = 0.0;

  ClassStats& operator+=(const ClassStats& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    iou_sum += o.iou_sum;
    return *this;
  }
};

struct ClassPQ {
  int class_id = 0;
  std::string name;
  ClassKind kind = ClassKind::kStuff;
  ClassStats stats;
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
};

struct PQReport {
  std::vector<ClassPQ> classes;  // evaluated classes, ascending id
  std::vector<int> excluded_classes;
  std::optional<double> pq_all, pq_stuff, pq_things;
  std::optional<double> sq_all, sq_stuff, sq_things;
  std::optional<double> rq_all, rq_stuff, rq_things;
  std::int64_t images = 0;
};

// Per-class PQ from summed statistics, then unweighted class means.
// Classes with no TP/FP/FN are excluded from every mean.
PQReport report_from_stats(const std::map<int, ClassStats>& stats, const ClassTable& table,
                           std::int64_t images = 1);

// Fills the aggregate fields from report.classes.
void aggregate(PQReport& report);

std::map<int, ClassStats> class_stats(const MatchResult& m);

PQReport compute_pq(const MatchResult& m, const ClassTable& table);

// Statistics summed over all pairs before the per-class ratios are formed.
PQReport evaluate_pairs(std::span<const PanopticMap> preds, std::span<const PanopticMap> gts,
                        const ClassTable& table, int threads = 1);

struct MapPairs {
  std::vector<PanopticMap> preds;
  std::vector<PanopticMap> gts;
};

// Reads every *.pgm of gt_dir with its same-named counterpart in pred_dir,
// in filename order. Throws DataError naming any file without a counterpart.
MapPairs load_map_pairs(const std::filesystem::path& pred_dir,
                        const std::filesystem::path& gt_dir);

// Pairs every *.pgm of gt_dir with the same filename in pred_dir. Throws
// DataError naming any file without a counterpart.
PQReport evaluate_dataset(const std::filesystem::path& pred_dir,
                          const std::filesystem::path& gt_dir, const ClassTable& table,
                          int threads = 1);

std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                              const std::string& extension);

nlohmann::json report_to_json(const PQReport& r);
std::string report_to_csv(const PQReport& r);

}  // namespace prf

#endif  // PRF_PANOPTIC_HPP_
