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

#include "prf/prf.h"

#include <cstring>
#include <map>
#include <string>

#include "prf/panoptic.hpp"
#include "prf/pipeline.hpp"
#include "prf/pretrain.hpp"

struct prf_panoptic_map {
  prf::PanopticMap map;
};

struct prf_pq_evaluator {
  prf::ClassTable table;
  std::map<int, prf::ClassStats> stats;
  std::int64_t images = 0;
};

struct prf_trainer {
  prf::Trainer trainer;
};

namespace {

thread_local std::string g_last_error;

prf_status fail(prf_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
prf_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return PRF_OK;
  } catch (const prf::Error& e) {
    return fail(static_cast<prf_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(PRF_ERR_USAGE, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(PRF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PRF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PRF_ERR_INTERNAL, "unknown error");
  }
}

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse(const char* text, const char* what) {
  if (!text) throw prf::InvalidArgument(std::string(what) + " is NULL");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw prf::InvalidArgument(std::string("malformed ") + what + ": " + e.what());
  }
}

void require(const void* p, const char* what) {
  if (!p) throw prf::InvalidArgument(std::string(what) + " is NULL");
}

}  // namespace

extern "C" {

const char* prf_version(void) { return "1.0.0"; }

const char* prf_last_error(void) { return g_last_error.c_str(); }

void prf_string_free(char* s) { delete[] s; }

const char* prf_command_list(void) {
  static const std::string list = [] {
    std::string s;
    for (const auto& c : prf::pipeline::commands()) s += (s.empty() ? "" : ",") + c;
    return s;
  }();
  return list.c_str();
}

prf_status prf_default_config(const char* command, char** config_json) {
  return guarded([&] {
    require(command, "command");
    require(config_json, "output pointer");
    *config_json = dup(prf::pipeline::default_config(command).dump(2));
  });
}

prf_status prf_resolve_config(const char* command, const char* request_json, char** config_json) {
  return guarded([&] {
    require(command, "command");
    require(config_json, "output pointer");
    *config_json = nullptr;
    *config_json = dup(prf::pipeline::resolve_config(command, parse(request_json, "request")).dump(2));
  });
}

prf_status prf_run_command(const char* command, const char* request_json, char** summary_json) {
  if (summary_json) *summary_json = nullptr;
  bool failed = false;
  const auto st = guarded([&] {
    require(command, "command");
    const auto result = prf::pipeline::run(command, parse(request_json, "request"));
    if (summary_json) *summary_json = dup(result.summary.dump(2));
    failed = result.failed;
  });
  if (st == PRF_OK && failed) return fail(PRF_ERR_NUMERIC, "numerical check failed");
  return st;
}

prf_status prf_panoptic_map_create(int height, int width, const uint16_t* ids,
                                   prf_panoptic_map** out) {
  return guarded([&] {
    require(out, "output pointer");
    *out = nullptr;
    if (height <= 0 || width <= 0) throw prf::InvalidArgument("map dimensions must be positive");
    auto* m = new prf_panoptic_map{prf::PanopticMap(height, width)};
    if (ids) std::memcpy(m->map.ids.data(), ids, m->map.ids.size() * sizeof(uint16_t));
    *out = m;
  });
}

prf_status prf_panoptic_map_read(const char* path, prf_panoptic_map** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "output pointer");
    *out = nullptr;
    *out = new prf_panoptic_map{prf::read_pgm(path)};
  });
}

prf_status prf_panoptic_map_write(const prf_panoptic_map* map, const char* path) {
  return guarded([&] {
    require(map, "map");
    require(path, "path");
    prf::write_pgm(path, map->map);
  });
}

int prf_panoptic_map_height(const prf_panoptic_map* map) { return map ? map->map.height : 0; }
int prf_panoptic_map_width(const prf_panoptic_map* map) { return map ? map->map.width : 0; }
const uint16_t* prf_panoptic_map_data(const prf_panoptic_map* map) {
  return map ? map->map.ids.data() : nullptr;
}
void prf_panoptic_map_free(prf_panoptic_map* map) { delete map; }

prf_status prf_pq_evaluator_create(const char* class_table_json, prf_pq_evaluator** out) {
  return guarded([&] {
    require(out, "output pointer");
    *out = nullptr;
    auto table = class_table_json
                     ? prf::ClassTable::from_json(parse(class_table_json, "class table"))
                     : prf::ClassTable::wildpps();
    *out = new prf_pq_evaluator{std::move(table), {}, 0};
  });
}

prf_status prf_pq_evaluator_add(prf_pq_evaluator* ev, const prf_panoptic_map* pred,
                                const prf_panoptic_map* gt) {
  return guarded([&] {
    require(ev, "evaluator");
    require(pred, "prediction");
    require(gt, "ground truth");
    const auto m = prf::match_segments(pred->map, gt->map, ev->table);
    for (const auto& [cls, s] : prf::class_stats(m)) ev->stats[cls] += s;
    ++ev->images;
  });
}

prf_status prf_pq_evaluator_report(const prf_pq_evaluator* ev, char** report_json) {
  return guarded([&] {
    require(ev, "evaluator");
    require(report_json, "output pointer");
    const auto report = prf::report_from_stats(ev->stats, ev->table, ev->images);
    *report_json = dup(prf::report_to_json(report).dump(2));
  });
}

void prf_pq_evaluator_free(prf_pq_evaluator* ev) { delete ev; }

prf_status prf_trainer_create(const char* config_json, const char* data_dir, prf_trainer** out) {
  return guarded([&] {
    require(data_dir, "data directory");
    require(out, "output pointer");
    *out = nullptr;
    const auto cfg = prf::train_config_from_json(
        config_json ? parse(config_json, "config") : nlohmann::json::object());
    auto data = prf::load_dataset(data_dir);
    *out = new prf_trainer{prf::Trainer(cfg, std::move(data))};
  });
}

prf_status prf_trainer_load(const char* checkpoint_path, const char* data_dir, prf_trainer** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint path");
    require(data_dir, "data directory");
    require(out, "output pointer");
    *out = nullptr;
    *out = new prf_trainer{
        prf::Trainer::load_checkpoint(checkpoint_path, prf::load_dataset(data_dir))};
  });
}

prf_status prf_trainer_step(prf_trainer* t, int* more) {
  return guarded([&] {
    require(t, "trainer");
    const bool stepped = t->trainer.step();
    if (more) *more = stepped && !t->trainer.done();
  });
}

prf_status prf_trainer_save(const prf_trainer* t, const char* checkpoint_path) {
  return guarded([&] {
    require(t, "trainer");
    require(checkpoint_path, "checkpoint path");
    t->trainer.save_checkpoint(checkpoint_path);
  });
}

prf_status prf_trainer_trace_csv(const prf_trainer* t, char** csv) {
  return guarded([&] {
    require(t, "trainer");
    require(csv, "output pointer");
    *csv = dup(prf::trace_csv(t->trainer.trace()));
  });
}

int prf_trainer_steps_done(const prf_trainer* t) { return t ? t->trainer.steps_done() : 0; }

void prf_trainer_free(prf_trainer* t) { delete t; }

}  // extern "C"
