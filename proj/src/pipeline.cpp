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

#include "prf/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "prf/json_util.hpp"
#include "prf/panoptic.hpp"
#include "prf/panorama.hpp"
#include "prf/pretrain.hpp"
#include "prf/selfcheck.hpp"

namespace prf::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& commands() {
  static const std::vector<std::string> kCommands = {"gen-synth",  "pretrain",  "self-check",
                                                     "eval-pq",    "fov-sweep", "alpha-sweep"};
  return kCommands;
}

namespace {

json scene_defaults() {
  json scene = SyntheticSceneSpec{};
  scene.erase("seed");
  return scene;
}

const std::vector<double> kAlphaGrid = {0.25, 0.5, 1.0, 2.0, 3.0, 4.0};

}  // namespace

json default_config(const std::string& command) {
  if (command == "gen-synth") return {{"n", 8}, {"seed", 0}, {"scene", scene_defaults()}};
  if (command == "pretrain") return to_json(TrainConfig{});
  if (command == "self-check") return to_json(SelfCheckConfig{});
  if (command == "eval-pq") return {{"classes", ClassTable::wildpps().to_json()}};
  if (command == "fov-sweep") {
    return {{"fovs", FovSweepConfig{}.fovs},
            {"center_col", -1},
            {"classes", ClassTable::wildpps().to_json()}};
  }
  if (command == "alpha-sweep") {
    TrainConfig train;
    train.epochs = 1000;
    return {{"alphas", kAlphaGrid},
            {"seed", 0},
            {"steps", 0},
            {"synthetic_images", 8},
            {"train", to_json(train)}};
  }
  throw InvalidArgument("unknown command '" + command + "'");
}

void write_verified(const std::string& path, const std::string& content) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << content;
    if (!os) throw DataError("write failed: " + path);
  }
  std::ifstream is(path, std::ios::binary);
  const std::string back((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (back != content) throw DataError("read-back mismatch: " + path);
}

namespace {

struct Request {
  json config;
  // Config before defaults were applied.
  json user;
  fs::path out;
  int threads = 1;
  json inputs;
};

// Config file and flag overrides are merged first so that an optimizer kind
// given on the command line still selects its preset.
json user_config(const json& request) {
  json cfg = request.value("config", json::object());
  if (!cfg.is_object()) throw InvalidArgument("config must be a JSON object");
  const json overrides = request.value("overrides", json::object());
  if (!overrides.is_object()) throw InvalidArgument("overrides must be a JSON object");
  cfg.merge_patch(overrides);
  return cfg;
}

Request parse_request(const std::string& command, const json& request, bool needs_out = true) {
  if (!request.is_object()) throw InvalidArgument("request must be a JSON object");
  for (const auto& [k, v] : request.items()) {
    if (k != "config" && k != "overrides" && k != "out" && k != "threads" && k != "inputs") {
      throw InvalidArgument("unknown request key '" + k + "'");
    }
  }
  Request r;
  r.user = user_config(request);
  r.config = command == "pretrain" ? r.user : strict_merge(default_config(command), r.user);
  r.out = request.value("out", std::string("."));
  r.threads = request.value("threads", 1);
  if (r.threads < 1) throw InvalidArgument("threads must be >= 1");
  r.inputs = request.value("inputs", json::object());
  if (needs_out) {
    std::error_code ec;
    fs::create_directories(r.out, ec);
    if (ec || !fs::is_directory(r.out)) {
      throw DataError("cannot create output directory: " + r.out.string());
    }
  }
  return r;
}

fs::path required_input(const Request& r, const std::string& key) {
  if (!r.inputs.contains(key) || !r.inputs.at(key).is_string() ||
      r.inputs.at(key).get<std::string>().empty()) {
    throw InvalidArgument("missing required input '" + key + "'");
  }
  return r.inputs.at(key).get<std::string>();
}

std::string index_name(int k) {
  std::ostringstream os;
  os.width(3);
  os.fill('0');
  os << k;
  return os.str();
}

std::uint64_t scene_seed(std::uint64_t seed, int k) {
  return seed * 1000003ull + static_cast<std::uint64_t>(k);
}

Result gen_synth(const Request& r) {
  const int n = r.config.at("n").get<int>();
  if (n < 0) throw InvalidArgument("n must be >= 0");
  const auto seed = r.config.at("seed").get<std::uint64_t>();
  SyntheticSceneSpec spec;
  from_json(r.config.at("scene"), spec);

  json files = json::array();
  for (int k = 0; k < n; ++k) {
    spec.seed = scene_seed(seed, k);
    const auto pano = generate_synthetic(spec);
    const auto rgb_path = r.out / (index_name(k) + ".ppm");
    const auto lab_path = r.out / (index_name(k) + ".pgm");
    write_ppm(rgb_path, pano.rgb);
    write_pgm(lab_path, pano.labels);
    if (read_pgm(lab_path) != pano.labels) throw DataError("read-back mismatch: " + lab_path.string());
    const auto back = read_ppm(rgb_path);
    if (back.height != pano.rgb.height || back.width != pano.rgb.width) {
      throw DataError("read-back mismatch: " + rgb_path.string());
    }
    files.push_back({{"rgb", rgb_path.filename().string()},
                     {"labels", lab_path.filename().string()},
                     {"seed", spec.seed}});
  }
  json meta = {{"format", "prf-synthetic"},
               {"count", n},
               {"seed", seed},
               {"scene", r.config.at("scene")},
               {"classes", ClassTable::wildpps().to_json()},
               {"files", files}};
  write_verified((r.out / "meta.json").string(), meta.dump(2) + "\n");
  return {{{"command", "gen-synth"}, {"count", n}, {"out", r.out.string()}}, false};
}

Result pretrain(const Request& r) {
  const auto cfg = train_config_from_json(r.config);
  auto data = load_dataset(required_input(r, "data"));
  if (data.empty()) throw DataError("no .ppm images in " + required_input(r, "data").string());
  Trainer trainer(cfg, std::move(data));
  trainer.run();
  const auto ckpt = r.out / "checkpoint.prf";
  trainer.save_checkpoint(ckpt);
  const auto header = Trainer::read_checkpoint_header(ckpt);
  if (header.at("config") != to_json(cfg)) throw DataError("read-back mismatch: " + ckpt.string());
  write_verified((r.out / "loss.csv").string(), trace_csv(trainer.trace()));

  const auto& trace = trainer.trace();
  json summary = {{"command", "pretrain"},
                  {"optimizer", to_string(cfg.optimizer.kind)},
                  {"batch_scale", cfg.batch_scale},
                  {"epochs", trainer.epoch()},
                  {"steps", trainer.steps_done()},
                  {"resampled_pairs", trainer.resampled_pairs()},
                  {"dropped_images", trainer.dropped_images()},
                  {"checkpoint", ckpt.string()}};
  if (!trace.empty()) {
    summary["first_l_total"] = trace.front().l_total;
    summary["last_l_total"] = trace.back().l_total;
  }
  if (trainer.warm_start_loss()) summary["warm_start_loss"] = *trainer.warm_start_loss();
  return {summary, false};
}

Result self_check(const Request& r) {
  const auto cfg = self_check_config_from_json(r.config);
  const auto report = run_self_check(cfg);
  const json j = to_json(report);
  write_verified((r.out / "selfcheck.json").string(), j.dump(2) + "\n");
  return {j, !report.pass()};
}

ClassTable table_from(const Request& r) {
  if (r.inputs.contains("classes")) {
    return ClassTable::load(r.inputs.at("classes").get<std::string>());
  }
  return ClassTable::from_json(r.config.at("classes"));
}

Result eval_pq(const Request& r) {
  const auto table = table_from(r);
  const auto report =
      evaluate_dataset(required_input(r, "pred"), required_input(r, "gt"), table, r.threads);
  const json j = report_to_json(report);
  write_verified((r.out / "report.json").string(), j.dump(2) + "\n");
  write_verified((r.out / "report.csv").string(), report_to_csv(report));
  json summary = {{"command", "eval-pq"}, {"images", report.images}};
  summary["pq_all"] = report.pq_all ? json(*report.pq_all) : json(nullptr);
  summary["pq_stuff"] = report.pq_stuff ? json(*report.pq_stuff) : json(nullptr);
  summary["pq_things"] = report.pq_things ? json(*report.pq_things) : json(nullptr);
  return {summary, false};
}

Result fov_sweep_cmd(const Request& r) {
  const auto table = table_from(r);
  FovSweepConfig cfg;
  cfg.fovs = r.config.at("fovs").get<std::vector<double>>();
  if (cfg.fovs.empty()) throw InvalidArgument("fovs must not be empty");
  const int center = r.config.at("center_col").get<int>();
  if (center >= 0) cfg.center_col = center;
  const auto pairs = load_map_pairs(required_input(r, "pred"), required_input(r, "gt"));
  if (pairs.gts.empty()) throw DataError("no .pgm maps in " + required_input(r, "gt").string());
  const auto rows = fov_sweep(pairs.preds, pairs.gts, table, cfg, r.threads);
  write_verified((r.out / "fov_sweep.csv").string(), fov_sweep_csv(rows));
  json widths = json::array();
  for (const auto& row : rows) widths.push_back(row.crop_width);
  return {{{"command", "fov-sweep"}, {"rows", rows.size()}, {"crop_widths", widths}}, false};
}

struct EvalPair {
  RgbImage a, b;
  CorrespondenceSet corr;
};

// The sweep's seed is authoritative for the trainer as well.
TrainConfig alpha_train_config(const Request& r) {
  json train_json = r.user.value("train", json::object());
  if (!train_json.contains("epochs")) train_json["epochs"] = r.config.at("train").at("epochs");
  train_json["seed"] = r.config.at("seed");
  return train_config_from_json(train_json);
}

Result alpha_sweep(const Request& r) {
  const auto alphas = r.config.at("alphas").get<std::vector<double>>();
  if (alphas.empty()) throw InvalidArgument("alphas must not be empty");
  const auto seed = r.config.at("seed").get<std::uint64_t>();
  const int steps = r.config.at("steps").get<int>();
  if (steps < 0) throw InvalidArgument("steps must be >= 0");
  auto base = alpha_train_config(r);

  std::vector<TrainImage> data;
  if (r.inputs.contains("data")) {
    data = load_dataset(required_input(r, "data"));
  } else {
    const int n = r.config.at("synthetic_images").get<int>();
    for (int k = 0; k < n; ++k) {
      SyntheticSceneSpec spec;
      spec.seed = scene_seed(seed, k);
      auto p = generate_synthetic(spec);
      data.push_back({std::move(p.rgb), std::move(p.labels)});
    }
  }
  if (data.empty()) throw DataError("alpha sweep needs at least one image");

  // One fixed view pair per image, shared by every alpha.
  Rng eval_rng(seed ^ 0xA5A5A5A5DEADBEEFull);
  ViewSamplerConfig sampler = base.sampler;
  sampler.out_height = base.height;
  sampler.out_width = base.width;
  sampler.feature_stride = base.arch.total_stride();
  const GridShape grid{base.height / sampler.feature_stride, base.width / sampler.feature_stride};
  std::vector<EvalPair> pairs;
  for (const auto& item : data) {
    for (int attempt = 0; attempt <= base.max_resample; ++attempt) {
      auto [va, vb] = sample_view_pair(item.rgb, eval_rng, sampler);
      auto corr = build_correspondence(va.spec, vb.spec, grid, grid, base.threshold_ratio);
      if (corr.empty()) continue;
      pairs.push_back({std::move(va.pixels), std::move(vb.pixels), std::move(corr)});
      break;
    }
  }
  if (pairs.empty()) throw DataError("no evaluation view pair with positive cells");

  std::ostringstream csv;
  csv << "alpha,l_spatial,l_glopro,l_total\n";
  json rows = json::array();
  for (double alpha : alphas) {
    TrainConfig cfg = base;
    cfg.alpha = alpha;
    cfg.max_steps = steps;
    Trainer trainer(cfg, data);
    if (steps > 0) trainer.run();
    auto& pair = trainer.encoders();
    double ls = 0.0, lg = 0.0, lt = 0.0;
    for (const auto& p : pairs) {
      const auto qa = pair.online.forward_const(std::span<const RgbImage>(&p.a, 1), Mode::kEval);
      const auto qb = pair.online.forward_const(std::span<const RgbImage>(&p.b, 1), Mode::kEval);
      const auto ka = pair.momentum.forward_const(std::span<const RgbImage>(&p.a, 1), Mode::kEval);
      const auto kb = pair.momentum.forward_const(std::span<const RgbImage>(&p.b, 1), Mode::kEval);
      const auto rep = pretrain_loss(qa[0], qb[0], ka[0], kb[0], p.corr, trainer.smoothing(),
                                     LossConfig{cfg.tau, alpha});
      ls += rep.l_spatial;
      lg += rep.l_glopro;
      lt += rep.l_total;
    }
    const double n = static_cast<double>(pairs.size());
    csv << format_double(alpha) << ',' << format_double(ls / n) << ',' << format_double(lg / n)
        << ',' << format_double(lt / n) << '\n';
    rows.push_back({{"alpha", alpha}, {"l_spatial", ls / n}, {"l_glopro", lg / n}, {"l_total", lt / n}});
  }
  write_verified((r.out / "alpha_sweep.csv").string(), csv.str());
  return {{{"command", "alpha-sweep"}, {"steps", steps}, {"eval_pairs", pairs.size()}, {"rows", rows}},
          false};
}

}  // namespace

json resolve_config(const std::string& command, const json& request) {
  try {
    if (std::find(commands().begin(), commands().end(), command) == commands().end()) {
      throw InvalidArgument("unknown command '" + command + "'");
    }
    const auto r = parse_request(command, request, false);
    if (command == "pretrain") return to_json(train_config_from_json(r.config));
    if (command == "self-check") return to_json(self_check_config_from_json(r.config));
    json out = r.config;
    if (command == "alpha-sweep") out["train"] = to_json(alpha_train_config(r));
    return out;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("invalid configuration: ") + e.what());
  }
}

Result run(const std::string& command, const json& request) {
  try {
    if (command == "gen-synth") return gen_synth(parse_request(command, request));
    if (command == "pretrain") return pretrain(parse_request(command, request));
    if (command == "self-check") return self_check(parse_request(command, request));
    if (command == "eval-pq") return eval_pq(parse_request(command, request));
    if (command == "fov-sweep") return fov_sweep_cmd(parse_request(command, request));
    if (command == "alpha-sweep") return alpha_sweep(parse_request(command, request));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("invalid configuration: ") + e.what());
  }
  throw InvalidArgument("unknown command '" + command + "'");
}

}  // namespace prf::pipeline
