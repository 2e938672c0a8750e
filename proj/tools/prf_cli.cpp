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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "prf/prf.h"

namespace {

using nlohmann::json;

constexpr int kUsage = PRF_ERR_USAGE;

struct Common {
  std::string config;
  std::string out = ".";
  int threads = 1;
  int verbosity = 1;
  std::uint64_t seed = 0;
  bool print_config = false;
};

struct Args {
  Common common;
  // gen-synth
  int n = 8;
  // pretrain / alpha-sweep
  std::string data;
  std::string opt;
  int epochs = 0;
  int batch_scale = 0;
  int max_steps = -1;
  double alpha = 0.0;
  double tau = 0.0;
  bool warm_start = false;
  // self-check
  int seeds = 0;
  // eval-pq / fov-sweep
  std::string pred, gt, classes;
  std::vector<double> fovs;
  int center_col = -1;
  // alpha-sweep
  std::vector<double> alphas;
  int steps = -1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file; unknown keys are rejected")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads for evaluation")
      ->capture_default_str()
      ->check(CLI::Range(1, 256));
  sub->add_option("--verbosity", c.verbosity, "0 quiet, 1 summary, 2 detail")
      ->capture_default_str()
      ->check(CLI::Range(0, 2));
  sub->add_flag("--print-config", c.print_config,
                "Print the effective configuration and exit without running");
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw CLI::ValidationError("--config", std::string("malformed JSON: ") + e.what());
  }
}

std::string take(char* s) {
  std::string out = s ? s : "";
  prf_string_free(s);
  return out;
}

int run(const std::string& command, const Args& a, const json& overrides, const json& inputs) {
  const auto& c = a.common;
  const json config = read_config(c.config);
  const json request = {{"config", config},
                        {"overrides", overrides},
                        {"out", c.out},
                        {"threads", c.threads},
                        {"inputs", inputs}};
  if (c.print_config) {
    char* text = nullptr;
    const auto st = prf_resolve_config(command.c_str(), request.dump().c_str(), &text);
    if (st != PRF_OK) {
      std::cerr << "prf " << command << ": " << prf_last_error() << "\n";
      return st;
    }
    std::cout << take(text) << "\n";
    return 0;
  }
  for (const auto& [key, value] : inputs.items()) {
    if (value.get<std::string>().empty()) {
      std::cerr << "prf " << command << ": --" << key << " is required\n";
      return kUsage;
    }
  }
  char* summary = nullptr;
  const auto st = prf_run_command(command.c_str(), request.dump().c_str(), &summary);
  const std::string text = take(summary);
  if (st != PRF_OK) {
    std::cerr << "prf " << command << ": " << prf_last_error() << "\n";
  }
  if (!text.empty() && c.verbosity >= 1) std::cout << text << "\n";
  return st;
}

std::string all_options_footer(const CLI::App& app) {
  std::ostringstream os;
  os << "\nSubcommand options:\n";
  for (const auto* sub : app.get_subcommands({})) {
    os << "  " << sub->get_name() << ":";
    for (const auto* opt : sub->get_options()) {
      const auto names = opt->get_name(false, true);
      if (names.rfind("--", 0) == 0 && names != "--help") os << " " << names;
    }
    os << "\n";
  }
  os << "\nExit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prf: dense contrastive pretraining, panoptic quality and FoV tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", prf_version());
  Args a;

  auto* gen = app.add_subcommand("gen-synth", "Write synthetic panoramas (NNN.ppm/NNN.pgm) and meta.json");
  add_common(gen, a.common);
  gen->add_option("--n", a.n, "Number of panoramas")->check(CLI::NonNegativeNumber);

  auto* pre = app.add_subcommand("pretrain", "Pretrain the encoder; writes checkpoint.prf and loss.csv");
  add_common(pre, a.common);
  pre->add_option("--data", a.data, "Directory of NNN.ppm images (required)");
  pre->add_option("--opt", a.opt, "Optimizer preset: sgd or lars");
  pre->add_option("--epochs", a.epochs, "Training epochs")->check(CLI::PositiveNumber);
  pre->add_option("--batch-scale", a.batch_scale, "Batch multiplier (2 = LARS large)")
      ->check(CLI::PositiveNumber);
  pre->add_option("--max-steps", a.max_steps, "Stop after this many steps (0 = no cap)")
      ->check(CLI::NonNegativeNumber);
  pre->add_option("--alpha", a.alpha, "Weight of the propagation loss");
  pre->add_option("--tau", a.tau, "Contrastive temperature");
  pre->add_flag("--warm-start", a.warm_start, "Run one supervised epoch on the label maps first");

  auto* chk = app.add_subcommand("self-check", "Finite-difference gradient checks; writes selfcheck.json");
  chk->alias("gradcheck");
  add_common(chk, a.common);
  chk->add_option("--seeds", a.seeds, "Number of random problems")->check(CLI::PositiveNumber);

  auto* pq = app.add_subcommand("eval-pq", "Panoptic Quality; writes report.json and report.csv");
  add_common(pq, a.common);
  pq->add_option("--pred", a.pred, "Directory of predicted NNN.pgm maps (required)");
  pq->add_option("--gt", a.gt, "Directory of ground-truth NNN.pgm maps (required)");
  pq->add_option("--classes", a.classes, "Class table JSON")->check(CLI::ExistingFile);

  auto* fov = app.add_subcommand("fov-sweep", "PQ per field of view; writes fov_sweep.csv");
  add_common(fov, a.common);
  fov->add_option("--pred", a.pred, "Directory of predicted panorama maps (required)");
  fov->add_option("--gt", a.gt, "Directory of ground-truth panorama maps (required)");
  fov->add_option("--classes", a.classes, "Class table JSON")->check(CLI::ExistingFile);
  fov->add_option("--fovs", a.fovs, "Field-of-view grid in degrees, comma-separated")->delimiter(',');
  fov->add_option("--center-col", a.center_col, "Crop centre column (default width/2)");

  auto* alp = app.add_subcommand("alpha-sweep", "Loss terms per alpha; writes alpha_sweep.csv");
  add_common(alp, a.common);
  alp->add_option("--data", a.data, "Directory of NNN.ppm images (default: synthetic)");
  alp->add_option("--alphas", a.alphas, "Alpha grid, comma-separated")->delimiter(',');
  alp->add_option("--steps", a.steps, "Training steps per alpha before evaluation")
      ->check(CLI::NonNegativeNumber);
  alp->add_option("--opt", a.opt, "Optimizer preset: sgd or lars");
  alp->add_option("--tau", a.tau, "Contrastive temperature");

  app.footer([&app] { return all_options_footer(app); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const auto has = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  try {
    json o = json::object();
    json in = json::object();
    if (gen->parsed()) {
      if (has(gen, "--seed")) o["seed"] = a.common.seed;
      if (has(gen, "--n")) o["n"] = a.n;
      return run("gen-synth", a, o, in);
    }
    if (pre->parsed()) {
      if (has(pre, "--seed")) o["seed"] = a.common.seed;
      if (has(pre, "--opt")) o["optimizer"] = {{"kind", a.opt}};
      if (has(pre, "--epochs")) o["epochs"] = a.epochs;
      if (has(pre, "--batch-scale")) o["batch_scale"] = a.batch_scale;
      if (has(pre, "--max-steps")) o["max_steps"] = a.max_steps;
      if (has(pre, "--alpha")) o["alpha"] = a.alpha;
      if (has(pre, "--tau")) o["tau"] = a.tau;
      if (a.warm_start) o["warm_start"] = true;
      in["data"] = a.data;
      return run("pretrain", a, o, in);
    }
    if (chk->parsed()) {
      if (has(chk, "--seed")) o["seed"] = a.common.seed;
      if (has(chk, "--seeds")) o["seeds"] = a.seeds;
      return run("self-check", a, o, in);
    }
    if (pq->parsed()) {
      in["pred"] = a.pred;
      in["gt"] = a.gt;
      if (!a.classes.empty()) in["classes"] = a.classes;
      return run("eval-pq", a, o, in);
    }
    if (fov->parsed()) {
      if (has(fov, "--fovs")) o["fovs"] = a.fovs;
      if (has(fov, "--center-col")) o["center_col"] = a.center_col;
      in["pred"] = a.pred;
      in["gt"] = a.gt;
      if (!a.classes.empty()) in["classes"] = a.classes;
      return run("fov-sweep", a, o, in);
    }
    if (alp->parsed()) {
      if (has(alp, "--seed")) o["seed"] = a.common.seed;
      if (has(alp, "--alphas")) o["alphas"] = a.alphas;
      if (has(alp, "--steps")) o["steps"] = a.steps;
      if (has(alp, "--opt")) o["train"]["optimizer"] = {{"kind", a.opt}};
      if (has(alp, "--tau")) o["train"]["tau"] = a.tau;
      if (!a.data.empty()) in["data"] = a.data;
      return run("alpha-sweep", a, o, in);
    }
  } catch (const CLI::Error& e) {
    std::cerr << "prf: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
