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

#include "prf/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "prf/json_util.hpp"

namespace prf {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0 || batch_scale <= 0 || height <= 0 || width <= 0) {
    throw InvalidArgument("epochs, batch size, batch scale and resolution must be positive");
  }
  if (max_steps < 0 || max_resample < 0) throw InvalidArgument("step limits must be >= 0");
  if (!(threshold_ratio > 0.0)) throw InvalidArgument("threshold_ratio must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("beta must lie in [0, 1]");
  if (!(warm_start_lr >= 0.0)) throw InvalidArgument("warm_start_lr must be >= 0");
  LossConfig{tau, alpha}.validate();
  optimizer.validate();
  arch.validate();
  const int s = arch.total_stride();
  if (height % s != 0 || width % s != 0) {
    throw ShapeError("training resolution " + std::to_string(height) + "x" +
                     std::to_string(width) + " is not divisible by the stride " +
                     std::to_string(s));
  }
}

namespace {

nlohmann::json sampler_json(const ViewSamplerConfig& s) {
  return {{"min_scale", s.min_scale},           {"max_scale", s.max_scale},
          {"min_aspect", s.min_aspect},         {"max_aspect", s.max_aspect},
          {"jitter_prob", s.jitter_prob},       {"brightness", s.brightness},
          {"contrast", s.contrast},             {"saturation", s.saturation},
          {"hue", s.hue},                       {"grayscale_prob", s.grayscale_prob},
          {"solarize_prob", s.solarize_prob},   {"solarize_threshold", s.solarize_threshold},
          {"flip_prob", s.flip_prob}};
}

ViewSamplerConfig sampler_from_json(const nlohmann::json& j) {
  ViewSamplerConfig s;
  j.at("min_scale").get_to(s.min_scale);
  j.at("max_scale").get_to(s.max_scale);
  j.at("min_aspect").get_to(s.min_aspect);
  j.at("max_aspect").get_to(s.max_aspect);
  j.at("jitter_prob").get_to(s.jitter_prob);
  j.at("brightness").get_to(s.brightness);
  j.at("contrast").get_to(s.contrast);
  j.at("saturation").get_to(s.saturation);
  j.at("hue").get_to(s.hue);
  j.at("grayscale_prob").get_to(s.grayscale_prob);
  j.at("solarize_prob").get_to(s.solarize_prob);
  j.at("solarize_threshold").get_to(s.solarize_threshold);
  j.at("flip_prob").get_to(s.flip_prob);
  return s;
}

}  // namespace

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json arch, opt;
  prf::to_json(arch, c.arch);
  prf::to_json(opt, c.optimizer);
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"batch_scale", c.batch_scale},
          {"height", c.height},
          {"width", c.width},
          {"seed", c.seed},
          {"alpha", c.alpha},
          {"tau", c.tau},
          {"threshold_ratio", c.threshold_ratio},
          {"beta", c.beta},
          {"max_steps", c.max_steps},
          {"max_resample", c.max_resample},
          {"warm_start", c.warm_start},
          {"warm_start_lr", c.warm_start_lr},
          {"optimizer", opt},
          {"arch", arch},
          {"sampler", sampler_json(c.sampler)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig defaults;
  // An optimizer kind switches the whole optimizer block to that preset.
  if (j.is_object() && j.contains("optimizer") && j.at("optimizer").is_object() &&
      j.at("optimizer").contains("kind")) {
    const auto kind = optimizer_kind_from_string(j.at("optimizer").at("kind").get<std::string>());
    defaults.optimizer = kind == OptimizerKind::kSgd ? OptimizerConfig::sgd() : OptimizerConfig::lars();
  }
  const auto m = strict_merge(to_json(defaults), j);
  TrainConfig c;
  try {
    m.at("epochs").get_to(c.epochs);
    m.at("batch_size").get_to(c.batch_size);
    m.at("batch_scale").get_to(c.batch_scale);
    m.at("height").get_to(c.height);
    m.at("width").get_to(c.width);
    c.seed = m.at("seed").get<std::uint64_t>();
    m.at("alpha").get_to(c.alpha);
    m.at("tau").get_to(c.tau);
    m.at("threshold_ratio").get_to(c.threshold_ratio);
    m.at("beta").get_to(c.beta);
    m.at("max_steps").get_to(c.max_steps);
    m.at("max_resample").get_to(c.max_resample);
    m.at("warm_start").get_to(c.warm_start);
    m.at("warm_start_lr").get_to(c.warm_start_lr);
    prf::from_json(m.at("optimizer"), c.optimizer);
    prf::from_json(m.at("arch"), c.arch);
    c.sampler = sampler_from_json(m.at("sampler"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("invalid training config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string trace_csv(std::span<const TraceRow> rows) {
  std::ostringstream os;
  os << "step,epoch,lr,l_spatial,l_glopro,l_total\n";
  for (const auto& r : rows) {
    os << r.step << ',' << r.epoch << ',' << format_double(r.lr) << ','
       << format_double(r.l_spatial) << ',' << format_double(r.l_glopro) << ','
       << format_double(r.l_total) << '\n';
  }
  return os.str();
}

namespace {

constexpr std::uint64_t kDataStream = 0x9E3779B97F4A7C15ull;

ViewSamplerConfig sampler_for(const TrainConfig& cfg) {
  ViewSamplerConfig s = cfg.sampler;
  s.out_height = cfg.height;
  s.out_width = cfg.width;
  s.feature_stride = cfg.arch.total_stride();
  return s;
}

void add_into(ParameterSet& acc, const ParameterSet& g) {
  for (std::size_t t = 0; t < acc.tensors.size(); ++t) {
    auto& a = acc.tensors[t].values;
    const auto& b = g.tensors[t].values;
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  }
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, std::vector<TrainImage> dataset)
    : cfg_((cfg.validate(), std::move(cfg))),
      dataset_(std::move(dataset)),
      init_rng_(cfg_.seed),
      pair_(cfg_.arch, init_rng_, cfg_.beta),
      smoothing_(SmoothingTransform::identity(cfg_.arch.head_out)),
      optimizer_(cfg_.optimizer),
      data_rng_(cfg_.seed ^ kDataStream) {
  if (dataset_.empty()) throw DataError("training dataset is empty");
  const int min_side = 2 * cfg_.arch.total_stride();
  for (std::size_t k = 0; k < dataset_.size(); ++k) {
    const auto& img = dataset_[k].rgb;
    if (img.height < min_side || img.width < min_side) {
      throw DataError("training image " + std::to_string(k) + " is smaller than " +
                      std::to_string(min_side) + " pixels");
    }
  }
  if (cfg_.warm_start) supervised_warm_start();
}

int Trainer::steps_per_epoch() const {
  const int n = static_cast<int>(dataset_.size());
  return (n + cfg_.effective_batch() - 1) / cfg_.effective_batch();
}

bool Trainer::done() const {
  return epoch_ >= cfg_.epochs || (cfg_.max_steps > 0 && global_step_ >= cfg_.max_steps);
}

void Trainer::begin_epoch() {
  const int n = static_cast<int>(dataset_.size());
  order_.resize(n);
  for (int k = 0; k < n; ++k) order_[k] = k;
  for (int k = n - 1; k > 0; --k) {
    std::swap(order_[k], order_[data_rng_.uniform_int(0, k)]);
  }
  cursor_ = 0;
}

void Trainer::run() {
  while (step()) {
  }
}

bool Trainer::step() {
  if (done()) return false;
  if (order_.empty()) begin_epoch();

  const auto sampler = sampler_for(cfg_);
  const GridShape grid = pair_.online.grid_shape(cfg_.height, cfg_.width);
  const int n = static_cast<int>(order_.size());
  const int end = std::min(n, cursor_ + cfg_.effective_batch());

  std::vector<RgbImage> views_a, views_b;
  std::vector<CorrespondenceSet> corrs;
  for (int k = cursor_; k < end; ++k) {
    const auto& img = dataset_[order_[k]].rgb;
    bool ok = false;
    for (int attempt = 0; attempt <= cfg_.max_resample; ++attempt) {
      auto [va, vb] = sample_view_pair(img, data_rng_, sampler);
      auto corr = build_correspondence(va.spec, vb.spec, grid, grid, cfg_.threshold_ratio);
      if (corr.empty()) {
        ++resampled_;
        continue;
      }
      views_a.push_back(std::move(va.pixels));
      views_b.push_back(std::move(vb.pixels));
      corrs.push_back(std::move(corr));
      ok = true;
      break;
    }
    if (!ok) ++dropped_;
  }

  const double lr = cfg_.optimizer.schedule.learning_rate(cfg_.optimizer.base_lr, epoch_,
                                                          global_step_);
  TraceRow row{global_step_, epoch_, lr, 0.0, 0.0, 0.0};
  if (!views_a.empty()) {
    ForwardCache cache_a, cache_b;
    auto qa = pair_.online.forward(views_a, Mode::kTrain, &cache_a);
    auto qb = pair_.online.forward(views_b, Mode::kTrain, &cache_b);
    auto ka = pair_.momentum.forward(views_a, Mode::kTrain);
    auto kb = pair_.momentum.forward(views_b, Mode::kTrain);

    const LossConfig loss_cfg{cfg_.tau, cfg_.alpha};
    const std::size_t nb = views_a.size();
    const double inv_b = 1.0 / static_cast<double>(nb);
    std::vector<FeatureGrid> grad_a, grad_b;
    std::vector<double> grad_g(smoothing_.matrix.size(), 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
      qa[b].provenance = qb[b].provenance = Provenance::kRegular;
      ka[b].provenance = kb[b].provenance = Provenance::kMomentum;
      auto rep = pretrain_loss(qa[b], qb[b], ka[b], kb[b], corrs[b], smoothing_, loss_cfg);
      if (!std::isfinite(rep.l_total)) {
        throw NumericError("non-finite loss at step " + std::to_string(global_step_));
      }
      row.l_spatial += rep.l_spatial * inv_b;
      row.l_glopro += rep.l_glopro * inv_b;
      row.l_total += rep.l_total * inv_b;
      for (double& v : rep.grad_a.values) v *= inv_b;
      for (double& v : rep.grad_b.values) v *= inv_b;
      for (std::size_t k = 0; k < grad_g.size(); ++k) grad_g[k] += rep.grad_g[k] * inv_b;
      grad_a.push_back(std::move(rep.grad_a));
      grad_b.push_back(std::move(rep.grad_b));
    }
    auto grads = pair_.online.backward(cache_a, grad_a);
    add_into(grads, pair_.online.backward(cache_b, grad_b));

    static const std::string kSmoothingName = "smoothing";
    std::vector<ParamSlot> slots;
    auto& params = pair_.online.params();
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
      slots.push_back({&params.tensors[t].name, params.tensors[t].kind,
                       params.tensors[t].values, grads.tensors[t].values});
    }
    slots.push_back({&kSmoothingName, ParamKind::kWeight, smoothing_.matrix, grad_g});
    optimizer_.step(slots, epoch_, global_step_);
    ema_update(pair_);
    trace_.push_back(row);
  }

  ++global_step_;
  cursor_ = end;
  if (cursor_ >= n) {
    ++epoch_;
    order_.clear();
  }
  return true;
}

void Trainer::supervised_warm_start() {
  const auto table = ClassTable::wildpps();
  std::map<int, int> class_index;
  for (const auto& [id, info] : table.classes()) {
    class_index.emplace(id, static_cast<int>(class_index.size()));
  }
  const int num_classes = static_cast<int>(class_index.size());
  const int stride = cfg_.arch.total_stride();
  const int out = cfg_.arch.head_out;
  std::vector<double> w(std::size_t(num_classes) * out, 0.0), bias(num_classes, 0.0);

  double loss_sum = 0.0;
  int images = 0;
  for (const auto& item : dataset_) {
    if (!item.labels) continue;
    ViewSpec full;
    full.height = item.rgb.height;
    full.width = item.rgb.width;
    const auto view = render_view(item.rgb, full, cfg_.height, cfg_.width);
    const auto labels = render_labels(item.labels->ids, item.labels->height,
                                      item.labels->width, full, cfg_.height, cfg_.width);
    ForwardCache cache;
    auto f = pair_.online.forward(std::span<const RgbImage>(&view, 1), Mode::kTrain, &cache);
    const auto& grid = f[0];

    // Majority non-void class per cell.
    std::vector<int> target(grid.cells(), -1);
    for (int cell = 0; cell < grid.cells(); ++cell) {
      std::vector<int> votes(num_classes, 0);
      const int r0 = (cell / grid.cols) * stride, c0 = (cell % grid.cols) * stride;
      for (int r = r0; r < r0 + stride; ++r)
        for (int c = c0; c < c0 + stride; ++c) {
          const auto id = labels[std::size_t(r) * cfg_.width + c];
          if (id == kVoidId) continue;
          auto it = class_index.find(PanopticMap::class_of(id));
          if (it != class_index.end()) ++votes[it->second];
        }
      const auto best = std::max_element(votes.begin(), votes.end());
      if (*best > 0) target[cell] = static_cast<int>(best - votes.begin());
    }
    const int counted = static_cast<int>(std::count_if(target.begin(), target.end(),
                                                        [](int t) { return t >= 0; }));
    if (counted == 0) continue;

    FeatureGrid grad(grid.rows, grid.cols, grid.channels);
    std::vector<double> gw(w.size(), 0.0), gb(bias.size(), 0.0), logits(num_classes);
    double loss = 0.0;
    for (int cell = 0; cell < grid.cells(); ++cell) {
      if (target[cell] < 0) continue;
      const auto x = grid.cell(cell);
      double mx = -1e300;
      for (int k = 0; k < num_classes; ++k) {
        double z = bias[k];
        for (int c = 0; c < out; ++c) z += w[std::size_t(k) * out + c] * x[c];
        logits[k] = z;
        mx = std::max(mx, z);
      }
      double sum = 0.0;
      for (double z : logits) sum += std::exp(z - mx);
      const double lse = mx + std::log(sum);
      loss += (lse - logits[target[cell]]) / counted;
      auto gx = grad.cell(cell);
      for (int k = 0; k < num_classes; ++k) {
        const double d = (std::exp(logits[k] - lse) - (k == target[cell] ? 1.0 : 0.0)) / counted;
        gb[k] += d;
        for (int c = 0; c < out; ++c) {
          gw[std::size_t(k) * out + c] += d * x[c];
          gx[c] += d * w[std::size_t(k) * out + c];
        }
      }
    }
    auto grads = pair_.online.backward(cache, std::span<const FeatureGrid>(&grad, 1));
    const double lr = cfg_.warm_start_lr;
    auto& params = pair_.online.params();
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
      for (std::size_t k = 0; k < params.tensors[t].values.size(); ++k) {
        params.tensors[t].values[k] -= lr * grads.tensors[t].values[k];
      }
    }
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * gw[k];
    for (std::size_t k = 0; k < bias.size(); ++k) bias[k] -= lr * gb[k];
    loss_sum += loss;
    ++images;
  }
  if (images == 0) throw DataError("warm start needs at least one image with labels");
  warm_start_loss_ = loss_sum / images;
  // Both encoders start from the warm-started weights.
  pair_.momentum = pair_.online;
}

namespace {

constexpr char kMagic[8] = {'P', 'R', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  os.write(reinterpret_cast<const char*>(b), 4);
}
void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  os.write(reinterpret_cast<const char*>(b), 8);
}
std::uint64_t read_uint(std::istream& is, int bytes, const std::string& src) {
  unsigned char b[8] = {};
  is.read(reinterpret_cast<char*>(b), bytes);
  if (is.gcount() != bytes) throw DataError(src + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int k = 0; k < bytes; ++k) v |= std::uint64_t(b[k]) << (8 * k);
  return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(os, bits);
  }
}

std::vector<double> read_doubles(std::istream& is, std::size_t n, const std::string& src) {
  std::vector<double> v(n);
  for (auto& d : v) {
    const std::uint64_t bits = read_uint(is, 8, src);
    std::memcpy(&d, &bits, 8);
  }
  return v;
}

struct Blob {
  std::string name;
  std::vector<double>* data;
};

template <typename Pair, typename Smooth, typename Opt, typename Trace>
std::vector<Blob> blob_list(Pair& pair, Smooth& smoothing, Opt& velocity, Trace& trace_flat) {
  std::vector<Blob> blobs;
  for (auto& t : pair.online.params().tensors) blobs.push_back({"online." + t.name, &t.values});
  for (auto& t : pair.online.buffers().tensors) blobs.push_back({"online." + t.name, &t.values});
  for (auto& t : pair.momentum.params().tensors) blobs.push_back({"momentum." + t.name, &t.values});
  for (auto& t : pair.momentum.buffers().tensors) {
    blobs.push_back({"momentum." + t.name, &t.values});
  }
  blobs.push_back({"smoothing", &smoothing.matrix});
  for (std::size_t k = 0; k < velocity.size(); ++k) {
    blobs.push_back({"velocity." + std::to_string(k), &velocity[k]});
  }
  blobs.push_back({"trace", &trace_flat});
  return blobs;
}

}  // namespace

void Trainer::save_checkpoint(const fs::path& path) const {
  auto& self = const_cast<Trainer&>(*this);
  std::vector<double> trace_flat;
  for (const auto& r : trace_) {
    trace_flat.insert(trace_flat.end(), {double(r.step), double(r.epoch), r.lr, r.l_spatial,
                                         r.l_glopro, r.l_total});
  }
  auto blobs = blob_list(self.pair_, self.smoothing_, self.optimizer_.velocity(), trace_flat);

  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& b : blobs) manifest.push_back({{"name", b.name}, {"count", b.data->size()}});
  nlohmann::json arch, opt;
  prf::to_json(arch, cfg_.arch);
  prf::to_json(opt, cfg_.optimizer);
  nlohmann::json header = {
      {"format", "prf-checkpoint"},
      {"version", kCheckpointVersion},
      {"arch", arch},
      {"optimizer", opt},
      {"epoch", epoch_},
      {"seed", cfg_.seed},
      {"batch_scale", cfg_.batch_scale},
      {"config", to_json(cfg_)},
      {"state",
       {{"cursor", cursor_},
        {"global_step", global_step_},
        {"resampled", resampled_},
        {"dropped", dropped_},
        {"order", order_},
        {"velocity_tensors", optimizer_.velocity().size()},
        {"data_rng", data_rng_.state()},
        {"warm_start_loss", warm_start_loss_ ? nlohmann::json(*warm_start_loss_)
                                             : nlohmann::json(nullptr)}}},
      {"blobs", manifest},
  };
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, kCheckpointVersion);
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& b : blobs) write_doubles(os, *b.data);
  if (!os) throw DataError("write failed: " + path.string());
}

namespace {

nlohmann::json read_header(std::istream& is, const std::string& src) {
  char magic[8];
  is.read(magic, 8);
  if (is.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError(src + ": not a checkpoint file");
  }
  const auto version = read_uint(is, 4, src);
  if (version != kCheckpointVersion) {
    throw DataError(src + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = read_uint(is, 8, src);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(is.gcount()) != len) throw DataError(src + ": truncated header");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(src + ": malformed header: " + e.what());
  }
}

}  // namespace

nlohmann::json Trainer::read_checkpoint_header(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  return read_header(is, path.string());
}

Trainer Trainer::load_checkpoint(const fs::path& path, std::vector<TrainImage> dataset) {
  const std::string src = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + src);
  const auto header = read_header(is, src);

  TrainConfig cfg = train_config_from_json(header.at("config"));
  const bool warm = cfg.warm_start;
  cfg.warm_start = false;
  Trainer t(cfg, std::move(dataset));
  t.cfg_.warm_start = warm;

  const auto& st = header.at("state");
  t.epoch_ = header.at("epoch").get<int>();
  t.cursor_ = st.at("cursor").get<int>();
  t.global_step_ = st.at("global_step").get<int>();
  t.resampled_ = st.at("resampled").get<int>();
  t.dropped_ = st.at("dropped").get<int>();
  t.order_ = st.at("order").get<std::vector<int>>();
  t.data_rng_.restore(st.at("data_rng").get<std::string>());
  if (!st.at("warm_start_loss").is_null()) t.warm_start_loss_ = st.at("warm_start_loss").get<double>();
  t.optimizer_.velocity().assign(st.at("velocity_tensors").get<std::size_t>(), {});

  std::vector<double> trace_flat;
  auto blobs = blob_list(t.pair_, t.smoothing_, t.optimizer_.velocity(), trace_flat);
  const auto& manifest = header.at("blobs");
  if (manifest.size() != blobs.size()) throw DataError(src + ": blob manifest mismatch");
  for (std::size_t k = 0; k < blobs.size(); ++k) {
    const auto name = manifest[k].at("name").get<std::string>();
    const auto count = manifest[k].at("count").get<std::size_t>();
    if (name != blobs[k].name) throw DataError(src + ": unexpected blob " + name);
    if (name.rfind("online.", 0) == 0 || name.rfind("momentum.", 0) == 0 || name == "smoothing") {
      if (count != blobs[k].data->size()) throw DataError(src + ": blob " + name + " has wrong size");
    }
    *blobs[k].data = read_doubles(is, count, src);
  }
  if (trace_flat.size() % 6 != 0) throw DataError(src + ": malformed trace blob");
  for (std::size_t k = 0; k < trace_flat.size(); k += 6) {
    t.trace_.push_back({static_cast<int>(trace_flat[k]), static_cast<int>(trace_flat[k + 1]),
                        trace_flat[k + 2], trace_flat[k + 3], trace_flat[k + 4], trace_flat[k + 5]});
  }
  return t;
}

std::vector<TrainImage> load_dataset(const fs::path& dir) {
  std::vector<TrainImage> out;
  for (const auto& p : list_files(dir, ".ppm")) {
    TrainImage item{read_ppm(p), std::nullopt};
    auto labels = p;
    labels.replace_extension(".pgm");
    if (fs::exists(labels)) item.labels = read_pgm(labels);
    out.push_back(std::move(item));
  }
  return out;
}

SeparationStats feature_separation(Encoder& encoder, std::span<const RgbImage> images,
                                   std::span<const std::vector<std::uint8_t>> labels) {
  if (images.size() != labels.size()) throw InvalidArgument("one label raster per image");
  const int stride = encoder.arch().total_stride();
  std::vector<std::vector<double>> units;
  std::vector<int> cls;
  for (std::size_t k = 0; k < images.size(); ++k) {
    const auto& img = images[k];
    const auto grid = encoder.forward(img, Mode::kEval);
    for (int cell = 0; cell < grid.cells(); ++cell) {
      const int r0 = (cell / grid.cols) * stride, c0 = (cell % grid.cols) * stride;
      int ones = 0;
      for (int r = r0; r < r0 + stride; ++r)
        for (int c = c0; c < c0 + stride; ++c) ones += labels[k][std::size_t(r) * img.width + c] == 1;
      const int total = stride * stride;
      // Mixed cells straddle a region boundary and carry no single label.
      int label;
      if (4 * ones >= 3 * total) {
        label = 1;
      } else if (4 * ones <= total) {
        label = 0;
      } else {
        continue;
      }
      const auto x = grid.cell(cell);
      double n = 0.0;
      for (double v : x) n += v * v;
      n = std::sqrt(n);
      std::vector<double> u(x.begin(), x.end());
      if (n > 0.0)
        for (double& v : u) v /= n;
      units.push_back(std::move(u));
      cls.push_back(label);
    }
  }
  double intra = 0.0, inter = 0.0;
  std::int64_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    for (std::size_t j = i + 1; j < units.size(); ++j) {
      double c = 0.0;
      for (std::size_t d = 0; d < units[i].size(); ++d) c += units[i][d] * units[j][d];
      if (cls[i] == cls[j]) {
        intra += c;
        ++n_intra;
      } else {
        inter += c;
        ++n_inter;
      }
    }
  }
  if (n_intra == 0 || n_inter == 0) throw DataError("need cells of both labels");
  return {intra / n_intra, inter / n_inter};
}

}  // namespace prf
