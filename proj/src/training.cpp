#include "sketchedit/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sketchedit/checkpoint.hpp"
#include "sketchedit/config.hpp"
#include "sketchedit/error.hpp"
#include "sketchedit/image_io.hpp"
#include "sketchedit/losses.hpp"
#include "sketchedit/tensor_bridge.hpp"

namespace sketchedit {

namespace {

const std::vector<std::string> kGeneratorPrefixes = {"M.", "S.", "G0.", "G1."};
const std::vector<std::string> kDiscriminatorPrefixes = {"D."};

GeneratorLosses losses_from_pass(const ModelParams& p, const PreparedBatch& batch, const TrainConfig& cfg,
                                 ModelPass pass) {
  GeneratorLosses out;
  out.reconstruction = loss_reconstruction(pass.gen.coarse, pass.gen.refined, pass.y, batch.x);
  out.adversarial = loss_adversarial_g(discriminator_forward(p, pass.y, batch.c));
  const bool use_bmr = cfg.ablation.mask == MaskMode::kEstimated && cfg.ablation.bmr;
  if (use_bmr) {
    const auto reverse = mask_estimator_forward(p, batch.x, batch.fc, true);
    out.bmr = bmr_terms(pass.forward, reverse, batch.x, batch.fx).total();
  } else {
    out.bmr = torch::zeros({}, batch.x.options());
  }
  out.total = cfg.weights.reconstruction * out.reconstruction + cfg.weights.adversarial * out.adversarial +
              cfg.weights.bmr * out.bmr;
  out.pass = std::move(pass);
  return out;
}

void dump_batch(const std::filesystem::path& dir, const PreparedBatch& batch, const LossReport& report) {
  std::filesystem::create_directories(dir);
  for (int64_t i = 0; i < batch.x.size(0); ++i) {
    const auto tag = std::to_string(i);
    save_image(image_from_tensor(batch.x, i), dir / ("x_" + tag + ".png"));
    save_image(image_from_tensor(batch.fx, i), dir / ("fx_" + tag + ".png"));
    save_gray(mask_from_tensor(batch.c, i), dir / ("c_" + tag + ".png"));
  }
  write_file_atomic(dir / "losses.json", report.to_json().dump(2));
}

void check_finite(const LossReport& report, const PreparedBatch& batch,
                  const std::optional<std::filesystem::path>& dump_dir, const char* which) {
  for (double v : {report.reconstruction, report.adversarial, report.bmr, report.discriminator, report.total}) {
    if (std::isfinite(v)) continue;
    std::string where;
    if (dump_dir) {
      const auto dir = *dump_dir / ("nonfinite_step" + std::to_string(report.step));
      dump_batch(dir, batch, report);
      where = "; batch written to " + dir.string();
    }
    throw NonFiniteLossError(std::string("non-finite ") + which + " loss at step " + std::to_string(report.step) +
                             ": " + report.to_json().dump() + where);
  }
}

std::string adam_prefix(const char* which, const char* moment) {
  return std::string("adam_") + which + "/" + moment + "/";
}

}  // namespace

void TrainConfig::validate() const {
  net.validate();
  pair.warp.validate();
  pair.edges.validate();
  dropout.validate();
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (steps < 0) throw ConfigError("train.steps must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
  if (threads < 1) throw ConfigError("train.threads must be >= 1");
  if (!(optim.lr_generator >= 0.0) || !(optim.lr_discriminator >= 0.0)) {
    throw ConfigError("learning rates must be >= 0");
  }
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) || !(optim.beta2 >= 0.0 && optim.beta2 < 1.0) ||
      !(optim.eps > 0.0)) {
    throw ConfigError("optimizer betas must lie in [0, 1) and eps must be > 0");
  }
  if (!(weights.reconstruction >= 0.0) || !(weights.adversarial >= 0.0) || !(weights.bmr >= 0.0)) {
    throw ConfigError("loss weights must be >= 0");
  }
}

std::string to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::kEstimated: return "estimated";
    case MaskMode::kNone: return "none";
    case MaskMode::kBoundingBox: return "bbox";
  }
  return "estimated";
}

MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "estimated") return MaskMode::kEstimated;
  if (s == "none") return MaskMode::kNone;
  if (s == "bbox") return MaskMode::kBoundingBox;
  throw ConfigError("mask mode must be estimated, none or bbox (got '" + s + "')");
}

nlohmann::json LossReport::to_json() const {
  return {{"step", step},       {"L_R", reconstruction}, {"L_G", adversarial},
          {"L_BMR", bmr},       {"L_D", discriminator},  {"L_total", total}};
}

void AdamState::update(ModelParams& params, const std::vector<std::string>& names,
                       const std::vector<torch::Tensor>& grads, double lr, const OptimConfig& cfg) {
  torch::NoGradGuard guard;
  ++step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& g = grads[i];
    if (!g.defined()) continue;
    auto& p = params.mutable_param(names[i]);
    auto [mit, m_new] = m.try_emplace(names[i], torch::zeros_like(p));
    auto [vit, v_new] = v.try_emplace(names[i], torch::zeros_like(p));
    mit->second.mul_(cfg.beta1).add_(g, 1.0 - cfg.beta1);
    vit->second.mul_(cfg.beta2).addcmul_(g, g, 1.0 - cfg.beta2);
    const auto denom = (vit->second / bc2).sqrt_().add_(cfg.eps);
    p.addcdiv_(mit->second, denom, -lr / bc1);
  }
}

TrainState TrainState::fresh(const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.config = cfg;
  Rng base(cfg.seed);
  s.params = ModelParams::init(cfg.net, base.next());
  s.rng = base.split(1);
  return s;
}

PreparedBatch PreparedBatch::to(torch::Dtype dtype) const {
  PreparedBatch b = *this;
  for (auto* t : {&b.x, &b.fx, &b.c, &b.fc, &b.keep, &b.region}) *t = t->to(dtype);
  return b;
}

PreparedBatch prepare_batch(const std::vector<Image>& images, Rng& rng, const TrainConfig& cfg) {
  if (images.empty()) throw DataError("empty training batch");
  std::vector<Image> xs, fxs;
  std::vector<SketchMap> cs, fcs;
  std::vector<Mask> keeps, regions;
  PreparedBatch batch;
  const int res = cfg.net.resolution;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.height() != res || img.width() != res) {
      throw DimensionError("training image " + std::to_string(i) + " is " + std::to_string(img.height()) + "x" +
                           std::to_string(img.width()) + ", expected " + std::to_string(res));
    }
    Rng r = rng.split(i);
    auto pair = make_training_pair(img, r, cfg.pair);
    const auto rects = sample_dropout_rects(r, cfg.dropout, res, res, pair.region);
    Mask keep(res, res, 1.0f);
    for (const auto& rc : rects) {
      for (int y = rc.y0; y < rc.y1; ++y) {
        for (int x = rc.x0; x < rc.x1; ++x) keep.at(y, x) = 0.0f;
      }
    }
    xs.push_back(img);
    fxs.push_back(std::move(pair.x_warped));
    cs.push_back(std::move(pair.sketch));
    fcs.push_back(std::move(pair.sketch_warped));
    keeps.push_back(std::move(keep));
    regions.push_back(pair.region.to_mask());
    batch.regions.push_back(pair.region);
  }
  batch.x = stack_tensors(xs);
  batch.fx = stack_tensors(fxs);
  batch.c = stack_tensors(cs);
  batch.fc = stack_tensors(fcs);
  batch.keep = stack_tensors(keeps);
  batch.region = stack_tensors(regions);
  return batch;
}

torch::Tensor bounding_box_mask(const torch::Tensor& sketch) {
  auto s = sketch.detach().to(torch::kFloat32).contiguous();
  auto out = torch::zeros_like(s);
  const int64_t n = s.size(0), h = s.size(2), w = s.size(3);
  auto sa = s.accessor<float, 4>();
  auto oa = out.accessor<float, 4>();
  for (int64_t i = 0; i < n; ++i) {
    int64_t y0 = h, y1 = -1, x0 = w, x1 = -1;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        if (sa[i][0][y][x] >= 0.5f) {
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
        }
      }
    }
    for (int64_t y = y0; y <= y1; ++y) {
      for (int64_t x = x0; x <= x1; ++x) oa[i][0][y][x] = 1.0f;
    }
  }
  return out.to(sketch.scalar_type());
}

ModelPass run_model(const ModelParams& p, const torch::Tensor& image, const torch::Tensor& sketch,
                    const AblationConfig& ablation, bool with_aux, const torch::Tensor& keep) {
  ModelPass out;
  switch (ablation.mask) {
    case MaskMode::kEstimated:
      out.forward = mask_estimator_forward(p, image, sketch, with_aux);
      break;
    case MaskMode::kNone:
      out.forward.mask = torch::ones_like(sketch);
      break;
    case MaskMode::kBoundingBox:
      out.forward.mask = bounding_box_mask(sketch);
      break;
  }
  const auto& m = out.forward.mask;
  out.x_sty = m * image;
  if (keep.defined()) out.x_sty = out.x_sty * keep;
  const auto& cfg = p.config();
  if (ablation.style_encoder) {
    out.style = style_encode(p, out.x_sty, m);
  } else {
    out.style = torch::zeros({image.size(0), cfg.style_dim}, image.options());
  }
  const auto x_sta = ablation.mask == MaskMode::kNone ? image : (1.0 - m) * image;
  out.gen = generator_forward(p, x_sta, m, sketch, tile_style(out.style, cfg.bottleneck(), cfg.bottleneck()));
  out.y = blend_tensors(out.gen.refined, image, m);
  return out;
}

GeneratorLosses compute_generator_losses(const ModelParams& p, const PreparedBatch& batch, const TrainConfig& cfg) {
  const bool with_aux = cfg.ablation.mask == MaskMode::kEstimated && cfg.ablation.bmr;
  return losses_from_pass(p, batch, cfg, run_model(p, batch.fx, batch.c, cfg.ablation, with_aux, batch.keep));
}

LossReport train_step(TrainState& state, const std::vector<Image>& images,
                      const std::optional<std::filesystem::path>& dump_dir) {
  const auto& cfg = state.config;
  if (at::get_num_threads() != cfg.threads) at::set_num_threads(cfg.threads);
  Rng batch_rng = state.rng.split(static_cast<std::uint64_t>(state.step));
  const auto batch = prepare_batch(images, batch_rng, cfg).to(state.params.dtype());

  LossReport report;
  report.step = state.step + 1;
  const bool with_aux = cfg.ablation.mask == MaskMode::kEstimated && cfg.ablation.bmr;
  auto pass = run_model(state.params, batch.fx, batch.c, cfg.ablation, with_aux, batch.keep);

  // Discriminator: real x and fake y share the conditioning sketch.
  {
    const int64_t n = batch.x.size(0);
    const auto scores = discriminator_forward_update(state.params, torch::cat({batch.x, pass.y.detach()}, 0),
                                                     torch::cat({batch.c, batch.c}, 0));
    const auto loss_d = loss_discriminator(scores.slice(0, 0, n), scores.slice(0, n));
    report.discriminator = loss_d.item<double>();
    check_finite(report, batch, dump_dir, "discriminator");
    const auto names = state.params.names(kDiscriminatorPrefixes);
    const auto grads = torch::autograd::grad({loss_d}, state.params.group(kDiscriminatorPrefixes));
    state.opt_discriminator.update(state.params, names, grads, cfg.optim.lr_discriminator, cfg.optim);
  }

  auto losses = losses_from_pass(state.params, batch, cfg, std::move(pass));
  report.reconstruction = losses.reconstruction.item<double>();
  report.adversarial = losses.adversarial.item<double>();
  report.bmr = losses.bmr.item<double>();
  report.total = losses.total.item<double>();
  check_finite(report, batch, dump_dir, "generator");

  const auto names = state.params.names(kGeneratorPrefixes);
  const auto grads = torch::autograd::grad({losses.total}, state.params.group(kGeneratorPrefixes), {},
                                           /*retain_graph=*/false, /*create_graph=*/false, /*allow_unused=*/true);
  state.opt_generator.update(state.params, names, grads, cfg.optim.lr_generator, cfg.optim);
  ++state.step;
  return report;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::int64_t step, int batch_size,
                                       std::size_t dataset_size) {
  if (dataset_size == 0) throw DataError("training set is empty");
  Rng r = Rng(seed ^ 0x5bd1e995ULL).split(static_cast<std::uint64_t>(step));
  std::vector<std::size_t> out;
  for (int i = 0; i < batch_size; ++i) {
    out.push_back(static_cast<std::size_t>(r.next() % dataset_size));
  }
  return out;
}

void train_loop(TrainState& state, const std::vector<Image>& dataset, const TrainLoopOptions& opt) {
  const auto& cfg = state.config;
  std::optional<std::filesystem::path> dump;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    dump = opt.out_dir;
  }
  while (state.step < cfg.steps) {
    std::vector<Image> batch;
    for (auto i : batch_indices(cfg.seed, state.step, cfg.batch_size, dataset.size())) batch.push_back(dataset[i]);
    const auto report = train_step(state, batch, dump);
    if (opt.log && (report.step % cfg.log_every == 0 || report.step == cfg.steps)) {
      *opt.log << report.to_json().dump() << "\n" << std::flush;
    }
    if (opt.on_report) opt.on_report(report);
    if (!opt.out_dir.empty() && cfg.checkpoint_every > 0 && report.step % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%07lld.ckpt", static_cast<long long>(report.step));
      save_checkpoint(state, opt.out_dir / name);
    }
  }
  if (!opt.out_dir.empty()) save_checkpoint(state, opt.out_dir / "latest.ckpt");
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  Archive a;
  a.manifest = {{"kind", "train_state"},
                {"config", train_config_to_json(state.config)},
                {"net_config",
                 {{"width", state.config.net.width},
                  {"style_dim", state.config.net.style_dim},
                  {"resolution", state.config.net.resolution},
                  {"coarse_blocks", state.config.net.coarse_blocks},
                  {"refine_blocks", state.config.net.refine_blocks},
                  {"disc_stages", state.config.net.disc_stages}}},
                {"step", state.step},
                {"rng", state.rng.serialize()},
                {"adam_g_step", state.opt_generator.step},
                {"adam_d_step", state.opt_discriminator.step}};
  for (const auto& [n, t] : state.params.params()) a.arrays["param/" + n] = t;
  for (const auto& [n, t] : state.params.buffers()) a.arrays["buffer/" + n] = t;
  for (const auto& [n, t] : state.opt_generator.m) a.arrays[adam_prefix("g", "m") + n] = t;
  for (const auto& [n, t] : state.opt_generator.v) a.arrays[adam_prefix("g", "v") + n] = t;
  for (const auto& [n, t] : state.opt_discriminator.m) a.arrays[adam_prefix("d", "m") + n] = t;
  for (const auto& [n, t] : state.opt_discriminator.v) a.arrays[adam_prefix("d", "v") + n] = t;
  write_archive(path, a);
}

namespace {

std::map<std::string, torch::Tensor> arrays_with_prefix(const Archive& a, const std::string& prefix) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& [n, t] : a.arrays) {
    if (n.rfind(prefix, 0) == 0) out.emplace(n.substr(prefix.size()), t);
  }
  return out;
}

LoadedModel model_from_archive(const Archive& a) {
  LoadedModel m;
  try {
    const auto kind = a.manifest.at("kind").get<std::string>();
    if (kind != "train_state") throw CheckpointError("unsupported checkpoint kind '" + kind + "'");
    m.config = train_config_from_json(a.manifest.at("config"));
    m.step = a.manifest.at("step").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest incomplete: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
  }
  m.params = ModelParams::from_arrays(m.config.net, arrays_with_prefix(a, "param/"), arrays_with_prefix(a, "buffer/"));
  return m;
}

}  // namespace

TrainState load_checkpoint(const std::filesystem::path& path) {
  const auto a = read_archive(path);
  auto model = model_from_archive(a);
  TrainState s;
  s.config = model.config;
  s.params = std::move(model.params);
  s.step = model.step;
  try {
    s.rng.deserialize(a.manifest.at("rng").get<std::string>());
    s.opt_generator.step = a.manifest.at("adam_g_step").get<std::int64_t>();
    s.opt_discriminator.step = a.manifest.at("adam_d_step").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest incomplete: ") + e.what());
  }
  s.opt_generator.m = arrays_with_prefix(a, adam_prefix("g", "m"));
  s.opt_generator.v = arrays_with_prefix(a, adam_prefix("g", "v"));
  s.opt_discriminator.m = arrays_with_prefix(a, adam_prefix("d", "m"));
  s.opt_discriminator.v = arrays_with_prefix(a, adam_prefix("d", "v"));
  return s;
}

LoadedModel load_model_file(const std::filesystem::path& path) { return model_from_archive(read_archive(path)); }

}  // namespace sketchedit
