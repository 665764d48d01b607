// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sketchedit/checkpoint.hpp"
#include "sketchedit/config.hpp"
#include "sketchedit/evaluation.hpp"
#include "sketchedit/features.hpp"
#include "sketchedit/image_io.hpp"
#include "sketchedit/imaging.hpp"
#include "sketchedit/inference.hpp"
#include "sketchedit/losses.hpp"
#include "sketchedit/metrics.hpp"
#include "sketchedit/server.hpp"
#include "sketchedit/toy_data.hpp"
#include "sketchedit/training.hpp"
#include "sketchedit/warp.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

using namespace sketchedit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Collects failed sub-checks with a short description each.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok) failures_.push_back(what);
  }
  void within(double value, double expected, double tol, const std::string& what) {
    std::ostringstream s;
    s << what << " = " << std::setprecision(10) << value << " (expected " << expected << " +- " << tol << ")";
    expect(std::isfinite(value) && std::abs(value - expected) <= tol, s.str());
  }
  [[nodiscard]] Outcome outcome(const std::string& extra = {}) const {
    std::ostringstream s;
    s << (count_ - failures_.size()) << "/" << count_ << " checks";
    if (!extra.empty()) s << "; " << extra;
    for (std::size_t i = 0; i < failures_.size() && i < 5; ++i) s << "; FAILED " << failures_[i];
    return {failures_.empty(), s.str()};
  }

 private:
  std::size_t count_ = 0;
  std::vector<std::string> failures_;
};

Image random_image(int h, int w, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(h, w);
  for (auto& v : img.values()) v = u(gen);
  return img;
}

Mask random_mask(int h, int w, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Mask m(h, w);
  for (auto& v : m.values()) v = u(gen);
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  const auto bytes = read_file(p);
  return std::string(bytes.begin(), bytes.end());
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome identity_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks c;
  for (unsigned seed = 0; seed < 10; ++seed) {
    const int h = 17 + static_cast<int>(seed), w = 23 + 2 * static_cast<int>(seed);
    const auto x = random_image(h, w, seed);
    const auto y1 = random_image(h, w, seed + 100);
    c.expect(blend(y1, x, Mask(h, w, 0.0f)) == x, "blend(y1, x, 0) == x");
    const auto m = random_mask(h, w, seed + 200);
    const auto a = style_partial(x, m), b = static_partial(x, m);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.values().size(); ++i) {
      worst = std::max(worst, std::abs(double(a.values()[i]) + b.values()[i] - x.values()[i]));
    }
    c.expect(worst <= 1e-6, "style_partial + static_partial == x, max err " + std::to_string(worst));
    const WarpField zero(h, w);
    c.expect(apply_warp(zero, x, Interp::kBilinear) == x, "bilinear zero warp");
    c.expect(apply_warp(zero, x, Interp::kNearest) == x, "nearest zero warp");
    c.expect(apply_warp(zero, m) == m, "zero warp on a mask");
    const auto v = torch::randn({2, 32}, torch::TensorOptions().dtype(torch::kFloat64));
    const auto tiled = tile_style(v, 3 + seed % 4, 2 + seed % 5);
    c.expect(tiled.flatten(2).var(2, false).abs().max().item<double>() == 0.0, "tile_style spatial variance 0");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "runtime < 10 s");
  return c.outcome(fmt(secs, 2) + " s");
}

Outcome metric_oracles() {
  Checks c;
  for (float d : {0.1f, 0.25f, 0.5f}) {
    const Image a(16, 16, 0.0f), b(16, 16, d);
    c.within(psnr(a, b), -20.0 * std::log10(double(d)), 1e-6, "psnr offset " + fmt(d, 2));
  }
  c.within(psnr(Image(8, 8, 0.0f), Image(8, 8, 0.5f)), 20.0 * std::log10(2.0), 1e-6, "psnr offset 0.5");
  c.expect(psnr(random_image(8, 8, 1), random_image(8, 8, 1)) == kPsnrCap, "psnr identical = cap");

  Eigen::VectorXd m1(6), m2(6);
  m1 << 0.5, -1.0, 2.0, 0.0, 3.5, -0.25;
  m2 << 1.5, 0.0, -1.0, 0.25, 3.0, 0.75;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(6, 6);
  c.within(fid({m1, id, 10}, {m2, id, 10}), (m1 - m2).squaredNorm(), 1e-4, "fid identity covariance");

  for (unsigned seed = 0; seed < 5; ++seed) {
    const auto a = random_image(24, 24, seed);
    c.within(ssim(a, a), 1.0, 1e-6, "ssim(a, a)");
  }

  std::mt19937 gen(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    FeatureMap f{"f", 5, 7, Eigen::MatrixXd(8 + trial, 35)};
    for (Eigen::Index i = 0; i < f.data.size(); ++i) f.data.data()[i] = n(gen);
    const double lo = min_eigenvalue(gram(f));
    c.expect(lo >= -1e-8, "gram min eigenvalue " + std::to_string(lo));
  }
  return c.outcome();
}

Outcome loss_oracles() {
  Checks c;
  auto val = [](const torch::Tensor& t) { return t.item<double>(); };
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  torch::manual_seed(11);
  const auto x = torch::rand({2, 3, 16, 16}, opts);
  c.within(val(loss_reconstruction(x, x, x, x)), 0.0, 1e-6, "L_R identical");
  const auto off = x + 0.1;
  c.within(val(loss_reconstruction(off, off, off, x)), 0.3, 1e-6, "L_R offsets 0.1");
  const auto y0 = torch::rand_like(x), y1 = torch::rand_like(x), y = torch::rand_like(x);
  auto brute = [](const torch::Tensor& a, const torch::Tensor& b) {
    const auto fa = a.contiguous().flatten(), fb = b.contiguous().flatten();
    double s = 0.0;
    for (int64_t i = 0; i < fa.numel(); ++i) s += std::abs(fa[i].item<double>() - fb[i].item<double>());
    return s / double(fa.numel());
  };
  c.within(val(loss_reconstruction(y0, y1, y, x)), brute(y0, x) + brute(y1, x) + brute(y, x), 1e-6, "L_R random");

  const auto s = [&](double v) { return torch::full({2, 1, 4, 4}, v, opts); };
  c.within(val(loss_adversarial_g(s(1.5))), 0.0, 1e-6, "L_G scores >= 1");
  c.within(val(loss_adversarial_g(s(0.0))), 1.0, 1e-6, "L_G scores 0");
  c.within(val(loss_adversarial_g(s(-1.0))), 2.0, 1e-6, "L_G scores -1");
  c.within(val(loss_discriminator(s(1.0), s(-1.0))), 0.0, 1e-6, "L_D margin satisfied");
  c.within(val(loss_discriminator(s(0.0), s(0.0))), 2.0, 1e-6, "L_D zero scores");
  c.within(val(loss_discriminator(s(-1.0), s(1.0))), 4.0, 1e-6, "L_D reversed");

  const auto sk = (torch::rand({2, 1, 16, 16}, opts) > 0.7).to(torch::kFloat64);
  const MaskEstimatorFn passthrough = [](const torch::Tensor& img, const torch::Tensor& sketch) {
    return MaskOutput{torch::rand_like(sketch), img};
  };
  c.within(val(loss_bmr(passthrough, x, x, sk, sk).total()), 0.0, 1e-6, "BMR identity warp");
  const auto half = torch::full({2, 3, 16, 16}, 0.5, opts);
  const MaskEstimatorFn zero_aux = [](const torch::Tensor& img, const torch::Tensor& sketch) {
    return MaskOutput{torch::ones_like(sketch), torch::zeros_like(img)};
  };
  c.within(val(loss_bmr(zero_aux, half, half, sk, sk).total()), 2.0, 1e-6, "BMR zero aux, unit mask, x = 0.5");

  const auto fx = torch::rand_like(x);
  const auto fsk = (torch::rand({2, 1, 16, 16}, opts) > 0.7).to(torch::kFloat64);
  const MaskEstimatorFn mixed = [](const torch::Tensor& img, const torch::Tensor& sketch) {
    return MaskOutput{torch::sigmoid(img.mean(1, true) - sketch), (img.flip(2) + sketch) * 0.5};
  };
  const auto t = loss_bmr(mixed, x, fx, sk, fsk);
  const auto a = mixed(fx, sk), b = mixed(x, fsk);
  c.within(val(t.forward_aux), brute(a.aux, x), 1e-6, "BMR term 1");
  c.within(val(t.reverse_aux), brute(b.aux, fx), 1e-6, "BMR term 2");
  c.within(val(t.forward_blend), brute(a.aux * a.mask + fx * (1 - a.mask), x), 1e-6, "BMR term 3");
  c.within(val(t.reverse_blend), brute(b.aux * b.mask + x * (1 - b.mask), fx), 1e-6, "BMR term 4");
  return c.outcome();
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.net.resolution = 16;
  cfg.net.width = 8;
  cfg.net.style_dim = 16;
  cfg.net.coarse_blocks = 1;
  cfg.net.refine_blocks = 1;
  cfg.net.disc_stages = 2;
  cfg.batch_size = 2;
  cfg.pair.warp.min_area_fraction = 0.15;
  cfg.pair.warp.max_area_fraction = 0.4;
  return cfg;
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = tiny_config();
  auto p = ModelParams::init(cfg.net, 21, torch::kFloat64);
  // Move the power-iteration vectors close to convergence so D is well scaled.
  {
    const auto warm = torch::rand({1, 3, 16, 16}, torch::kFloat64);
    for (int i = 0; i < 20; ++i) (void)discriminator_forward_update(p, warm, torch::zeros({1, 1, 16, 16}, torch::kFloat64));
  }
  std::vector<Image> images;
  for (const auto& s : generate_toy_set(77, cfg.batch_size, 16)) images.push_back(s.image);
  Rng rng(5);
  const auto batch = prepare_batch(images, rng, cfg).to(torch::kFloat64);

  auto loss = [&]() { return compute_generator_losses(p, batch, cfg).total; };
  const auto names = p.names({""});
  std::vector<torch::Tensor> leaves;
  for (const auto& n : names) leaves.push_back(p.get(n));
  const auto total = loss();
  const auto grads = torch::autograd::grad({total}, leaves, {}, false, false, true);

  // Sample parameters with a non-negligible analytic gradient across all tensors.
  std::mt19937 gen(3);
  struct Probe {
    std::size_t tensor;
    int64_t index;
  };
  std::vector<Probe> probes;
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  int attempts = 0;
  while (probes.size() < 96 && attempts < 20000) {
    ++attempts;
    const std::size_t ti = order[gen() % order.size()];
    if (!grads[ti].defined()) continue;
    const int64_t idx = static_cast<int64_t>(gen() % static_cast<std::uint64_t>(leaves[ti].numel()));
    if (std::abs(grads[ti].flatten()[idx].item<double>()) < 1e-6) continue;
    probes.push_back({ti, idx});
  }

  const double h = 1e-4;
  double worst = 0.0;
  int bad = 0;
  std::string worst_name;
  for (const auto& pr : probes) {
    auto& t = p.mutable_param(names[pr.tensor]);
    double orig = 0.0;
    double plus = 0.0, minus = 0.0;
    {
      torch::NoGradGuard guard;
      auto flat = t.view({-1});
      orig = flat[pr.index].item<double>();
      flat[pr.index].fill_(orig + h);
      plus = loss().item<double>();
      flat[pr.index].fill_(orig - h);
      minus = loss().item<double>();
      flat[pr.index].fill_(orig);
    }
    const double numeric = (plus - minus) / (2 * h);
    const double analytic = grads[pr.tensor].flatten()[pr.index].item<double>();
    const double rel = std::abs(numeric - analytic) / std::max(std::abs(numeric), std::abs(analytic));
    if (rel > 1e-3) ++bad;
    if (rel > worst) {
      worst = rel;
      worst_name = names[pr.tensor] + "[" + std::to_string(pr.index) + "]";
    }
  }
  const double secs = seconds_since(t0);
  Checks c;
  c.expect(probes.size() >= 64, "at least 64 sampled parameters, got " + std::to_string(probes.size()));
  c.expect(bad == 0, std::to_string(bad) + " parameters above rel err 1e-3");
  c.expect(secs < 300.0, "runtime < 5 min");
  return c.outcome(std::to_string(probes.size()) + " params, max rel err " + sci(worst) + " at " +
                   worst_name + ", " + fmt(secs, 1) + " s");
}

Outcome warping_oracle() {
  Checks c;
  Rng rng(31);
  const RegionSpec region{32, 32, 6, 5, 25, 27};
  const auto mesh = build_mesh(region, 1, rng);
  const Point d{3.0, 0.0};
  const auto field = make_warp_field(mesh, {d}, 32, 32, 100.0);
  const Point p = mesh.vertices[mesh.interior[0]];
  const Point corners[4] = {{double(region.x0), double(region.y0)},
                            {double(region.x1), double(region.y0)},
                            {double(region.x1), double(region.y1)},
                            {double(region.x0), double(region.y1)}};
  double worst = 0.0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      double wx = 0.0, wy = 0.0;
      if (region.contains(x, y)) {
        for (int k = 0; k < 4; ++k) {
          const Point a = corners[k], b = corners[(k + 1) % 4];
          Eigen::Matrix3d m;
          m << a.x, b.x, p.x, a.y, b.y, p.y, 1.0, 1.0, 1.0;
          const Eigen::Vector3d l = m.fullPivLu().solve(Eigen::Vector3d(x, y, 1.0));
          if (l.minCoeff() >= -1e-9) {
            wx = l[2] * d.x;
            wy = l[2] * d.y;
            break;
          }
        }
      }
      worst = std::max({worst, std::abs(field.at(y, x, 0) - wx), std::abs(field.at(y, x, 1) - wy)});
    }
  }
  c.expect(worst <= 1e-5, "barycentric oracle max err " + std::to_string(worst));
  const auto vx = static_cast<int>(p.x), vy = static_cast<int>(p.y);
  if (p.x == vx && p.y == vy) c.within(field.at(vy, vx, 0), 3.0, 1e-5, "field at the moved vertex");

  std::size_t moved_outside = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto img = random_image(48, 40, 500 + trial);
    const auto r = sample_region(48, 40, rng, WarpConfig{});
    const auto mesh2 = build_mesh(r, rng.uniform_int(1, 4), rng);
    const double maxd = max_displacement_for(r, WarpConfig{});
    const auto f = make_warp_field(mesh2, sample_displacements(mesh2, maxd, rng), 48, 40, maxd);
    for (const auto interp : {Interp::kBilinear, Interp::kNearest}) {
      const auto out = apply_warp(f, img, interp);
      for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 40; ++x) {
          if (r.contains(x, y)) continue;
          for (int ch = 0; ch < 3; ++ch) moved_outside += out.at(y, x, ch) != img.at(y, x, ch);
        }
      }
    }
  }
  c.expect(moved_outside == 0, std::to_string(moved_outside) + " values changed outside the region");
  return c.outcome("max err " + std::to_string(worst));
}

// ---------------------------------------------------------------------------
// Toy-scale experiment shared by the training, ablation and service criteria.

struct ToyOptions {
  fs::path workdir;
  int steps = 4000;
  int ablation_steps = 1200;
  double lr = 1e-4;
  int threads = 1;
};

struct ToyRun {
  std::string name;
  TrainConfig config;
  ModelParams params;
  std::string error;
};

class ToyExperiment {
 public:
  explicit ToyExperiment(ToyOptions opt) : opt_(std::move(opt)) {
    fs::create_directories(opt_.workdir);
    train_ = generate_toy_set(1001, 2000, 64);
    held_ = generate_toy_set(2002, 200, 64);
    train_images_ = images_of(train_);
    held_images_ = images_of(held_);
    eval_ = make_eval_set(held_images_, 3003, base_config().pair);
  }

  TrainConfig base_config() const {
    TrainConfig cfg;
    cfg.net.resolution = 64;
    cfg.net.width = 16;
    cfg.batch_size = 8;
    cfg.optim.lr_generator = opt_.lr;
    cfg.optim.lr_discriminator = opt_.lr;
    cfg.checkpoint_every = 1000;
    cfg.log_every = 100;
    cfg.threads = opt_.threads;
    cfg.seed = 7;
    return cfg;
  }

  /// Trains (or reuses a cached checkpoint of) one configuration.
  const ToyRun& run(const std::string& name, const std::function<void(TrainConfig&)>& tweak, int steps) {
    if (auto it = runs_.find(name); it != runs_.end()) return it->second;
    auto cfg = base_config();
    tweak(cfg);
    cfg.steps = steps;
    ToyRun r{name, cfg, {}, {}};
    try {
      const auto dir = opt_.workdir / name;
      fs::create_directories(dir);
      const auto latest = dir / "latest.ckpt";
      std::optional<TrainState> state;
      if (fs::exists(latest)) {
        auto cached = load_checkpoint(latest);
        if (train_config_to_json(cached.config) == train_config_to_json(cfg) ||
            (cached.step < steps && same_except_steps(cached.config, cfg))) {
          cached.config.steps = steps;
          state = std::move(cached);
        }
      }
      if (!state) {
        fs::remove(dir / "train_log.jsonl");
        state = TrainState::fresh(cfg);
      }
      if (state->step < steps) {
        std::cout << "  training " << name << " from step " << state->step << " to " << steps << std::endl;
        std::ofstream log(dir / "train_log.jsonl", std::ios::app);
        const auto t0 = std::chrono::steady_clock::now();
        train_loop(*state, train_images_, {dir, &log, {}});
        std::cout << "  trained " << name << " in " << fmt(seconds_since(t0) / 60.0, 1) << " min" << std::endl;
      }
      r.params = state->params;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return runs_.emplace(name, std::move(r)).first->second;
  }

  const ToyRun& full() { return run("full", [](TrainConfig&) {}, opt_.steps); }
  const ToyRun& no_bmr() {
    return run("no_bmr", [](TrainConfig& c) { c.ablation.bmr = false; }, opt_.steps);
  }
  const ToyRun& bbox() {
    return run("bbox_mask", [](TrainConfig& c) { c.ablation.mask = MaskMode::kBoundingBox; }, opt_.steps);
  }
  const ToyRun& no_mask() {
    return run("no_mask", [](TrainConfig& c) { c.ablation.mask = MaskMode::kNone; }, opt_.ablation_steps);
  }
  const ToyRun& no_style() {
    return run("no_style", [](TrainConfig& c) { c.ablation.style_encoder = false; }, opt_.ablation_steps);
  }

  const ConvFeatureExtractor& extractor() {
    if (!extractor_) {
      const auto path = opt_.workdir / "extractor.ckpt";
      if (fs::exists(path)) {
        extractor_ = ConvFeatureExtractor::load(path);
      } else {
        extractor_ = ConvFeatureExtractor::train(train_, 1500, 32, 5);
        extractor_->save(path);
      }
    }
    return *extractor_;
  }

  const std::vector<ToySample>& held() const { return held_; }
  const std::vector<EvalSample>& eval() const { return eval_; }
  const fs::path& workdir() const { return opt_.workdir; }

  /// Predictions on (f(x), c), the evaluation protocol.
  std::vector<Prediction> predict_protocol(const ToyRun& r) const {
    std::vector<Image> in;
    std::vector<SketchMap> sk;
    for (const auto& s : eval_) {
      in.push_back(s.fx);
      sk.push_back(s.c);
    }
    return predict(r.params, r.config.ablation, in, sk);
  }

 private:
  static bool same_except_steps(TrainConfig a, TrainConfig b) {
    a.steps = b.steps = 0;
    return train_config_to_json(a) == train_config_to_json(b);
  }

  ToyOptions opt_;
  std::vector<ToySample> train_, held_;
  std::vector<Image> train_images_, held_images_;
  std::vector<EvalSample> eval_;
  std::map<std::string, ToyRun> runs_;
  std::optional<ConvFeatureExtractor> extractor_;
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

Outcome toy_training(ToyExperiment& toy) {
  const auto& full = toy.full();
  if (!full.error.empty()) return {false, "full run failed: " + full.error};
  const auto& nobmr = toy.no_bmr();
  if (!nobmr.error.empty()) return {false, "no-BMR run failed: " + nobmr.error};
  const auto& eval = toy.eval();

  const auto pred = toy.predict_protocol(full);
  std::vector<double> l1, ps, outside, copy;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    l1.push_back(l1_error(pred[i].y, eval[i].x));
    copy.push_back(l1_error(eval[i].fx, eval[i].x));
    ps.push_back(psnr(pred[i].y, eval[i].x));
    outside.push_back(mean_mask_outside(pred[i].m, eval[i].c, 9.0));
  }

  std::vector<Image> clean;
  std::vector<SketchMap> empty;
  for (const auto& s : eval) {
    clean.push_back(s.x);
    empty.emplace_back(s.x.height(), s.x.width(), true);
  }
  const auto ident = predict(full.params, full.config.ablation, clean, empty);
  std::vector<double> mm, change;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    mm.push_back(mean_value(ident[i].m));
    change.push_back(l1_error(ident[i].y, eval[i].x));
  }

  std::vector<SketchMap> warped_sketches;
  for (const auto& s : eval) warped_sketches.push_back(s.fc);
  // Thresholded IoU and mean m inside the region, on unwarped inputs.
  auto iou_of = [&](const ToyRun& r) {
    const auto p = predict(r.params, r.config.ablation, clean, warped_sketches);
    std::vector<double> v, inside;
    for (std::size_t i = 0; i < eval.size(); ++i) {
      v.push_back(mask_iou(p[i].m, eval[i].region, 0.5));
      const auto rm = eval[i].region.to_mask();
      double s = 0.0, n = 0.0;
      for (std::size_t k = 0; k < rm.values().size(); ++k) {
        s += rm.values()[k] * p[i].m.values()[k];
        n += rm.values()[k];
      }
      inside.push_back(s / std::max(n, 1.0));
    }
    return std::pair{mean_of(v), mean_of(inside)};
  };
  const auto [iou_full, in_full] = iou_of(full);
  const auto [iou_nobmr, in_nobmr] = iou_of(nobmr);

  Checks c;
  const double L1 = mean_of(l1), PS = mean_of(ps), MM = mean_of(mm), CH = mean_of(change), OUT = mean_of(outside);
  c.expect(L1 < 0.08, "(a) L1 " + fmt(L1) + " < 0.08");
  c.expect(PS > 22.0, "(a) PSNR " + fmt(PS, 2) + " > 22");
  c.expect(MM <= 0.05, "(b) mean m " + fmt(MM) + " <= 0.05");
  c.expect(CH <= 0.01, "(b) mean|y-x| " + fmt(CH) + " <= 0.01");
  c.expect(OUT <= 0.15, "(c) mask outside dilation " + fmt(OUT) + " <= 0.15");
  c.expect(iou_full - iou_nobmr >= 0.1,
           "(d) IoU gain " + fmt(iou_full - iou_nobmr) + " >= 0.1 (" + fmt(iou_full) + " vs " + fmt(iou_nobmr) + ")");
  std::ostringstream s;
  s << "(a) L1 " << fmt(L1) << " (copy " << fmt(mean_of(copy)) << ") PSNR " << fmt(PS, 2) << "; (b) mean m " << fmt(MM) << " mean|y-x| " << fmt(CH)
    << "; (c) outside " << fmt(OUT) << "; (d) IoU " << fmt(iou_full) << " vs no-BMR " << fmt(iou_nobmr)
    << ", region mean m " << fmt(in_full) << " vs " << fmt(in_nobmr);
  json summary = {{"l1", L1},          {"psnr", PS},       {"empty_mean_mask", MM}, {"empty_change", CH},
                  {"mask_outside", OUT}, {"iou_full", iou_full}, {"iou_no_bmr", iou_nobmr},
                  {"region_mean_mask_full", in_full}, {"region_mean_mask_no_bmr", in_nobmr},
                  {"copy_l1", mean_of(copy)}};
  write_file_atomic(toy.workdir() / "toy_criteria.json", summary.dump(2));
  return c.outcome(s.str());
}

Outcome ablations(ToyExperiment& toy) {
  Checks c;
  const auto& ex = toy.extractor();
  std::vector<Image> targets;
  for (const auto& s : toy.eval()) targets.push_back(s.x);
  std::vector<MethodReport> reports;
  std::map<std::string, double> l1;
  for (const auto* r : {&toy.full(), &toy.bbox(), &toy.no_mask(), &toy.no_style(), &toy.no_bmr()}) {
    c.expect(r->error.empty(), r->name + " trains: " + r->error);
    if (!r->error.empty()) continue;
    std::vector<Image> ys;
    for (auto& p : toy.predict_protocol(*r)) ys.push_back(std::move(p.y));
    reports.push_back(score_predictions(r->name, ys, targets, ex));
    l1[r->name] = reports.back().l1;
    c.expect(std::isfinite(reports.back().l1) && std::isfinite(reports.back().fid), r->name + " report finite");
  }
  json j = {{"extractor_accuracy", ex.accuracy(toy.held())}, {"methods", json::array()}};
  for (const auto& r : reports) j["methods"].push_back(r.to_json());
  write_file_atomic(toy.workdir() / "report.json", j.dump(2));
  const auto table = render_table(reports);
  write_file_atomic(toy.workdir() / "table.txt", table);
  std::cout << table;
  if (l1.count("full") && l1.count("bbox_mask")) {
    c.expect(l1["full"] <= l1["bbox_mask"],
             "full L1 " + fmt(l1["full"]) + " <= bbox L1 " + fmt(l1["bbox_mask"]));
  }
  std::ostringstream s;
  for (const auto& [k, v] : l1) s << k << " L1 " << fmt(v) << " ";
  return c.outcome(s.str());
}

Outcome service_contract(ToyExperiment& toy, const fs::path& fixtures) {
  const auto& full = toy.full();
  if (!full.error.empty()) return {false, "full run failed: " + full.error};
  Checks c;
  ServerConfig scfg;
  scfg.port = 0;
  EditService svc(scfg);
  svc.set_model(std::make_shared<ModelHandle>(full.config, full.params, "toy_full", 0));
  HttpServer server(svc);
  const int port = server.bind();
  if (port <= 0) return {false, "could not bind a port"};
  std::thread th([&] { server.listen(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  auto b64_file = [](const fs::path& p) {
    const auto bytes = read_file(p);
    return base64_encode(std::string(bytes.begin(), bytes.end()));
  };
  auto decode = [](const std::string& s) {
    const auto raw = base64_decode(s);
    return decode_image(Bytes(raw.begin(), raw.end()));
  };
  auto post = [&](const json& body) { return client.Post("/v1/edit", body.dump(), "application/json"); };

  const auto image = load_image(fixtures / "request_image.png");
  const auto strokes = json::parse(slurp(fixtures / "request_strokes.json"));
  json body = {{"image_b64", b64_file(fixtures / "request_image.png")},
               {"strokes", strokes},
               {"options", {{"return_mask", true}, {"return_intermediate", true}}}};
  const auto res = post(body);
  c.expect(res && res->status == 200, "golden request returns 200");
  double worst_local = 0.0;
  std::size_t local_pixels = 0;
  auto check_locality = [&](const Image& x, const Image& out, const Image& mask_rgb) {
    for (int y = 0; y < x.height(); ++y) {
      for (int xx = 0; xx < x.width(); ++xx) {
        if (mask_rgb.at(y, xx, 0) >= 0.02f) continue;
        ++local_pixels;
        for (int ch = 0; ch < 3; ++ch) worst_local = std::max(worst_local, double(std::abs(out.at(y, xx, ch) - x.at(y, xx, ch))));
      }
    }
  };
  if (res && res->status == 200) {
    const auto j = json::parse(res->body);
    const auto out = decode(j["result"]);
    c.expect(out.height() == image.height() && out.width() == image.width(), "result has the request size");
    c.expect(j["width"] == image.width() && j["height"] == image.height(), "reported size");
    const auto mask = decode(j["mask"]);
    c.expect(mask.same_size(image), "mask has the request size");
    c.expect(decode(j["y1"]).same_size(image), "y1 has the request size");
    EditRequest req;
    req.image = image;
    req.strokes = strokes_from_json(strokes);
    const auto direct = svc.model()->edit(req);
    const auto png = encode_png(direct.result);
    c.expect(j["result"] == base64_encode(std::string(png.begin(), png.end())), "HTTP result equals in-process edit");
    check_locality(image, out, mask);
  }
  json dual = body;
  dual["sketch_b64"] = b64_file(fixtures / "request_sketch.png");
  const auto d = post(dual);
  c.expect(d && d->status == 400, "strokes + sketch returns 400");
  if (d) c.expect(json::parse(d->body)["error"].contains("message"), "400 body has an error message");
  json sk = {{"image_b64", b64_file(fixtures / "request_image.png")},
             {"sketch_b64", b64_file(fixtures / "request_sketch.png")},
             {"options", {{"return_mask", true}}}};
  const auto sres = post(sk);
  c.expect(sres && sres->status == 200, "sketch request returns 200");
  if (sres && sres->status == 200) {
    const auto j = json::parse(sres->body);
    check_locality(image, decode(j["result"]), decode(j["mask"]));
  }
  const auto health = client.Get("/v1/health");
  c.expect(health && health->status == 200 && json::parse(health->body)["model_loaded"] == true, "health");

  // Locality on held-out images at the model resolution.
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& s = toy.eval()[i];
    const auto png = encode_png(s.x);
    const auto spng = encode_png(s.fc);
    json b = {{"image_b64", base64_encode(std::string(png.begin(), png.end()))},
              {"sketch_b64", base64_encode(std::string(spng.begin(), spng.end()))},
              {"options", {{"return_mask", true}}}};
    const auto r = post(b);
    c.expect(r && r->status == 200, "held-out request " + std::to_string(i));
    if (!r || r->status != 200) continue;
    const auto j = json::parse(r->body);
    check_locality(decode_image(png), decode(j["result"]), decode(j["mask"]));
  }
  c.expect(worst_local < 0.02, "pixels with m < 0.02 change by " + fmt(worst_local) + " < 0.02");
  server.stop();
  th.join();
  return c.outcome(std::to_string(local_pixels) + " low-mask pixels, max change " + fmt(worst_local));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketchedit acceptance suite"};
  ToyOptions toy_opt;
  toy_opt.workdir = "acceptance_work";
  fs::path fixtures = SKETCHEDIT_FIXTURES_DIR;
  std::vector<std::string> only, known;
  app.add_option("--workdir", toy_opt.workdir, "Cache directory for toy checkpoints and reports");
  app.add_option("--steps", toy_opt.steps, "Training steps for the full, no-BMR and bounding-box runs");
  app.add_option("--ablation-steps", toy_opt.ablation_steps, "Training steps for the no-mask and no-style runs");
  app.add_option("--lr", toy_opt.lr, "Learning rate of both players in the toy runs");
  app.add_option("--threads", toy_opt.threads, "Intra-op threads");
  app.add_option("--fixtures", fixtures, "Service fixture directory");
  app.add_option("--only", only, "Run only the named criteria");
  app.add_option("--known-failure", known,
                 "Criteria whose failure is still printed as FAIL but does not set the exit code");
  CLI11_PARSE(app, argc, argv);
  at::set_num_threads(toy_opt.threads);

  std::optional<ToyExperiment> toy;
  auto toy_ref = [&]() -> ToyExperiment& {
    if (!toy) toy.emplace(toy_opt);
    return *toy;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"identity_suite", identity_suite},
      {"metric_oracles", metric_oracles},
      {"loss_oracles", loss_oracles},
      {"gradient_check", gradient_check},
      {"warping_oracle", warping_oracle},
      {"toy_training", [&] { return toy_training(toy_ref()); }},
      {"ablations", [&] { return ablations(toy_ref()); }},
      {"service_contract", [&] { return service_contract(toy_ref(), fixtures); }},
  };

  auto is_known = [&](const std::string& name) {
    return std::find(known.begin(), known.end(), name) != known.end();
  };
  std::ostringstream report;
  auto emit = [&](const std::string& line) {
    std::cout << line << std::endl;
    report << line << "\n";
  };
  int failed = 0, failed_known = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++(is_known(name) ? failed_known : failed);
    emit(std::string(o.pass ? "PASS " : "FAIL ") + name + " [" + fmt(seconds_since(t0), 1) + " s] " + o.detail +
         (!o.pass && is_known(name) ? " (known failure)" : ""));
  }
  if (failed + failed_known == 0) {
    emit("all criteria passed");
  } else {
    emit(std::to_string(failed + failed_known) + " criteria failed, " + std::to_string(failed_known) +
         " of them known");
  }
  fs::create_directories(toy_opt.workdir);
  write_file_atomic(toy_opt.workdir / "acceptance_report.txt", report.str());
  return failed == 0 ? 0 : 1;
}
