#include "sketchedit/evaluation.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "sketchedit/tensor_bridge.hpp"

namespace sketchedit {

std::vector<EvalSample> make_eval_set(const std::vector<Image>& images, std::uint64_t seed, const PairConfig& cfg) {
  std::vector<EvalSample> out;
  out.reserve(images.size());
  Rng base(seed);
  for (std::size_t i = 0; i < images.size(); ++i) {
    Rng r = base.split(i);
    auto pair = make_training_pair(images[i], r, cfg);
    out.push_back({images[i], std::move(pair.x_warped), std::move(pair.sketch), std::move(pair.sketch_warped),
                   pair.region});
  }
  return out;
}

std::vector<Prediction> predict(const ModelParams& p, const AblationConfig& ablation, const std::vector<Image>& images,
                                const std::vector<SketchMap>& sketches, int batch_size) {
  if (images.size() != sketches.size()) throw DimensionError("predict: image and sketch counts differ");
  torch::NoGradGuard guard;
  std::vector<Prediction> out;
  out.reserve(images.size());
  const auto dtype = p.dtype();
  for (std::size_t i = 0; i < images.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(images.size(), i + static_cast<std::size_t>(batch_size));
    const std::vector<Image> xs(images.begin() + static_cast<std::ptrdiff_t>(i),
                                images.begin() + static_cast<std::ptrdiff_t>(end));
    const std::vector<SketchMap> cs(sketches.begin() + static_cast<std::ptrdiff_t>(i),
                                    sketches.begin() + static_cast<std::ptrdiff_t>(end));
    const auto pass = run_model(p, stack_tensors(xs, dtype), stack_tensors(cs, dtype), ablation, false);
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const auto n = static_cast<int64_t>(j);
      out.push_back({image_from_tensor(pass.y, n), mask_from_tensor(pass.forward.mask, n)});
    }
  }
  return out;
}

nlohmann::json MethodReport::to_json() const {
  return {{"method", method}, {"count", count}, {"l1", l1},   {"psnr", psnr},
          {"ssim", ssim},     {"fid", fid},     {"sl1", sl1}, {"sl2", sl2}};
}

MethodReport score_predictions(const std::string& method, const std::vector<Image>& predictions,
                               const std::vector<Image>& targets, const FeatureExtractor& extractor) {
  if (predictions.size() != targets.size()) {
    throw DimensionError("score_predictions: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
  }
  MethodReport r;
  r.method = method;
  r.count = static_cast<std::int64_t>(predictions.size());
  if (predictions.empty()) return r;
  std::vector<Eigen::VectorXd> ep, et;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    r.l1 += l1_error(predictions[i], targets[i]);
    r.psnr += psnr(predictions[i], targets[i]);
    r.ssim += ssim(predictions[i], targets[i]);
    const auto sl = style_loss(predictions[i], targets[i], extractor);
    r.sl1 += sl.sl1;
    r.sl2 += sl.sl2;
    ep.push_back(extractor.embedding(predictions[i]));
    et.push_back(extractor.embedding(targets[i]));
  }
  const auto n = static_cast<double>(predictions.size());
  r.l1 /= n;
  r.psnr /= n;
  r.ssim /= n;
  r.sl1 /= n;
  r.sl2 /= n;
  r.fid = predictions.size() >= 2 ? fid(feature_stats(ep), feature_stats(et)) : 0.0;
  return r;
}

std::string render_table(const std::vector<MethodReport>& reports) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %10s %9s %8s %10s %11s %11s\n", "Method", "L1", "PSNR", "SSIM", "FID",
                "SL1", "SL2");
  out += line;
  out += std::string(85, '-') + "\n";
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-20s %10.4f %9.2f %8.4f %10.4f %11.4e %11.4e\n", r.method.c_str(), r.l1,
                  r.psnr, r.ssim, r.fid, r.sl1, r.sl2);
    out += line;
  }
  return out;
}

double mean_mask_outside(const Mask& m, const SketchMap& sketch, double radius) {
  require_same_size(m, sketch, "mean_mask_outside");
  const int h = m.height(), w = m.width();
  const int r = static_cast<int>(std::ceil(radius));
  std::vector<char> near(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (sketch.at(y, x) < 0.5f) continue;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= h || nx >= w || dx * dx + dy * dy > radius * radius) continue;
          near[static_cast<std::size_t>(ny) * w + nx] = 1;
        }
      }
    }
  }
  double s = 0.0;
  std::int64_t n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (near[static_cast<std::size_t>(y) * w + x]) continue;
      s += m.at(y, x);
      ++n;
    }
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

double mask_iou(const Mask& m, const RegionSpec& region, double threshold) {
  if (m.height() != region.image_height || m.width() != region.image_width) {
    throw DimensionError("mask_iou: region does not match the mask size");
  }
  std::int64_t inter = 0, uni = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const bool a = m.at(y, x) > threshold;
      const bool b = region.contains(x, y);
      inter += (a && b) ? 1 : 0;
      uni += (a || b) ? 1 : 0;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double mean_value(const Raster<1>& m) {
  double s = 0.0;
  for (float v : m.values()) s += v;
  return s / static_cast<double>(m.pixel_count());
}

}  // namespace sketchedit
