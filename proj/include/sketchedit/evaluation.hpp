#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sketchedit/metrics.hpp"
#include "sketchedit/networks.hpp"
#include "sketchedit/sketchgen.hpp"
#include "sketchedit/training.hpp"

namespace sketchedit {

/// Synthetic evaluation sample: the model sees (fx, c) and is scored against x.
struct EvalSample {
  Image x;
  Image fx;
  SketchMap c;   // edges of x inside the region
  SketchMap fc;  // c under the same warp
  RegionSpec region;
};

/// One warped pair per image; sample i uses Rng(seed).split(i).
std::vector<EvalSample> make_eval_set(const std::vector<Image>& images, std::uint64_t seed, const PairConfig& cfg);

struct Prediction {
  Image y;
  Mask m;
};

/// Inference pass (no aux head, no dropout) in batches.
std::vector<Prediction> predict(const ModelParams& p, const AblationConfig& ablation, const std::vector<Image>& images,
                                const std::vector<SketchMap>& sketches, int batch_size = 32);

struct MethodReport {
  std::string method;
  std::int64_t count = 0;
  double l1 = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double fid = 0.0;
  double sl1 = 0.0;
  double sl2 = 0.0;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Per-image means of L1, PSNR and SSIM; FID between the sets of embeddings;
/// style losses averaged per image pair.
MethodReport score_predictions(const std::string& method, const std::vector<Image>& predictions,
                               const std::vector<Image>& targets, const FeatureExtractor& extractor);

/// Plain-text comparison table, one row per method.
std::string render_table(const std::vector<MethodReport>& reports);

/// Mean of m over pixels farther than `radius` (Euclidean) from every sketch pixel.
/// Returns 0 when no such pixel exists.
double mean_mask_outside(const Mask& m, const SketchMap& sketch, double radius);

/// IoU between {m > threshold} and the region rectangle.
double mask_iou(const Mask& m, const RegionSpec& region, double threshold = 0.5);

double mean_value(const Raster<1>& m);

}  // namespace sketchedit
