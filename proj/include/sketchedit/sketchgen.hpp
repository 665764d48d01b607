#pragma once

#include <cstdint>

#include "sketchedit/raster.hpp"
#include "sketchedit/rng.hpp"
#include "sketchedit/warp.hpp"

namespace sketchedit {

/// Classical edge detection settings. Thresholds apply to the per-pixel
/// derivative magnitude of [0, 1] images (a unit step gives 0.5).
struct EdgeConfig {
  double low = 0.1;
  double high = 0.2;
  /// Gaussian pre-smoothing radius in px; 0 disables smoothing.
  int smoothing_radius = 1;

  void validate() const;
};

/// Gradient magnitude, non-maximum suppression and hysteresis. The strongest
/// color channel defines the gradient at each pixel.
SketchMap extract_edges(const Image& img, const EdgeConfig& cfg = {});

/// Zeros every sketch pixel outside the region.
SketchMap partial_sketch(const SketchMap& edges, const RegionSpec& region);

struct PairConfig {
  WarpConfig warp;
  EdgeConfig edges;
};

struct TrainingPair {
  Image x_warped;        // f(x)
  SketchMap sketch;      // c: partial edges of the original image
  SketchMap sketch_warped;  // f(c)
  WarpField field;       // f
  RegionSpec region;
};

/// Samples a region, warps it and extracts the sketch of the original image.
TrainingPair make_training_pair(const Image& x, Rng& rng, const PairConfig& cfg);

}  // namespace sketchedit
