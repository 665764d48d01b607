#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sketchedit/raster.hpp"
#include "sketchedit/rng.hpp"

namespace sketchedit {

/// Kind of the topmost (largest) shape; used as a classification label.
enum class ShapeKind { kTriangle = 0, kQuad = 1, kPentagon = 2, kHexagon = 3, kEllipse = 4 };
inline constexpr int kShapeKinds = 5;

struct ToySample {
  Image image;
  int label = 0;
};

/// Gradient background with 2-4 flat colored polygons or ellipses,
/// anti-aliased with 3x3 supersampling.
ToySample generate_toy_sample(Rng& rng, int resolution = 64);

/// Sample i is drawn from Rng(seed).split(i), so subsets are stable.
std::vector<ToySample> generate_toy_set(std::uint64_t seed, int count, int resolution = 64);

std::vector<Image> images_of(const std::vector<ToySample>& samples);

/// Writes toy_00000.png ... and labels.json into `dir`.
void write_toy_set(const std::filesystem::path& dir, const std::vector<ToySample>& samples);

}  // namespace sketchedit
