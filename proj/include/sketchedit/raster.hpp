#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sketchedit/error.hpp"

namespace sketchedit {

/// Smallest side length accepted for an Image.
inline constexpr int kMinImageSide = 8;

/// Dense H x W x C raster of floats, channel-last, row-major, origin top-left.
template <int C>
class Raster {
 public:
  static constexpr int kChannels = C;

  Raster() = default;

  Raster(int height, int width, float fill = 0.0f)
      : height_(height), width_(width) {
    check_shape(height, width);
    data_.assign(static_cast<std::size_t>(height) * width * C, fill);
  }

  Raster(int height, int width, std::vector<float> data)
      : height_(height), width_(width), data_(std::move(data)) {
    check_shape(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * width * C) {
      throw DimensionError("raster data length " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(height) + "x" +
                           std::to_string(width) + "x" + std::to_string(C));
    }
  }

  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int channels() const noexcept { return C; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }

  [[nodiscard]] float& at(int y, int x, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * C + c];
  }
  [[nodiscard]] float at(int y, int x, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * C + c];
  }

  [[nodiscard]] std::span<float> values() noexcept { return data_; }
  [[nodiscard]] std::span<const float> values() const noexcept { return data_; }

  template <int D>
  [[nodiscard]] bool same_size(const Raster<D>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  /// True when every value is finite and inside [0, 1].
  [[nodiscard]] bool in_unit_range() const noexcept {
    for (float v : data_) {
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) return false;
    }
    return true;
  }

  friend bool operator==(const Raster& a, const Raster& b) = default;

 private:
  static void check_shape(int height, int width) {
    if (height <= 0 || width <= 0) {
      throw DimensionError("raster dimensions must be positive, got " +
                           std::to_string(height) + "x" + std::to_string(width));
    }
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// RGB image with values in [0, 1]; both sides at least kMinImageSide.
class Image : public Raster<3> {
 public:
  Image() = default;
  Image(int height, int width, float fill = 0.0f) : Raster(height, width, fill) {
    check_min_side();
  }
  Image(int height, int width, std::vector<float> data)
      : Raster(height, width, std::move(data)) {
    check_min_side();
  }

 private:
  void check_min_side() const {
    if (height() < kMinImageSide || width() < kMinImageSide) {
      throw DimensionError("image sides must be at least " + std::to_string(kMinImageSide));
    }
  }
};

/// Soft per-pixel modification likelihood in [0, 1].
class Mask : public Raster<1> {
 public:
  using Raster::Raster;
};

/// Monochrome sketch. `binary()` marks maps whose values are exactly 0 or 1.
class SketchMap : public Raster<1> {
 public:
  SketchMap() = default;
  SketchMap(int height, int width, bool binary = true)
      : Raster(height, width, 0.0f), binary_(binary) {}
  SketchMap(int height, int width, std::vector<float> data, bool binary)
      : Raster(height, width, std::move(data)), binary_(binary) {}

  [[nodiscard]] bool binary() const noexcept { return binary_; }

  /// Count of pixels with a nonzero value.
  [[nodiscard]] std::size_t count_nonzero() const noexcept {
    std::size_t n = 0;
    for (float v : values()) n += v != 0.0f ? 1 : 0;
    return n;
  }

  /// Sets every value to 1 where it is >= threshold and 0 elsewhere.
  [[nodiscard]] SketchMap thresholded(float threshold = 0.5f) const {
    SketchMap out(height(), width(), true);
    auto src = values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? 1.0f : 0.0f;
    return out;
  }

  friend bool operator==(const SketchMap& a, const SketchMap& b) = default;

 private:
  bool binary_ = true;
};

template <int A, int B>
void require_same_size(const Raster<A>& a, const Raster<B>& b, const char* what) {
  if (!a.same_size(b)) {
    throw DimensionError(std::string(what) + ": size mismatch " + std::to_string(a.height()) +
                         "x" + std::to_string(a.width()) + " vs " +
                         std::to_string(b.height()) + "x" + std::to_string(b.width()));
  }
}

}  // namespace sketchedit
