#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sketchedit/raster.hpp"

namespace sketchedit {

/// Sketch line width (px) at 64x64; scale proportionally for other sizes.
inline constexpr double kDefaultStrokeWidth = 2.0;

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Stroke {
  std::vector<Point> points;
  double width = 1.0;
  friend bool operator==(const Stroke&, const Stroke&) = default;
};

/// Vector polylines as drawn in the UI, in pixel coordinates of the target image.
struct StrokeSet {
  std::vector<Stroke> strokes;
  friend bool operator==(const StrokeSet&, const StrokeSet&) = default;
};

/// Throws ConfigError unless every stroke has a point and width >= 1.
void validate(const StrokeSet& strokes);

/// Parses {"strokes":[{"points":[[x,y],...],"width":w}]}. Throws DataError on bad input.
StrokeSet strokes_from_json(const nlohmann::json& j);
StrokeSet strokes_from_json_text(const std::string& text);
nlohmann::json to_json(const StrokeSet& strokes);

/// m * x per channel.
Image style_partial(const Image& x, const Mask& m);

/// (1 - m) * x per channel.
Image static_partial(const Image& x, const Mask& m);

/// y1 * m + x * (1 - m). Exact identity at m = 0 and m = 1.
Image blend(const Image& y1, const Image& x, const Mask& m);

/// Binary map of round-capped segments; a pixel center within width/2 of a
/// segment is set. Strokes are OR-composed, coordinates outside are clipped.
SketchMap rasterize_strokes(const StrokeSet& strokes, int height, int width);

/// Bilinear resampling with pixel-center alignment.
template <int C>
Raster<C> resize_bilinear(const Raster<C>& src, int height, int width);

Image resize_bilinear(const Image& src, int height, int width);
Mask resize_bilinear(const Mask& src, int height, int width);

/// Placement of a source image inside a square canvas of side `side`.
struct Letterbox {
  int side = 0;
  int src_height = 0;
  int src_width = 0;
  int inner_height = 0;  // scaled content size inside the canvas
  int inner_width = 0;
  int offset_y = 0;
  int offset_x = 0;
  double scale = 1.0;  // canvas px per source px

  static Letterbox fit(int src_height, int src_width, int side);
};

/// Scales `src` into the letterbox canvas; padding is filled with `pad`.
Image letterbox(const Image& src, const Letterbox& box, float pad = 0.0f);

/// Crops the content area of a canvas-sized raster and resamples it back to the source size.
template <int C>
Raster<C> unletterbox(const Raster<C>& canvas, const Letterbox& box);

/// Max-pool downsampling of a sketch raster into the letterbox canvas (thin lines survive).
SketchMap letterbox_sketch(const SketchMap& src, const Letterbox& box);

/// Maps a stroke set from source coordinates into the canvas. Widths scale too (min 1).
StrokeSet letterbox_strokes(const StrokeSet& src, const Letterbox& box);

}  // namespace sketchedit
