#pragma once

#include <array>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sketchedit/imaging.hpp"
#include "sketchedit/raster.hpp"
#include "sketchedit/rng.hpp"

namespace sketchedit {

/// Axis-aligned warp region with corners at pixel centers; covers pixels
/// x0..x1 and y0..y1 inclusive inside an image of the stored size.
struct RegionSpec {
  int image_height = 0;
  int image_width = 0;
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  [[nodiscard]] bool contains(int x, int y) const noexcept {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
  [[nodiscard]] bool strictly_inside(double x, double y) const noexcept {
    return x > x0 && x < x1 && y > y0 && y < y1;
  }
  [[nodiscard]] int pixel_width() const noexcept { return x1 - x0 + 1; }
  [[nodiscard]] int pixel_height() const noexcept { return y1 - y0 + 1; }
  [[nodiscard]] double area_fraction() const noexcept {
    return static_cast<double>(pixel_width()) * pixel_height() /
           (static_cast<double>(image_width) * image_height);
  }
  /// Binary raster, 1 inside the region.
  [[nodiscard]] Mask to_mask() const;
  /// The region covering the whole image (edges included).
  static RegionSpec full(int height, int width);

  friend bool operator==(const RegionSpec&, const RegionSpec&) = default;
};

struct WarpConfig {
  double min_area_fraction = 0.05;
  double max_area_fraction = 0.25;
  int min_interior = 1;
  int max_interior = 4;
  /// Maximum vertex displacement as a fraction of the region diagonal.
  double max_displacement_fraction = 0.10;

  /// Throws ConfigError for ranges outside (0, 0.5] or inverted bounds.
  void validate() const;
};

struct DropoutConfig {
  int min_count = 0;
  int max_count = 3;
  /// Area of each rectangle relative to the reference box.
  double min_fraction = 0.10;
  double max_fraction = 0.40;

  void validate() const;
};

struct TriMesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> interior;  // indices of movable vertices

  [[nodiscard]] double triangle_area(std::size_t t) const;  // signed, positive = counter-clockwise in y-down
};

/// Backward displacement (dx, dy) per pixel: output(p) = input(p + f(p)).
class WarpField : public Raster<2> {
 public:
  using Raster::Raster;
  [[nodiscard]] double max_magnitude() const;
  [[nodiscard]] bool is_zero() const;
};

enum class Interp { kBilinear, kNearest };

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

RegionSpec sample_region(int height, int width, Rng& rng, const WarpConfig& cfg);

/// Image corners, border grid points and region corners with `n_interior`
/// random vertices strictly inside the region. Throws DataError when the
/// region cannot host them.
TriMesh build_mesh(const RegionSpec& region, int n_interior, Rng& rng);

/// Barycentric interpolation of interior-vertex displacements. Displacements
/// longer than `max_displacement` are shortened to that length.
WarpField make_warp_field(const TriMesh& mesh, const std::vector<Point>& displacements,
                          int height, int width, double max_displacement);

/// Random displacement per interior vertex with magnitude uniform in [0, max].
std::vector<Point> sample_displacements(const TriMesh& mesh, double max_displacement, Rng& rng);

double max_displacement_for(const RegionSpec& region, const WarpConfig& cfg);

Image apply_warp(const WarpField& f, const Image& img, Interp mode = Interp::kBilinear);
Mask apply_warp(const WarpField& f, const Mask& m, Interp mode = Interp::kBilinear);
/// Nearest keeps a binary map binary; bilinear yields a soft (non-binary) map.
SketchMap apply_warp(const WarpField& f, const SketchMap& s, Interp mode = Interp::kNearest);

std::vector<PixelRect> sample_dropout_rects(Rng& rng, const DropoutConfig& cfg, int height, int width,
                                            const std::optional<RegionSpec>& reference = std::nullopt);

/// Zeros the given rectangles (clipped to the image).
Image apply_dropout(const Image& img, const std::vector<PixelRect>& rects);

Image regional_dropout(const Image& x_sty, Rng& rng, const DropoutConfig& cfg,
                       const std::optional<RegionSpec>& reference = std::nullopt);

nlohmann::json mesh_to_json(const TriMesh& mesh, const RegionSpec& region);

/// Color-wheel rendering of a flow field; magnitude normalized by `scale` (0 = field max).
Image flow_visualization(const WarpField& f, double scale = 0.0);

}  // namespace sketchedit
