#include "sketchedit/warp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

namespace sketchedit {

namespace {

constexpr int kMaxAttempts = 1000;
constexpr double kMinSubArea = 0.5;  // px^2, smallest triangle created by a split

// Twice the signed area of (a, b, c); positive when counter-clockwise in y-down.
double cross(const Point& a, const Point& b, const Point& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

template <int C>
void warp_raster(const WarpField& f, const Raster<C>& src, Raster<C>& dst, Interp mode) {
  const int h = src.height();
  const int w = src.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float sx = std::clamp(static_cast<float>(x) + f.at(y, x, 0), 0.0f, static_cast<float>(w - 1));
      const float sy = std::clamp(static_cast<float>(y) + f.at(y, x, 1), 0.0f, static_cast<float>(h - 1));
      if (mode == Interp::kNearest) {
        const int ix = std::clamp(static_cast<int>(std::lround(sx)), 0, w - 1);
        const int iy = std::clamp(static_cast<int>(std::lround(sy)), 0, h - 1);
        for (int c = 0; c < C; ++c) dst.at(y, x, c) = src.at(iy, ix, c);
        continue;
      }
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const float wx = sx - static_cast<float>(x0);
      const float wy = sy - static_cast<float>(y0);
      if (wx == 0.0f && wy == 0.0f) {
        for (int c = 0; c < C; ++c) dst.at(y, x, c) = src.at(y0, x0, c);
        continue;
      }
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      for (int c = 0; c < C; ++c) {
        const float top = src.at(y0, x0, c) * (1.0f - wx) + src.at(y0, x1, c) * wx;
        const float bot = src.at(y1, x0, c) * (1.0f - wx) + src.at(y1, x1, c) * wx;
        dst.at(y, x, c) = top * (1.0f - wy) + bot * wy;
      }
    }
  }
}

}  // namespace

Mask RegionSpec::to_mask() const {
  Mask m(image_height, image_width, 0.0f);
  for (int y = std::max(0, y0); y <= std::min(y1, image_height - 1); ++y) {
    for (int x = std::max(0, x0); x <= std::min(x1, image_width - 1); ++x) m.at(y, x) = 1.0f;
  }
  return m;
}

RegionSpec RegionSpec::full(int height, int width) {
  return RegionSpec{height, width, 0, 0, width - 1, height - 1};
}

void WarpConfig::validate() const {
  if (!(min_area_fraction > 0.0) || !(max_area_fraction <= 0.5) ||
      min_area_fraction > max_area_fraction) {
    throw ConfigError("warp area fraction range must satisfy 0 < min <= max <= 0.5");
  }
  if (min_interior < 1 || max_interior < min_interior) {
    throw ConfigError("warp interior vertex range must satisfy 1 <= min <= max");
  }
  if (!(max_displacement_fraction >= 0.0) || !std::isfinite(max_displacement_fraction)) {
    throw ConfigError("warp max displacement fraction must be >= 0");
  }
}

void DropoutConfig::validate() const {
  if (min_count < 0 || max_count < min_count) {
    throw ConfigError("dropout count range must satisfy 0 <= min <= max");
  }
  if (!(min_fraction > 0.0) || !(max_fraction <= 1.0) || min_fraction > max_fraction) {
    throw ConfigError("dropout size range must satisfy 0 < min <= max <= 1");
  }
}

double TriMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles.at(t);
  return 0.5 * cross(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

double WarpField::max_magnitude() const {
  double best = 0.0;
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) best = std::max(best, std::hypot(static_cast<double>(at(y, x, 0)), static_cast<double>(at(y, x, 1))));
  }
  return best;
}

bool WarpField::is_zero() const {
  return std::all_of(values().begin(), values().end(), [](float v) { return v == 0.0f; });
}

RegionSpec sample_region(int height, int width, Rng& rng, const WarpConfig& cfg) {
  cfg.validate();
  if (height < kMinImageSide || width < kMinImageSide) {
    throw DimensionError("image too small to host a warp region");
  }
  const double total = static_cast<double>(height) * width;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const double area = rng.uniform(cfg.min_area_fraction, cfg.max_area_fraction) * total;
    const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
    const int pw = static_cast<int>(std::lround(std::sqrt(area * aspect)));
    if (pw < 5 || pw > width - 2) continue;
    const int ph = static_cast<int>(std::lround(area / pw));
    if (ph < 5 || ph > height - 2) continue;
    const double frac = pw * static_cast<double>(ph) / total;
    if (frac < cfg.min_area_fraction || frac > cfg.max_area_fraction) continue;
    RegionSpec r;
    r.image_height = height;
    r.image_width = width;
    r.x0 = rng.uniform_int(1, width - 1 - pw);
    r.y0 = rng.uniform_int(1, height - 1 - ph);
    r.x1 = r.x0 + pw - 1;
    r.y1 = r.y0 + ph - 1;
    return r;
  }
  throw ConfigError("no region of the configured area fits a " + std::to_string(height) + "x" +
                    std::to_string(width) + " image");
}

TriMesh build_mesh(const RegionSpec& region, int n_interior, Rng& rng) {
  if (n_interior < 1) throw ConfigError("build_mesh needs at least one interior vertex");
  const int h = region.image_height;
  const int w = region.image_width;
  if (region.x0 < 1 || region.y0 < 1 || region.x1 > w - 2 || region.y1 > h - 2) {
    throw DataError("region must keep a 1 px margin from the image border");
  }
  if (region.x1 - region.x0 < 4 || region.y1 - region.y0 < 4) {
    throw DataError("region too small to host interior vertices");
  }

  TriMesh mesh;
  const std::array<double, 4> xs{0.0, double(region.x0), double(region.x1), double(w - 1)};
  const std::array<double, 4> ys{0.0, double(region.y0), double(region.y1), double(h - 1)};
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) mesh.vertices.push_back({xs[i], ys[j]});
  }
  auto id = [](int i, int j) { return j * 4 + i; };
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) {
      if (i == 1 && j == 1) continue;
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  }
  const std::size_t first_region_tri = mesh.triangles.size();

  const double mx = std::max(1.0, 0.2 * (region.x1 - region.x0));
  const double my = std::max(1.0, 0.2 * (region.y1 - region.y0));
  auto sample_point = [&] {
    return Point{rng.uniform(region.x0 + mx, region.x1 - mx), rng.uniform(region.y0 + my, region.y1 - my)};
  };

  // First interior vertex fans to the four region corners.
  const Point first = sample_point();
  const int p0 = static_cast<int>(mesh.vertices.size());
  mesh.vertices.push_back(first);
  mesh.interior.push_back(p0);
  const int tl = id(1, 1), tr = id(2, 1), br = id(2, 2), bl = id(1, 2);
  mesh.triangles.push_back({tl, tr, p0});
  mesh.triangles.push_back({tr, br, p0});
  mesh.triangles.push_back({br, bl, p0});
  mesh.triangles.push_back({bl, tl, p0});

  for (int k = 1; k < n_interior; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const Point q = sample_point();
      for (std::size_t t = first_region_tri; t < mesh.triangles.size(); ++t) {
        const auto [a, b, c] = mesh.triangles[t];
        const Point& pa = mesh.vertices[a];
        const Point& pb = mesh.vertices[b];
        const Point& pc = mesh.vertices[c];
        const double s0 = cross(pa, pb, q), s1 = cross(pb, pc, q), s2 = cross(pc, pa, q);
        if (s0 <= 0.0 || s1 <= 0.0 || s2 <= 0.0) continue;
        if (std::min({s0, s1, s2}) * 0.5 < kMinSubArea) break;
        const int qi = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(q);
        mesh.interior.push_back(qi);
        mesh.triangles[t] = {a, b, qi};
        mesh.triangles.push_back({b, c, qi});
        mesh.triangles.push_back({c, a, qi});
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw DataError("region too small to host " + std::to_string(n_interior) + " interior vertices");
    }
  }
  return mesh;
}

double max_displacement_for(const RegionSpec& region, const WarpConfig& cfg) {
  return cfg.max_displacement_fraction *
         std::hypot(static_cast<double>(region.x1 - region.x0), static_cast<double>(region.y1 - region.y0));
}

std::vector<Point> sample_displacements(const TriMesh& mesh, double max_displacement, Rng& rng) {
  std::vector<Point> out;
  out.reserve(mesh.interior.size());
  for (std::size_t i = 0; i < mesh.interior.size(); ++i) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double mag = rng.uniform(0.0, max_displacement);
    out.push_back({mag * std::cos(angle), mag * std::sin(angle)});
  }
  return out;
}

WarpField make_warp_field(const TriMesh& mesh, const std::vector<Point>& displacements, int height,
                          int width, double max_displacement) {
  if (displacements.size() != mesh.interior.size()) {
    throw DimensionError("expected " + std::to_string(mesh.interior.size()) +
                         " displacements, got " + std::to_string(displacements.size()));
  }
  std::vector<Point> disp(mesh.vertices.size(), Point{0.0, 0.0});
  for (std::size_t i = 0; i < displacements.size(); ++i) {
    Point d = displacements[i];
    const double len = std::hypot(d.x, d.y);
    if (len > max_displacement && len > 0.0) {
      const double s = max_displacement / len;
      d = {d.x * s, d.y * s};
    }
    disp[mesh.interior[i]] = d;
  }

  WarpField field(height, width, 0.0f);
  for (const auto& tri : mesh.triangles) {
    const bool moving = std::any_of(tri.begin(), tri.end(), [&](int v) {
      return disp[v].x != 0.0 || disp[v].y != 0.0;
    });
    if (!moving) continue;
    const Point& a = mesh.vertices[tri[0]];
    const Point& b = mesh.vertices[tri[1]];
    const Point& c = mesh.vertices[tri[2]];
    const double area2 = cross(a, b, c);
    if (area2 <= 0.0) throw DataError("degenerate mesh triangle");
    const int bx0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}))));
    const int bx1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}))));
    const int by0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}))));
    const int by1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}))));
    for (int y = by0; y <= by1; ++y) {
      for (int x = bx0; x <= bx1; ++x) {
        const Point p{double(x), double(y)};
        // Each weight is the sub-triangle opposite its vertex, so a pixel on an
        // edge between fixed vertices gets an exactly zero moving weight.
        const double la = cross(p, b, c) / area2;
        const double lb = cross(a, p, c) / area2;
        const double lc = cross(a, b, p) / area2;
        constexpr double eps = -1e-12;
        if (la < eps || lb < eps || lc < eps) continue;
        const double dx = la * disp[tri[0]].x + lb * disp[tri[1]].x + lc * disp[tri[2]].x;
        const double dy = la * disp[tri[0]].y + lb * disp[tri[1]].y + lc * disp[tri[2]].y;
        field.at(y, x, 0) = static_cast<float>(dx);
        field.at(y, x, 1) = static_cast<float>(dy);
      }
    }
  }
  return field;
}

Image apply_warp(const WarpField& f, const Image& img, Interp mode) {
  require_same_size(f, img, "apply_warp");
  Image out(img.height(), img.width());
  warp_raster(f, img, out, mode);
  return out;
}

Mask apply_warp(const WarpField& f, const Mask& m, Interp mode) {
  require_same_size(f, m, "apply_warp");
  Mask out(m.height(), m.width());
  warp_raster(f, m, out, mode);
  return out;
}

SketchMap apply_warp(const WarpField& f, const SketchMap& s, Interp mode) {
  require_same_size(f, s, "apply_warp");
  SketchMap out(s.height(), s.width(), s.binary() && mode == Interp::kNearest);
  warp_raster(f, s, out, mode);
  return out;
}

std::vector<PixelRect> sample_dropout_rects(Rng& rng, const DropoutConfig& cfg, int height, int width,
                                            const std::optional<RegionSpec>& reference) {
  cfg.validate();
  const RegionSpec ref = reference.value_or(RegionSpec::full(height, width));
  const int rw = ref.pixel_width();
  const int rh = ref.pixel_height();
  const int count = rng.uniform_int(cfg.min_count, cfg.max_count);
  std::vector<PixelRect> rects;
  for (int i = 0; i < count; ++i) {
    const double area = rng.uniform(cfg.min_fraction, cfg.max_fraction) * rw * rh;
    const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
    const int w = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, rw);
    const int h = std::clamp(static_cast<int>(std::lround(area / w)), 1, rh);
    const int x0 = rng.uniform_int(ref.x0, ref.x0 + rw - w);
    const int y0 = rng.uniform_int(ref.y0, ref.y0 + rh - h);
    rects.push_back({x0, y0, x0 + w, y0 + h});
  }
  return rects;
}

Image apply_dropout(const Image& img, const std::vector<PixelRect>& rects) {
  Image out = img;
  for (const auto& r : rects) {
    for (int y = std::max(0, r.y0); y < std::min(r.y1, img.height()); ++y) {
      for (int x = std::max(0, r.x0); x < std::min(r.x1, img.width()); ++x) {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = 0.0f;
      }
    }
  }
  return out;
}

Image regional_dropout(const Image& x_sty, Rng& rng, const DropoutConfig& cfg,
                       const std::optional<RegionSpec>& reference) {
  return apply_dropout(x_sty, sample_dropout_rects(rng, cfg, x_sty.height(), x_sty.width(), reference));
}

nlohmann::json mesh_to_json(const TriMesh& mesh, const RegionSpec& region) {
  nlohmann::json verts = nlohmann::json::array();
  for (const auto& v : mesh.vertices) verts.push_back({v.x, v.y});
  return {
      {"region", {{"x0", region.x0}, {"y0", region.y0}, {"x1", region.x1}, {"y1", region.y1},
                  {"image_height", region.image_height}, {"image_width", region.image_width}}},
      {"vertices", std::move(verts)},
      {"triangles", mesh.triangles},
      {"interior", mesh.interior},
  };
}

Image flow_visualization(const WarpField& f, double scale) {
  if (scale <= 0.0) scale = std::max(f.max_magnitude(), 1e-12);
  Image out(f.height(), f.width());
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      const double dx = f.at(y, x, 0);
      const double dy = f.at(y, x, 1);
      const double sat = std::min(1.0, std::hypot(dx, dy) / scale);
      double hue = std::atan2(dy, dx) / (2.0 * std::numbers::pi);
      if (hue < 0.0) hue += 1.0;
      // HSV with value 1.
      const double h6 = hue * 6.0;
      const int sector = static_cast<int>(h6) % 6;
      const double frac = h6 - std::floor(h6);
      const double p = 1.0 - sat, q = 1.0 - sat * frac, t = 1.0 - sat * (1.0 - frac);
      std::array<double, 3> rgb{};
      switch (sector) {
        case 0: rgb = {1.0, t, p}; break;
        case 1: rgb = {q, 1.0, p}; break;
        case 2: rgb = {p, 1.0, t}; break;
        case 3: rgb = {p, q, 1.0}; break;
        case 4: rgb = {t, p, 1.0}; break;
        default: rgb = {1.0, p, q}; break;
      }
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<float>(rgb[c]);
    }
  }
  return out;
}

}  // namespace sketchedit
