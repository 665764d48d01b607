#include "sketchedit/imaging.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace sketchedit {

void validate(const StrokeSet& strokes) {
  for (std::size_t i = 0; i < strokes.strokes.size(); ++i) {
    const auto& s = strokes.strokes[i];
    if (s.points.empty()) {
      throw ConfigError("stroke " + std::to_string(i) + " has no points");
    }
    if (!(s.width >= 1.0) || !std::isfinite(s.width)) {
      throw ConfigError("stroke " + std::to_string(i) + " width must be >= 1");
    }
    for (const auto& p : s.points) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw ConfigError("stroke " + std::to_string(i) + " has a non-finite point");
      }
    }
  }
}

StrokeSet strokes_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("strokes") || !j["strokes"].is_array()) {
    throw DataError("stroke set must be an object with a \"strokes\" array");
  }
  StrokeSet out;
  for (const auto& js : j["strokes"]) {
    if (!js.is_object() || !js.contains("points") || !js["points"].is_array()) {
      throw DataError("each stroke needs a \"points\" array");
    }
    Stroke s;
    s.width = 1.0;
    if (js.contains("width")) {
      if (!js["width"].is_number()) throw DataError("stroke width must be a number");
      s.width = js["width"].get<double>();
    }
    for (const auto& jp : js["points"]) {
      if (!jp.is_array() || jp.size() != 2 || !jp[0].is_number() || !jp[1].is_number()) {
        throw DataError("stroke points must be [x, y] number pairs");
      }
      s.points.push_back({jp[0].get<double>(), jp[1].get<double>()});
    }
    out.strokes.push_back(std::move(s));
  }
  try {
    validate(out);
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  return out;
}

StrokeSet strokes_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("stroke JSON does not parse: ") + e.what());
  }
  return strokes_from_json(j);
}

nlohmann::json to_json(const StrokeSet& strokes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : strokes.strokes) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : s.points) pts.push_back({p.x, p.y});
    arr.push_back({{"points", std::move(pts)}, {"width", s.width}});
  }
  return {{"strokes", std::move(arr)}};
}

Image style_partial(const Image& x, const Mask& m) {
  require_same_size(x, m, "style_partial");
  Image out(x.height(), x.width());
  for (int y = 0; y < x.height(); ++y) {
    for (int c = 0; c < x.width(); ++c) {
      const float mv = m.at(y, c);
      for (int k = 0; k < 3; ++k) out.at(y, c, k) = mv * x.at(y, c, k);
    }
  }
  return out;
}

Image static_partial(const Image& x, const Mask& m) {
  require_same_size(x, m, "static_partial");
  Image out(x.height(), x.width());
  for (int y = 0; y < x.height(); ++y) {
    for (int c = 0; c < x.width(); ++c) {
      const float keep = 1.0f - m.at(y, c);
      for (int k = 0; k < 3; ++k) out.at(y, c, k) = keep * x.at(y, c, k);
    }
  }
  return out;
}

Image blend(const Image& y1, const Image& x, const Mask& m) {
  require_same_size(y1, x, "blend");
  require_same_size(x, m, "blend");
  Image out(x.height(), x.width());
  for (int y = 0; y < x.height(); ++y) {
    for (int c = 0; c < x.width(); ++c) {
      const float mv = m.at(y, c);
      for (int k = 0; k < 3; ++k) {
        const float a = y1.at(y, c, k);
        const float b = x.at(y, c, k);
        float v = a * mv + b * (1.0f - mv);
        // Rounding can step just outside [min(a,b), max(a,b)].
        v = std::clamp(v, std::min(a, b), std::max(a, b));
        out.at(y, c, k) = v;
      }
    }
  }
  return out;
}

namespace {

double segment_distance_sq(double px, double py, const Point& a, const Point& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len_sq = dx * dx + dy * dy;
  double t = 0.0;
  if (len_sq > 0.0) t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len_sq, 0.0, 1.0);
  const double ex = a.x + t * dx - px;
  const double ey = a.y + t * dy - py;
  return ex * ex + ey * ey;
}

void draw_segment(SketchMap& map, const Point& a, const Point& b, double width) {
  const double r = width / 2.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
  const int x1 = std::min(map.width() - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
  const int y1 = std::min(map.height() - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
  const double r_sq = r * r;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (segment_distance_sq(x, y, a, b) <= r_sq) map.at(y, x) = 1.0f;
    }
  }
}

}  // namespace

SketchMap rasterize_strokes(const StrokeSet& strokes, int height, int width) {
  validate(strokes);
  SketchMap map(height, width, true);
  for (const auto& s : strokes.strokes) {
    if (s.points.size() == 1) {
      draw_segment(map, s.points[0], s.points[0], s.width);
      continue;
    }
    for (std::size_t i = 0; i + 1 < s.points.size(); ++i) {
      draw_segment(map, s.points[i], s.points[i + 1], s.width);
    }
  }
  return map;
}

template <int C>
Raster<C> resize_bilinear(const Raster<C>& src, int height, int width) {
  Raster<C> out(height, width);
  const double sy = static_cast<double>(src.height()) / height;
  const double sx = static_cast<double>(src.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const float wx = static_cast<float>(fx - x0);
      for (int c = 0; c < C; ++c) {
        const float top = src.at(y0, x0, c) * (1.0f - wx) + src.at(y0, x1, c) * wx;
        const float bot = src.at(y1, x0, c) * (1.0f - wx) + src.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return out;
}

template Raster<1> resize_bilinear(const Raster<1>&, int, int);
template Raster<3> resize_bilinear(const Raster<3>&, int, int);

Image resize_bilinear(const Image& src, int height, int width) {
  auto r = resize_bilinear(static_cast<const Raster<3>&>(src), height, width);
  auto vals = r.values();
  return Image(height, width, std::vector<float>(vals.begin(), vals.end()));
}

Mask resize_bilinear(const Mask& src, int height, int width) {
  auto r = resize_bilinear(static_cast<const Raster<1>&>(src), height, width);
  auto vals = r.values();
  return Mask(height, width, std::vector<float>(vals.begin(), vals.end()));
}

Letterbox Letterbox::fit(int src_height, int src_width, int side) {
  if (src_height <= 0 || src_width <= 0 || side <= 0) {
    throw DimensionError("letterbox needs positive sizes");
  }
  Letterbox b;
  b.side = side;
  b.src_height = src_height;
  b.src_width = src_width;
  b.scale = static_cast<double>(side) / std::max(src_height, src_width);
  b.inner_height = std::clamp(static_cast<int>(std::lround(src_height * b.scale)), 1, side);
  b.inner_width = std::clamp(static_cast<int>(std::lround(src_width * b.scale)), 1, side);
  b.offset_y = (side - b.inner_height) / 2;
  b.offset_x = (side - b.inner_width) / 2;
  return b;
}

Image letterbox(const Image& src, const Letterbox& box, float pad) {
  const auto inner =
      resize_bilinear(static_cast<const Raster<3>&>(src), box.inner_height, box.inner_width);
  Image out(box.side, box.side, pad);
  for (int y = 0; y < box.inner_height; ++y) {
    for (int x = 0; x < box.inner_width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y + box.offset_y, x + box.offset_x, c) = inner.at(y, x, c);
    }
  }
  return out;
}

template <int C>
Raster<C> unletterbox(const Raster<C>& canvas, const Letterbox& box) {
  Raster<C> inner(box.inner_height, box.inner_width);
  for (int y = 0; y < box.inner_height; ++y) {
    for (int x = 0; x < box.inner_width; ++x) {
      for (int c = 0; c < C; ++c) inner.at(y, x, c) = canvas.at(y + box.offset_y, x + box.offset_x, c);
    }
  }
  return resize_bilinear(inner, box.src_height, box.src_width);
}

template Raster<1> unletterbox(const Raster<1>&, const Letterbox&);
template Raster<3> unletterbox(const Raster<3>&, const Letterbox&);

SketchMap letterbox_sketch(const SketchMap& src, const Letterbox& box) {
  if (src.height() != box.src_height || src.width() != box.src_width) {
    throw DimensionError("sketch size does not match the letterboxed image");
  }
  SketchMap out(box.side, box.side, true);
  const double inv = 1.0 / box.scale;
  for (int y = 0; y < box.inner_height; ++y) {
    const int sy0 = std::clamp(static_cast<int>(std::floor(y * inv)), 0, src.height() - 1);
    const int sy1 = std::clamp(static_cast<int>(std::ceil((y + 1) * inv)) - 1, sy0, src.height() - 1);
    for (int x = 0; x < box.inner_width; ++x) {
      const int sx0 = std::clamp(static_cast<int>(std::floor(x * inv)), 0, src.width() - 1);
      const int sx1 = std::clamp(static_cast<int>(std::ceil((x + 1) * inv)) - 1, sx0, src.width() - 1);
      float v = 0.0f;
      for (int yy = sy0; yy <= sy1 && v < 0.5f; ++yy) {
        for (int xx = sx0; xx <= sx1; ++xx) {
          if (src.at(yy, xx) >= 0.5f) {
            v = 1.0f;
            break;
          }
        }
      }
      out.at(y + box.offset_y, x + box.offset_x) = v;
    }
  }
  return out;
}

StrokeSet letterbox_strokes(const StrokeSet& src, const Letterbox& box) {
  StrokeSet out;
  for (const auto& s : src.strokes) {
    Stroke t;
    t.width = std::max(1.0, s.width * box.scale);
    for (const auto& p : s.points) {
      // Pixel centers map center-to-center.
      t.points.push_back({(p.x + 0.5) * box.scale - 0.5 + box.offset_x,
                          (p.y + 0.5) * box.scale - 0.5 + box.offset_y});
    }
    out.strokes.push_back(std::move(t));
  }
  return out;
}

}  // namespace sketchedit
