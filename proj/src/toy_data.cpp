#include "sketchedit/toy_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "sketchedit/image_io.hpp"

namespace sketchedit {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Color = std::array<double, 3>;

struct Shape {
  ShapeKind kind;
  double cx, cy, radius, angle, aspect;
  Color color;
  std::vector<std::array<double, 2>> verts;  // polygon kinds only, counter-clockwise

  bool contains(double x, double y) const {
    if (kind == ShapeKind::kEllipse) {
      const double dx = x - cx, dy = y - cy;
      const double u = (dx * std::cos(angle) + dy * std::sin(angle)) / radius;
      const double v = (-dx * std::sin(angle) + dy * std::cos(angle)) / (radius * aspect);
      return u * u + v * v <= 1.0;
    }
    for (std::size_t i = 0; i < verts.size(); ++i) {
      const auto& a = verts[i];
      const auto& b = verts[(i + 1) % verts.size()];
      if ((b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) < 0.0) return false;
    }
    return true;
  }
};

Color random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

double distance(const Color& a, const Color& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

Shape random_shape(Rng& rng, int res, double rmin, double rmax, const Color& avoid) {
  Shape s;
  s.kind = static_cast<ShapeKind>(rng.uniform_int(0, kShapeKinds - 1));
  s.radius = rng.uniform(rmin, rmax) * res;
  s.cx = rng.uniform(0.2, 0.8) * res;
  s.cy = rng.uniform(0.2, 0.8) * res;
  s.angle = rng.uniform(0.0, 2.0 * kPi);
  s.aspect = rng.uniform(0.6, 1.0);
  do {
    s.color = random_color(rng);
  } while (distance(s.color, avoid) < 0.35);
  if (s.kind != ShapeKind::kEllipse) {
    const int n = static_cast<int>(s.kind) + 3;
    for (int i = 0; i < n; ++i) {
      const double t = s.angle + 2.0 * kPi * i / n;
      s.verts.push_back({s.cx + s.radius * std::cos(t), s.cy + s.radius * s.aspect * std::sin(t)});
    }
    // Scaling the y axis keeps the orientation, but guard against clockwise order.
    double area = 0.0;
    for (std::size_t i = 0; i < s.verts.size(); ++i) {
      const auto& a = s.verts[i];
      const auto& b = s.verts[(i + 1) % s.verts.size()];
      area += a[0] * b[1] - b[0] * a[1];
    }
    if (area < 0.0) std::reverse(s.verts.begin(), s.verts.end());
  }
  return s;
}

}  // namespace

ToySample generate_toy_sample(Rng& rng, int resolution) {
  const int res = resolution;
  const Color bg0 = random_color(rng);
  const Color bg1 = random_color(rng);
  const double theta = rng.uniform(0.0, 2.0 * kPi);
  const double gx = std::cos(theta), gy = std::sin(theta);

  const int extra = rng.uniform_int(1, 3);
  std::vector<Shape> shapes;
  for (int i = 0; i < extra; ++i) shapes.push_back(random_shape(rng, res, 0.10, 0.20, bg0));
  // The labeled shape is the largest and is drawn last.
  shapes.push_back(random_shape(rng, res, 0.22, 0.32, bg0));

  constexpr int kSub = 3;
  Image img(res, res);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      Color acc{0.0, 0.0, 0.0};
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = x + (sx + 0.5) / kSub;
          const double py = y + (sy + 0.5) / kSub;
          const double t = std::clamp(0.5 + ((px / res - 0.5) * gx + (py / res - 0.5) * gy), 0.0, 1.0);
          Color c{bg0[0] + (bg1[0] - bg0[0]) * t * 0.5, bg0[1] + (bg1[1] - bg0[1]) * t * 0.5,
                  bg0[2] + (bg1[2] - bg0[2]) * t * 0.5};
          for (const auto& s : shapes) {
            if (s.contains(px, py)) c = s.color;
          }
          for (int k = 0; k < 3; ++k) acc[k] += c[k];
        }
      }
      for (int k = 0; k < 3; ++k) img.at(y, x, k) = static_cast<float>(acc[k] / (kSub * kSub));
    }
  }
  return {std::move(img), static_cast<int>(shapes.back().kind)};
}

std::vector<ToySample> generate_toy_set(std::uint64_t seed, int count, int resolution) {
  std::vector<ToySample> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  Rng base(seed);
  for (int i = 0; i < count; ++i) {
    Rng r = base.split(static_cast<std::uint64_t>(i));
    out.push_back(generate_toy_sample(r, resolution));
  }
  return out;
}

std::vector<Image> images_of(const std::vector<ToySample>& samples) {
  std::vector<Image> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.image);
  return out;
}

void write_toy_set(const std::filesystem::path& dir, const std::vector<ToySample>& samples) {
  std::filesystem::create_directories(dir);
  nlohmann::json labels = nlohmann::json::object();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "toy_%05zu.png", i);
    save_image(samples[i].image, dir / name);
    labels[name] = samples[i].label;
  }
  write_file_atomic(dir / "labels.json", labels.dump(1));
}

}  // namespace sketchedit
