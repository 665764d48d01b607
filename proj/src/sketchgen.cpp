#include "sketchedit/sketchgen.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sketchedit {

namespace {

// Binomial kernel of length 2r+1, a discrete Gaussian.
std::vector<double> binomial_kernel(int radius) {
  std::vector<double> k(1, 1.0);
  for (int i = 0; i < 2 * radius; ++i) {
    std::vector<double> next(k.size() + 1, 0.0);
    for (std::size_t j = 0; j < k.size(); ++j) {
      next[j] += 0.5 * k[j];
      next[j + 1] += 0.5 * k[j];
    }
    k = std::move(next);
  }
  return k;
}

class Plane {
 public:
  Plane(int h, int w) : h_(h), w_(w), v_(static_cast<std::size_t>(h) * w, 0.0) {}
  double& operator()(int y, int x) { return v_[static_cast<std::size_t>(y) * w_ + x]; }
  double operator()(int y, int x) const { return v_[static_cast<std::size_t>(y) * w_ + x]; }
  // Replicated border.
  double clamped(int y, int x) const {
    return (*this)(std::clamp(y, 0, h_ - 1), std::clamp(x, 0, w_ - 1));
  }
  int h() const { return h_; }
  int w() const { return w_; }

 private:
  int h_, w_;
  std::vector<double> v_;
};

Plane smooth(const Plane& in, int radius) {
  if (radius <= 0) return in;
  const auto k = binomial_kernel(radius);
  Plane tmp(in.h(), in.w());
  Plane out(in.h(), in.w());
  for (int y = 0; y < in.h(); ++y) {
    for (int x = 0; x < in.w(); ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * in.clamped(y, x + i);
      tmp(y, x) = s;
    }
  }
  for (int y = 0; y < in.h(); ++y) {
    for (int x = 0; x < in.w(); ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp.clamped(y + i, x);
      out(y, x) = s;
    }
  }
  return out;
}

}  // namespace

void EdgeConfig::validate() const {
  if (!(low >= 0.0) || !(high >= low)) throw ConfigError("edge thresholds must satisfy 0 <= low <= high");
  if (smoothing_radius < 0) throw ConfigError("edge smoothing radius must be >= 0");
}

SketchMap extract_edges(const Image& img, const EdgeConfig& cfg) {
  cfg.validate();
  const int h = img.height();
  const int w = img.width();
  Plane gx(h, w), gy(h, w), mag(h, w);
  for (int c = 0; c < 3; ++c) {
    Plane ch(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) ch(y, x) = img.at(y, x, c);
    }
    const Plane s = smooth(ch, cfg.smoothing_radius);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Sobel divided by 8: a per-pixel derivative estimate.
        const double dx = (s.clamped(y - 1, x + 1) + 2.0 * s.clamped(y, x + 1) + s.clamped(y + 1, x + 1) -
                           s.clamped(y - 1, x - 1) - 2.0 * s.clamped(y, x - 1) - s.clamped(y + 1, x - 1)) /
                          8.0;
        const double dy = (s.clamped(y + 1, x - 1) + 2.0 * s.clamped(y + 1, x) + s.clamped(y + 1, x + 1) -
                           s.clamped(y - 1, x - 1) - 2.0 * s.clamped(y - 1, x) - s.clamped(y - 1, x + 1)) /
                          8.0;
        const double m = std::sqrt(dx * dx + dy * dy);
        if (m > mag(y, x)) {
          mag(y, x) = m;
          gx(y, x) = dx;
          gy(y, x) = dy;
        }
      }
    }
  }

  // Non-maximum suppression along the gradient axis. Ties resolve toward the
  // +x / +y neighbor so a symmetric ridge yields a single pixel.
  Plane thin(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = mag(y, x);
      if (m <= 0.0) continue;
      double angle = std::atan2(gy(y, x), gx(y, x)) * 180.0 / 3.14159265358979323846;
      if (angle < 0.0) angle += 180.0;
      int ox = 0, oy = 0;
      if (angle < 22.5 || angle >= 157.5) {
        ox = 1;
      } else if (angle < 67.5) {
        ox = 1;
        oy = 1;
      } else if (angle < 112.5) {
        oy = 1;
      } else {
        ox = -1;
        oy = 1;
      }
      const double fwd = mag.clamped(y + oy, x + ox);
      const double bwd = mag.clamped(y - oy, x - ox);
      if (m > fwd && m >= bwd) thin(y, x) = m;
    }
  }

  SketchMap out(h, w, true);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (thin(y, x) >= cfg.high && thin(y, x) > 0.0) {
        out.at(y, x) = 1.0f;
        stack.emplace_back(y, x);
      }
    }
  }
  while (!stack.empty()) {
    const auto [y, x] = stack.back();
    stack.pop_back();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || nx < 0 || ny >= h || nx >= w || out.at(ny, nx) != 0.0f) continue;
        if (thin(ny, nx) >= cfg.low && thin(ny, nx) > 0.0) {
          out.at(ny, nx) = 1.0f;
          stack.emplace_back(ny, nx);
        }
      }
    }
  }
  return out;
}

SketchMap partial_sketch(const SketchMap& edges, const RegionSpec& region) {
  if (edges.height() != region.image_height || edges.width() != region.image_width) {
    throw DimensionError("partial_sketch: region does not match the sketch size");
  }
  SketchMap out(edges.height(), edges.width(), edges.binary());
  for (int y = 0; y < edges.height(); ++y) {
    for (int x = 0; x < edges.width(); ++x) {
      if (region.contains(x, y)) out.at(y, x) = edges.at(y, x);
    }
  }
  return out;
}

TrainingPair make_training_pair(const Image& x, Rng& rng, const PairConfig& cfg) {
  cfg.edges.validate();
  const RegionSpec region = sample_region(x.height(), x.width(), rng, cfg.warp);
  const int n_interior = rng.uniform_int(cfg.warp.min_interior, cfg.warp.max_interior);
  const TriMesh mesh = build_mesh(region, n_interior, rng);
  const double max_disp = max_displacement_for(region, cfg.warp);
  const auto disps = sample_displacements(mesh, max_disp, rng);
  WarpField field = make_warp_field(mesh, disps, x.height(), x.width(), max_disp);

  TrainingPair pair;
  pair.x_warped = apply_warp(field, x, Interp::kBilinear);
  pair.sketch = partial_sketch(extract_edges(x, cfg.edges), region);
  pair.sketch_warped = apply_warp(field, pair.sketch, Interp::kNearest);
  pair.field = std::move(field);
  pair.region = region;
  return pair;
}

}  // namespace sketchedit
