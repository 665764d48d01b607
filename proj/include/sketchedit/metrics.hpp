#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sketchedit/raster.hpp"

namespace sketchedit {

inline constexpr double kPsnrCap = 100.0;

double l1_error(const Image& a, const Image& b);

/// 10 log10(peak^2 / MSE), capped at kPsnrCap (also returned for MSE = 0).
double psnr(const Image& a, const Image& b, double peak = 1.0);

struct SsimConfig {
  int window = 7;  // uniform window side
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

/// Mean SSIM over all fully contained windows and all channels.
/// Variances and covariance use the population (1/N) normalization.
double ssim(const Image& a, const Image& b, const SsimConfig& cfg = {});

/// One named C x H x W feature map, stored as a C x (H*W) matrix.
struct FeatureMap {
  std::string name;
  int height = 0;
  int width = 0;
  Eigen::MatrixXd data;
};

/// Deterministic image -> feature maps contract used by the style loss and FID.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  /// Layer names in output order; the style loss uses the first two.
  [[nodiscard]] virtual std::vector<std::string> layer_names() const = 0;
  [[nodiscard]] virtual std::vector<FeatureMap> extract(const Image& img) const = 0;
  /// Vector used for FID statistics.
  [[nodiscard]] virtual Eigen::VectorXd embedding(const Image& img) const = 0;
};

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::int64_t count = 0;
};

/// Mean and unbiased covariance of row samples. Needs at least two samples.
FeatureStats feature_stats(const std::vector<Eigen::VectorXd>& samples);

/// Frechet distance between two Gaussian fits, clamped at 0.
/// Throws DimensionError on size mismatch and DataError on covariances that
/// are not symmetric positive semi-definite within tolerance.
double fid(const FeatureStats& s1, const FeatureStats& s2);

/// G = F F^T / (H W).
Eigen::MatrixXd gram(const FeatureMap& f);

struct StyleLoss {
  double sl1 = 0.0;
  double sl2 = 0.0;  // 0 when the extractor declares a single layer
};

/// Mean squared error between Gram matrices at the first and second layers.
StyleLoss style_loss(const Image& x, const Image& y, const FeatureExtractor& ex);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& sym);

}  // namespace sketchedit
