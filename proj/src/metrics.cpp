#include "sketchedit/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace sketchedit {

namespace {

void check_pair(const Image& a, const Image& b, const char* what) {
  if (!a.same_size(b)) {
    throw DimensionError(std::string(what) + ": images differ in size (" + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()) + ")");
  }
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void check_covariance(const Eigen::MatrixXd& c, const char* which) {
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw DataError(std::string("fid: covariance ") + which + " is not symmetric");
  }
  if (min_eigenvalue(c) < -1e-6 * scale) {
    throw DataError(std::string("fid: covariance ") + which + " is not positive semi-definite");
  }
}

}  // namespace

double l1_error(const Image& a, const Image& b) {
  check_pair(a, b, "l1_error");
  const auto va = a.values();
  const auto vb = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) s += std::abs(static_cast<double>(va[i]) - vb[i]);
  return s / static_cast<double>(va.size());
}

double psnr(const Image& a, const Image& b, double peak) {
  check_pair(a, b, "psnr");
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be > 0");
  const auto va = a.values();
  const auto vb = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = static_cast<double>(va[i]) - vb[i];
    s += d * d;
  }
  const double mse = s / static_cast<double>(va.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& a, const Image& b, const SsimConfig& cfg) {
  check_pair(a, b, "ssim");
  const int k = cfg.window;
  if (k < 1) throw ConfigError("ssim: window must be >= 1");
  if (a.height() < k || a.width() < k) {
    throw DimensionError("ssim: image " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                         " is smaller than the " + std::to_string(k) + "x" + std::to_string(k) + " window");
  }
  const double c1 = (cfg.k1 * cfg.peak) * (cfg.k1 * cfg.peak);
  const double c2 = (cfg.k2 * cfg.peak) * (cfg.k2 * cfg.peak);
  const double n = static_cast<double>(k) * k;
  double total = 0.0;
  std::int64_t windows = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y0 = 0; y0 + k <= a.height(); ++y0) {
      for (int x0 = 0; x0 + k <= a.width(); ++x0) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = y0; y < y0 + k; ++y) {
          for (int x = x0; x < x0 + k; ++x) {
            const double u = a.at(y, x, c), v = b.at(y, x, c);
            sa += u;
            sb += v;
            saa += u * u;
            sbb += v * v;
            sab += u * v;
          }
        }
        const double ma = sa / n, mb = sb / n;
        const double va = std::max(0.0, saa / n - ma * ma);
        const double vb = std::max(0.0, sbb / n - mb * mb);
        const double cov = sab / n - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++windows;
      }
    }
  }
  return total / static_cast<double>(windows);
}

FeatureStats feature_stats(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.size() < 2) throw DataError("feature_stats: need at least two samples");
  const auto k = samples.front().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), k);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != k) throw DimensionError("feature_stats: samples differ in length");
    x.row(static_cast<Eigen::Index>(i)) = samples[i].transpose();
  }
  FeatureStats s;
  s.count = static_cast<std::int64_t>(samples.size());
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.cov = centered.transpose() * centered / static_cast<double>(s.count - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

double fid(const FeatureStats& s1, const FeatureStats& s2) {
  const auto k = s1.mean.size();
  if (s2.mean.size() != k || s1.cov.rows() != k || s1.cov.cols() != k || s2.cov.rows() != k || s2.cov.cols() != k) {
    throw DimensionError("fid: feature statistics differ in dimension");
  }
  check_covariance(s1.cov, "1");
  check_covariance(s2.cov, "2");
  // Tr((C1 C2)^1/2) = Tr((sqrt(C1) C2 sqrt(C1))^1/2); the latter is symmetric.
  const Eigen::MatrixXd r1 = sqrt_psd(s1.cov);
  const Eigen::MatrixXd inner = r1 * s2.cov * r1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (s1.mean - s2.mean).squaredNorm() + s1.cov.trace() + s2.cov.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d);
}

Eigen::MatrixXd gram(const FeatureMap& f) {
  const double hw = static_cast<double>(f.height) * f.width;
  if (hw <= 0.0 || f.data.cols() != static_cast<Eigen::Index>(hw)) {
    throw DimensionError("gram: feature map '" + f.name + "' has inconsistent size");
  }
  Eigen::MatrixXd g = f.data * f.data.transpose() / hw;
  return 0.5 * (g + g.transpose());
}

StyleLoss style_loss(const Image& x, const Image& y, const FeatureExtractor& ex) {
  check_pair(x, y, "style_loss");
  const auto fx = ex.extract(x);
  const auto fy = ex.extract(y);
  if (fx.empty() || fx.size() != fy.size()) throw DimensionError("style_loss: extractor returned no layers");
  auto layer_mse = [&](std::size_t i) {
    const Eigen::MatrixXd d = gram(fx[i]) - gram(fy[i]);
    return d.squaredNorm() / static_cast<double>(d.size());
  };
  StyleLoss out;
  out.sl1 = layer_mse(0);
  if (fx.size() > 1) out.sl2 = layer_mse(1);
  return out;
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace sketchedit
