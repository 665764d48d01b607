#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "sketchedit/metrics.hpp"
#include "sketchedit/toy_data.hpp"

namespace sketchedit {

/// Small convolutional classifier whose activations serve as features:
/// relu_1 (16 ch, full resolution), relu_2 (32 ch, half resolution) and a
/// 64-d globally averaged relu_3 embedding for FID.
class ConvFeatureExtractor : public FeatureExtractor {
 public:
  /// Randomly initialized (untrained) weights.
  static ConvFeatureExtractor random(std::uint64_t seed, int classes = kShapeKinds);

  /// Trains the classifier on labeled toy samples with Adam and cross-entropy.
  static ConvFeatureExtractor train(const std::vector<ToySample>& samples, int steps, int batch_size,
                                    std::uint64_t seed);

  static ConvFeatureExtractor load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  [[nodiscard]] std::vector<std::string> layer_names() const override { return {"relu_1", "relu_2"}; }
  [[nodiscard]] std::vector<FeatureMap> extract(const Image& img) const override;
  [[nodiscard]] Eigen::VectorXd embedding(const Image& img) const override;

  /// Fraction of samples whose predicted class matches the label.
  [[nodiscard]] double accuracy(const std::vector<ToySample>& samples) const;
  [[nodiscard]] bool trained() const { return trained_; }

 private:
  struct Activations {
    torch::Tensor relu1, relu2, embedding, logits;
  };
  [[nodiscard]] Activations forward(const torch::Tensor& x) const;

  std::map<std::string, torch::Tensor> p_;
  bool trained_ = false;
};

}  // namespace sketchedit
