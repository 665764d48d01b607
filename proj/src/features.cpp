#include "sketchedit/features.hpp"

#include <cmath>

#include "sketchedit/checkpoint.hpp"
#include "sketchedit/error.hpp"
#include "sketchedit/rng.hpp"
#include "sketchedit/tensor_bridge.hpp"

namespace sketchedit {

namespace {

namespace F = torch::nn::functional;

struct LayerSpec {
  const char* name;
  std::vector<int64_t> shape;
};

std::vector<LayerSpec> layer_specs(int classes) {
  return {{"conv1.w", {16, 3, 3, 3}}, {"conv1.b", {16}},      {"conv2.w", {32, 16, 3, 3}},
          {"conv2.b", {32}},          {"conv3.w", {64, 32, 3, 3}}, {"conv3.b", {64}},
          {"fc.w", {classes, 64}},    {"fc.b", {classes}}};
}

torch::Tensor to_batch(const std::vector<Image>& images) { return stack_tensors(images) - 0.5; }

FeatureMap to_map(const std::string& name, const torch::Tensor& chw) {
  auto t = chw.detach().to(torch::kFloat64).contiguous();
  FeatureMap m;
  m.name = name;
  m.height = static_cast<int>(t.size(1));
  m.width = static_cast<int>(t.size(2));
  const auto c = t.size(0);
  const auto hw = t.size(1) * t.size(2);
  m.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      t.data_ptr<double>(), c, hw);
  return m;
}

}  // namespace

ConvFeatureExtractor ConvFeatureExtractor::random(std::uint64_t seed, int classes) {
  ConvFeatureExtractor ex;
  Rng rng(seed);
  for (const auto& spec : layer_specs(classes)) {
    auto t = torch::zeros(spec.shape, torch::kFloat32);
    if (spec.shape.size() > 1) {
      int64_t fan_in = 1;
      for (std::size_t i = 1; i < spec.shape.size(); ++i) fan_in *= spec.shape[i];
      const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
      auto* d = t.data_ptr<float>();
      for (int64_t i = 0; i < t.numel(); ++i) d[i] = static_cast<float>(rng.normal() * std);
    }
    ex.p_[spec.name] = t;
  }
  return ex;
}

ConvFeatureExtractor::Activations ConvFeatureExtractor::forward(const torch::Tensor& x) const {
  Activations a;
  a.relu1 = torch::relu(F::conv2d(x, p_.at("conv1.w"), F::Conv2dFuncOptions().padding(1).bias(p_.at("conv1.b"))));
  a.relu2 = torch::relu(F::conv2d(F::avg_pool2d(a.relu1, F::AvgPool2dFuncOptions(2)), p_.at("conv2.w"),
                                  F::Conv2dFuncOptions().padding(1).bias(p_.at("conv2.b"))));
  const auto relu3 = torch::relu(F::conv2d(F::avg_pool2d(a.relu2, F::AvgPool2dFuncOptions(2)), p_.at("conv3.w"),
                                           F::Conv2dFuncOptions().padding(1).bias(p_.at("conv3.b"))));
  a.embedding = relu3.mean({2, 3});
  a.logits = F::linear(a.embedding, p_.at("fc.w"), p_.at("fc.b"));
  return a;
}

ConvFeatureExtractor ConvFeatureExtractor::train(const std::vector<ToySample>& samples, int steps, int batch_size,
                                                 std::uint64_t seed) {
  if (samples.empty()) throw DataError("feature extractor training needs samples");
  auto ex = random(seed);
  std::vector<torch::Tensor> params;
  for (auto& [name, t] : ex.p_) {
    t.set_requires_grad(true);
    params.push_back(t);
  }
  torch::optim::Adam opt(params, torch::optim::AdamOptions(1e-3));
  Rng rng = Rng(seed).split(1);
  for (int step = 0; step < steps; ++step) {
    std::vector<Image> imgs;
    std::vector<int64_t> labels;
    for (int i = 0; i < batch_size; ++i) {
      const auto& s = samples[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(samples.size()) - 1))];
      imgs.push_back(s.image);
      labels.push_back(s.label);
    }
    const auto logits = ex.forward(to_batch(imgs)).logits;
    const auto loss = F::cross_entropy(logits, torch::tensor(labels, torch::kInt64));
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  for (auto& [name, t] : ex.p_) t = t.detach().set_requires_grad(false);
  ex.trained_ = true;
  return ex;
}

ConvFeatureExtractor ConvFeatureExtractor::load(const std::filesystem::path& path) {
  const auto a = read_archive(path);
  if (a.manifest.value("kind", "") != "feature_extractor") {
    throw CheckpointError(path.string() + " is not a feature extractor archive");
  }
  ConvFeatureExtractor ex;
  const int classes = a.manifest.value("classes", kShapeKinds);
  for (const auto& spec : layer_specs(classes)) {
    auto it = a.arrays.find(spec.name);
    if (it == a.arrays.end() || it->second.sizes().vec() != spec.shape) {
      throw CheckpointError(std::string("feature extractor array missing or misshaped: ") + spec.name);
    }
    ex.p_[spec.name] = it->second.to(torch::kFloat32);
  }
  ex.trained_ = a.manifest.value("trained", false);
  return ex;
}

void ConvFeatureExtractor::save(const std::filesystem::path& path) const {
  Archive a;
  a.manifest = {{"kind", "feature_extractor"}, {"classes", p_.at("fc.b").size(0)}, {"trained", trained_}};
  a.arrays = p_;
  write_archive(path, a);
}

std::vector<FeatureMap> ConvFeatureExtractor::extract(const Image& img) const {
  torch::NoGradGuard guard;
  const auto a = forward(to_batch({img}));
  return {to_map("relu_1", a.relu1[0]), to_map("relu_2", a.relu2[0])};
}

Eigen::VectorXd ConvFeatureExtractor::embedding(const Image& img) const {
  torch::NoGradGuard guard;
  const auto e = forward(to_batch({img})).embedding[0].to(torch::kFloat64).contiguous();
  return Eigen::Map<const Eigen::VectorXd>(e.data_ptr<double>(), e.size(0));
}

double ConvFeatureExtractor::accuracy(const std::vector<ToySample>& samples) const {
  if (samples.empty()) return 0.0;
  torch::NoGradGuard guard;
  int64_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); i += 64) {
    std::vector<Image> imgs;
    std::vector<int64_t> labels;
    for (std::size_t j = i; j < std::min(samples.size(), i + 64); ++j) {
      imgs.push_back(samples[j].image);
      labels.push_back(samples[j].label);
    }
    const auto pred = forward(to_batch(imgs)).logits.argmax(1);
    correct += pred.eq(torch::tensor(labels, torch::kInt64)).sum().item<int64_t>();
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace sketchedit
