#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace sketchedit {

/// Network sizes. The coarse generator bottleneck is resolution / 8.
struct NetConfig {
  int width = 16;        // base channel count
  int style_dim = 128;   // d
  int resolution = 64;
  int coarse_blocks = 2;  // dilated gated blocks at the coarse bottleneck
  int refine_blocks = 2;  // dilated gated blocks in the refinement stage
  int disc_stages = 3;    // stride-2 discriminator convolutions

  void validate() const;
  [[nodiscard]] int bottleneck() const { return resolution / 8; }
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Declared shape of one parameter array.
struct ParamSpec {
  std::string name;
  std::vector<int64_t> shape;
  double init_std = 0.0;  // 0 means zero-initialized
};

/// Parameters of the mask estimator (M.), style encoder (S.), coarse and
/// refinement generator stages (G0., G1.) and discriminator (D.), plus the
/// discriminator's spectral-norm power-iteration vectors as buffers.
class ModelParams {
 public:
  ModelParams() = default;

  /// Declared parameters in a stable order.
  static std::vector<ParamSpec> specs(const NetConfig& cfg);
  static ModelParams init(const NetConfig& cfg, std::uint64_t seed,
                          torch::Dtype dtype = torch::kFloat32);

  [[nodiscard]] const NetConfig& config() const { return config_; }
  [[nodiscard]] const torch::Tensor& get(const std::string& name) const;
  [[nodiscard]] torch::Tensor& mutable_param(const std::string& name);
  [[nodiscard]] const torch::Tensor& buffer(const std::string& name) const;
  void set_buffer(const std::string& name, torch::Tensor value);

  [[nodiscard]] const std::map<std::string, torch::Tensor>& params() const { return params_; }
  [[nodiscard]] const std::map<std::string, torch::Tensor>& buffers() const { return buffers_; }

  /// Trainable tensors whose names start with any of the prefixes.
  [[nodiscard]] std::vector<torch::Tensor> group(const std::vector<std::string>& prefixes) const;
  [[nodiscard]] std::vector<std::string> names(const std::vector<std::string>& prefixes) const;

  /// Deep copy, optionally converting to a dtype. Copies are leaves with requires_grad.
  [[nodiscard]] ModelParams clone(std::optional<torch::Dtype> dtype = std::nullopt) const;

  /// Builds from raw arrays, checking names and shapes against `specs(cfg)`.
  static ModelParams from_arrays(const NetConfig& cfg, std::map<std::string, torch::Tensor> params,
                                 std::map<std::string, torch::Tensor> buffers);

  void set_requires_grad(bool on);
  [[nodiscard]] bool all_finite() const;
  [[nodiscard]] torch::Dtype dtype() const;

 private:
  NetConfig config_;
  std::map<std::string, torch::Tensor> params_;
  std::map<std::string, torch::Tensor> buffers_;
};

struct MaskOutput {
  torch::Tensor mask;  // N x 1 x H x W, in (0, 1)
  torch::Tensor aux;   // N x 3 x H x W, undefined unless requested
};

struct GeneratorOutput {
  torch::Tensor coarse;   // y0
  torch::Tensor refined;  // y1
};

/// Encoder-decoder with a shared trunk, a sigmoid mask head and (training only)
/// an image reconstruction head. x: N x 3 x H x W, c: N x 1 x H x W.
MaskOutput mask_estimator_forward(const ModelParams& p, const torch::Tensor& x, const torch::Tensor& c,
                                  bool with_aux);

/// Convolution stack before global pooling: N x d x h' x w'.
torch::Tensor style_features(const ModelParams& p, const torch::Tensor& x_sty, const torch::Tensor& m);

/// Per-channel maximum over all spatial positions: N x C x H x W -> N x C.
torch::Tensor global_max_pool(const torch::Tensor& features);

/// Structure-agnostic style vector v = S(x_sty, m): N x d.
torch::Tensor style_encode(const ModelParams& p, const torch::Tensor& x_sty, const torch::Tensor& m);

/// Repeats v over an h x w grid: N x d -> N x d x h x w.
torch::Tensor tile_style(const torch::Tensor& v, int64_t h, int64_t w);

/// Coarse stage on (x_sta, m, c) with the style feature concatenated at the
/// bottleneck, then the refinement stage on y0 composited into x_sta.
GeneratorOutput generator_forward(const ModelParams& p, const torch::Tensor& x_sta, const torch::Tensor& m,
                                  const torch::Tensor& c, const torch::Tensor& v_hat);

/// Patch scores N x 1 x H/2^k x W/2^k using spectrally normalized weights.
/// Uses the stored power-iteration vectors without updating them.
torch::Tensor discriminator_forward(const ModelParams& p, const torch::Tensor& y, const torch::Tensor& c);

/// Same, after advancing each power-iteration vector by one step.
torch::Tensor discriminator_forward_update(ModelParams& p, const torch::Tensor& y, const torch::Tensor& c);

/// Names of the discriminator weights that are spectrally normalized.
std::vector<std::string> spectral_weight_names(const NetConfig& cfg);

/// W / sigma(W) with sigma estimated from the stored vector u (no update).
torch::Tensor spectral_normalized(const torch::Tensor& weight, const torch::Tensor& u);

/// One power-iteration step; returns the updated u.
torch::Tensor power_iteration(const torch::Tensor& weight, const torch::Tensor& u);

/// Gated convolution: ELU(feature) * sigmoid(gate), where the weight holds
/// 2*out channels (feature first, gate second).
torch::Tensor gated_conv(const torch::Tensor& x, const torch::Tensor& weight, const torch::Tensor& bias,
                         int64_t stride, int64_t dilation);

/// (tanh(z) + 1) / 2.
torch::Tensor squash(const torch::Tensor& z);

}  // namespace sketchedit
