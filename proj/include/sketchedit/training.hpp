#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>
#include <torch/torch.h>

#include "sketchedit/networks.hpp"
#include "sketchedit/raster.hpp"
#include "sketchedit/rng.hpp"
#include "sketchedit/sketchgen.hpp"
#include "sketchedit/warp.hpp"

namespace sketchedit {

/// Where the blending mask comes from.
enum class MaskMode {
  kEstimated,    // learned mask estimator
  kNone,         // no mask: the generator sees the full image and y = y1
  kBoundingBox,  // minimum bounding box enclosing the sketch
};

struct AblationConfig {
  MaskMode mask = MaskMode::kEstimated;
  bool style_encoder = true;
  bool bmr = true;
  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

struct LossWeights {
  double reconstruction = 1.0;
  double adversarial = 1.0;
  double bmr = 1.0;
};

struct OptimConfig {
  double lr_generator = 1e-4;
  double lr_discriminator = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  NetConfig net;
  PairConfig pair;
  DropoutConfig dropout;
  OptimConfig optim;
  LossWeights weights;
  AblationConfig ablation;
  int batch_size = 8;
  int steps = 1000;
  int checkpoint_every = 500;
  int log_every = 1;
  int threads = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

std::string to_string(MaskMode mode);
MaskMode mask_mode_from_string(const std::string& s);

/// Per-batch loss means of one iteration.
struct LossReport {
  std::int64_t step = 0;
  double reconstruction = 0.0;  // L_R
  double adversarial = 0.0;     // L_G
  double bmr = 0.0;             // L_BMR
  double discriminator = 0.0;   // L_D
  double total = 0.0;           // weighted L_R + L_G + L_BMR

  [[nodiscard]] nlohmann::json to_json() const;
};

/// First and second moment estimates for a set of named parameters.
struct AdamState {
  std::int64_t step = 0;
  std::map<std::string, torch::Tensor> m;
  std::map<std::string, torch::Tensor> v;

  /// In-place update of `params[name]` for every name with a defined gradient.
  void update(ModelParams& params, const std::vector<std::string>& names, const std::vector<torch::Tensor>& grads,
              double lr, const OptimConfig& cfg);
};

struct TrainState {
  TrainConfig config;
  ModelParams params;
  AdamState opt_generator;      // M, S, G0, G1
  AdamState opt_discriminator;  // D
  std::int64_t step = 0;
  Rng rng;

  static TrainState fresh(const TrainConfig& cfg);
};

/// Model inputs for one batch, produced from raw images by the warping pipeline.
struct PreparedBatch {
  torch::Tensor x;         // original
  torch::Tensor fx;        // warped input f(x)
  torch::Tensor c;         // sketch of the original, inside the region
  torch::Tensor fc;        // warped sketch f(c)
  torch::Tensor keep;      // N x 1 x H x W, 0 inside regional-dropout rectangles
  torch::Tensor region;    // N x 1 x H x W, 1 inside the warp region
  std::vector<RegionSpec> regions;

  [[nodiscard]] PreparedBatch to(torch::Dtype dtype) const;
};

PreparedBatch prepare_batch(const std::vector<Image>& images, Rng& rng, const TrainConfig& cfg);

/// Mask for the given ablation mode, or the estimator output (and aux image when BMR is on).
struct ModelPass {
  MaskOutput forward;  // estimator on (f(x), c); mask only when not estimated
  torch::Tensor x_sty;
  torch::Tensor style;  // N x d
  GeneratorOutput gen;
  torch::Tensor y;
};

/// Bounding box of nonzero sketch pixels per sample (zero mask when the sketch is empty).
torch::Tensor bounding_box_mask(const torch::Tensor& sketch);

/// Runs M, S, G and the blend on a batch. `keep` applies regional dropout to x_sty.
ModelPass run_model(const ModelParams& p, const torch::Tensor& image, const torch::Tensor& sketch,
                    const AblationConfig& ablation, bool with_aux, const torch::Tensor& keep = {});

struct GeneratorLosses {
  torch::Tensor reconstruction;
  torch::Tensor adversarial;
  torch::Tensor bmr;
  torch::Tensor total;
  ModelPass pass;
};

/// L_R, L_G and L_BMR for a prepared batch; a pure function of (params, batch).
GeneratorLosses compute_generator_losses(const ModelParams& p, const PreparedBatch& batch, const TrainConfig& cfg);

/// One full iteration: pair synthesis, discriminator update, joint update of
/// the mask estimator, style encoder and generator. Throws NonFiniteLossError
/// (after writing the batch to `dump_dir` when given) if a loss is not finite.
LossReport train_step(TrainState& state, const std::vector<Image>& batch,
                      const std::optional<std::filesystem::path>& dump_dir = std::nullopt);

/// Indices of the images used at `step`; a pure function of (seed, step, dataset size).
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::int64_t step, int batch_size, std::size_t dataset_size);

struct TrainLoopOptions {
  /// Receives step_NNNNNNN.ckpt every checkpoint_every steps, latest.ckpt at the
  /// end, and non-finite batch dumps. Empty disables all file output.
  std::filesystem::path out_dir;
  std::ostream* log = nullptr;  // one JSON LossReport per line, every log_every steps
  std::function<void(const LossReport&)> on_report;
};

/// Runs train_step until state.step reaches state.config.steps.
void train_loop(TrainState& state, const std::vector<Image>& dataset, const TrainLoopOptions& opt);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

/// Parameters and config from either a training checkpoint or a model export.
struct LoadedModel {
  TrainConfig config;
  ModelParams params;
  std::int64_t step = 0;
};
LoadedModel load_model_file(const std::filesystem::path& path);

}  // namespace sketchedit
