#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "sketchedit/imaging.hpp"
#include "sketchedit/networks.hpp"
#include "sketchedit/training.hpp"

namespace sketchedit {

struct EditOptions {
  bool return_mask = false;
  bool return_intermediate = false;
};

/// Exactly one of `strokes` and `sketch` must be set. A sketch must match the image size.
struct EditRequest {
  Image image;
  std::optional<StrokeSet> strokes;
  std::optional<SketchMap> sketch;
  EditOptions options;
};

/// All rasters at the request image's size.
struct EditResult {
  Image result;
  Mask mask;
  Image y1;
  double timing_ms = 0.0;
};

/// Read-only trained model. Safe to share between threads.
class ModelHandle {
 public:
  ModelHandle(TrainConfig config, ModelParams params, std::string source, std::int64_t step);

  /// Throws CheckpointError for missing, corrupt or version-mismatched files.
  static std::shared_ptr<const ModelHandle> load(const std::filesystem::path& checkpoint);

  /// Letterboxes to the model resolution, runs M (mask head only), S and G,
  /// then maps m and y1 back and blends with the original image at full size.
  [[nodiscard]] EditResult edit(const EditRequest& req) const;

  [[nodiscard]] const TrainConfig& config() const { return config_; }
  [[nodiscard]] const ModelParams& params() const { return params_; }
  [[nodiscard]] const std::string& source() const { return source_; }
  [[nodiscard]] std::int64_t step() const { return step_; }

 private:
  TrainConfig config_;
  ModelParams params_;
  std::string source_;
  std::int64_t step_ = 0;
};

}  // namespace sketchedit
