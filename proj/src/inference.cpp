#include "sketchedit/inference.hpp"

#include <chrono>

#include "sketchedit/tensor_bridge.hpp"

namespace sketchedit {

ModelHandle::ModelHandle(TrainConfig config, ModelParams params, std::string source, std::int64_t step)
    : config_(std::move(config)), params_(std::move(params)), source_(std::move(source)), step_(step) {
  params_.set_requires_grad(false);
}

std::shared_ptr<const ModelHandle> ModelHandle::load(const std::filesystem::path& checkpoint) {
  auto m = load_model_file(checkpoint);
  return std::make_shared<const ModelHandle>(std::move(m.config), std::move(m.params), checkpoint.string(), m.step);
}

EditResult ModelHandle::edit(const EditRequest& req) const {
  const auto start = std::chrono::steady_clock::now();
  if (req.strokes.has_value() == req.sketch.has_value()) {
    throw DataError("edit request needs exactly one of strokes and sketch");
  }
  const Image& x = req.image;
  const int res = config_.net.resolution;
  const auto box = Letterbox::fit(x.height(), x.width(), res);
  SketchMap c;
  if (req.strokes) {
    validate(*req.strokes);
    c = rasterize_strokes(letterbox_strokes(*req.strokes, box), res, res);
  } else {
    require_same_size(*req.sketch, x, "edit sketch");
    c = letterbox_sketch(req.sketch->thresholded(), box);
  }

  torch::NoGradGuard guard;
  const auto dtype = params_.dtype();
  const auto pass =
      run_model(params_, to_tensor(letterbox(x, box), dtype), to_tensor(c, dtype), config_.ablation, false);

  EditResult out;
  const Raster<1> m_canvas = mask_from_tensor(pass.forward.mask);
  const Raster<3> y1_canvas = image_from_tensor(pass.gen.refined);
  const auto m_full = unletterbox(m_canvas, box);
  const auto y1_full = unletterbox(y1_canvas, box);
  out.mask = Mask(m_full.height(), m_full.width(), std::vector<float>(m_full.values().begin(), m_full.values().end()));
  out.y1 = Image(y1_full.height(), y1_full.width(),
                 std::vector<float>(y1_full.values().begin(), y1_full.values().end()));
  out.result = blend(out.y1, x, out.mask);
  out.timing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace sketchedit
