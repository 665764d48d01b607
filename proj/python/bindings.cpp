#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "sketchedit/imaging.hpp"
#include "sketchedit/inference.hpp"
#include "sketchedit/metrics.hpp"
#include "sketchedit/sketchgen.hpp"
#include "sketchedit/toy_data.hpp"
#include "sketchedit/warp.hpp"

namespace py = pybind11;
using namespace sketchedit;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

template <int C>
std::vector<float> take(const FloatArray& a, int& h, int& w, const char* what) {
  const bool ok = (C == 1 && (a.ndim() == 2 || (a.ndim() == 3 && a.shape(2) == 1))) ||
                  (a.ndim() == 3 && a.shape(2) == C);
  if (!ok) throw DimensionError(std::string(what) + ": expected shape (H, W" + (C == 1 ? "" : ", " + std::to_string(C)) + ")");
  h = static_cast<int>(a.shape(0));
  w = static_cast<int>(a.shape(1));
  return std::vector<float>(a.data(), a.data() + a.size());
}

Image to_image(const FloatArray& a) {
  int h = 0, w = 0;
  auto v = take<3>(a, h, w, "image");
  return Image(h, w, std::move(v));
}

Mask to_mask(const FloatArray& a) {
  int h = 0, w = 0;
  auto v = take<1>(a, h, w, "mask");
  return Mask(h, w, std::move(v));
}

SketchMap to_sketch(const FloatArray& a) {
  int h = 0, w = 0;
  auto v = take<1>(a, h, w, "sketch");
  bool binary = true;
  for (float x : v) binary = binary && (x == 0.0f || x == 1.0f);
  return SketchMap(h, w, std::move(v), binary);
}

WarpField to_field(const FloatArray& a) {
  int h = 0, w = 0;
  auto v = take<2>(a, h, w, "field");
  return WarpField(h, w, std::move(v));
}

template <int C>
py::array_t<float> to_array(const Raster<C>& r) {
  std::vector<py::ssize_t> shape{r.height(), r.width()};
  if (C > 1) shape.push_back(C);
  py::array_t<float> out(shape);
  std::copy(r.values().begin(), r.values().end(), out.mutable_data());
  return out;
}

StrokeSet to_strokes(const py::object& obj) {
  if (py::isinstance<py::str>(obj)) return strokes_from_json_text(obj.cast<std::string>());
  // Bare lists are accepted as the stroke array.
  auto j = nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
  if (j.is_array()) j = nlohmann::json{{"strokes", std::move(j)}};
  return strokes_from_json(j);
}

py::tuple region_tuple(const RegionSpec& r) { return py::make_tuple(r.x0, r.y0, r.x1, r.y1); }

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Sketch-guided local image editing";

  auto base = py::register_exception<Error>(mod, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(mod, "DimensionError", base.ptr());
  py::register_exception<ConfigError>(mod, "ConfigError", base.ptr());
  py::register_exception<DataError>(mod, "DataError", base.ptr());
  py::register_exception<CheckpointError>(mod, "CheckpointError", base.ptr());

  mod.def("blend", [](const FloatArray& y1, const FloatArray& x, const FloatArray& m) {
    return to_array(blend(to_image(y1), to_image(x), to_mask(m)));
  }, py::arg("y1"), py::arg("x"), py::arg("m"), "y1 * m + x * (1 - m)");
  mod.def("style_partial", [](const FloatArray& x, const FloatArray& m) {
    return to_array(style_partial(to_image(x), to_mask(m)));
  }, py::arg("x"), py::arg("m"));
  mod.def("static_partial", [](const FloatArray& x, const FloatArray& m) {
    return to_array(static_partial(to_image(x), to_mask(m)));
  }, py::arg("x"), py::arg("m"));

  mod.def("rasterize_strokes", [](const py::object& strokes, int height, int width) {
    return to_array(rasterize_strokes(to_strokes(strokes), height, width));
  }, py::arg("strokes"), py::arg("height"), py::arg("width"),
     "Strokes as a JSON string, a list of strokes or {\"strokes\": [...]}");

  mod.def("extract_edges", [](const FloatArray& img, double low, double high, int smoothing_radius) {
    EdgeConfig cfg;
    cfg.low = low;
    cfg.high = high;
    cfg.smoothing_radius = smoothing_radius;
    return to_array(extract_edges(to_image(img), cfg));
  }, py::arg("image"), py::arg("low") = 0.1, py::arg("high") = 0.2, py::arg("smoothing_radius") = 1);

  mod.def("apply_warp", [](const FloatArray& field, const FloatArray& img) {
    return to_array(apply_warp(to_field(field), to_image(img)));
  }, py::arg("field"), py::arg("image"), "Backward warp: out(p) = image(p + field(p))");

  mod.def("make_training_pair", [](const FloatArray& img, std::uint64_t seed, double max_displacement_fraction) {
    PairConfig cfg;
    cfg.warp.max_displacement_fraction = max_displacement_fraction;
    Rng rng(seed);
    const auto p = make_training_pair(to_image(img), rng, cfg);
    py::dict d;
    d["x_warped"] = to_array(p.x_warped);
    d["sketch"] = to_array(p.sketch);
    d["sketch_warped"] = to_array(p.sketch_warped);
    d["field"] = to_array(p.field);
    d["region"] = region_tuple(p.region);
    return d;
  }, py::arg("image"), py::arg("seed"), py::arg("max_displacement_fraction") = 0.10,
     "Random local warp plus partial sketch; region is (x0, y0, x1, y1) inclusive");

  mod.def("l1_error", [](const FloatArray& a, const FloatArray& b) { return l1_error(to_image(a), to_image(b)); },
          py::arg("a"), py::arg("b"));
  mod.def("psnr", [](const FloatArray& a, const FloatArray& b, double peak) { return psnr(to_image(a), to_image(b), peak); },
          py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
  mod.def("ssim", [](const FloatArray& a, const FloatArray& b) { return ssim(to_image(a), to_image(b)); },
          py::arg("a"), py::arg("b"));

  mod.def("toy_image", [](std::uint64_t seed, int resolution) {
    Rng rng(seed);
    return to_array(generate_toy_sample(rng, resolution).image);
  }, py::arg("seed"), py::arg("resolution") = 64);

  py::class_<ModelHandle, std::shared_ptr<ModelHandle>>(mod, "Model")
      .def_static("load", [](const std::string& path) {
        return std::const_pointer_cast<ModelHandle>(ModelHandle::load(path));
      }, py::arg("path"))
      .def_property_readonly("step", &ModelHandle::step)
      .def_property_readonly("source", &ModelHandle::source)
      .def_property_readonly("resolution", [](const ModelHandle& m) { return m.config().net.resolution; })
      .def("edit", [](const ModelHandle& m, const FloatArray& image, const py::object& strokes,
                      const py::object& sketch) {
        EditRequest req;
        req.image = to_image(image);
        if (!strokes.is_none()) req.strokes = to_strokes(strokes);
        if (!sketch.is_none()) req.sketch = to_sketch(sketch.cast<FloatArray>());
        req.options.return_mask = true;
        req.options.return_intermediate = true;
        EditResult r;
        {
          py::gil_scoped_release release;
          r = m.edit(req);
        }
        py::dict d;
        d["result"] = to_array(r.result);
        d["mask"] = to_array(r.mask);
        d["y1"] = to_array(r.y1);
        d["timing_ms"] = r.timing_ms;
        return d;
      }, py::arg("image"), py::arg("strokes") = py::none(), py::arg("sketch") = py::none(),
         "Exactly one of strokes and sketch");
}
