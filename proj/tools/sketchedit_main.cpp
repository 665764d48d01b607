// sketchedit: data preparation, training, evaluation, offline editing and serving.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sketchedit/config.hpp"
#include "sketchedit/evaluation.hpp"
#include "sketchedit/features.hpp"
#include "sketchedit/image_io.hpp"
#include "sketchedit/inference.hpp"
#include "sketchedit/server.hpp"
#include "sketchedit/toy_data.hpp"
#include "sketchedit/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sketchedit;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kRuntimeError = 4 };

std::string numbered(const char* stem, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu.png", stem, i);
  return buf;
}

TrainConfig config_from(const std::string& path, const std::vector<std::string>& overrides) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : load_train_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::vector<Image> load_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<Image> out;
  for (const auto& p : list_images(dir)) out.push_back(load_image(p));
  return out;
}

Image fit_to(const Image& img, int res) {
  if (img.height() == res && img.width() == res) return img;
  return resize_bilinear(img, res, res);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int count = 2000;
  std::uint64_t seed = 1;
  int resolution = 64;
};

int run_synth(const SynthArgs& a) {
  if (a.count < 0) throw ConfigError("--count must be >= 0");
  write_toy_set(a.out, generate_toy_set(a.seed, a.count, a.resolution));
  std::cerr << "wrote " << a.count << " images to " << a.out << "\n";
  return kOk;
}

struct PrepareArgs {
  std::string input_dir, output_dir, config;
  int count = 0;
  std::uint64_t seed = 1;
};

int run_prepare(const PrepareArgs& a) {
  if (a.count < 0) throw ConfigError("--count must be >= 0");
  const auto cfg = config_from(a.config, {});
  const auto sources = list_images(a.input_dir);
  if (a.count > 0 && sources.empty()) throw DataError("no images in " + a.input_dir);
  fs::create_directories(a.output_dir);
  const fs::path out = a.output_dir;
  json samples = json::array();
  Rng base(a.seed);
  for (int i = 0; i < a.count; ++i) {
    const auto& src = sources[static_cast<std::size_t>(i) % sources.size()];
    const Image x = fit_to(load_image(src), cfg.net.resolution);
    Rng r = base.split(static_cast<std::uint64_t>(i));
    const auto pair = make_training_pair(x, r, cfg.pair);
    const auto idx = static_cast<std::size_t>(i);
    save_image(x, out / numbered("original", idx));
    save_image(pair.x_warped, out / numbered("warped", idx));
    save_gray(pair.sketch, out / numbered("sketch", idx));
    save_gray(pair.sketch_warped, out / numbered("warped_sketch", idx));
    const auto& rg = pair.region;
    samples.push_back({{"id", i},
                       {"source", src.filename().string()},
                       {"original", numbered("original", idx)},
                       {"warped", numbered("warped", idx)},
                       {"sketch", numbered("sketch", idx)},
                       {"warped_sketch", numbered("warped_sketch", idx)},
                       {"region", {{"x0", rg.x0}, {"y0", rg.y0}, {"x1", rg.x1}, {"y1", rg.y1}}},
                       {"area_fraction", rg.area_fraction()}});
  }
  const json manifest = {{"seed", a.seed}, {"count", a.count}, {"resolution", cfg.net.resolution},
                         {"samples", samples}};
  write_file_atomic(out / "manifest.json", manifest.dump(2) + "\n");
  std::cerr << "prepared " << a.count << " samples in " << a.output_dir << "\n";
  return kOk;
}

struct TrainArgs {
  std::string config, data, out, resume;
  std::vector<std::string> overrides;
  std::optional<int> steps;
};

int run_train(const TrainArgs& a) {
  auto overrides = a.overrides;
  if (a.steps) overrides.push_back("train.steps=" + std::to_string(*a.steps));
  TrainState state;
  if (!a.resume.empty()) {
    state = load_checkpoint(a.resume);
    const auto before = state.config.net;
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_config_value(state.config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!(state.config.net == before)) throw ConfigError("network sizes cannot change when resuming");
    state.config.validate();
    std::cerr << "resuming at step " << state.step + 1 << "\n";
  } else {
    state = TrainState::fresh(config_from(a.config, overrides));
  }
  const auto images = load_images(a.data);
  if (images.empty()) throw DataError("no training images in " + a.data);
  std::vector<Image> dataset;
  dataset.reserve(images.size());
  for (const auto& img : images) dataset.push_back(fit_to(img, state.config.net.resolution));

  fs::create_directories(a.out);
  write_file_atomic(fs::path(a.out) / "config.txt", format_train_config(state.config));
  std::ofstream log(fs::path(a.out) / "train_log.jsonl", a.resume.empty() ? std::ios::trunc : std::ios::app);
  TrainLoopOptions opt;
  opt.out_dir = a.out;
  opt.log = &log;
  opt.on_report = [&](const LossReport& r) {
    if (r.step % state.config.log_every == 0) std::cerr << r.to_json().dump() << "\n";
  };
  train_loop(state, dataset, opt);
  std::cerr << "finished at step " << state.step << "; checkpoint " << (fs::path(a.out) / "latest.ckpt") << "\n";
  return kOk;
}

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string data, out, extractor, predictions, targets;
};

std::unique_ptr<FeatureExtractor> extractor_from(const std::string& path) {
  if (path.empty()) return std::make_unique<ConvFeatureExtractor>(ConvFeatureExtractor::random(0));
  return std::make_unique<ConvFeatureExtractor>(ConvFeatureExtractor::load(path));
}

int run_eval(const EvalArgs& a) {
  const auto ex = extractor_from(a.extractor);
  std::vector<MethodReport> reports;
  if (!a.predictions.empty() || !a.targets.empty()) {
    if (a.predictions.empty() || a.targets.empty()) {
      throw ConfigError("--predictions and --targets must be given together");
    }
    const auto preds = load_images(a.predictions);
    const auto targets = load_images(a.targets);
    reports.push_back(score_predictions("predictions", preds, targets, *ex));
  } else {
    if (a.checkpoints.empty() || a.data.empty()) {
      throw ConfigError("eval needs --checkpoint and --data, or --predictions and --targets");
    }
    const fs::path dir = a.data;
    json manifest;
    try {
      const auto bytes = read_file(dir / "manifest.json");
      manifest = json::parse(std::string(bytes.begin(), bytes.end()));
    } catch (const json::exception& e) {
      throw DataError("unreadable manifest in " + a.data + ": " + e.what());
    }
    std::vector<Image> xs, fxs;
    std::vector<SketchMap> cs;
    for (const auto& s : manifest.at("samples")) {
      xs.push_back(load_image(dir / s.at("original").get<std::string>()));
      fxs.push_back(load_image(dir / s.at("warped").get<std::string>()));
      cs.push_back(load_sketch(dir / s.at("sketch").get<std::string>()));
    }
    for (const auto& ck : a.checkpoints) {
      const auto model = load_model_file(ck);
      for (const auto& x : xs) {
        if (x.height() != model.config.net.resolution || x.width() != model.config.net.resolution) {
          throw DataError("evaluation images must be " + std::to_string(model.config.net.resolution) + " px square");
        }
      }
      const auto preds = predict(model.params, model.config.ablation, fxs, cs);
      std::vector<Image> ys;
      for (const auto& p : preds) ys.push_back(p.y);
      std::string name = fs::path(ck).parent_path().filename().string();
      if (name.empty()) name = fs::path(ck).stem().string();
      reports.push_back(score_predictions(name, ys, xs, *ex));
    }
  }
  json out = {{"extractor", a.extractor.empty() ? "random" : a.extractor}, {"methods", json::array()}};
  for (const auto& r : reports) out["methods"].push_back(r.to_json());
  fs::create_directories(a.out);
  write_file_atomic(fs::path(a.out) / "report.json", out.dump(2) + "\n");
  const auto table = render_table(reports);
  write_file_atomic(fs::path(a.out) / "table.txt", table);
  std::cout << table;
  return kOk;
}

struct EditArgs {
  std::string checkpoint, image, strokes, sketch, out, mask_out, y1_out;
};

int run_edit(const EditArgs& a) {
  if (a.strokes.empty() == a.sketch.empty()) throw ConfigError("edit needs exactly one of --strokes and --sketch");
  const auto model = ModelHandle::load(a.checkpoint);
  EditRequest req;
  req.image = load_image(a.image);
  if (!a.strokes.empty()) {
    const auto bytes = read_file(a.strokes);
    req.strokes = strokes_from_json_text(std::string(bytes.begin(), bytes.end()));
  } else {
    req.sketch = load_sketch(a.sketch);
  }
  const auto r = model->edit(req);
  save_image(r.result, a.out);
  if (!a.mask_out.empty()) save_gray(r.mask, a.mask_out);
  if (!a.y1_out.empty()) save_image(r.y1, a.y1_out);
  std::cerr << "edited in " << r.timing_ms << " ms\n";
  return kOk;
}

struct ServeArgs {
  std::string checkpoint;
  std::vector<std::string> model_dirs;
  ServerConfig cfg;
};

HttpServer* g_server = nullptr;

int run_serve(ServeArgs a) {
  if (!a.checkpoint.empty()) a.cfg.model_dirs.push_back(fs::path(a.checkpoint).parent_path());
  for (const auto& d : a.model_dirs) a.cfg.model_dirs.push_back(d);
  EditService service(a.cfg);
  if (!a.checkpoint.empty()) service.set_model(ModelHandle::load(a.checkpoint));
  HttpServer server(service);
  const int port = server.bind();
  if (port < 0) throw Error("cannot bind " + a.cfg.host + ":" + std::to_string(a.cfg.port));
  std::cerr << "listening on http://" << a.cfg.host << ":" << port << "\n";
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  server.listen();
  g_server = nullptr;
  return kOk;
}

struct ExtractorArgs {
  std::string data, out;
  int steps = 1500;
  int batch = 32;
  std::uint64_t seed = 1;
};

int run_train_extractor(const ExtractorArgs& a) {
  const fs::path dir = a.data;
  const auto bytes = read_file(dir / "labels.json");
  json labels;
  try {
    labels = json::parse(std::string(bytes.begin(), bytes.end()));
  } catch (const json::exception& e) {
    throw DataError("unreadable labels.json: " + std::string(e.what()));
  }
  std::vector<ToySample> samples;
  for (const auto& [name, label] : labels.items()) samples.push_back({load_image(dir / name), label.get<int>()});
  const auto ex = ConvFeatureExtractor::train(samples, a.steps, a.batch, a.seed);
  ex.save(a.out);
  std::cerr << "training accuracy " << ex.accuracy(samples) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  at::set_num_threads(1);
  CLI::App app{"Mask-free sketch-based local image editing"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate the procedural polygon dataset");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--count", synth.count, "Number of images");
  c_synth->add_option("--seed", synth.seed, "Random seed");
  c_synth->add_option("--resolution", synth.resolution, "Image side in pixels")->check(CLI::Range(8, 4096));

  PrepareArgs prep;
  auto* c_prep = app.add_subcommand("prepare-data", "Build synthetic evaluation pairs");
  c_prep->add_option("--input-dir", prep.input_dir, "Directory of source images")->required();
  c_prep->add_option("--output-dir", prep.output_dir, "Output directory")->required();
  c_prep->add_option("--count", prep.count, "Number of samples")->required();
  c_prep->add_option("--seed", prep.seed, "Random seed");
  c_prep->add_option("--config", prep.config, "Config file (warp, edge and net keys)");

  TrainArgs train;
  int steps_flag = -1;
  auto* c_train = app.add_subcommand("train", "Train the model");
  c_train->add_option("--config", train.config, "Config file");
  c_train->add_option("--data", train.data, "Directory of training images")->required();
  c_train->add_option("--out", train.out, "Output directory")->required();
  c_train->add_option("--resume", train.resume, "Checkpoint to resume from");
  c_train->add_option("--set", train.overrides, "Config override key=value (repeatable)");
  c_train->add_option("--steps", steps_flag, "Shorthand for --set train.steps=N");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Score a model on prepared pairs, or score image folders");
  c_eval->add_option("--checkpoint", eval.checkpoints, "Checkpoint (repeatable, one row each)");
  c_eval->add_option("--data", eval.data, "Directory written by prepare-data");
  c_eval->add_option("--predictions", eval.predictions, "Directory of predicted images");
  c_eval->add_option("--targets", eval.targets, "Directory of target images");
  c_eval->add_option("--extractor", eval.extractor, "Feature extractor archive for FID and style losses");
  c_eval->add_option("--out", eval.out, "Output directory")->required();

  EditArgs edit;
  auto* c_edit = app.add_subcommand("edit", "Edit one image offline");
  c_edit->add_option("--checkpoint", edit.checkpoint, "Checkpoint")->required();
  c_edit->add_option("--image", edit.image, "Input image")->required();
  c_edit->add_option("--strokes", edit.strokes, "Stroke JSON file");
  c_edit->add_option("--sketch", edit.sketch, "Sketch image (white strokes)");
  c_edit->add_option("--out", edit.out, "Output PNG")->required();
  c_edit->add_option("--mask-out", edit.mask_out, "Optional mask PNG");
  c_edit->add_option("--y1-out", edit.y1_out, "Optional unblended generator output PNG");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP editing service");
  c_serve->add_option("--checkpoint", serve.checkpoint, "Checkpoint to load at start");
  c_serve->add_option("--models-dir", serve.model_dirs, "Directory of loadable checkpoints (repeatable)");
  c_serve->add_option("--host", serve.cfg.host, "Bind address");
  c_serve->add_option("--port", serve.cfg.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  c_serve->add_option("--max-image-side", serve.cfg.max_image_side, "Largest accepted image side")
      ->check(CLI::PositiveNumber);

  ExtractorArgs exa;
  auto* c_ex = app.add_subcommand("train-extractor", "Train the feature extractor used by FID and style losses");
  c_ex->add_option("--data", exa.data, "Directory written by synth (with labels.json)")->required();
  c_ex->add_option("--out", exa.out, "Output archive")->required();
  c_ex->add_option("--steps", exa.steps, "Optimizer steps");
  c_ex->add_option("--batch", exa.batch, "Batch size")->check(CLI::PositiveNumber);
  c_ex->add_option("--seed", exa.seed, "Random seed");

  auto* c_cfg = app.add_subcommand("print-config", "Print every config key with its default value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*c_synth) return run_synth(synth);
    if (*c_prep) return run_prepare(prep);
    if (*c_train) {
      if (steps_flag >= 0) train.steps = steps_flag;
      return run_train(train);
    }
    if (*c_eval) return run_eval(eval);
    if (*c_edit) return run_edit(edit);
    if (*c_serve) return run_serve(serve);
    if (*c_ex) return run_train_extractor(exa);
    if (*c_cfg) {
      std::cout << format_train_config(TrainConfig{});
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kDataError;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
