#include "sketchedit/networks.hpp"

#include <cmath>
#include <set>

#include "sketchedit/error.hpp"
#include "sketchedit/rng.hpp"

namespace sketchedit {

namespace F = torch::nn::functional;

namespace {

struct ConvSpec {
  std::string name;
  int64_t in = 0;
  int64_t out = 0;  // output channels after gating
  int64_t k = 3;
  bool gated = false;
  double gain = 2.0;  // He-style variance gain
};

std::string block_name(const std::string& prefix, int i) { return prefix + std::to_string(i); }

std::vector<ConvSpec> layer_table(const NetConfig& cfg) {
  const int64_t w = cfg.width;
  const int64_t d = cfg.style_dim;
  std::vector<ConvSpec> t;
  // Mask estimator: shared trunk, then mask and aux heads with skip connections.
  t.push_back({"M.enc1", 4, w});
  t.push_back({"M.enc2", w, 2 * w});
  t.push_back({"M.enc3", 2 * w, 2 * w});
  t.push_back({"M.mid", 2 * w, 2 * w});
  for (const char* head : {"M.mask", "M.aux"}) {
    const std::string h = head;
    t.push_back({h + ".up2", 4 * w, w});
    t.push_back({h + ".up1", 2 * w, w});
    t.push_back({h + ".out", w, h == "M.mask" ? 1 : 3, 3, false, 0.25});
  }
  // Style encoder.
  t.push_back({"S.c1", 4, w});
  t.push_back({"S.c2", w, 2 * w});
  t.push_back({"S.c3", 2 * w, 4 * w});
  t.push_back({"S.proj", 4 * w, d, 1, false, 1.0});
  // Coarse stage.
  t.push_back({"G0.e1", 5, w, 3, true});
  t.push_back({"G0.e2", w, 2 * w, 3, true});
  t.push_back({"G0.e3", 2 * w, 2 * w, 3, true});
  t.push_back({"G0.e4", 2 * w, 4 * w, 3, true});
  t.push_back({"G0.fuse", 4 * w + d, 4 * w, 3, true});
  for (int i = 0; i < cfg.coarse_blocks; ++i) t.push_back({block_name("G0.block", i), 4 * w, 4 * w, 3, true});
  t.push_back({"G0.d3", 4 * w, 2 * w, 3, true});
  t.push_back({"G0.d2", 2 * w, 2 * w, 3, true});
  t.push_back({"G0.d1", 2 * w, w, 3, true});
  t.push_back({"G0.out", w, 3, 3, false, 0.25});
  // Refinement stage on (y0, x_sta, m, c).
  t.push_back({"G1.e1", 8, w, 3, true});
  t.push_back({"G1.e2", w, 2 * w, 3, true});
  t.push_back({"G1.e3", 2 * w, 2 * w, 3, true});
  for (int i = 0; i < cfg.refine_blocks; ++i) t.push_back({block_name("G1.block", i), 2 * w, 2 * w, 3, true});
  t.push_back({"G1.d2", 2 * w, 2 * w, 3, true});
  t.push_back({"G1.d1", 2 * w, w, 3, true});
  t.push_back({"G1.out", w, 3, 3, false, 0.25});
  // Discriminator on (y, c).
  int64_t ch = 4;
  for (int i = 0; i < cfg.disc_stages; ++i) {
    const int64_t next = w * std::min<int64_t>(int64_t{1} << i, 4);
    t.push_back({"D.c" + std::to_string(i + 1), ch, next, 5});
    ch = next;
  }
  t.push_back({"D.out", ch, 1, 3, false, 1.0});
  return t;
}

torch::Tensor conv(const ModelParams& p, const std::string& name, const torch::Tensor& x, int64_t stride = 1,
                   int64_t dilation = 1) {
  const auto& w = p.get(name + ".w");
  const int64_t pad = dilation * (w.size(2) - 1) / 2;
  return torch::conv2d(x, w, p.get(name + ".b"), stride, pad, dilation);
}

torch::Tensor gconv(const ModelParams& p, const std::string& name, const torch::Tensor& x, int64_t stride = 1,
                    int64_t dilation = 1) {
  return gated_conv(x, p.get(name + ".w"), p.get(name + ".b"), stride, dilation);
}

torch::Tensor up(const torch::Tensor& x) {
  return torch::upsample_nearest2d(x, {x.size(2) * 2, x.size(3) * 2});
}

void check_input(const NetConfig& cfg, const torch::Tensor& t, int64_t channels, const char* what) {
  if (t.dim() != 4 || t.size(1) != channels || t.size(2) != cfg.resolution || t.size(3) != cfg.resolution) {
    throw DimensionError(std::string(what) + ": expected N x " + std::to_string(channels) + " x " +
                         std::to_string(cfg.resolution) + " x " + std::to_string(cfg.resolution) + ", got " +
                         c10::str(t.sizes()));
  }
}

torch::Tensor discriminator_impl(const ModelParams& p, const torch::Tensor& y, const torch::Tensor& c) {
  const auto& cfg = p.config();
  check_input(cfg, y, 3, "discriminator_forward(y)");
  check_input(cfg, c, 1, "discriminator_forward(c)");
  auto h = torch::cat({y, c}, 1);
  for (int i = 0; i < cfg.disc_stages; ++i) {
    const std::string n = "D.c" + std::to_string(i + 1);
    const auto w = spectral_normalized(p.get(n + ".w"), p.buffer(n + ".u"));
    h = F::leaky_relu(torch::conv2d(h, w, p.get(n + ".b"), 2, 2), F::LeakyReLUFuncOptions().negative_slope(0.2));
  }
  const auto w = spectral_normalized(p.get("D.out.w"), p.buffer("D.out.u"));
  return torch::conv2d(h, w, p.get("D.out.b"), 1, 1);
}

}  // namespace

void NetConfig::validate() const {
  if (width < 1) throw ConfigError("net width must be >= 1");
  if (style_dim < 8) throw ConfigError("style dimension must be >= 8");
  if (coarse_blocks < 0 || refine_blocks < 0) throw ConfigError("block counts must be >= 0");
  if (disc_stages < 1) throw ConfigError("discriminator needs at least one stage");
  const int factor = std::max(8, 1 << disc_stages);
  if (resolution < factor || resolution % factor != 0) {
    throw ConfigError("resolution must be a positive multiple of " + std::to_string(factor));
  }
}

std::vector<ParamSpec> ModelParams::specs(const NetConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> out;
  for (const auto& l : layer_table(cfg)) {
    const int64_t out_ch = l.gated ? 2 * l.out : l.out;
    const double fan_in = static_cast<double>(l.in * l.k * l.k);
    out.push_back({l.name + ".w", {out_ch, l.in, l.k, l.k}, std::sqrt(l.gain / fan_in)});
    out.push_back({l.name + ".b", {out_ch}, 0.0});
  }
  return out;
}

std::vector<std::string> spectral_weight_names(const NetConfig& cfg) {
  std::vector<std::string> out;
  for (int i = 0; i < cfg.disc_stages; ++i) out.push_back("D.c" + std::to_string(i + 1) + ".w");
  out.push_back("D.out.w");
  return out;
}

ModelParams ModelParams::init(const NetConfig& cfg, std::uint64_t seed, torch::Dtype dtype) {
  ModelParams p;
  p.config_ = cfg;
  Rng rng(seed);
  auto random_tensor = [&](const std::vector<int64_t>& shape, double std_dev) {
    int64_t n = 1;
    for (auto s : shape) n *= s;
    std::vector<double> vals(static_cast<std::size_t>(n), 0.0);
    if (std_dev > 0.0) {
      for (auto& v : vals) v = rng.normal() * std_dev;
    }
    return torch::tensor(vals, torch::kFloat64).reshape(shape).to(dtype);
  };
  for (const auto& s : specs(cfg)) {
    p.params_[s.name] = random_tensor(s.shape, s.init_std).set_requires_grad(true);
  }
  for (const auto& wname : spectral_weight_names(cfg)) {
    const auto base = wname.substr(0, wname.size() - 2);
    auto u = random_tensor({p.params_.at(wname).size(0)}, 1.0);
    p.buffers_[base + ".u"] = u / u.norm().clamp_min(1e-12);
  }
  return p;
}

const torch::Tensor& ModelParams::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw DimensionError("unknown parameter " + name);
  return it->second;
}

torch::Tensor& ModelParams::mutable_param(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw DimensionError("unknown parameter " + name);
  return it->second;
}

const torch::Tensor& ModelParams::buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw DimensionError("unknown buffer " + name);
  return it->second;
}

void ModelParams::set_buffer(const std::string& name, torch::Tensor value) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw DimensionError("unknown buffer " + name);
  it->second = std::move(value);
}

std::vector<std::string> ModelParams::names(const std::vector<std::string>& prefixes) const {
  std::vector<std::string> out;
  for (const auto& [name, t] : params_) {
    for (const auto& pre : prefixes) {
      if (name.rfind(pre, 0) == 0) {
        out.push_back(name);
        break;
      }
    }
  }
  return out;
}

std::vector<torch::Tensor> ModelParams::group(const std::vector<std::string>& prefixes) const {
  std::vector<torch::Tensor> out;
  for (const auto& n : names(prefixes)) out.push_back(params_.at(n));
  return out;
}

ModelParams ModelParams::clone(std::optional<torch::Dtype> dtype) const {
  ModelParams p;
  p.config_ = config_;
  const auto target = dtype.value_or(this->dtype());
  for (const auto& [n, t] : params_) {
    p.params_[n] = t.detach().to(target).clone().set_requires_grad(true);
  }
  for (const auto& [n, t] : buffers_) p.buffers_[n] = t.detach().to(target).clone();
  return p;
}

ModelParams ModelParams::from_arrays(const NetConfig& cfg, std::map<std::string, torch::Tensor> params,
                                     std::map<std::string, torch::Tensor> buffers) {
  ModelParams p;
  p.config_ = cfg;
  std::set<std::string> expected;
  for (const auto& s : specs(cfg)) {
    expected.insert(s.name);
    auto it = params.find(s.name);
    if (it == params.end()) throw CheckpointError("missing parameter " + s.name);
    if (it->second.sizes().vec() != s.shape) {
      throw CheckpointError("parameter " + s.name + " has shape " + c10::str(it->second.sizes()));
    }
    p.params_[s.name] = it->second.detach().clone().set_requires_grad(true);
  }
  if (params.size() != expected.size()) throw CheckpointError("unexpected extra parameters in archive");
  for (const auto& wname : spectral_weight_names(cfg)) {
    const auto name = wname.substr(0, wname.size() - 2) + ".u";
    auto it = buffers.find(name);
    if (it == buffers.end()) throw CheckpointError("missing buffer " + name);
    if (it->second.dim() != 1 || it->second.size(0) != p.params_.at(wname).size(0)) {
      throw CheckpointError("buffer " + name + " has the wrong shape");
    }
    p.buffers_[name] = it->second.detach().clone();
  }
  return p;
}

void ModelParams::set_requires_grad(bool on) {
  for (auto& [n, t] : params_) t.set_requires_grad(on);
}

bool ModelParams::all_finite() const {
  for (const auto& [n, t] : params_) {
    if (!torch::isfinite(t).all().item<bool>()) return false;
  }
  for (const auto& [n, t] : buffers_) {
    if (!torch::isfinite(t).all().item<bool>()) return false;
  }
  return true;
}

torch::Dtype ModelParams::dtype() const {
  if (params_.empty()) return torch::kFloat32;
  return params_.begin()->second.scalar_type();
}

torch::Tensor gated_conv(const torch::Tensor& x, const torch::Tensor& weight, const torch::Tensor& bias,
                         int64_t stride, int64_t dilation) {
  const int64_t pad = dilation * (weight.size(2) - 1) / 2;
  auto y = torch::conv2d(x, weight, bias, stride, pad, dilation);
  auto parts = y.chunk(2, 1);
  return F::elu(parts[0]) * torch::sigmoid(parts[1]);
}

torch::Tensor squash(const torch::Tensor& z) { return (torch::tanh(z) + 1.0) * 0.5; }

MaskOutput mask_estimator_forward(const ModelParams& p, const torch::Tensor& x, const torch::Tensor& c,
                                  bool with_aux) {
  const auto& cfg = p.config();
  check_input(cfg, x, 3, "mask_estimator_forward(x)");
  check_input(cfg, c, 1, "mask_estimator_forward(c)");
  const auto e1 = F::elu(conv(p, "M.enc1", torch::cat({x, c}, 1)));
  const auto e2 = F::elu(conv(p, "M.enc2", e1, 2));
  const auto e3 = F::elu(conv(p, "M.enc3", e2, 2));
  const auto mid = F::elu(conv(p, "M.mid", e3, 1, 2));
  auto head = [&](const std::string& h) {
    auto u2 = F::elu(conv(p, h + ".up2", torch::cat({up(mid), e2}, 1)));
    auto u1 = F::elu(conv(p, h + ".up1", torch::cat({up(u2), e1}, 1)));
    return conv(p, h + ".out", u1);
  };
  MaskOutput out;
  out.mask = torch::sigmoid(head("M.mask"));
  if (with_aux) out.aux = squash(head("M.aux"));
  return out;
}

torch::Tensor style_features(const ModelParams& p, const torch::Tensor& x_sty, const torch::Tensor& m) {
  const auto& cfg = p.config();
  check_input(cfg, x_sty, 3, "style_encode(x_sty)");
  check_input(cfg, m, 1, "style_encode(m)");
  auto h = F::elu(conv(p, "S.c1", torch::cat({x_sty, m}, 1), 2));
  h = F::elu(conv(p, "S.c2", h, 2));
  h = F::elu(conv(p, "S.c3", h, 2));
  return conv(p, "S.proj", h);
}

torch::Tensor global_max_pool(const torch::Tensor& features) {
  if (features.dim() != 4) throw DimensionError("global_max_pool expects N x C x H x W");
  return std::get<0>(features.flatten(2).max(2));
}

torch::Tensor style_encode(const ModelParams& p, const torch::Tensor& x_sty, const torch::Tensor& m) {
  return global_max_pool(style_features(p, x_sty, m));
}

torch::Tensor tile_style(const torch::Tensor& v, int64_t h, int64_t w) {
  if (v.dim() != 2) throw DimensionError("tile_style expects N x d");
  if (h < 1 || w < 1) throw DimensionError("tile_style needs h, w >= 1");
  return v.view({v.size(0), v.size(1), 1, 1}).expand({v.size(0), v.size(1), h, w});
}

GeneratorOutput generator_forward(const ModelParams& p, const torch::Tensor& x_sta, const torch::Tensor& m,
                                  const torch::Tensor& c, const torch::Tensor& v_hat) {
  const auto& cfg = p.config();
  check_input(cfg, x_sta, 3, "generator_forward(x_sta)");
  check_input(cfg, m, 1, "generator_forward(m)");
  check_input(cfg, c, 1, "generator_forward(c)");
  const int64_t b = cfg.bottleneck();
  if (v_hat.dim() != 4 || v_hat.size(1) != cfg.style_dim || v_hat.size(2) != b || v_hat.size(3) != b) {
    throw DimensionError("style feature must be N x " + std::to_string(cfg.style_dim) + " x " +
                         std::to_string(b) + " x " + std::to_string(b) + ", got " + c10::str(v_hat.sizes()));
  }

  auto g = gconv(p, "G0.e1", torch::cat({x_sta, m, c}, 1));
  g = gconv(p, "G0.e2", g, 2);
  g = gconv(p, "G0.e3", g, 2);
  g = gconv(p, "G0.e4", g, 2);
  g = gconv(p, "G0.fuse", torch::cat({g, v_hat}, 1));
  for (int i = 0; i < cfg.coarse_blocks; ++i) g = gconv(p, block_name("G0.block", i), g, 1, 2);
  g = gconv(p, "G0.d3", up(g));
  g = gconv(p, "G0.d2", up(g));
  g = gconv(p, "G0.d1", up(g));
  GeneratorOutput out;
  out.coarse = squash(conv(p, "G0.out", g));

  auto r = gconv(p, "G1.e1", torch::cat({out.coarse, x_sta, m, c}, 1));
  r = gconv(p, "G1.e2", r, 2);
  r = gconv(p, "G1.e3", r, 2);
  for (int i = 0; i < cfg.refine_blocks; ++i) r = gconv(p, block_name("G1.block", i), r, 1, 2);
  r = gconv(p, "G1.d2", up(r));
  r = gconv(p, "G1.d1", up(r));
  out.refined = squash(conv(p, "G1.out", r));
  return out;
}

torch::Tensor power_iteration(const torch::Tensor& weight, const torch::Tensor& u) {
  torch::NoGradGuard guard;
  const auto wm = weight.detach().reshape({weight.size(0), -1});
  auto v = F::normalize(torch::mv(wm.t(), u), F::NormalizeFuncOptions().dim(0).eps(1e-12));
  return F::normalize(torch::mv(wm, v), F::NormalizeFuncOptions().dim(0).eps(1e-12));
}

torch::Tensor spectral_normalized(const torch::Tensor& weight, const torch::Tensor& u) {
  const auto wm = weight.reshape({weight.size(0), -1});
  torch::Tensor v;
  {
    torch::NoGradGuard guard;
    v = F::normalize(torch::mv(wm.detach().t(), u), F::NormalizeFuncOptions().dim(0).eps(1e-12));
  }
  const auto sigma = torch::dot(u, torch::mv(wm, v));
  return weight / sigma.clamp_min(1e-12);
}

torch::Tensor discriminator_forward(const ModelParams& p, const torch::Tensor& y, const torch::Tensor& c) {
  return discriminator_impl(p, y, c);
}

torch::Tensor discriminator_forward_update(ModelParams& p, const torch::Tensor& y, const torch::Tensor& c) {
  for (const auto& wname : spectral_weight_names(p.config())) {
    const auto uname = wname.substr(0, wname.size() - 2) + ".u";
    p.set_buffer(uname, power_iteration(p.get(wname), p.buffer(uname)));
  }
  return discriminator_impl(p, y, c);
}

}  // namespace sketchedit
