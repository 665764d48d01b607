#include "sketchedit/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sketchedit/error.hpp"

namespace sketchedit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Entry {
  std::string key;
  std::string doc;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define INT_ENTRY(KEY, FIELD, DOC)                                                                             \
  Entry {                                                                                                      \
    KEY, DOC,                                                                                                  \
        [](TrainConfig& c, const std::string& k, const std::string& v) {                                      \
          c.FIELD = parse_int<std::decay_t<decltype(c.FIELD)>>(k, v);                                         \
        },                                                                                                     \
        [](const TrainConfig& c) { return std::to_string(c.FIELD); }                                          \
  }
#define DOUBLE_ENTRY(KEY, FIELD, DOC)                                                                          \
  Entry {                                                                                                      \
    KEY, DOC, [](TrainConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_double(k, v); }, \
        [](const TrainConfig& c) { return fmt(c.FIELD); }                                                      \
  }
#define BOOL_ENTRY(KEY, FIELD, DOC)                                                                            \
  Entry {                                                                                                      \
    KEY, DOC, [](TrainConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_bool(k, v); },   \
        [](const TrainConfig& c) { return std::string(c.FIELD ? "true" : "false"); }                           \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      INT_ENTRY("net.width", net.width, "base channel count"),
      INT_ENTRY("net.style_dim", net.style_dim, "style vector length d"),
      INT_ENTRY("net.resolution", net.resolution, "square training resolution"),
      INT_ENTRY("net.coarse_blocks", net.coarse_blocks, "dilated blocks in the coarse stage"),
      INT_ENTRY("net.refine_blocks", net.refine_blocks, "dilated blocks in the refinement stage"),
      INT_ENTRY("net.disc_stages", net.disc_stages, "stride-2 discriminator stages"),
      DOUBLE_ENTRY("warp.min_area", pair.warp.min_area_fraction, "smallest warp region, fraction of image"),
      DOUBLE_ENTRY("warp.max_area", pair.warp.max_area_fraction, "largest warp region, fraction of image"),
      INT_ENTRY("warp.min_interior", pair.warp.min_interior, "fewest moving mesh vertices"),
      INT_ENTRY("warp.max_interior", pair.warp.max_interior, "most moving mesh vertices"),
      DOUBLE_ENTRY("warp.max_displacement", pair.warp.max_displacement_fraction,
                   "largest vertex move, fraction of region diagonal"),
      DOUBLE_ENTRY("edges.low", pair.edges.low, "hysteresis low threshold"),
      DOUBLE_ENTRY("edges.high", pair.edges.high, "hysteresis high threshold"),
      INT_ENTRY("edges.smoothing_radius", pair.edges.smoothing_radius, "pre-smoothing radius in px"),
      INT_ENTRY("dropout.min_count", dropout.min_count, "fewest dropped rectangles"),
      INT_ENTRY("dropout.max_count", dropout.max_count, "most dropped rectangles"),
      DOUBLE_ENTRY("dropout.min_fraction", dropout.min_fraction, "smallest rectangle, fraction of region box"),
      DOUBLE_ENTRY("dropout.max_fraction", dropout.max_fraction, "largest rectangle, fraction of region box"),
      DOUBLE_ENTRY("optim.lr_generator", optim.lr_generator, "learning rate of M, S, G"),
      DOUBLE_ENTRY("optim.lr_discriminator", optim.lr_discriminator, "learning rate of D"),
      DOUBLE_ENTRY("optim.beta1", optim.beta1, "first moment decay"),
      DOUBLE_ENTRY("optim.beta2", optim.beta2, "second moment decay"),
      DOUBLE_ENTRY("optim.eps", optim.eps, "moment denominator epsilon"),
      DOUBLE_ENTRY("loss.reconstruction", weights.reconstruction, "weight of L_R"),
      DOUBLE_ENTRY("loss.adversarial", weights.adversarial, "weight of L_G"),
      DOUBLE_ENTRY("loss.bmr", weights.bmr, "weight of L_BMR"),
      Entry{"ablation.mask", "estimated | none | bbox",
            [](TrainConfig& c, const std::string&, const std::string& v) { c.ablation.mask = mask_mode_from_string(v); },
            [](const TrainConfig& c) { return to_string(c.ablation.mask); }},
      BOOL_ENTRY("ablation.style_encoder", ablation.style_encoder, "use the style encoder"),
      BOOL_ENTRY("ablation.bmr", ablation.bmr, "use bi-directional mask regularization"),
      INT_ENTRY("train.batch_size", batch_size, "images per step"),
      INT_ENTRY("train.steps", steps, "total optimization steps"),
      INT_ENTRY("train.checkpoint_every", checkpoint_every, "steps between checkpoints (0 = only at end)"),
      INT_ENTRY("train.log_every", log_every, "steps between log records"),
      INT_ENTRY("train.threads", threads, "intra-op CPU threads"),
      INT_ENTRY("train.seed", seed, "seed for initialization and sampling"),
  };
  return table;
}

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.key == key) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  find_entry(key).set(cfg, key, trim(value));
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

std::string format_train_config(const TrainConfig& cfg) {
  std::ostringstream os;
  for (const auto& e : entries()) os << e.key << " = " << e.get(cfg) << "  # " << e.doc << "\n";
  return os.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.push_back(e.key);
  return out;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& e : entries()) j[e.key] = e.get(cfg);
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (!j.is_object()) throw ConfigError("config manifest must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw ConfigError("config manifest value for " + k + " must be a string");
    set_config_value(cfg, k, v.get<std::string>());
  }
  cfg.validate();
  return cfg;
}

}  // namespace sketchedit
