#include "sketchedit/server.hpp"

#include <algorithm>
#include <mutex>

#include <boost/beast/core/detail/base64.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sketchedit/image_io.hpp"

namespace sketchedit {

namespace b64 = boost::beast::detail::base64;
using nlohmann::json;

namespace {

HttpResponse error_response(int status, const std::string& message) {
  return {status, json{{"error", {{"code", status}, {"message", message}}}}.dump()};
}

struct BadRequest : Error {
  using Error::Error;
};

std::string png_b64(const Bytes& png) { return base64_encode(std::string(png.begin(), png.end())); }

Bytes decode_field(const json& body, const char* key) {
  const auto& v = body.at(key);
  if (!v.is_string()) throw BadRequest(std::string("'") + key + "' must be a base64 string");
  std::string raw;
  try {
    raw = base64_decode(v.get<std::string>());
  } catch (const DataError& e) {
    throw BadRequest(std::string("'") + key + "': " + e.what());
  }
  return Bytes(raw.begin(), raw.end());
}

bool option_flag(const json& options, const char* key) {
  if (!options.contains(key)) return false;
  if (!options[key].is_boolean()) throw BadRequest(std::string("options.") + key + " must be a boolean");
  return options[key].get<bool>();
}

}  // namespace

std::string base64_encode(const std::string& bytes) {
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::string base64_decode(const std::string& text) {
  std::string_view s = text;
  if (s.rfind("data:", 0) == 0) {
    const auto comma = s.find(',');
    if (comma == std::string_view::npos) throw DataError("data URL without payload");
    s.remove_prefix(comma + 1);
  }
  std::string clean;
  clean.reserve(s.size());
  for (char ch : s) {
    if (ch != '\n' && ch != '\r' && ch != ' ') clean.push_back(ch);
  }
  if (clean.size() % 4 != 0) throw DataError("invalid base64 length");
  std::size_t pad = 0;
  while (pad < 2 && pad < clean.size() && clean[clean.size() - 1 - pad] == '=') ++pad;
  std::string out(b64::decoded_size(clean.size()), '\0');
  const auto [written, read] = b64::decode(out.data(), clean.data(), clean.size());
  if (read != clean.size() - pad) throw DataError("invalid base64 character");
  out.resize(written);
  return out;
}

EditService::EditService(ServerConfig cfg) : cfg_(std::move(cfg)) {}

void EditService::set_model(std::shared_ptr<const ModelHandle> model) {
  std::unique_lock lock(mu_);
  model_ = std::move(model);
}

std::shared_ptr<const ModelHandle> EditService::model() const {
  std::shared_lock lock(mu_);
  return model_;
}

HttpResponse EditService::edit(const std::string& body_text) const {
  const auto model = this->model();
  if (!model) return error_response(503, "no model loaded");
  try {
    json body;
    try {
      body = json::parse(body_text);
    } catch (const json::parse_error& e) {
      throw BadRequest(std::string("body is not valid JSON: ") + e.what());
    }
    if (!body.is_object()) throw BadRequest("body must be a JSON object");
    if (!body.contains("image_b64")) throw BadRequest("missing 'image_b64'");
    const bool has_strokes = body.contains("strokes") && !body["strokes"].is_null();
    const bool has_sketch = body.contains("sketch_b64") && !body["sketch_b64"].is_null();
    if (has_strokes == has_sketch) throw BadRequest("exactly one of 'strokes' and 'sketch_b64' is required");

    EditRequest req;
    if (body.contains("options")) {
      const auto& o = body["options"];
      if (!o.is_object()) throw BadRequest("'options' must be an object");
      req.options.return_mask = option_flag(o, "return_mask");
      req.options.return_intermediate = option_flag(o, "return_intermediate");
    }
    if (has_strokes) {
      try {
        const auto& s = body["strokes"];
        req.strokes = strokes_from_json(s.is_array() ? json{{"strokes", s}} : s);
      } catch (const DataError& e) {
        throw BadRequest(std::string("invalid strokes: ") + e.what());
      }
    }
    const Bytes image_bytes = decode_field(body, "image_b64");
    const Bytes sketch_bytes = has_sketch ? decode_field(body, "sketch_b64") : Bytes{};

    try {
      req.image = decode_image(image_bytes);
      if (has_sketch) req.sketch = decode_sketch(sketch_bytes);
    } catch (const Error& e) {
      return error_response(422, e.what());
    }
    if (std::max(req.image.height(), req.image.width()) > cfg_.max_image_side) {
      return error_response(422, "image side exceeds " + std::to_string(cfg_.max_image_side) + " px");
    }
    if (req.sketch && !req.sketch->same_size(req.image)) {
      throw BadRequest("sketch size does not match the image size");
    }

    const auto r = model->edit(req);
    json out = {{"result", png_b64(encode_png(r.result))},
                {"width", r.result.width()},
                {"height", r.result.height()},
                {"timing_ms", r.timing_ms}};
    if (req.options.return_mask) out["mask"] = png_b64(encode_png(r.mask));
    if (req.options.return_intermediate) out["y1"] = png_b64(encode_png(r.y1));
    return {200, out.dump()};
  } catch (const BadRequest& e) {
    return error_response(400, e.what());
  } catch (const DimensionError& e) {
    return error_response(400, e.what());
  } catch (const DataError& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse EditService::health() const {
  const auto m = model();
  json j = {{"status", "ok"}, {"model_loaded", m != nullptr}, {"version", kServiceVersion}};
  if (m) j["model"] = {{"source", m->source()}, {"step", m->step()}, {"resolution", m->config().net.resolution}};
  return {200, j.dump()};
}

std::vector<std::filesystem::path> EditService::available() const {
  std::vector<std::filesystem::path> out;
  for (const auto& dir : cfg_.model_dirs) {
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
      if (e.is_regular_file() && e.path().extension() == ".ckpt") out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

HttpResponse EditService::models() const {
  const auto m = model();
  json list = json::array();
  for (const auto& p : available()) {
    list.push_back({{"name", p.filename().string()}, {"path", p.string()}, {"loaded", m && m->source() == p.string()}});
  }
  json j = {{"models", list}, {"current", m ? json(m->source()) : json(nullptr)}};
  return {200, j.dump()};
}

HttpResponse EditService::load(const std::string& body_text) {
  std::string path;
  try {
    const auto body = json::parse(body_text);
    path = body.at("path").get<std::string>();
  } catch (const json::exception& e) {
    return error_response(400, std::string("expected {\"path\": string}: ") + e.what());
  }
  const auto avail = available();
  if (std::find(avail.begin(), avail.end(), std::filesystem::path(path)) == avail.end()) {
    return error_response(404, "checkpoint not listed by /v1/models: " + path);
  }
  try {
    set_model(ModelHandle::load(path));
  } catch (const Error& e) {
    return error_response(422, e.what());
  }
  return health();
}

HttpServer::HttpServer(EditService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto reply = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server_->set_payload_max_length(64u << 20);
  server_->Post("/v1/edit", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_.edit(req.body));
  });
  server_->Get("/v1/health", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service_.health());
  });
  server_->Get("/v1/models", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service_.models());
  });
  server_->Post("/v1/models/load", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_.load(req.body));
  });
  server_->set_pre_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    return httplib::Server::HandlerResponse::Unhandled;
  });
  server_->Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  const auto& cfg = service_.config();
  if (cfg.port == 0) return server_->bind_to_any_port(cfg.host);
  return server_->bind_to_port(cfg.host, cfg.port) ? cfg.port : -1;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace sketchedit
