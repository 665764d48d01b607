#pragma once

#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "sketchedit/inference.hpp"

namespace httplib {
class Server;
}

namespace sketchedit {

inline constexpr const char* kServiceVersion = "1.0.0";

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  int max_image_side = 2048;
  /// Directories scanned for *.ckpt files by GET /v1/models.
  std::vector<std::filesystem::path> model_dirs;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Transport-independent request handlers. The model handle is swapped under
/// an exclusive lock; requests hold a shared reference for their duration.
class EditService {
 public:
  explicit EditService(ServerConfig cfg);

  void set_model(std::shared_ptr<const ModelHandle> model);
  [[nodiscard]] std::shared_ptr<const ModelHandle> model() const;

  /// POST /v1/edit. 400 malformed payload, 422 undecodable image, 503 no model.
  [[nodiscard]] HttpResponse edit(const std::string& body) const;
  /// GET /v1/health.
  [[nodiscard]] HttpResponse health() const;
  /// GET /v1/models.
  [[nodiscard]] HttpResponse models() const;
  /// POST /v1/models/load {"path": ...}; only checkpoints listed by models().
  HttpResponse load(const std::string& body);

  [[nodiscard]] const ServerConfig& config() const { return cfg_; }

 private:
  [[nodiscard]] std::vector<std::filesystem::path> available() const;

  ServerConfig cfg_;
  mutable std::shared_mutex mu_;
  std::shared_ptr<const ModelHandle> model_;
};

/// HTTP binding of EditService.
class HttpServer {
 public:
  explicit HttpServer(EditService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds host:port (port 0 picks a free port). Returns the bound port or -1.
  int bind();
  /// Serves until stop(); call after bind().
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  EditService& service_;
  std::unique_ptr<httplib::Server> server_;
};

std::string base64_encode(const std::string& bytes);
/// Accepts an optional "data:...;base64," prefix. Throws DataError on invalid input.
std::string base64_decode(const std::string& text);

}  // namespace sketchedit
