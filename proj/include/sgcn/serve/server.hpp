#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "sgcn/network/model.hpp"

namespace sgcn::serve {

inline constexpr std::size_t kMaxPayloadBytes = 1 << 20;
inline constexpr std::size_t kDefaultTopK = 5;

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

/// Eval-mode model loaded once from a checkpoint; recognize() may run from
/// many threads at once.
class Recognizer {
 public:
  explicit Recognizer(const std::filesystem::path& checkpoint);
  ~Recognizer();

  /// POST /api/recognize. 400 on malformed or empty input, 413 on oversize.
  HttpReply recognize(const std::string& body) const;
  /// GET /api/health.
  HttpReply health() const;

  std::uint32_t checkpoint_id() const { return checkpoint_id_; }
  std::size_t num_classes() const;
  const network::ModelConfig& config() const;

 private:
  std::unique_ptr<network::SgcnModel<float>> model_;
  std::uint32_t checkpoint_id_ = 0;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Static UI bundle; a built-in page is served when empty.
  std::filesystem::path ui_dir;
};

/// HTTP front end. listen() blocks until stop() is called from another thread.
class Server {
 public:
  Server(const Recognizer& recognizer, ServeOptions options);
  ~Server();

  /// Binds (port 0 picks a free port) and serves. Returns false on bind failure.
  bool listen();
  /// Binds without serving yet; returns the bound port or -1.
  int bind();
  /// Serves on a socket bound by bind().
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sgcn::serve
