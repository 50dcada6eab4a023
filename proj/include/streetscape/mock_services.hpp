#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "streetscape/image_codec.hpp"

namespace streetscape::mock {

/// Deterministic synthetic street photo for a location and heading.
Image street_scene(const std::string& location, const std::string& heading, int width, int height);

/// Flat provider-style "no imagery" placeholder with a small caption block.
Image placeholder_image(int width, int height);

/// True when the mock world has no imagery for this request.
bool is_placeholder(const std::string& location, const std::string& heading);

struct Options {
  std::string overpass_document;  ///< served at POST /api/interpreter when non-empty
  int fail_first_requests = 0;    ///< answer HTTP 503 to the first N imagery requests
  int quota_after = -1;           ///< answer HTTP 429 once N imagery requests succeeded
  int backend_fail_all = 0;       ///< answer HTTP 500 to every chat request when non-zero
};

/// Local HTTP server imitating the Street View Static API (GET /streetview),
/// an OpenAI-style chat backend (POST /v1/chat/completions) and optionally an
/// Overpass endpoint. Responses depend only on request content.
class MockServices {
 public:
  explicit MockServices(Options options = {});
  ~MockServices();
  MockServices(const MockServices&) = delete;
  MockServices& operator=(const MockServices&) = delete;

  /// Binds to 127.0.0.1 on `port` (0 picks a free port) and serves on a background thread.
  int start(int port = 0);
  void stop();
  /// Blocks serving on the calling thread.
  void listen_blocking(const std::string& host, int port);

  int port() const { return port_; }
  std::string base_url() const;
  std::string streetview_url() const { return base_url() + "/streetview"; }
  std::string backend_url() const { return base_url() + "/v1"; }
  std::string overpass_url() const { return base_url() + "/api/interpreter"; }

  int imagery_requests() const { return imagery_requests_.load(); }
  int chat_requests() const { return chat_requests_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Options options_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> imagery_requests_{0};
  std::atomic<int> imagery_served_{0};
  std::atomic<int> chat_requests_{0};
};

}  // namespace streetscape::mock
