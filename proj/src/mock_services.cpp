#include "streetscape/mock_services.hpp"

#include <algorithm>
#include <cstdint>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "streetscape/hashing.hpp"
#include "streetscape/scoring.hpp"

namespace streetscape::mock {

namespace {

// splitmix64: portable and fully specified.
struct Rng {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
};

std::uint64_t seed_of(const std::string& text) {
  return std::stoull(sha256_hex(text).substr(0, 16), nullptr, 16);
}

std::uint8_t clamp8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

}  // namespace

bool is_placeholder(const std::string& location, const std::string& heading) {
  // Some locations have no imagery at all, some lack single directions.
  if (seed_of("loc:" + location) % 5 == 0) return true;
  return seed_of("dir:" + location + "/" + heading) % 9 == 0;
}

Image placeholder_image(int width, int height) {
  // Neutral grey with the caption block on 8x8 block boundaries, so the flat
  // area survives JPEG coding unchanged.
  Image img = Image::filled(width, height, 228, 228, 228);
  const int x0 = width / 4 / 8 * 8, x1 = 3 * width / 4 / 8 * 8;
  const int y0 = height / 2 / 8 * 8, y1 = std::min(height, y0 + 8);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      auto* px = img.at(x, y);
      px[0] = px[1] = px[2] = 90;
    }
  }
  return img;
}

Image street_scene(const std::string& location, const std::string& heading, int width, int height) {
  Rng rng{seed_of(location + "/" + heading)};
  Image img = Image::filled(width, height, 0, 0, 0);
  const int horizon = height * (35 + rng.below(15)) / 100;
  const int sky_r = 110 + rng.below(40), sky_g = 150 + rng.below(40), sky_b = 200 + rng.below(50);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      auto* px = img.at(x, y);
      const int noise = rng.below(13) - 6;
      if (y < horizon) {
        const int shade = (y * 40) / std::max(1, horizon);
        px[0] = clamp8(sky_r + shade + noise);
        px[1] = clamp8(sky_g + shade + noise);
        px[2] = clamp8(sky_b + shade / 2 + noise);
      } else {
        const int g = 95 + ((y - horizon) * 50) / std::max(1, height - horizon);
        px[0] = clamp8(g + noise);
        px[1] = clamp8(g + noise);
        px[2] = clamp8(g + 5 + noise);
      }
    }
  }
  const int buildings = 2 + rng.below(5);
  for (int b = 0; b < buildings; ++b) {
    const int bw = width / 8 + rng.below(width / 4);
    const int bh = height / 6 + rng.below(height / 3);
    const int bx = rng.below(std::max(1, width - bw));
    const int base = horizon + rng.below(std::max(1, height / 10));
    const int r = 120 + rng.below(110), g = 90 + rng.below(110), bl = 70 + rng.below(110);
    for (int y = std::max(0, base - bh); y < std::min(height, base); ++y) {
      for (int x = bx; x < bx + bw; ++x) {
        auto* px = img.at(x, y);
        const bool window = ((x - bx) / 12) % 2 == 1 && ((y - base) / 16) % 2 == 0;
        const int noise = rng.below(9) - 4;
        px[0] = clamp8((window ? 60 : r) + noise);
        px[1] = clamp8((window ? 70 : g) + noise);
        px[2] = clamp8((window ? 90 : bl) + noise);
      }
    }
  }
  return img;
}

struct MockServices::Impl {
  httplib::Server server;
};

MockServices::MockServices(Options options) : impl_(std::make_unique<Impl>()), options_(std::move(options)) {
  auto& server = impl_->server;

  server.Get("/streetview", [this](const httplib::Request& req, httplib::Response& res) {
    const int n = ++imagery_requests_;
    if (n <= options_.fail_first_requests) {
      res.status = 503;
      return;
    }
    if (!req.has_param("key") || req.get_param_value("key").empty()) {
      res.status = 403;
      res.set_content("missing key", "text/plain");
      return;
    }
    if (options_.quota_after >= 0 && imagery_served_.load() >= options_.quota_after) {
      res.status = 429;
      res.set_content("quota exhausted", "text/plain");
      return;
    }
    int width = 640, height = 640;
    if (std::sscanf(req.get_param_value("size").c_str(), "%dx%d", &width, &height) != 2 ||
        width < 1 || height < 1 || width > 640 || height > 640) {
      res.status = 400;
      return;
    }
    const std::string location = req.get_param_value("location");
    const std::string heading = req.get_param_value("heading");
    const Image img = is_placeholder(location, heading) ? placeholder_image(width, height)
                                                        : street_scene(location, heading, width, height);
    ++imagery_served_;
    res.set_content(encode_jpeg(img, 85), "image/jpeg");
  });

  server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    ++chat_requests_;
    if (options_.backend_fail_all) {
      res.status = 500;
      return;
    }
    const auto body = nlohmann::json::parse(req.body, nullptr, false);
    std::string prompt, image;
    try {
      for (const auto& part : body.at("messages").at(0).at("content")) {
        if (part.at("type") == "text") prompt = part.at("text").get<std::string>();
        if (part.at("type") == "image_url") {
          const std::string url = part.at("image_url").at("url").get<std::string>();
          const auto comma = url.find(',');
          if (comma != std::string::npos) image = base64_decode(url.substr(comma + 1));
        }
      }
    } catch (const std::exception&) {
      res.status = 400;
      return;
    }
    const std::string answer = scoring::mock_answer(scoring::task_id_for_prompt(prompt), image);
    nlohmann::json reply = {
        {"object", "chat.completion"},
        {"model", body.value("model", "")},
        {"choices", {{{"index", 0},
                      {"message", {{"role", "assistant"}, {"content", answer}}},
                      {"finish_reason", "stop"}}}}};
    res.set_content(reply.dump(), "application/json");
  });

  server.Post("/api/interpreter", [this](const httplib::Request&, httplib::Response& res) {
    if (options_.overpass_document.empty()) {
      res.status = 404;
      return;
    }
    res.set_content(options_.overpass_document, "application/json");
  });
}

MockServices::~MockServices() { stop(); }

int MockServices::start(int port) {
  auto& server = impl_->server;
  if (port == 0) {
    port_ = server.bind_to_any_port("127.0.0.1");
  } else {
    port_ = server.bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ <= 0) throw std::runtime_error("mock services: cannot bind");
  thread_ = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  return port_;
}

void MockServices::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

void MockServices::listen_blocking(const std::string& host, int port) {
  port_ = port;
  impl_->server.listen(host, port);
}

std::string MockServices::base_url() const { return fmt::format("http://127.0.0.1:{}", port_); }

}  // namespace streetscape::mock
