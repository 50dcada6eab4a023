#include "streetscape/http.hpp"

#include <regex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "streetscape/error.hpp"

namespace streetscape::http {

Url Url::parse(const std::string& text) {
  static const std::regex kPattern(R"(^(https?)://([^/:?#]+)(?::(\d+))?([^#]*)$)",
                                   std::regex::icase);
  std::smatch m;
  if (!std::regex_match(text, m, kPattern)) {
    throw Error(ErrorKind::kConfig, fmt::format("not an absolute http(s) URL: '{}'", text));
  }
  Url url;
  url.scheme = m[1].str();
  for (auto& c : url.scheme) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  url.host = m[2].str();
  url.port = m[3].matched ? std::stoi(m[3].str()) : (url.scheme == "https" ? 443 : 80);
  url.target = m[4].str();
  if (url.target.empty() || url.target.front() != '/') url.target.insert(0, "/");
  return url;
}

std::string Url::origin() const { return fmt::format("{}://{}:{}", scheme, host, port); }

Response HttplibTransport::send(const Request& request) {
  const Url url = Url::parse(request.url);
  httplib::Client client(url.origin());
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  client.set_follow_location(true);

  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);

  httplib::Result result = request.method == "POST"
                               ? client.Post(url.target, headers, request.body,
                                             request.content_type)
                               : client.Get(url.target, headers);
  Response out;
  if (!result) {
    out.transport_error = httplib::to_string(result.error());
    return out;
  }
  out.status = result->status;
  out.body = std::move(result->body);
  out.content_type = result->get_header_value("Content-Type");
  return out;
}

std::shared_ptr<Transport> default_transport() {
  static auto transport = std::make_shared<HttplibTransport>();
  return transport;
}

TokenBucket::TokenBucket(double rate_per_second, double burst)
    : rate_(rate_per_second), capacity_(std::max(1.0, burst)), tokens_(capacity_),
      last_(Clock::now()) {}

void TokenBucket::acquire() {
  if (rate_ <= 0.0) return;
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = Clock::now();
    tokens_ = std::min(capacity_,
                       tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

Response send_with_retry(Transport& transport, const Request& request, const RetryPolicy& policy,
                         TokenBucket* limiter, const std::string& what) {
  auto backoff = policy.initial_backoff;
  Response last;
  const int attempts = policy.max_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (limiter) limiter->acquire();
    last = transport.send(request);
    if (!is_retriable(last)) return last;
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * policy.backoff_factor));
    }
  }
  const std::string cause = last.status == 0 ? last.transport_error
                                             : fmt::format("HTTP {}", last.status);
  throw UpstreamError(fmt::format("{}: {} after {} attempts", what, cause, attempts), last.status,
                      attempts);
}

std::string url_encode(const std::string& value) {
  std::string out;
  for (unsigned char c : value) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out += fmt::format("%{:02X}", c);
    }
  }
  return out;
}

}  // namespace streetscape::http
