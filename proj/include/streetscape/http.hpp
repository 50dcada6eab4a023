#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace streetscape::http {

struct Url {
  std::string scheme;  ///< "http" or "https"
  std::string host;
  int port = 0;
  std::string target;  ///< path plus query, always starting with '/'

  /// Throws Error(kConfig) for anything other than an absolute http(s) URL.
  static Url parse(const std::string& text);
  std::string origin() const;
};

struct Request {
  std::string method = "GET";
  std::string url;
  std::string body;
  std::string content_type;
  std::vector<std::pair<std::string, std::string>> headers;
};

struct Response {
  int status = 0;  ///< 0 when the transport failed before any HTTP status was received
  std::string body;
  std::string content_type;
  std::string transport_error;
};

/// Sends one request. Implementations must be safe to call from several threads.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Response send(const Request& request) = 0;
};

/// cpp-httplib backed transport (plain HTTP and HTTPS).
class HttplibTransport : public Transport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(60))
      : timeout_(timeout) {}
  Response send(const Request& request) override;

 private:
  std::chrono::seconds timeout_;
};

std::shared_ptr<Transport> default_transport();

/// Token bucket shared by concurrent senders. A rate of 0 disables limiting.
class TokenBucket {
 public:
  explicit TokenBucket(double rate_per_second, double burst = 1.0);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  std::mutex mutex_;
  double rate_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
};

inline bool is_retriable(const Response& r) { return r.status == 0 || r.status >= 500; }

/// Sends with exponential backoff on transport failures and HTTP 5xx.
/// Returns the first non-retriable response; throws UpstreamError once retries
/// are exhausted. `what` names the service in error messages.
Response send_with_retry(Transport& transport, const Request& request, const RetryPolicy& policy,
                         TokenBucket* limiter, const std::string& what);

/// Percent-encodes everything outside the RFC 3986 unreserved set.
std::string url_encode(const std::string& value);

}  // namespace streetscape::http
