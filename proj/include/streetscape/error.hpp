#pragma once

#include <stdexcept>
#include <string>

namespace streetscape {

/// Broad failure classes. The CLI maps each one to a process exit code.
enum class ErrorKind {
  kConfig,      ///< invalid configuration or usage, detected before side effects
  kUpstream,    ///< HTTP service failure (Overpass, imagery API, inference backend)
  kValidation,  ///< data violates a domain rule (answer domain, annotation file)
  kParse,       ///< malformed document
  kRange,       ///< argument outside the operation's domain
  kPipeline,    ///< stage invoked out of order
  kIo,          ///< filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised for transient HTTP failures; carries how many attempts were made.
class UpstreamError : public Error {
 public:
  UpstreamError(const std::string& message, int status, int attempts)
      : Error(ErrorKind::kUpstream, message), status_(status), attempts_(attempts) {}

  int status() const noexcept { return status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int status_;
  int attempts_;
};

/// Raised for a malformed document; `offset` is the byte position of the fault when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(ErrorKind::kParse, message), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

const char* to_string(ErrorKind kind);

/// Exit codes: 0 success, 2 config, 3 upstream service, 4 validation, 1 anything else.
int exit_code_for(ErrorKind kind);

}  // namespace streetscape
