#include "streetscape/error.hpp"

namespace streetscape {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kUpstream: return "upstream service error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kPipeline: return "pipeline error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kPipeline:
      return 2;
    case ErrorKind::kUpstream:
      return 3;
    case ErrorKind::kValidation:
      return 4;
    default:
      return 1;
  }
}

}  // namespace streetscape
