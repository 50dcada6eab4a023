#pragma once

#include <span>
#include <string>
#include <string_view>

namespace streetscape {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
/// Returns an empty string for malformed input.
std::string base64_decode(std::string_view text);

}  // namespace streetscape
