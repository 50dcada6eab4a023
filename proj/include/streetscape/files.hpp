#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace streetscape {

std::string read_file(const std::filesystem::path& path);

/// Writes to `<path>.part` then renames, so readers never observe a partial file.
void write_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Appends and flushes; creates the file when absent.
void append_file(const std::filesystem::path& path, std::string_view bytes);

std::string utc_now_iso();

}  // namespace streetscape
