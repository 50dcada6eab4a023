#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "streetscape/files.hpp"

namespace test_support {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(STREETSCAPE_FIXTURES) / name;
}

inline std::string read_fixture(const std::string& name) { return streetscape::read_file(fixture(name)); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("streetscape_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace test_support
