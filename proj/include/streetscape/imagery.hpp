#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "streetscape/geo.hpp"
#include "streetscape/http.hpp"
#include "streetscape/image_codec.hpp"

namespace streetscape::imagery {

inline constexpr const char* kStreetViewBaseUrl = "https://maps.googleapis.com/maps/api/streetview";
inline constexpr const char* kApiKeyEnv = "STREETSCAPE_STREETVIEW_KEY";

struct CameraConfig {
  std::vector<double> headings_deg{0.0, 90.0, 180.0, 270.0};
  double pitch_deg = 0.0;
  double fov_deg = 90.0;
  int width = 640;
  int height = 640;

  /// Headings in [0,360), 10 <= fov <= 120, 1..640 px per side. Throws Error(kConfig).
  void validate() const;
};

enum class ImageStatus { kAvailable, kPlaceholder, kFetchFailed };

const char* to_string(ImageStatus status);
ImageStatus image_status_from(std::string_view text);

struct ImageRecord {
  std::string point_id;
  double heading_deg = 0.0;
  std::string file_path;  ///< relative to the run's image directory
  ImageStatus status = ImageStatus::kFetchFailed;
  std::string sha256;     ///< empty for fetch_failed

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Compact decimal rendering of a heading or angle: 90 -> "90", 22.5 -> "22.5".
std::string format_angle(double degrees);

/// `<point_id>/<heading>.jpg`
std::string image_relative_path(std::string_view point_id, double heading_deg);

/// Street View Static API request. Parameter order is fixed:
/// size, location (lat,lng with 6 decimals), heading, pitch, fov, key.
/// Throws Error(kConfig) when the key is empty.
std::string build_request(const SamplePoint& point, double heading_deg, const CameraConfig& cam,
                          const std::string& key, const std::string& base_url = kStreetViewBaseUrl);

/// Replaces the value of the `key` query parameter with "REDACTED".
std::string redact_key(const std::string& url);

enum class Verdict { kPlaceholder, kGenuine };

/// Share of pixels equal to the most frequent pixel value (per-channel tuple).
double modal_dominance(const Image& image);

/// Placeholder when the modal pixel covers at least `threshold` of the image.
Verdict detect_placeholder(const Image& image, double threshold = 0.90);

/// Decodes and classifies downloaded bytes: undecodable or wrongly sized images
/// are kFetchFailed.
ImageStatus classify_download(std::string_view bytes, const CameraConfig& cam, double threshold);

inline const std::vector<std::string> kManifestHeader{"point_id", "heading_deg", "file_path",
                                                      "status", "sha256"};

std::string format_manifest(const std::vector<ImageRecord>& records);
std::vector<ImageRecord> parse_manifest(std::string_view text);
std::vector<ImageRecord> read_manifest(const std::filesystem::path& path);

struct FetchPolicy {
  double requests_per_second = 10.0;
  http::RetryPolicy retry;
  std::size_t workers = 8;
  double dominance_threshold = 0.90;
  std::size_t flush_every = 64;                ///< manifest rewrite cadence, in committed rows
  std::optional<std::size_t> stop_after;       ///< stop after this many new downloads
};

struct FetchOptions {
  std::string base_url = kStreetViewBaseUrl;
  std::string api_key;
  std::filesystem::path image_dir;
  std::filesystem::path manifest_path;
  FetchPolicy policy;
  std::shared_ptr<http::Transport> transport;  ///< defaults to http::default_transport()
};

struct FetchOutcome {
  std::vector<ImageRecord> records;  ///< one per (point, heading), in point-then-heading order
  std::size_t downloaded = 0;
  std::size_t reused = 0;
  bool halted = false;               ///< quota exhaustion or stop_after
  std::string halt_reason;
};

/// Downloads every (point, heading) image not already present in the manifest
/// with a matching file hash. The manifest always holds one row per pair; rows
/// not yet downloaded read fetch_failed. HTTP 403/429 halt the run after a
/// manifest flush.
FetchOutcome fetch_batch(const std::vector<SamplePoint>& points, const CameraConfig& cam,
                         const FetchOptions& options);

struct Coverage {
  std::size_t points_all_headings = 0;  ///< every configured heading available
  std::size_t points_no_coverage = 0;   ///< no heading available
};

Coverage coverage(const std::vector<ImageRecord>& records, std::size_t heading_count);

}  // namespace streetscape::imagery
