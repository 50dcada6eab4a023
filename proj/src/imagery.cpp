#include "streetscape/imagery.hpp"

#include <cmath>
#include <map>
#include <regex>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "streetscape/csv.hpp"
#include "streetscape/error.hpp"
#include "streetscape/files.hpp"
#include "streetscape/hashing.hpp"
#include "streetscape/parallel.hpp"

namespace streetscape::imagery {

void CameraConfig::validate() const {
  if (headings_deg.empty()) throw Error(ErrorKind::kConfig, "camera: at least one heading required");
  for (double h : headings_deg) {
    if (!(h >= 0.0 && h < 360.0)) {
      throw Error(ErrorKind::kConfig, fmt::format("camera: heading {} outside [0,360)", h));
    }
  }
  for (std::size_t i = 0; i < headings_deg.size(); ++i) {
    for (std::size_t j = i + 1; j < headings_deg.size(); ++j) {
      if (headings_deg[i] == headings_deg[j]) {
        throw Error(ErrorKind::kConfig, fmt::format("camera: duplicate heading {}", headings_deg[i]));
      }
    }
  }
  if (!(fov_deg >= 10.0 && fov_deg <= 120.0)) {
    throw Error(ErrorKind::kConfig, fmt::format("camera: fov {} outside [10,120]", fov_deg));
  }
  if (!(pitch_deg >= -90.0 && pitch_deg <= 90.0)) {
    throw Error(ErrorKind::kConfig, fmt::format("camera: pitch {} outside [-90,90]", pitch_deg));
  }
  if (width < 1 || height < 1 || width > 640 || height > 640) {
    throw Error(ErrorKind::kConfig,
                fmt::format("camera: size {}x{} outside the 640x640 API limit", width, height));
  }
}

const char* to_string(ImageStatus status) {
  switch (status) {
    case ImageStatus::kAvailable: return "available";
    case ImageStatus::kPlaceholder: return "placeholder";
    case ImageStatus::kFetchFailed: return "fetch_failed";
  }
  return "fetch_failed";
}

ImageStatus image_status_from(std::string_view text) {
  if (text == "available") return ImageStatus::kAvailable;
  if (text == "placeholder") return ImageStatus::kPlaceholder;
  if (text == "fetch_failed") return ImageStatus::kFetchFailed;
  throw ParseError(fmt::format("unknown image status '{}'", text), 0);
}

std::string format_angle(double degrees) {
  if (degrees == 0.0) return "0";
  if (degrees == std::floor(degrees) && std::abs(degrees) < 1e15) return fmt::format("{:.0f}", degrees);
  return fmt::format("{}", degrees);
}

std::string image_relative_path(std::string_view point_id, double heading_deg) {
  return fmt::format("{}/{}.jpg", point_id, format_angle(heading_deg));
}

std::string build_request(const SamplePoint& point, double heading_deg, const CameraConfig& cam,
                          const std::string& key, const std::string& base_url) {
  if (key.empty()) {
    throw Error(ErrorKind::kConfig,
                fmt::format("street view: no API key (set {})", kApiKeyEnv));
  }
  return fmt::format("{}?size={}x{}&location={:.6f},{:.6f}&heading={}&pitch={}&fov={}&key={}",
                     base_url, cam.width, cam.height, point.position.lat, point.position.lon,
                     format_angle(heading_deg), format_angle(cam.pitch_deg),
                     format_angle(cam.fov_deg), http::url_encode(key));
}

std::string redact_key(const std::string& url) {
  static const std::regex kKey(R"(([?&]key=)[^&]*)");
  return std::regex_replace(url, kKey, "$1REDACTED");
}

double modal_dominance(const Image& image) {
  const std::size_t count = static_cast<std::size_t>(image.width) * image.height;
  if (count == 0) return 0.0;
  std::unordered_map<std::uint32_t, std::size_t> histogram;
  std::size_t best = 0;
  const int ch = image.channels;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t key = 0;
    for (int c = 0; c < ch; ++c) key = (key << 8) | image.pixels[i * ch + c];
    best = std::max(best, ++histogram[key]);
  }
  return static_cast<double>(best) / static_cast<double>(count);
}

Verdict detect_placeholder(const Image& image, double threshold) {
  return modal_dominance(image) >= threshold ? Verdict::kPlaceholder : Verdict::kGenuine;
}

ImageStatus classify_download(std::string_view bytes, const CameraConfig& cam, double threshold) {
  const auto image = decode_jpeg(bytes);
  if (!image) return ImageStatus::kFetchFailed;
  if (image->width != cam.width || image->height != cam.height) return ImageStatus::kFetchFailed;
  return detect_placeholder(*image, threshold) == Verdict::kPlaceholder ? ImageStatus::kPlaceholder
                                                                        : ImageStatus::kAvailable;
}

std::string format_manifest(const std::vector<ImageRecord>& records) {
  std::string out = csv::format_row(kManifestHeader);
  for (const auto& r : records) {
    out += csv::format_row({r.point_id, format_angle(r.heading_deg), r.file_path,
                            to_string(r.status), r.sha256});
  }
  return out;
}

std::vector<ImageRecord> parse_manifest(std::string_view text) {
  std::vector<ImageRecord> out;
  for (const auto& rec : csv::parse_with_header(text, kManifestHeader, "image manifest")) {
    ImageRecord r;
    r.point_id = rec.fields[0];
    try {
      r.heading_deg = std::stod(rec.fields[1]);
    } catch (const std::exception&) {
      throw ParseError(fmt::format("image manifest: line {}: bad heading '{}'", rec.line,
                                   rec.fields[1]), 0);
    }
    r.file_path = rec.fields[2];
    r.status = image_status_from(rec.fields[3]);
    r.sha256 = rec.fields[4];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ImageRecord> read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path));
}

namespace {

struct Job {
  std::size_t row;
  const SamplePoint* point;
  double heading;
};

enum class Outcome { kRecorded, kQuota };

struct JobResult {
  ImageRecord record;
  Outcome outcome = Outcome::kRecorded;
  std::string detail;
};

bool reusable(const ImageRecord& r, const std::filesystem::path& image_dir) {
  if (r.status == ImageStatus::kFetchFailed || r.sha256.empty()) return false;
  const auto path = image_dir / r.file_path;
  if (!std::filesystem::exists(path)) return false;
  return sha256_hex(read_file(path)) == r.sha256;
}

}  // namespace

FetchOutcome fetch_batch(const std::vector<SamplePoint>& points, const CameraConfig& cam,
                         const FetchOptions& options) {
  cam.validate();
  if (options.api_key.empty()) {
    throw Error(ErrorKind::kConfig,
                fmt::format("street view: no API key (set {})", kApiKeyEnv));
  }
  auto transport = options.transport ? options.transport : http::default_transport();

  std::map<std::pair<std::string, std::string>, ImageRecord> previous;
  if (std::filesystem::exists(options.manifest_path)) {
    for (auto& r : read_manifest(options.manifest_path)) {
      auto key = std::make_pair(r.point_id, format_angle(r.heading_deg));
      previous.emplace(std::move(key), std::move(r));
    }
  }

  FetchOutcome outcome;
  std::vector<Job> jobs;
  outcome.records.reserve(points.size() * cam.headings_deg.size());
  for (const SamplePoint& p : points) {
    for (double h : cam.headings_deg) {
      ImageRecord rec{p.point_id, h, image_relative_path(p.point_id, h), ImageStatus::kFetchFailed, ""};
      const auto it = previous.find({p.point_id, format_angle(h)});
      if (it != previous.end() && it->second.file_path == rec.file_path &&
          reusable(it->second, options.image_dir)) {
        rec = it->second;
        rec.heading_deg = h;
        ++outcome.reused;
      } else {
        jobs.push_back({outcome.records.size(), &p, h});
      }
      outcome.records.push_back(std::move(rec));
    }
  }
  spdlog::info("imagery: {} image(s) to download, {} reused from manifest", jobs.size(),
               outcome.reused);

  const auto flush = [&] { write_atomic(options.manifest_path, format_manifest(outcome.records)); };
  flush();

  http::TokenBucket limiter(options.policy.requests_per_second);
  const auto work = [&](std::size_t j) -> JobResult {
    const Job& job = jobs[j];
    JobResult res;
    res.record = outcome.records[job.row];
    http::Request req;
    req.url = build_request(*job.point, job.heading, cam, options.api_key, options.base_url);
    http::Response resp;
    try {
      resp = http::send_with_retry(*transport, req, options.policy.retry, &limiter, "street view");
    } catch (const UpstreamError& e) {
      res.detail = e.what();
      return res;
    }
    if (resp.status == 403 || resp.status == 429) {
      res.outcome = Outcome::kQuota;
      res.detail = fmt::format("street view: HTTP {} (quota exhausted or key rejected) for {}",
                               resp.status, redact_key(req.url));
      return res;
    }
    if (resp.status != 200) {
      res.detail = fmt::format("HTTP {} for {}", resp.status, redact_key(req.url));
      return res;
    }
    const ImageStatus status =
        classify_download(resp.body, cam, options.policy.dominance_threshold);
    res.record.status = status;
    if (status == ImageStatus::kFetchFailed) {
      res.detail = fmt::format("undecodable or wrongly sized image for {}", redact_key(req.url));
      return res;
    }
    write_atomic(options.image_dir / res.record.file_path, resp.body);
    res.record.sha256 = sha256_hex(resp.body);
    return res;
  };

  std::size_t since_flush = 0;
  const auto commit = [&](std::size_t j, JobResult&& res) -> bool {
    if (res.outcome == Outcome::kQuota) {
      outcome.halted = true;
      outcome.halt_reason = res.detail;
      return false;
    }
    if (!res.detail.empty()) spdlog::warn("imagery: {} ({})", res.detail, res.record.point_id);
    outcome.records[jobs[j].row] = std::move(res.record);
    ++outcome.downloaded;
    if (++since_flush >= options.policy.flush_every) {
      flush();
      since_flush = 0;
    }
    if (options.policy.stop_after && outcome.downloaded >= *options.policy.stop_after) {
      outcome.halted = outcome.downloaded < jobs.size();
      if (outcome.halted) outcome.halt_reason = "stopped after the requested number of downloads";
      return false;
    }
    return true;
  };

  run_ordered<JobResult>(jobs.size(), options.policy.workers, work, commit);
  flush();
  if (outcome.halted) spdlog::warn("imagery: halted: {}", outcome.halt_reason);
  return outcome;
}

Coverage coverage(const std::vector<ImageRecord>& records, std::size_t heading_count) {
  std::map<std::string, std::size_t> available;
  for (const auto& r : records) {
    auto& n = available[r.point_id];
    if (r.status == ImageStatus::kAvailable) ++n;
  }
  Coverage c;
  for (const auto& [id, n] : available) {
    if (n >= heading_count) ++c.points_all_headings;
    if (n == 0) ++c.points_no_coverage;
  }
  return c;
}

}  // namespace streetscape::imagery
