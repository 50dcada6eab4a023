#include "streetscape/scoring.hpp"

#include <set>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "streetscape/csv.hpp"
#include "streetscape/error.hpp"
#include "streetscape/files.hpp"
#include "streetscape/hashing.hpp"
#include "streetscape/parallel.hpp"

namespace streetscape::scoring {

using nlohmann::ordered_json;

void BackendConfig::validate() const {
  if (!(temperature >= 0.0)) {
    throw Error(ErrorKind::kConfig, fmt::format("backend: temperature must be >= 0, got {}", temperature));
  }
  if (max_new_tokens < 1) throw Error(ErrorKind::kConfig, "backend: max_new_tokens must be >= 1");
  if (concurrency < 1) throw Error(ErrorKind::kConfig, "backend: concurrency must be >= 1");
  if (kind == BackendKind::kHttp) http::Url::parse(base_url);
}

ordered_json chat_request_body(const BackendConfig& cfg, const BackendRequest& request) {
  ordered_json content = ordered_json::array();
  content.push_back({{"type", "text"}, {"text", request.prompt}});
  content.push_back(
      {{"type", "image_url"},
       {"image_url", {{"url", "data:image/jpeg;base64," + base64_encode(request.image_bytes)}}}});
  ordered_json body = ordered_json::object();
  body["model"] = cfg.model_name;
  body["messages"] = ordered_json::array({{{"role", "user"}, {"content", std::move(content)}}});
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_new_tokens;
  body["stop"] = cfg.stop_sequences;
  return body;
}

std::string chat_response_text(std::string_view body) {
  const ordered_json doc = ordered_json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw UpstreamError("backend: response is not JSON", 200, 1);
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return "";
    return content.get<std::string>();
  } catch (const ordered_json::exception&) {
    throw UpstreamError("backend: response lacks choices[0].message.content", 200, 1);
  }
}

HttpChatBackend::HttpChatBackend(BackendConfig cfg, std::shared_ptr<http::Transport> transport)
    : cfg_(std::move(cfg)),
      transport_(transport ? std::move(transport)
                           : std::make_shared<http::HttplibTransport>(cfg_.timeout)) {}

std::string HttpChatBackend::complete(const BackendRequest& request) {
  http::Request req;
  req.method = "POST";
  std::string base = cfg_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  req.url = base + "/chat/completions";
  req.content_type = "application/json";
  req.body = chat_request_body(cfg_, request).dump();
  if (!cfg_.api_token.empty()) req.headers.emplace_back("Authorization", "Bearer " + cfg_.api_token);
  const http::Response resp = http::send_with_retry(*transport_, req, cfg_.retry, nullptr, "backend");
  if (resp.status != 200) {
    throw UpstreamError(fmt::format("backend: HTTP {}", resp.status), resp.status, 1);
  }
  return chat_response_text(resp.body);
}

std::string mock_answer(std::string_view task_id, std::string_view image_bytes) {
  static const std::vector<std::string> kT1{"1", "1", "0", "1", "Urban: 1", "0.", "1", "I am not sure."};
  static const std::vector<std::string> kT2{"0", "1", "2", "Score: 2.", "0", "1 shop", "2", "3"};
  static const std::vector<std::string> kT3{"0", "1.5", "2.0", "1.5 meters", "0.5", "1.0", "3", "about 1.25"};
  const std::vector<std::string>* table = nullptr;
  if (task_id == "T1") table = &kT1;
  if (task_id == "T2") table = &kT2;
  if (task_id == "T3") table = &kT3;
  if (!table) return "0";
  std::string material(task_id);
  material += '\0';
  material += image_bytes;
  const std::string digest = sha256_hex(material);
  const auto index = std::stoul(digest.substr(0, 8), nullptr, 16) % table->size();
  return (*table)[index];
}

std::string task_id_for_prompt(std::string_view prompt) {
  for (const auto& t : shipped_tasks()) {
    if (assemble_prompt(t) == prompt) return t.task_id;
  }
  return {};
}

std::string MockBackend::complete(const BackendRequest& request) {
  return mock_answer(request.task_id, request.image_bytes);
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg,
                                      std::shared_ptr<http::Transport> transport) {
  cfg.validate();
  if (cfg.kind == BackendKind::kMock) return std::make_unique<MockBackend>();
  return std::make_unique<HttpChatBackend>(cfg, std::move(transport));
}

const char* to_string(ScoreStatus status) {
  switch (status) {
    case ScoreStatus::kScored: return "scored";
    case ScoreStatus::kUnavailable: return "unavailable";
    case ScoreStatus::kParseError: return "parse_error";
    case ScoreStatus::kBackendError: return "backend_error";
  }
  return "backend_error";
}

ScoreStatus score_status_from(std::string_view text) {
  if (text == "scored") return ScoreStatus::kScored;
  if (text == "unavailable") return ScoreStatus::kUnavailable;
  if (text == "parse_error") return ScoreStatus::kParseError;
  if (text == "backend_error") return ScoreStatus::kBackendError;
  throw ParseError(fmt::format("unknown score status '{}'", text), 0);
}

std::string format_results_header() { return csv::format_row(kResultsHeader); }

std::string format_result(const ScoreRecord& r) {
  return csv::format_row({r.point_id, imagery::format_angle(r.heading_deg), r.task_id,
                          to_string(r.status), r.score ? format_number(*r.score) : "",
                          r.raw_response});
}

std::vector<ScoreRecord> parse_results_log(std::string_view text) {
  std::vector<csv::Record> rows;
  try {
    rows = csv::parse_with_header(text, kResultsHeader, "results log");
  } catch (const ParseError& e) {
    throw Error(ErrorKind::kParse, fmt::format("corrupt results log: {}", e.what()));
  }
  std::vector<ScoreRecord> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const auto fail = [&](const std::string& why) {
      return Error(ErrorKind::kParse, fmt::format("corrupt results log: line {}: {}", row.line, why));
    };
    ScoreRecord r;
    r.point_id = row.fields[0];
    r.task_id = row.fields[2];
    r.raw_response = row.fields[5];
    try {
      r.heading_deg = std::stod(row.fields[1]);
      r.status = score_status_from(row.fields[3]);
      if (!row.fields[4].empty()) r.score = std::stod(row.fields[4]);
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
    if (r.point_id.empty() || r.task_id.empty()) throw fail("empty point_id or task_id");
    if ((r.status == ScoreStatus::kScored) != r.score.has_value()) {
      throw fail("score must be present exactly when status is scored");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScoreRecord> read_results_log(const std::filesystem::path& path) {
  return parse_results_log(read_file(path));
}

ScoreRecord score_image(const imagery::ImageRecord& image, const std::filesystem::path& image_dir,
                        const TaskSpec& task, Backend& backend) {
  ScoreRecord rec;
  rec.point_id = image.point_id;
  rec.heading_deg = image.heading_deg;
  rec.task_id = task.task_id;
  const auto path = image_dir / image.file_path;
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::kIo, fmt::format("manifest marks {} available but the file is missing",
                                            path.string()));
  }
  BackendRequest request{task.task_id, assemble_prompt(task), read_file(path)};
  try {
    rec.raw_response = backend.complete(request);
  } catch (const UpstreamError& e) {
    rec.status = ScoreStatus::kBackendError;
    rec.raw_response = e.what();
    return rec;
  }
  const ParsedAnswer parsed = parse_answer(rec.raw_response, task);
  if (parsed.score) {
    rec.status = ScoreStatus::kScored;
    rec.score = parsed.score;
  } else {
    rec.status = ScoreStatus::kParseError;
  }
  return rec;
}

RunSummary run_task(const std::vector<imagery::ImageRecord>& manifest,
                    const std::filesystem::path& image_dir, const TaskSpec& task,
                    Backend& backend, const std::filesystem::path& log_path,
                    const RunOptions& options) {
  assemble_prompt(task);
  using Key = std::tuple<std::string, std::string, std::string>;
  std::set<Key> existing;
  const bool have_log = std::filesystem::exists(log_path) && std::filesystem::file_size(log_path) > 0;
  if (have_log) {
    for (const auto& r : read_results_log(log_path)) {
      existing.emplace(r.point_id, imagery::format_angle(r.heading_deg), r.task_id);
    }
  } else {
    write_atomic(log_path, format_results_header());
  }

  RunSummary summary;
  std::vector<const imagery::ImageRecord*> todo;
  for (const auto& img : manifest) {
    if (existing.contains({img.point_id, imagery::format_angle(img.heading_deg), task.task_id})) {
      ++summary.skipped_existing;
    } else {
      todo.push_back(&img);
    }
  }
  spdlog::info("scoring {}: {} record(s) to produce, {} already logged", task.task_id,
               todo.size(), summary.skipped_existing);

  std::atomic<std::size_t> calls{0};
  const auto work = [&](std::size_t i) -> ScoreRecord {
    const auto& img = *todo[i];
    if (img.status != imagery::ImageStatus::kAvailable) {
      return ScoreRecord{img.point_id, img.heading_deg, task.task_id, ScoreStatus::kUnavailable,
                         std::nullopt, ""};
    }
    ++calls;
    return score_image(img, image_dir, task, backend);
  };
  const auto commit = [&](std::size_t, ScoreRecord&& rec) -> bool {
    append_file(log_path, format_result(rec));
    ++summary.appended;
    switch (rec.status) {
      case ScoreStatus::kScored: ++summary.scored; break;
      case ScoreStatus::kUnavailable: ++summary.unavailable; break;
      case ScoreStatus::kParseError: ++summary.parse_errors; break;
      case ScoreStatus::kBackendError: ++summary.backend_errors; break;
    }
    if (options.stop_after && summary.appended >= *options.stop_after) {
      summary.stopped_early = summary.appended < todo.size();
      return false;
    }
    return true;
  };
  run_ordered<ScoreRecord>(todo.size(), options.concurrency, work, commit);
  summary.backend_calls = calls.load();
  return summary;
}

}  // namespace streetscape::scoring
