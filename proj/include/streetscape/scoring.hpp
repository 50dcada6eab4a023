#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "streetscape/http.hpp"
#include "streetscape/imagery.hpp"
#include "streetscape/tasks.hpp"

namespace streetscape::scoring {

inline constexpr const char* kBackendTokenEnv = "STREETSCAPE_BACKEND_TOKEN";

enum class BackendKind { kHttp, kMock };

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  /// OpenAI-style base URL, e.g. http://localhost:8000/v1; requests go to <base_url>/chat/completions.
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model_name = "llava-v1.6-mistral-7b";
  double temperature = 0.1;
  int max_new_tokens = 8;
  std::vector<std::string> stop_sequences{"\n"};
  std::string api_token;  ///< sent as a bearer token when non-empty
  std::size_t concurrency = 4;
  http::RetryPolicy retry{2, std::chrono::milliseconds(500), 2.0};
  std::chrono::seconds timeout{120};

  void validate() const;
};

struct BackendRequest {
  std::string task_id;
  std::string prompt;
  std::string image_bytes;  ///< JPEG
};

/// A vision-language model behind a text-in/text-out boundary.
class Backend {
 public:
  virtual ~Backend() = default;
  /// Returns the raw completion text; throws UpstreamError on service failure.
  virtual std::string complete(const BackendRequest& request) = 0;
};

/// JSON body of a chat-completion request carrying the prompt and the image as a base64 data URL.
nlohmann::ordered_json chat_request_body(const BackendConfig& cfg, const BackendRequest& request);
/// Extracts choices[0].message.content; throws UpstreamError on other shapes.
std::string chat_response_text(std::string_view body);

class HttpChatBackend : public Backend {
 public:
  HttpChatBackend(BackendConfig cfg, std::shared_ptr<http::Transport> transport = nullptr);
  std::string complete(const BackendRequest& request) override;

 private:
  BackendConfig cfg_;
  std::shared_ptr<http::Transport> transport_;
};

/// Deterministic answer derived from the image hash and the task. Answers are
/// mostly clean scalars with some decorated and some unusable replies, so that
/// every parser path is exercised.
std::string mock_answer(std::string_view task_id, std::string_view image_bytes);

/// Identifies a shipped task from an assembled prompt; empty when none matches.
std::string task_id_for_prompt(std::string_view prompt);

class MockBackend : public Backend {
 public:
  std::string complete(const BackendRequest& request) override;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg,
                                      std::shared_ptr<http::Transport> transport = nullptr);

enum class ScoreStatus { kScored, kUnavailable, kParseError, kBackendError };

const char* to_string(ScoreStatus status);
ScoreStatus score_status_from(std::string_view text);

struct ScoreRecord {
  std::string point_id;
  double heading_deg = 0.0;
  std::string task_id;
  ScoreStatus status = ScoreStatus::kUnavailable;
  std::optional<double> score;
  std::string raw_response;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

inline const std::vector<std::string> kResultsHeader{"point_id", "heading_deg", "task_id",
                                                     "status",   "score",       "raw_response"};

std::string format_results_header();
std::string format_result(const ScoreRecord& record);

/// Reads a results log. Any malformed record aborts with Error(kParse) naming
/// its line number.
std::vector<ScoreRecord> parse_results_log(std::string_view text);
std::vector<ScoreRecord> read_results_log(const std::filesystem::path& path);

/// Scores one available image. The backend is called exactly once.
ScoreRecord score_image(const imagery::ImageRecord& image, const std::filesystem::path& image_dir,
                        const TaskSpec& task, Backend& backend);

struct RunOptions {
  std::size_t concurrency = 4;
  std::optional<std::size_t> stop_after;  ///< stop after appending this many new records
};

struct RunSummary {
  std::size_t appended = 0;
  std::size_t skipped_existing = 0;
  std::size_t backend_calls = 0;
  std::size_t scored = 0;
  std::size_t unavailable = 0;
  std::size_t parse_errors = 0;
  std::size_t backend_errors = 0;
  bool stopped_early = false;
};

/// Appends one record per manifest row not yet present in the log, in manifest
/// order. Unavailable images produce unavailable records without backend calls.
RunSummary run_task(const std::vector<imagery::ImageRecord>& manifest,
                    const std::filesystem::path& image_dir, const TaskSpec& task,
                    Backend& backend, const std::filesystem::path& log_path,
                    const RunOptions& options = {});

}  // namespace streetscape::scoring
