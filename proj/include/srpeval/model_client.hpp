#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "srpeval/error.hpp"
#include "srpeval/prompts.hpp"

namespace srpeval {

enum class WireFormat {
    ChatCompletions,    // OpenAI-style /v1/chat/completions
    AnthropicMessages,  // /v1/messages
};

std::optional<WireFormat> parse_wire_format(std::string_view s);
std::string_view to_string(WireFormat w);

struct BackoffPolicy {
    std::int64_t initial_ms = 1000;
    double factor = 2.0;
    std::int64_t cap_ms = 30000;
};

struct ModelEndpointConfig {
    std::string base_url = "http://127.0.0.1:8080";
    std::string path;  // empty picks the wire format's conventional path
    std::string model_id = "unconfigured-model";
    WireFormat wire = WireFormat::ChatCompletions;
    std::string auth_env = "MODEL_API_KEY";  // empty disables the auth header
    double timeout_seconds = 120.0;
    int max_retries = 4;
    int max_concurrent = 4;
    BackoffPolicy backoff;
    std::uint64_t jitter_seed = 0;

    /// Throws Error(Config) when a bound is violated.
    void validate() const;
    std::string effective_path() const;
};

struct ModelResponse {
    std::string raw_text;  // never trimmed
    std::int64_t latency_ms = 0;
    int attempt_count = 0;
    std::string request_digest;
};

/// Failure carrying how many attempts were spent.
class ClientError : public Error {
public:
    ClientError(ErrorClass cls, const std::string& what, int attempts) : Error(cls, what), attempts_(attempts) {}
    int attempt_count() const noexcept { return attempts_; }

private:
    int attempts_;
};

struct HttpReply {
    int status = 0;  // 0 when no HTTP response arrived
    std::string body;
    bool timed_out = false;
    std::string error;  // transport-level failure description
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpReply post(const std::string& base_url, const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& headers, const std::string& body,
                           double timeout_seconds) = 0;
};

/// cpp-httplib backed transport; http:// and https:// base URLs.
std::shared_ptr<Transport> make_http_transport();

/// Vendor request body for a rendered request.
nlohmann::json build_wire_body(const RenderedRequest& req, const ModelEndpointConfig& cfg);
/// Extracts the model's text from a 2xx reply body. Throws Error(MalformedReply).
std::string extract_reply_text(const std::string& body, WireFormat wire);

enum class SessionMode { Live, Record, Replay };

std::optional<SessionMode> parse_session_mode(std::string_view s);

struct SessionEntry {
    std::string request_digest;
    std::string raw_text;
    std::string recorded_at;
};

/// JSONL of {request_digest, raw_text, recorded_at}; later entries win on load.
std::map<std::string, SessionEntry> load_session(const std::filesystem::path& path);

using CompletionOutcome = std::variant<ModelResponse, ClientError>;

class ModelClient {
public:
    ModelClient(ModelEndpointConfig cfg, SessionMode mode = SessionMode::Live,
                std::filesystem::path session = {}, std::shared_ptr<Transport> transport = make_http_transport());

    /// Live/Record: first successful reply, retrying timeouts, 429 and 5xx with
    /// exponential backoff and full jitter. Replay: the stored text, no network.
    ModelResponse complete(const RenderedRequest& req);

    /// Runs requests on at most cfg.max_concurrent workers; outcomes are in input order.
    std::vector<CompletionOutcome> complete_all(std::span<const RenderedRequest> requests);

    SessionMode mode() const { return mode_; }
    const ModelEndpointConfig& config() const { return cfg_; }

private:
    ModelResponse complete_live(const RenderedRequest& req, const std::string& digest);
    std::int64_t backoff_ms(int retry_index);
    void record(const std::string& digest, const std::string& raw_text);

    ModelEndpointConfig cfg_;
    SessionMode mode_;
    std::filesystem::path session_path_;
    std::shared_ptr<Transport> transport_;
    std::map<std::string, SessionEntry> replay_;
    std::mutex session_mu_;
    std::mutex rng_mu_;
    std::mt19937_64 rng_;
};

}  // namespace srpeval
