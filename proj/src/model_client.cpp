#include "srpeval/model_client.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "srpeval/digest.hpp"

namespace srpeval {

using nlohmann::json;
namespace fs = std::filesystem;

std::optional<WireFormat> parse_wire_format(std::string_view s) {
    if (s == "chat_completions") return WireFormat::ChatCompletions;
    if (s == "anthropic_messages") return WireFormat::AnthropicMessages;
    return std::nullopt;
}

std::string_view to_string(WireFormat w) {
    return w == WireFormat::ChatCompletions ? "chat_completions" : "anthropic_messages";
}

std::optional<SessionMode> parse_session_mode(std::string_view s) {
    if (s == "live") return SessionMode::Live;
    if (s == "record") return SessionMode::Record;
    if (s == "replay") return SessionMode::Replay;
    return std::nullopt;
}

void ModelEndpointConfig::validate() const {
    if (max_concurrent < 1) throw Error(ErrorClass::Config, "max_concurrent must be at least 1");
    if (max_retries < 0) throw Error(ErrorClass::Config, "max_retries must be non-negative");
    if (!(timeout_seconds > 0.0)) throw Error(ErrorClass::Config, "timeout_seconds must be positive");
    if (backoff.initial_ms < 0 || backoff.cap_ms < 0 || backoff.factor < 1.0)
        throw Error(ErrorClass::Config, "backoff: non-negative delays and factor >= 1 required");
    if (base_url.empty()) throw Error(ErrorClass::Config, "base_url is empty");
}

std::string ModelEndpointConfig::effective_path() const {
    if (!path.empty()) return path;
    return wire == WireFormat::ChatCompletions ? "/v1/chat/completions" : "/v1/messages";
}

// -- wire formats -------------------------------------------------------------

json build_wire_body(const RenderedRequest& req, const ModelEndpointConfig& cfg) {
    json content = json::array();
    for (const auto& part : req.parts) {
        if (const auto* t = std::get_if<TextPart>(&part)) {
            content.push_back({{"type", "text"}, {"text", t->text}});
            continue;
        }
        const auto& img = std::get<ImagePart>(part);
        const std::string data = base64_encode(img.bytes);
        if (cfg.wire == WireFormat::ChatCompletions)
            content.push_back({{"type", "image_url"},
                               {"image_url", {{"url", "data:" + std::string(mime_type(img.media_type)) + ";base64," + data}}}});
        else
            content.push_back({{"type", "image"},
                               {"source",
                                {{"type", "base64"}, {"media_type", std::string(mime_type(img.media_type))}, {"data", data}}}});
    }
    json body = {{"model", cfg.model_id},
                 {"temperature", req.sampling.temperature},
                 {"max_tokens", req.sampling.max_output_tokens},
                 {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
    if (req.sampling.seed && cfg.wire == WireFormat::ChatCompletions) body["seed"] = *req.sampling.seed;
    return body;
}

std::string extract_reply_text(const std::string& body, WireFormat wire) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorClass::MalformedReply, std::string("endpoint reply is not JSON: ") + e.what());
    }
    auto concat_text_parts = [](const json& parts) {
        std::string out;
        for (const auto& p : parts)
            if (p.is_object() && p.value("type", "") == "text" && p.contains("text") && p["text"].is_string())
                out += p["text"].get<std::string>();
        return out;
    };
    if (wire == WireFormat::ChatCompletions) {
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            throw Error(ErrorClass::MalformedReply, "reply lacks choices[0]");
        const auto& msg = j["choices"][0].value("message", json::object());
        if (!msg.contains("content")) throw Error(ErrorClass::MalformedReply, "reply lacks choices[0].message.content");
        const auto& c = msg["content"];
        if (c.is_string()) return c.get<std::string>();
        if (c.is_array()) return concat_text_parts(c);
        throw Error(ErrorClass::MalformedReply, "choices[0].message.content has an unexpected type");
    }
    if (!j.contains("content") || !j["content"].is_array())
        throw Error(ErrorClass::MalformedReply, "reply lacks a content array");
    return concat_text_parts(j["content"]);
}

// -- transport ----------------------------------------------------------------

namespace {

class HttplibTransport final : public Transport {
public:
    HttpReply post(const std::string& base_url, const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& headers, const std::string& body,
                   double timeout_seconds) override {
        httplib::Client cli(base_url);
        const auto secs = static_cast<time_t>(timeout_seconds);
        const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        HttpReply reply;
        auto res = cli.Post(path, h, body, "application/json");
        if (!res) {
            const auto err = res.error();
            reply.timed_out = err == httplib::Error::Read || err == httplib::Error::Write ||
                              err == httplib::Error::ConnectionTimeout;
            reply.error = httplib::to_string(err);
            return reply;
        }
        reply.status = res->status;
        reply.body = res->body;
        return reply;
    }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

// -- sessions -----------------------------------------------------------------

std::map<std::string, SessionEntry> load_session(const fs::path& path) {
    std::map<std::string, SessionEntry> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorClass::NotFound, "session file not found: " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            SessionEntry e{j.at("request_digest").get<std::string>(), j.at("raw_text").get<std::string>(),
                           j.value("recorded_at", "")};
            out[e.request_digest] = std::move(e);
        } catch (const json::exception& e) {
            throw Error(ErrorClass::CorruptRecord, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }
    return out;
}

// -- client -------------------------------------------------------------------

ModelClient::ModelClient(ModelEndpointConfig cfg, SessionMode mode, fs::path session,
                         std::shared_ptr<Transport> transport)
    : cfg_(std::move(cfg)),
      mode_(mode),
      session_path_(std::move(session)),
      transport_(std::move(transport)),
      rng_(cfg_.jitter_seed) {
    cfg_.validate();
    if (mode_ != SessionMode::Live && session_path_.empty())
        throw Error(ErrorClass::Config, "record/replay mode requires a session path");
    if (mode_ == SessionMode::Replay) replay_ = load_session(session_path_);
    if (mode_ == SessionMode::Record && session_path_.has_parent_path())
        fs::create_directories(session_path_.parent_path());
}

std::int64_t ModelClient::backoff_ms(int retry_index) {
    const double ceiling = std::min(static_cast<double>(cfg_.backoff.cap_ms),
                                    static_cast<double>(cfg_.backoff.initial_ms) *
                                        std::pow(cfg_.backoff.factor, retry_index));
    const auto upper = static_cast<std::int64_t>(ceiling);
    if (upper <= 0) return 0;
    std::lock_guard lock(rng_mu_);
    return std::uniform_int_distribution<std::int64_t>(0, upper)(rng_);
}

void ModelClient::record(const std::string& digest, const std::string& raw_text) {
    const json entry = {{"request_digest", digest}, {"raw_text", raw_text}, {"recorded_at", utc_now_iso8601()}};
    std::lock_guard lock(session_mu_);
    std::ofstream out(session_path_, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorClass::Io, "cannot append to session " + session_path_.string());
    out << entry.dump() << '\n';
}

ModelResponse ModelClient::complete(const RenderedRequest& req) {
    const std::string digest = request_digest(req);
    if (mode_ == SessionMode::Replay) {
        auto it = replay_.find(digest);
        if (it == replay_.end())
            throw ClientError(ErrorClass::ReplayMiss, "no recorded response for request digest " + digest, 0);
        return {it->second.raw_text, 0, 0, digest};
    }
    auto response = complete_live(req, digest);
    if (mode_ == SessionMode::Record) record(digest, response.raw_text);
    return response;
}

ModelResponse ModelClient::complete_live(const RenderedRequest& req, const std::string& digest) {
    std::vector<std::pair<std::string, std::string>> headers;
    if (!cfg_.auth_env.empty()) {
        const char* token = std::getenv(cfg_.auth_env.c_str());
        if (!token || !*token)
            throw ClientError(ErrorClass::AuthFailure, "auth token variable " + cfg_.auth_env + " is not set", 0);
        if (cfg_.wire == WireFormat::ChatCompletions) {
            headers.emplace_back("Authorization", std::string("Bearer ") + token);
        } else {
            headers.emplace_back("x-api-key", token);
        }
    }
    if (cfg_.wire == WireFormat::AnthropicMessages) headers.emplace_back("anthropic-version", "2023-06-01");

    const std::string body = build_wire_body(req, cfg_).dump();
    const auto start = std::chrono::steady_clock::now();
    std::string last_cause = "no attempt made";
    const int budget = cfg_.max_retries + 1;
    for (int attempt = 1; attempt <= budget; ++attempt) {
        const auto reply = transport_->post(cfg_.base_url, cfg_.effective_path(), headers, body, cfg_.timeout_seconds);
        if (reply.status == 0) {
            last_cause = reply.timed_out ? "timeout (" + reply.error + ")" : "transport error (" + reply.error + ")";
        } else if (reply.status == 401 || reply.status == 403) {
            throw ClientError(ErrorClass::AuthFailure, fmt::format("endpoint rejected credentials: HTTP {}", reply.status),
                              attempt);
        } else if (reply.status == 429 || reply.status >= 500) {
            last_cause = fmt::format("HTTP {}", reply.status);
        } else if (reply.status >= 200 && reply.status < 300) {
            std::string text;
            try {
                text = extract_reply_text(reply.body, cfg_.wire);
            } catch (const Error& e) {
                throw ClientError(e.error_class(), e.what(), attempt);
            }
            const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start);
            return {std::move(text), elapsed.count(), attempt, digest};
        } else {
            throw ClientError(ErrorClass::InvalidArgument,
                              fmt::format("endpoint rejected request: HTTP {}: {}", reply.status, reply.body.substr(0, 200)),
                              attempt);
        }
        if (attempt < budget) std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms(attempt - 1)));
    }
    throw ClientError(ErrorClass::RetryBudgetExhausted,
                      fmt::format("gave up after {} attempts; last cause: {}", budget, last_cause), budget);
}

std::vector<CompletionOutcome> ModelClient::complete_all(std::span<const RenderedRequest> requests) {
    std::vector<std::optional<CompletionOutcome>> slots(requests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < requests.size(); i = next++) {
            try {
                slots[i].emplace(complete(requests[i]));
            } catch (const ClientError& e) {
                slots[i].emplace(e);
            } catch (const Error& e) {
                slots[i].emplace(ClientError(e.error_class(), e.what(), 0));
            }
        }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg_.max_concurrent), requests.size());
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();

    std::vector<CompletionOutcome> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace srpeval
