#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "scratch.hpp"
#include "srpeval/digest.hpp"
#include "srpeval/model_client.hpp"

using namespace srpeval;
using nlohmann::json;

namespace {

constexpr const char* kKeyEnv = "SRPEVAL_TEST_KEY";

// Local endpoint running on an ephemeral port for the lifetime of the object.
struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    template <typename Handler>
    explicit StubServer(const std::string& path, Handler h) {
        server.Post(path, h);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

std::string chat_reply(const std::string& text) {
    return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

RenderedRequest request(const std::string& text, Protocol kind = Protocol::Diagnostic) {
    RenderedRequest r;
    r.kind = kind;
    r.parts.push_back(TextPart{text});
    r.parts.push_back(ImagePart{MediaType::Png, {0x89, 'P', 'N', 'G', 1, 2, 3}});
    return r;
}

ModelEndpointConfig config(const std::string& url) {
    ModelEndpointConfig c;
    c.base_url = url;
    c.model_id = "stub-model";
    c.auth_env = kKeyEnv;
    c.max_retries = 3;
    c.timeout_seconds = 2.0;
    c.backoff = {1, 2.0, 4};
    return c;
}

// Echoes the request's first text part so ordering can be checked.
std::string first_text(const std::string& body) {
    return json::parse(body)["messages"][0]["content"][0]["text"].get<std::string>();
}

struct EnvKey {
    EnvKey() { ::setenv(kKeyEnv, "sekret", 1); }
};
const EnvKey env_key;

class FailingTransport : public Transport {
public:
    HttpReply post(const std::string&, const std::string&, const std::vector<std::pair<std::string, std::string>>&,
                   const std::string&, double) override {
        FAIL("replay must not touch the network");
        return {};
    }
};

ErrorClass failure_class(const CompletionOutcome& o) { return std::get<ClientError>(o).error_class(); }

}  // namespace

TEST_CASE("429 responses are retried until success") {
    std::atomic<int> hits{0};
    StubServer stub("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        CHECK(req.get_header_value("Authorization") == "Bearer sekret");
        if (hits++ < 2) {
            res.status = 429;
            return;
        }
        res.set_content(chat_reply("  {\"a\": 1}\n"), "application/json");
    });
    ModelClient client(config(stub.url()));
    const auto r = client.complete(request("x"));
    CHECK(r.raw_text == "  {\"a\": 1}\n");
    CHECK(r.attempt_count == 3);
    CHECK(hits == 3);
    CHECK(r.request_digest == request_digest(request("x")));
}

TEST_CASE("server errors exhaust the retry budget") {
    std::atomic<int> hits{0};
    StubServer stub("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    ModelClient client(config(stub.url()));
    try {
        client.complete(request("x"));
        FAIL("expected failure");
    } catch (const ClientError& e) {
        CHECK(e.error_class() == ErrorClass::RetryBudgetExhausted);
        CHECK(e.attempt_count() == 4);
    }
    CHECK(hits == 4);
}

TEST_CASE("auth failures and client errors are not retried") {
    for (int status : {401, 403, 400, 404}) {
        std::atomic<int> hits{0};
        StubServer stub("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = status;
        });
        ModelClient client(config(stub.url()));
        try {
            client.complete(request("x"));
            FAIL("expected failure");
        } catch (const ClientError& e) {
            CHECK(e.error_class() == (status < 404 && status != 400 ? ErrorClass::AuthFailure : ErrorClass::InvalidArgument));
            CHECK(e.attempt_count() == 1);
        }
        CHECK(hits == 1);
    }
}

TEST_CASE("missing token fails before any request") {
    auto cfg = config("http://127.0.0.1:1");
    cfg.auth_env = "SRPEVAL_TEST_KEY_UNSET";
    ModelClient client(cfg);
    try {
        client.complete(request("x"));
        FAIL("expected failure");
    } catch (const ClientError& e) {
        CHECK(e.error_class() == ErrorClass::AuthFailure);
        CHECK(e.attempt_count() == 0);
    }
}

TEST_CASE("timeouts are retried then reported") {
    std::atomic<int> hits{0};
    StubServer stub("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        std::this_thread::sleep_for(std::chrono::milliseconds(400));
        res.set_content(chat_reply("late"), "application/json");
    });
    auto cfg = config(stub.url());
    cfg.timeout_seconds = 0.1;
    cfg.max_retries = 1;
    ModelClient client(cfg);
    try {
        client.complete(request("x"));
        FAIL("expected failure");
    } catch (const ClientError& e) {
        CHECK(e.error_class() == ErrorClass::RetryBudgetExhausted);
        CHECK(std::string(e.what()).find("timeout") != std::string::npos);
        CHECK(e.attempt_count() == 2);
    }
}

TEST_CASE("malformed 2xx bodies are typed errors") {
    StubServer stub("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"unexpected\": true}", "application/json");
    });
    ModelClient client(config(stub.url()));
    const auto out = client.complete_all(std::vector<RenderedRequest>{request("x")});
    CHECK(failure_class(out[0]) == ErrorClass::MalformedReply);
    CHECK_THROWS_AS(extract_reply_text("not json", WireFormat::ChatCompletions), Error);
}

TEST_CASE("concurrency stays within max_concurrent and results keep input order") {
    std::atomic<int> in_flight{0}, peak{0};
    StubServer stub("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int now = ++in_flight;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        --in_flight;
        res.set_content(chat_reply("echo:" + first_text(req.body)), "application/json");
    });
    auto cfg = config(stub.url());
    cfg.max_concurrent = 3;
    ModelClient client(cfg);
    std::vector<RenderedRequest> reqs;
    for (int i = 0; i < 12; ++i) reqs.push_back(request("r" + std::to_string(i)));
    const auto out = client.complete_all(reqs);
    REQUIRE(out.size() == 12);
    for (int i = 0; i < 12; ++i) CHECK(std::get<ModelResponse>(out[i]).raw_text == "echo:r" + std::to_string(i));
    CHECK(peak <= 3);
    CHECK(peak >= 2);
}

TEST_CASE("anthropic wire format") {
    StubServer stub("/v1/messages", [&](const httplib::Request& req, httplib::Response& res) {
        CHECK(req.get_header_value("x-api-key") == "sekret");
        CHECK(req.get_header_value("anthropic-version") == "2023-06-01");
        const auto body = json::parse(req.body);
        const auto& img = body["messages"][0]["content"][1];
        CHECK(img["type"] == "image");
        CHECK(img["source"]["media_type"] == "image/png");
        CHECK(img["source"]["data"] == base64_encode(std::vector<std::uint8_t>{0x89, 'P', 'N', 'G', 1, 2, 3}));
        CHECK(body["model"] == "stub-model");
        res.set_content(R"({"content": [{"type": "text", "text": "part one "}, {"type": "text", "text": "two"}]})",
                        "application/json");
    });
    auto cfg = config(stub.url());
    cfg.wire = WireFormat::AnthropicMessages;
    ModelClient client(cfg);
    CHECK(client.complete(request("x")).raw_text == "part one two");
}

TEST_CASE("chat body carries data URLs and the seed") {
    auto cfg = config("http://unused");
    auto req = request("x");
    req.sampling.seed = 17;
    const auto body = build_wire_body(req, cfg);
    CHECK(body["seed"] == 17);
    CHECK(body["messages"][0]["content"][1]["image_url"]["url"].get<std::string>().rfind("data:image/png;base64,", 0) == 0);
    CHECK(body["max_tokens"] == 4096);
}

TEST_CASE("record then replay reproduces responses offline") {
    ScratchDir dir("session");
    const auto session = dir / "s.jsonl";
    StubServer stub("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        res.set_content(chat_reply("answer to " + first_text(req.body)), "application/json");
    });
    std::vector<RenderedRequest> reqs{request("a"), request("b"), request("c")};
    {
        ModelClient recorder(config(stub.url()), SessionMode::Record, session);
        for (const auto& o : recorder.complete_all(reqs)) CHECK(std::holds_alternative<ModelResponse>(o));
    }
    CHECK(load_session(session).size() == 3);
    ModelClient replayer(config("http://127.0.0.1:1"), SessionMode::Replay, session, std::make_shared<FailingTransport>());
    const auto out = replayer.complete_all(reqs);
    CHECK(std::get<ModelResponse>(out[1]).raw_text == "answer to b");
    CHECK(std::get<ModelResponse>(out[1]).attempt_count == 0);
    try {
        replayer.complete(request("never recorded"));
        FAIL("expected ReplayMiss");
    } catch (const ClientError& e) {
        CHECK(e.error_class() == ErrorClass::ReplayMiss);
        CHECK(e.attempt_count() == 0);
    }
}

TEST_CASE("configuration bounds") {
    auto cfg = config("http://x");
    cfg.max_concurrent = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = config("http://x");
    cfg.backoff.factor = 0.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK_THROWS_AS(ModelClient(config("http://x"), SessionMode::Replay, "/nonexistent/session.jsonl"), Error);
    CHECK_THROWS_AS(ModelClient(config("http://x"), SessionMode::Record), Error);
    CHECK(parse_wire_format("anthropic_messages") == WireFormat::AnthropicMessages);
    CHECK(parse_session_mode("replay") == SessionMode::Replay);
    CHECK_FALSE(parse_session_mode("REPLAY").has_value());
}
