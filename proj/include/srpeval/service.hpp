#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "srpeval/consensus.hpp"
#include "srpeval/corpus.hpp"

namespace srpeval {

inline constexpr const char* kTokenHeader = "X-Srpeval-Token";

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks an ephemeral port
    std::optional<std::string> token;
    std::filesystem::path static_dir;  // optional single-page UI
    GroundTruthOptions ground_truth;
};

bool is_loopback_host(const std::string& host);

nlohmann::json to_json(const ConsensusLabel& c);

enum class ReviewVerdict { ConfirmedGap, AnnotationSuspect };

struct ReviewNote {
    std::string run_id;
    std::string sample_id;
    ReviewVerdict verdict = ReviewVerdict::ConfirmedGap;
    std::string reviewer;
    std::string note;
    std::string submitted_at;
};

nlohmann::json to_json(const ReviewNote& r);

/// HTTP adapter over a Corpus. Reads run concurrently; writes are serialized.
class AnnotationService {
public:
    /// Throws Error(Config) when binding beyond loopback without a token.
    AnnotationService(Corpus& corpus, ServiceOptions options);
    ~AnnotationService();
    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    /// Returns the bound port. Throws Error(Io) when the socket cannot be bound.
    int bind();
    /// Blocks until stop().
    void run();
    void stop();
    bool running() const;

    // Handler bodies, callable without a socket.
    nlohmann::json list_samples(const std::string& status, const std::string& annotator) const;
    nlohmann::json sample_detail(const std::string& id) const;
    nlohmann::json post_annotation(const std::string& id, const nlohmann::json& body, bool overwrite);
    nlohmann::json consensus(const std::string& id) const;
    nlohmann::json run_failures(const std::string& run_id) const;
    nlohmann::json post_review(const std::string& run_id, const nlohmann::json& body);
    nlohmann::json reviews(const std::string& run_id) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace srpeval
