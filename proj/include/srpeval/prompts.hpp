#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "srpeval/corpus.hpp"
#include "srpeval/image.hpp"
#include "srpeval/labels.hpp"

namespace srpeval {

enum class ExpectedOutput { FreeTextScored, StrictJson };

struct SamplingConfig {
    double temperature = 0.1;
    int max_output_tokens = 4096;
    std::optional<std::uint64_t> seed;

    bool operator==(const SamplingConfig&) const = default;
};

/// Immutable prompt text as loaded from the resource directory.
struct PromptProtocol {
    Protocol kind = Protocol::Standard;
    std::string text;
    ExpectedOutput expected_output = ExpectedOutput::FreeTextScored;
    std::string pinned_digest;  // from registry.json
};

/// SHA-256 of the prompt bytes exactly as stored.
std::string prompt_digest(const PromptProtocol& protocol);

/// Resource directory: $SRPEVAL_RESOURCE_DIR if set, else the build-time default.
std::filesystem::path default_resource_dir();

/// Loads prompts/registry.json and both prompt files. Every file's digest must
/// equal its pinned registry value, otherwise Error(PromptFidelity).
class PromptRegistry {
public:
    static PromptRegistry load(const std::filesystem::path& resource_dir = default_resource_dir());

    const PromptProtocol& get(Protocol kind) const;

private:
    std::map<Protocol, PromptProtocol> prompts_;
};

struct TextPart {
    std::string text;
    bool operator==(const TextPart&) const = default;
};

struct ImagePart {
    MediaType media_type = MediaType::Png;
    std::vector<std::uint8_t> bytes;
    bool operator==(const ImagePart&) const = default;
};

using ContentPart = std::variant<TextPart, ImagePart>;

struct RenderedRequest {
    Protocol kind = Protocol::Standard;
    std::vector<ContentPart> parts;  // one text part, then images in screenshot order
    SamplingConfig sampling;

    std::size_t image_count() const;
    bool operator==(const RenderedRequest&) const = default;
};

struct RenderOptions {
    /// Diagnostic only: stack all screenshots into one composite instead of
    /// sending the topmost screenshot alone.
    bool stitch_diagnostic = false;
};

/// Pure function of its inputs. Reads screenshot bytes from `corpus_root`.
RenderedRequest render(const Sample& sample, const PromptProtocol& protocol, const SamplingConfig& sampling,
                       const std::filesystem::path& corpus_root, const RenderOptions& options = {});

/// Canonical, transport-independent description of a request. Images appear by digest.
nlohmann::json canonical_json(const RenderedRequest& req);
std::string request_digest(const RenderedRequest& req);

}  // namespace srpeval
