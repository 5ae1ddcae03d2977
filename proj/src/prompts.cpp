#include "srpeval/prompts.hpp"

#include <cstdlib>

#include "srpeval/digest.hpp"
#include "srpeval/error.hpp"

#ifndef SRPEVAL_DEFAULT_RESOURCE_DIR
#define SRPEVAL_DEFAULT_RESOURCE_DIR "resources"
#endif

namespace srpeval {

namespace fs = std::filesystem;
using nlohmann::json;

std::string prompt_digest(const PromptProtocol& protocol) { return sha256_hex(protocol.text); }

fs::path default_resource_dir() {
    if (const char* env = std::getenv("SRPEVAL_RESOURCE_DIR"); env && *env) return env;
    return SRPEVAL_DEFAULT_RESOURCE_DIR;
}

PromptRegistry PromptRegistry::load(const fs::path& resource_dir) {
    const fs::path dir = resource_dir / "prompts";
    json registry;
    try {
        registry = json::parse(read_file_text(dir / "registry.json"));
    } catch (const json::exception& e) {
        throw Error(ErrorClass::PromptFidelity, "prompt registry unreadable: " + std::string(e.what()));
    } catch (const Error& e) {
        throw Error(ErrorClass::PromptFidelity, "prompt registry missing: " + std::string(e.what()));
    }

    PromptRegistry out;
    for (const auto& entry : registry.at("prompts")) {
        auto kind = parse_protocol(entry.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorClass::PromptFidelity, "prompt registry: unknown kind");
        PromptProtocol p;
        p.kind = *kind;
        p.text = read_file_text(dir / entry.at("file").get<std::string>());
        p.expected_output = *kind == Protocol::Standard ? ExpectedOutput::FreeTextScored : ExpectedOutput::StrictJson;
        p.pinned_digest = entry.at("sha256").get<std::string>();
        const auto actual = prompt_digest(p);
        if (actual != p.pinned_digest)
            throw Error(ErrorClass::PromptFidelity, "prompt '" + std::string(to_string(p.kind)) +
                                                        "' digest " + actual + " does not match pinned " +
                                                        p.pinned_digest);
        out.prompts_[p.kind] = std::move(p);
    }
    for (auto k : {Protocol::Standard, Protocol::Diagnostic})
        if (!out.prompts_.count(k))
            throw Error(ErrorClass::PromptFidelity, "prompt registry lacks '" + std::string(to_string(k)) + "'");
    return out;
}

const PromptProtocol& PromptRegistry::get(Protocol kind) const { return prompts_.at(kind); }

std::size_t RenderedRequest::image_count() const {
    std::size_t n = 0;
    for (const auto& p : parts) n += std::holds_alternative<ImagePart>(p);
    return n;
}

namespace {

ImagePart load_image(const ImageRef& ref, const fs::path& corpus_root) {
    const fs::path path = corpus_root / ref.path;
    if (!fs::is_regular_file(path)) throw Error(ErrorClass::NotFound, "missing image file " + path.string());
    auto bytes = read_file_bytes(path);
    auto sniffed = sniff_media_type(bytes);
    if (!sniffed) throw Error(ErrorClass::UnsupportedMediaType, "unsupported media type: " + path.string());
    if (*sniffed != ref.media_type)
        throw Error(ErrorClass::CorruptRecord, "media type of " + path.string() + " differs from the corpus record");
    if (sha256_hex(bytes) != ref.sha256)
        throw Error(ErrorClass::CorruptRecord, "digest of " + path.string() + " differs from the corpus record");
    return {*sniffed, std::move(bytes)};
}

}  // namespace

RenderedRequest render(const Sample& sample, const PromptProtocol& protocol, const SamplingConfig& sampling,
                       const fs::path& corpus_root, const RenderOptions& options) {
    if (sample.screenshots.empty() || sample.screenshots.size() > kMaxScreenshots)
        throw Error(ErrorClass::Validation, "sample '" + sample.id + "' must have 1 to 3 screenshots");

    RenderedRequest req;
    req.kind = protocol.kind;
    req.sampling = sampling;
    req.parts.emplace_back(TextPart{protocol.text});

    if (protocol.kind == Protocol::Standard) {
        for (const auto& ref : sample.screenshots) req.parts.emplace_back(load_image(ref, corpus_root));
    } else if (options.stitch_diagnostic && sample.screenshots.size() > 1) {
        std::vector<std::vector<std::uint8_t>> all;
        for (const auto& ref : sample.screenshots) all.push_back(load_image(ref, corpus_root).bytes);
        req.parts.emplace_back(ImagePart{MediaType::Png, stitch_vertical(all)});
    } else {
        req.parts.emplace_back(load_image(sample.screenshots.front(), corpus_root));
    }
    return req;
}

json canonical_json(const RenderedRequest& req) {
    json parts = json::array();
    for (const auto& part : req.parts) {
        if (const auto* t = std::get_if<TextPart>(&part)) {
            parts.push_back({{"type", "text"}, {"text", t->text}});
        } else {
            const auto& img = std::get<ImagePart>(part);
            parts.push_back({{"type", "image"},
                             {"media_type", std::string(mime_type(img.media_type))},
                             {"sha256", sha256_hex(img.bytes)},
                             {"size", img.bytes.size()}});
        }
    }
    return {{"protocol", std::string(to_string(req.kind))},
            {"parts", parts},
            {"sampling",
             {{"temperature", req.sampling.temperature},
              {"max_output_tokens", req.sampling.max_output_tokens},
              {"seed", req.sampling.seed ? json(*req.sampling.seed) : json(nullptr)}}}};
}

std::string request_digest(const RenderedRequest& req) { return sha256_hex(canonical_json(req).dump()); }

}  // namespace srpeval
