#include <doctest.h>

#include <fstream>

#include "scratch.hpp"
#include "srpeval/digest.hpp"
#include "srpeval/error.hpp"
#include "srpeval/image.hpp"
#include "srpeval/prompts.hpp"

using namespace srpeval;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    ScratchDir dir{"prompts"};
    Corpus corpus{dir.path};
    PromptRegistry prompts = PromptRegistry::load();
    Fixture() { corpus.ingest_manifest(fixture("corpus20/manifest.json")); }
    Sample sample(const std::string& id) { return *corpus.find_sample(id); }
};

}  // namespace

TEST_CASE("registry loads both prompts with pinned digests") {
    const auto reg = PromptRegistry::load();
    const auto& s = reg.get(Protocol::Standard);
    const auto& d = reg.get(Protocol::Diagnostic);
    CHECK(prompt_digest(s) == s.pinned_digest);
    CHECK(prompt_digest(d) == d.pinned_digest);
    CHECK(s.expected_output == ExpectedOutput::FreeTextScored);
    CHECK(d.expected_output == ExpectedOutput::StrictJson);
    CHECK(d.text.find("**Q7.** Are there too many badges") != std::string::npos);
    CHECK(d.text.find("\"complexity_score\": 2") != std::string::npos);
    CHECK(s.text.find("Law of Figure/Ground:") != std::string::npos);
}

TEST_CASE("an edited prompt file fails the fidelity check") {
    ScratchDir dir("res");
    fs::copy(default_resource_dir(), dir.path, fs::copy_options::recursive);
    PromptRegistry::load(dir.path);
    {
        std::ofstream out(dir / "prompts/diagnostic.txt", std::ios::app);
        out << " ";
    }
    try {
        PromptRegistry::load(dir.path);
        FAIL("expected PromptFidelity");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::PromptFidelity);
    }
    fs::remove(dir / "prompts/registry.json");
    CHECK_THROWS_AS(PromptRegistry::load(dir.path), Error);
}

TEST_CASE("render layout per protocol") {
    Fixture f;
    const auto multi = f.sample("srp-015");
    const auto std_req = render(multi, f.prompts.get(Protocol::Standard), {}, f.corpus.root());
    REQUIRE(std_req.parts.size() == 4);
    CHECK(std::get<TextPart>(std_req.parts[0]).text == f.prompts.get(Protocol::Standard).text);
    CHECK(std_req.image_count() == 3);
    CHECK(std::get<ImagePart>(std_req.parts[2]).media_type == MediaType::Jpeg);

    const auto diag = render(multi, f.prompts.get(Protocol::Diagnostic), {}, f.corpus.root());
    CHECK(diag.image_count() == 1);
    CHECK(std::get<ImagePart>(diag.parts[1]).bytes == read_file_bytes(f.corpus.image_path(multi.screenshots[0])));

    const auto stitched = render(multi, f.prompts.get(Protocol::Diagnostic), {}, f.corpus.root(), {.stitch_diagnostic = true});
    REQUIRE(stitched.image_count() == 1);
    const auto info = probe_image(std::get<ImagePart>(stitched.parts[1]).bytes);
    int height = 0;
    for (const auto& ref : multi.screenshots) height += ref.height;
    CHECK(info.height == height);
}

TEST_CASE("request digests are deterministic and sensitive to every input") {
    Fixture f;
    const auto s = f.sample("srp-003");
    const auto& p = f.prompts.get(Protocol::Standard);
    const auto a = request_digest(render(s, p, {}, f.corpus.root()));
    CHECK(a == request_digest(render(s, p, {}, f.corpus.root())));
    CHECK(a != request_digest(render(s, p, {.temperature = 0.2}, f.corpus.root())));
    CHECK(a != request_digest(render(s, p, {.seed = 1}, f.corpus.root())));
    CHECK(a != request_digest(render(s, f.prompts.get(Protocol::Diagnostic), {}, f.corpus.root())));
    CHECK(a != request_digest(render(f.sample("srp-004"), p, {}, f.corpus.root())));
    const auto canon = canonical_json(render(s, p, {}, f.corpus.root())).dump();
    CHECK(canon.find("\"sha256\"") != std::string::npos);
    CHECK(canon.size() < p.text.size() + 2000);  // images by digest, not inline
}

TEST_CASE("render verifies stored screenshots") {
    Fixture f;
    const auto s = f.sample("srp-001");
    {
        std::ofstream out(f.corpus.image_path(s.screenshots[0]), std::ios::app | std::ios::binary);
        out << "x";
    }
    try {
        render(s, f.prompts.get(Protocol::Standard), {}, f.corpus.root());
        FAIL("expected CorruptRecord");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::CorruptRecord);
    }
    fs::remove(f.corpus.image_path(s.screenshots[0]));
    CHECK_THROWS_AS(render(s, f.prompts.get(Protocol::Standard), {}, f.corpus.root()), Error);
}
