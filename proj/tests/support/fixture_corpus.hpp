#pragma once

#include <memory>

#include <nlohmann/json.hpp>

#include "scratch.hpp"
#include "srpeval/corpus.hpp"
#include "srpeval/digest.hpp"
#include "srpeval/pipeline.hpp"

// corpus20 ingested and annotated under a scratch root, with a replay config.
struct FixtureCorpus {
    ScratchDir dir;
    std::unique_ptr<srpeval::Corpus> corpus;
    srpeval::HarnessConfig cfg;

    explicit FixtureCorpus(bool annotate = true) : dir("fixture") {
        corpus = std::make_unique<srpeval::Corpus>(dir / "corpus");
        corpus->ingest_manifest(fixture("corpus20/manifest.json"));
        if (annotate) corpus->import_annotations(fixture("corpus20/annotations.jsonl"));
        cfg.corpus_root = corpus->root();
        cfg.endpoint.base_url = "http://127.0.0.1:9";
        cfg.endpoint.model_id = "fixture-model";
        cfg.session_mode = srpeval::SessionMode::Replay;
        cfg.session_path = fixture("corpus20/session.jsonl");
    }

    srpeval::EvalRun run(srpeval::Protocol p) {
        const auto prompts = srpeval::PromptRegistry::load(cfg.resource_dir);
        srpeval::ModelClient client(cfg.endpoint, cfg.session_mode, cfg.session_path);
        return srpeval::evaluate(*corpus, prompts, client, p, cfg);
    }

    static nlohmann::json expected() {
        return nlohmann::json::parse(srpeval::read_file_text(fixture("corpus20/expected.json")));
    }
};
