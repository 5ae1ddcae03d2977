#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srpeval/annotation.hpp"
#include "srpeval/consensus.hpp"
#include "srpeval/image.hpp"
#include "srpeval/labels.hpp"

namespace srpeval {

inline constexpr std::size_t kMaxScreenshots = 3;

struct ImageRef {
    std::string path;  // relative to the corpus root
    MediaType media_type = MediaType::Png;
    std::string sha256;
    int width = 0;
    int height = 0;

    bool operator==(const ImageRef&) const = default;
};

struct Sample {
    std::string id;
    std::string query;
    Category category = Category::Other;
    std::vector<ImageRef> screenshots;  // top-to-bottom stitch order
    std::string created_at;

    bool operator==(const Sample&) const = default;
};

struct ParseFailure {
    std::string kind;
    std::string message;

    bool operator==(const ParseFailure&) const = default;
};

/// One sample's outcome within an evaluation run.
struct RunRecord {
    std::string sample_id;
    std::string request_digest;
    std::string raw_text;  // byte-exact model output
    std::optional<std::string> transport_error;
    std::int64_t latency_ms = 0;
    int attempt_count = 0;

    std::optional<nlohmann::json> parsed;  // serialized DiagnosticResponse / GestaltAssessment
    std::optional<ParseFailure> parse_error;
    bool repair_applied = false;
    std::optional<BinaryPrediction> prediction;

    bool operator==(const RunRecord&) const = default;
};

struct EvalRun {
    std::string run_id;
    Protocol protocol = Protocol::Diagnostic;
    std::string model_id;
    double temperature = 0.1;
    std::optional<std::uint64_t> seed;
    int threshold = 2;
    std::string prompt_digest;
    std::string created_at;
    std::vector<RunRecord> records;  // manifest order, one per sample
    nlohmann::json config = nlohmann::json::object();

    const RunRecord* find(const std::string& sample_id) const;
    bool operator==(const EvalRun&) const = default;
};

struct CorpusSummary {
    std::size_t ingested = 0;
    std::size_t corpus_total = 0;
    std::map<Category, std::size_t> per_category;  // all categories present, zero-filled
};

nlohmann::json to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Annotation& a);
/// Throws Error(Validation) on unknown labels/drivers or the drivers-imply-Complex rule.
Annotation annotation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunRecord& r);

/// Directory-backed store:
///   samples.jsonl, annotations.jsonl, images/<sha256>.<ext>, runs/<run_id>/...
/// Single writer, many readers within one process.
class Corpus {
public:
    explicit Corpus(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    CorpusSummary ingest_manifest(const std::filesystem::path& manifest_file);

    Annotation store_annotation(Annotation a, bool overwrite = false);
    /// Imports a JSONL annotation file; each line goes through store_annotation.
    std::size_t import_annotations(const std::filesystem::path& jsonl, bool overwrite = false);

    std::vector<Sample> samples() const;
    std::optional<Sample> find_sample(const std::string& id) const;
    std::vector<std::string> sample_ids() const;
    std::vector<Annotation> annotations() const;
    std::vector<Annotation> annotations_for(const std::string& sample_id) const;
    std::filesystem::path image_path(const ImageRef& ref) const { return root_ / ref.path; }

    /// Cached per sample; invalidated by store_annotation. Throws NotFound for an
    /// unknown sample and MissingPrerequisite when it has no annotations.
    ConsensusLabel consensus(const std::string& sample_id) const;
    GroundTruthTable ground_truth(const GroundTruthOptions& options = {}) const;
    void set_consensus_policy(ConsensusPolicy policy);

    /// Allocates the next sequential id when run.run_id is empty. Never overwrites.
    std::string save_run(EvalRun run);
    EvalRun load_run(const std::string& run_id) const;
    std::vector<std::string> list_runs() const;
    std::filesystem::path run_dir(const std::string& run_id) const { return root_ / "runs" / run_id; }

private:
    void load();
    void rewrite_annotations_locked();
    std::string next_run_id_locked(Protocol p) const;

    std::filesystem::path root_;
    mutable std::shared_mutex mu_;
    std::vector<Sample> samples_;
    std::map<std::string, std::size_t> sample_index_;
    std::vector<Annotation> annotations_;
    ConsensusPolicy policy_;
    mutable std::mutex cache_mu_;
    mutable std::map<std::string, ConsensusLabel> consensus_cache_;
};

}  // namespace srpeval
