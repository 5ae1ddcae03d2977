#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srpeval/consensus.hpp"
#include "srpeval/corpus.hpp"
#include "srpeval/dtree.hpp"
#include "srpeval/model_client.hpp"
#include "srpeval/prompts.hpp"
#include "srpeval/report.hpp"

namespace srpeval {

enum class TreeTarget { Human, Model };

std::optional<TreeTarget> parse_tree_target(std::string_view s);
std::string_view to_string(TreeTarget t);

struct TreeConfig {
    TreeParams params;
    TreeTarget target = TreeTarget::Human;
    FeatureEncoding encoding;
    int cv_folds = 5;
};

/// Everything a pipeline invocation needs. Defaults resolve without network access.
struct HarnessConfig {
    std::filesystem::path corpus_root = "corpus";
    std::filesystem::path resource_dir = default_resource_dir();
    ModelEndpointConfig endpoint;
    SamplingConfig sampling;
    int threshold = kDefaultThreshold;
    RenderOptions render;
    TreeConfig tree;
    GroundTruthOptions ground_truth;
    ComparisonOptions comparison;
    SessionMode session_mode = SessionMode::Live;
    std::filesystem::path session_path;

    /// Throws Error(Config).
    void validate() const;
};

/// Overlays keys present in `j` onto `cfg`. Unknown keys are rejected.
void apply_config_json(HarnessConfig& cfg, const nlohmann::json& j);
HarnessConfig load_config(const std::filesystem::path& path);
nlohmann::json config_snapshot(const HarnessConfig& cfg);

/// Renders, dispatches and parses every corpus sample. The returned run is not saved.
/// Replay misses and credential failures abort; other per-sample failures are recorded.
EvalRun evaluate(const Corpus& corpus, const PromptRegistry& prompts, ModelClient& client, Protocol protocol,
                 const HarnessConfig& cfg);

/// Parses one raw response into a run record (parsed/error/repair/prediction fields).
void interpret_response(RunRecord& record, Protocol protocol, int threshold);

struct TreeDataset {
    std::vector<std::string> sample_ids;
    std::vector<FeatureVector> features;
    std::vector<Label> targets;
};

/// Rows for diagnostic records that parsed; targets from consensus or the model's own label.
TreeDataset build_tree_dataset(const EvalRun& diagnostic_run, const GroundTruthTable& truth, TreeTarget target,
                               const FeatureEncoding& encoding = {});

struct TreeAnalysis {
    DecisionTree tree;
    TreeSummary summary;
};

TreeAnalysis analyze_tree(const TreeDataset& data, const TreeConfig& cfg);

/// Writes tree.json, rules.txt, importance.csv and cv.json.
void write_tree_artifacts(const TreeAnalysis& analysis, const std::filesystem::path& dir);

ReportBundle build_report(const Corpus& corpus, const EvalRun& run_std, const EvalRun& run_diag, const HarnessConfig& cfg);

/// Writes report.md, report.json and failures.csv.
void write_report(const ReportBundle& bundle, const std::filesystem::path& dir, const std::string& generated_at);

std::filesystem::path report_dir(const Corpus& corpus, const std::string& std_run, const std::string& diag_run);
std::filesystem::path tree_dir(const Corpus& corpus, const std::string& run_id, TreeTarget target);

}  // namespace srpeval
