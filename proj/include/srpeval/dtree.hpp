#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srpeval/labels.hpp"
#include "srpeval/metrics.hpp"
#include "srpeval/response_parser.hpp"

namespace srpeval {

inline constexpr int kFeatureCount = kQuestionCount;
inline constexpr double kSplitThreshold = 0.5;

/// Index 0 is Q1. Values are 0 (No), 1 (Yes) or the NotSure encoding.
using FeatureVector = std::array<double, kFeatureCount>;

struct FeatureEncoding {
    double not_sure = 0.5;  // 0.0 folds NotSure into No
};

FeatureVector encode(const DiagnosticResponse& d, const FeatureEncoding& enc = {});

struct TreeParams {
    int max_depth = 3;
    int min_samples_leaf = 5;
    std::uint64_t seed = 0;  // recorded only; CART here breaks ties by feature index

    bool operator==(const TreeParams&) const = default;
};

/// Arena node. Internal nodes send x[feature] <= threshold left.
struct TreeNode {
    int feature = -1;  // 0-based question index, -1 for a leaf
    double threshold = kSplitThreshold;
    int left = -1;
    int right = -1;
    Label label = Label::Complex;  // majority label, ties -> Complex
    int complex_count = 0;
    int not_complex_count = 0;
    double impurity = 0.0;

    bool is_leaf() const { return feature < 0; }
    int samples() const { return complex_count + not_complex_count; }
    bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    TreeParams params;

    const TreeNode& root() const { return nodes.front(); }
    int depth() const;
    int leaf_count() const;
    bool operator==(const DecisionTree&) const = default;
};

double gini(int complex_count, int not_complex_count);

DecisionTree train(std::span<const FeatureVector> features, std::span<const Label> targets,
                   const TreeParams& params = {});

Label predict(const DecisionTree& tree, const FeatureVector& x);

struct Condition {
    int question = 0;  // 1-based
    bool less_equal = true;
    double threshold = kSplitThreshold;

    bool matches(const FeatureVector& x) const;
    bool operator==(const Condition&) const = default;
};

struct Rule {
    std::vector<Condition> conditions;  // root-to-leaf order
    Label label = Label::Complex;
    int support = 0;
    int complex_count = 0;
    int not_complex_count = 0;

    bool matches(const FeatureVector& x) const;
    /// e.g. "Q7 ≤ 0.5 ∧ Q2 ≤ 0.5"; "(always)" for a single-leaf tree.
    std::string text() const;
};

std::vector<Rule> extract_rules(const DecisionTree& tree);

using ImportanceVector = std::array<double, kFeatureCount>;

ImportanceVector importance(const DecisionTree& tree);

struct FoldResult {
    std::vector<std::size_t> test_indices;
    int train_size = 0;
    int test_complex = 0;
    int test_not_complex = 0;
    MetricsReport metrics;
};

struct MetricSummary {
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation over folds where defined
    int defined_folds = 0;
};

struct CvReport {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<int> fold_of;  // fold index per sample
    std::vector<FoldResult> folds;
    std::vector<MetricSummary> summary;  // precision, recall, f1, kappa
};

/// Seeded in-class shuffle then round-robin fold assignment.
std::vector<int> stratified_folds(std::span<const Label> targets, int k, std::uint64_t seed);

CvReport stratified_cv(std::span<const FeatureVector> features, std::span<const Label> targets, int k,
                       const TreeParams& params, std::uint64_t seed);

nlohmann::json to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CvReport& cv);

/// Path / Decision Rule / Predicted Class / Support table.
std::string format_rules_table(const std::vector<Rule>& rules);
/// question,driver,importance with one row per question.
std::string importance_csv(const ImportanceVector& imp);

}  // namespace srpeval
