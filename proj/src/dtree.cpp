#include "srpeval/dtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "srpeval/annotation.hpp"
#include "srpeval/csv.hpp"
#include "srpeval/error.hpp"

namespace srpeval {

using nlohmann::json;

FeatureVector encode(const DiagnosticResponse& d, const FeatureEncoding& enc) {
    FeatureVector x{};
    for (int q = 0; q < kFeatureCount; ++q) {
        switch (d.answers[static_cast<std::size_t>(q)]) {
            case Answer::Yes: x[static_cast<std::size_t>(q)] = 1.0; break;
            case Answer::No: x[static_cast<std::size_t>(q)] = 0.0; break;
            case Answer::NotSure: x[static_cast<std::size_t>(q)] = enc.not_sure; break;
        }
    }
    return x;
}

double gini(int complex_count, int not_complex_count) {
    const int n = complex_count + not_complex_count;
    if (n == 0) return 0.0;
    const double p = static_cast<double>(complex_count) / n;
    return 2.0 * p * (1.0 - p);
}

int DecisionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return deepest;
}

int DecisionTree::leaf_count() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

constexpr double kTieEps = 1e-12;

struct Builder {
    std::span<const FeatureVector> features;
    std::span<const Label> targets;
    TreeParams params;
    DecisionTree tree;

    int build(std::vector<std::size_t>& idx, int depth) {
        TreeNode node;
        for (auto i : idx) (targets[i] == Label::Complex ? node.complex_count : node.not_complex_count) += 1;
        node.label = node.complex_count >= node.not_complex_count ? Label::Complex : Label::NotComplex;
        node.impurity = gini(node.complex_count, node.not_complex_count);
        const int self = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(node);

        const int n = node.samples();
        if (depth >= params.max_depth || node.complex_count == 0 || node.not_complex_count == 0) return self;

        int best_feature = -1;
        double best_impurity = node.impurity;
        for (int f = 0; f < kFeatureCount; ++f) {
            int lc = 0, ln = 0, rc = 0, rn = 0;
            for (auto i : idx) {
                const bool complex = targets[i] == Label::Complex;
                if (features[i][static_cast<std::size_t>(f)] <= kSplitThreshold) (complex ? lc : ln) += 1;
                else (complex ? rc : rn) += 1;
            }
            if (lc + ln < params.min_samples_leaf || rc + rn < params.min_samples_leaf) continue;
            if (lc + ln == 0 || rc + rn == 0) continue;
            const double weighted = (static_cast<double>(lc + ln) * gini(lc, ln) +
                                     static_cast<double>(rc + rn) * gini(rc, rn)) / n;
            if (weighted < best_impurity - kTieEps) {
                best_impurity = weighted;
                best_feature = f;
            }
        }
        if (best_feature < 0) return self;

        std::vector<std::size_t> left, right;
        for (auto i : idx)
            (features[i][static_cast<std::size_t>(best_feature)] <= kSplitThreshold ? left : right).push_back(i);
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        auto& me = tree.nodes[static_cast<std::size_t>(self)];
        me.feature = best_feature;
        me.left = l;
        me.right = r;
        return self;
    }
};

}  // namespace

DecisionTree train(std::span<const FeatureVector> features, std::span<const Label> targets, const TreeParams& params) {
    if (features.empty()) throw Error(ErrorClass::InvalidArgument, "train: empty dataset");
    if (features.size() != targets.size())
        throw Error(ErrorClass::InvalidArgument,
                    fmt::format("train: {} feature rows vs {} targets", features.size(), targets.size()));
    if (params.max_depth < 0 || params.min_samples_leaf < 1)
        throw Error(ErrorClass::InvalidArgument, "train: max_depth >= 0 and min_samples_leaf >= 1 required");
    for (const auto& x : features)
        for (double v : x)
            if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorClass::InvalidArgument, "train: feature value outside [0, 1]");

    Builder b{features, targets, params, {}};
    b.tree.params = params;
    std::vector<std::size_t> idx(features.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    b.build(idx, 0);
    return std::move(b.tree);
}

Label predict(const DecisionTree& tree, const FeatureVector& x) {
    std::size_t i = 0;
    while (!tree.nodes[i].is_leaf()) {
        const auto& n = tree.nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return tree.nodes[i].label;
}

bool Condition::matches(const FeatureVector& x) const {
    const double v = x[static_cast<std::size_t>(question - 1)];
    return less_equal ? v <= threshold : v > threshold;
}

bool Rule::matches(const FeatureVector& x) const {
    return std::all_of(conditions.begin(), conditions.end(), [&](const Condition& c) { return c.matches(x); });
}

std::string Rule::text() const {
    if (conditions.empty()) return "(always)";
    std::string out;
    for (std::size_t i = 0; i < conditions.size(); ++i) {
        if (i) out += " ∧ ";
        out += fmt::format("Q{} {} {}", conditions[i].question, conditions[i].less_equal ? "≤" : ">",
                           conditions[i].threshold);
    }
    return out;
}

std::vector<Rule> extract_rules(const DecisionTree& tree) {
    std::vector<Rule> rules;
    std::vector<Condition> path;
    auto walk = [&](auto&& self, std::size_t i) -> void {
        const auto& n = tree.nodes[i];
        if (n.is_leaf()) {
            rules.push_back({path, n.label, n.samples(), n.complex_count, n.not_complex_count});
            return;
        }
        path.push_back({n.feature + 1, true, n.threshold});
        self(self, static_cast<std::size_t>(n.left));
        path.back().less_equal = false;
        self(self, static_cast<std::size_t>(n.right));
        path.pop_back();
    };
    walk(walk, 0);
    return rules;
}

ImportanceVector importance(const DecisionTree& tree) {
    ImportanceVector imp{};
    const double total = tree.root().samples();
    for (const auto& n : tree.nodes) {
        if (n.is_leaf()) continue;
        const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
        const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
        const double children = (l.samples() * l.impurity + r.samples() * r.impurity) / n.samples();
        imp[static_cast<std::size_t>(n.feature)] += n.samples() / total * (n.impurity - children);
    }
    const double sum = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (sum > 0.0)
        for (auto& v : imp) v /= sum;
    return imp;
}

std::vector<int> stratified_folds(std::span<const Label> targets, int k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorClass::InvalidArgument, "stratified_cv: k must be at least 2");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < targets.size(); ++i) by_class[targets[i] == Label::Complex ? 0 : 1].push_back(i);
    for (int c = 0; c < 2; ++c)
        if (static_cast<int>(by_class[c].size()) < k)
            throw Error(ErrorClass::InvalidArgument,
                        fmt::format("stratified_cv: class {} has {} members, fewer than k={}",
                                    to_string(c == 0 ? Label::Complex : Label::NotComplex), by_class[c].size(), k));

    std::mt19937_64 rng(seed);
    auto below = [&](std::uint64_t bound) {
        // rejection sampling keeps the draw unbiased and independent of the stdlib
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t v;
        do v = rng();
        while (v >= limit);
        return v % bound;
    };
    std::vector<int> fold_of(targets.size(), -1);
    std::size_t next = 0;
    for (auto& members : by_class) {
        for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[below(i)]);
        for (auto idx : members) fold_of[idx] = static_cast<int>(next++ % static_cast<std::size_t>(k));
    }
    return fold_of;
}

CvReport stratified_cv(std::span<const FeatureVector> features, std::span<const Label> targets, int k,
                       const TreeParams& params, std::uint64_t seed) {
    if (features.size() != targets.size())
        throw Error(ErrorClass::InvalidArgument, "stratified_cv: features and targets differ in length");
    CvReport report;
    report.k = k;
    report.seed = seed;
    report.fold_of = stratified_folds(targets, k, seed);

    for (int f = 0; f < k; ++f) {
        std::vector<FeatureVector> train_x;
        std::vector<Label> train_y;
        FoldResult fold;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            if (report.fold_of[i] == f) {
                fold.test_indices.push_back(i);
                (targets[i] == Label::Complex ? fold.test_complex : fold.test_not_complex) += 1;
            } else {
                train_x.push_back(features[i]);
                train_y.push_back(targets[i]);
            }
        }
        fold.train_size = static_cast<int>(train_x.size());
        const auto tree = train(train_x, train_y, params);
        std::vector<Label> truth, pred;
        for (auto i : fold.test_indices) {
            truth.push_back(targets[i]);
            pred.push_back(predict(tree, features[i]));
        }
        fold.metrics = classification_metrics(confusion(truth, pred));
        report.folds.push_back(std::move(fold));
    }

    const std::pair<const char*, Metric MetricsReport::*> metrics[] = {
        {"precision", &MetricsReport::precision},
        {"recall", &MetricsReport::recall},
        {"f1", &MetricsReport::f1},
        {"kappa", &MetricsReport::kappa},
    };
    for (const auto& [name, member] : metrics) {
        MetricSummary s;
        s.metric = name;
        std::vector<double> values;
        for (const auto& fold : report.folds)
            if (const auto& m = fold.metrics.*member) values.push_back(*m);
        s.defined_folds = static_cast<int>(values.size());
        if (!values.empty()) {
            s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
            double ss = 0.0;
            for (double v : values) ss += (v - s.mean) * (v - s.mean);
            s.stddev = std::sqrt(ss / values.size());
        }
        report.summary.push_back(s);
    }
    return report;
}

namespace {

json node_json(const DecisionTree& tree, std::size_t i) {
    const auto& n = tree.nodes[i];
    json j = {{"samples", n.samples()},
              {"counts", {{"Complex", n.complex_count}, {"NotComplex", n.not_complex_count}}},
              {"impurity", n.impurity},
              {"label", to_string(n.label)}};
    if (n.is_leaf()) {
        j["type"] = "leaf";
    } else {
        j["type"] = "internal";
        j["feature"] = fmt::format("Q{}", n.feature + 1);
        j["feature_index"] = n.feature;
        j["threshold"] = n.threshold;
        j["left"] = node_json(tree, static_cast<std::size_t>(n.left));
        j["right"] = node_json(tree, static_cast<std::size_t>(n.right));
    }
    return j;
}

int node_from_json(DecisionTree& tree, const json& j) {
    TreeNode n;
    n.complex_count = j.at("counts").at("Complex").get<int>();
    n.not_complex_count = j.at("counts").at("NotComplex").get<int>();
    n.impurity = j.at("impurity").get<double>();
    auto label = parse_label(j.at("label").get<std::string>());
    if (!label) throw Error(ErrorClass::CorruptRecord, "tree: bad label");
    n.label = *label;
    const int self = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(n);
    if (j.at("type") == "internal") {
        const int f = j.at("feature_index").get<int>();
        if (f < 0 || f >= kFeatureCount) throw Error(ErrorClass::CorruptRecord, "tree: bad feature index");
        const double t = j.at("threshold").get<double>();
        const int l = node_from_json(tree, j.at("left"));
        const int r = node_from_json(tree, j.at("right"));
        auto& me = tree.nodes[static_cast<std::size_t>(self)];
        me.feature = f;
        me.threshold = t;
        me.left = l;
        me.right = r;
    }
    return self;
}

}  // namespace

json to_json(const DecisionTree& tree) {
    return {{"params",
             {{"max_depth", tree.params.max_depth},
              {"min_samples_leaf", tree.params.min_samples_leaf},
              {"seed", tree.params.seed}}},
            {"root", node_json(tree, 0)}};
}

DecisionTree tree_from_json(const json& j) {
    DecisionTree tree;
    try {
        tree.params.max_depth = j.at("params").at("max_depth").get<int>();
        tree.params.min_samples_leaf = j.at("params").at("min_samples_leaf").get<int>();
        tree.params.seed = j.at("params").at("seed").get<std::uint64_t>();
        node_from_json(tree, j.at("root"));
    } catch (const json::exception& e) {
        throw Error(ErrorClass::CorruptRecord, std::string("tree: ") + e.what());
    }
    return tree;
}

json to_json(const CvReport& cv) {
    json folds = json::array();
    for (const auto& f : cv.folds)
        folds.push_back({{"test_size", f.test_indices.size()},
                         {"train_size", f.train_size},
                         {"test_complex", f.test_complex},
                         {"test_not_complex", f.test_not_complex},
                         {"metrics", to_json(f.metrics)}});
    json summary = json::object();
    for (const auto& s : cv.summary)
        summary[s.metric] = {{"mean", s.mean}, {"stddev", s.stddev}, {"defined_folds", s.defined_folds}};
    return {{"k", cv.k}, {"seed", cv.seed}, {"fold_of", cv.fold_of}, {"folds", folds}, {"summary", summary}};
}

std::string format_rules_table(const std::vector<Rule>& rules) {
    std::size_t width = 13;
    for (const auto& r : rules) width = std::max(width, r.text().size());
    std::string out = fmt::format("{:<4}  {:<{}}  {:<15}  {}\n", "Path", "Decision Rule", width, "Predicted Class",
                                  "Support");
    for (std::size_t i = 0; i < rules.size(); ++i)
        out += fmt::format("{:<4}  {:<{}}  {:<15}  {}\n", i + 1, rules[i].text(), width,
                           rules[i].label == Label::Complex ? "Complex" : "Not Complex", rules[i].support);
    return out;
}

std::string importance_csv(const ImportanceVector& imp) {
    std::string out = "question,driver,importance\n";
    for (int q = 1; q <= kFeatureCount; ++q) {
        auto d = driver_for_question(q);
        out += fmt::format("Q{},{},{:.6f}\n", q, d ? csv_field(driver_info(*d).name) : "",
                           imp[static_cast<std::size_t>(q - 1)]);
    }
    return out;
}

}  // namespace srpeval
