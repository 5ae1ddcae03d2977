#include "srpeval/consensus.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "srpeval/csv.hpp"
#include "srpeval/error.hpp"

namespace srpeval {

ConsensusLabel aggregate(std::span<const Annotation> annotations, const ConsensusPolicy& policy) {
    if (annotations.empty()) throw Error(ErrorClass::InvalidArgument, "aggregate: no annotations");
    if (!(policy.quorum > 0.0 && policy.quorum <= 1.0))
        throw Error(ErrorClass::InvalidArgument, "aggregate: quorum must be in (0, 1]");

    ConsensusLabel out;
    out.sample_id = annotations.front().sample_id;
    for (const auto& a : annotations) {
        if (a.sample_id != out.sample_id)
            throw Error(ErrorClass::InvalidArgument,
                        "aggregate: mixed sample ids '" + out.sample_id + "' and '" + a.sample_id + "'");
        ++out.total_votes;
        if (a.label == Label::Complex) ++out.complex_votes;
        for (Driver d : a.drivers) ++out.driver_counts[catalog_index(d)];
    }
    out.unanimity = out.complex_votes == 0 || out.complex_votes == out.total_votes;
    out.tied = 2 * out.complex_votes == out.total_votes;
    out.label = out.complex_votes >= policy.quorum * out.total_votes ? Label::Complex : Label::NotComplex;
    return out;
}

std::vector<DriverRank> driver_frequency(std::span<const ConsensusLabel> labels) {
    std::vector<DriverRank> ranks;
    ranks.reserve(kDriverCount);
    for (const auto& info : kDriverCatalog) {
        int total = 0;
        for (const auto& l : labels) total += l.driver_counts[catalog_index(info.driver)];
        ranks.push_back({info.driver, total, 0});
    }
    // stable sort keeps catalog order among equal counts
    std::stable_sort(ranks.begin(), ranks.end(),
                     [](const DriverRank& a, const DriverRank& b) { return a.count > b.count; });
    for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i].rank = static_cast<int>(i) + 1;
    return ranks;
}

const ConsensusLabel* GroundTruthTable::find(const std::string& id) const {
    auto it = labels.find(id);
    return it == labels.end() ? nullptr : &it->second;
}

std::vector<ConsensusLabel> GroundTruthTable::values() const {
    std::vector<ConsensusLabel> out;
    out.reserve(labels.size());
    for (const auto& [_, v] : labels) out.push_back(v);
    return out;
}

GroundTruthTable ground_truth_table(std::span<const std::string> sample_ids,
                                    std::span<const Annotation> annotations,
                                    const GroundTruthOptions& options) {
    std::unordered_map<std::string, std::vector<Annotation>> by_sample;
    for (const auto& a : annotations) by_sample[a.sample_id].push_back(a);

    GroundTruthTable table;
    for (const auto& id : sample_ids) {
        auto it = by_sample.find(id);
        if (it == by_sample.end()) {
            if (!options.skip_unannotated)
                throw Error(ErrorClass::MissingPrerequisite, "sample '" + id + "' has no annotations");
            table.skipped.push_back(id);
            table.warnings.push_back("skipped unannotated sample '" + id + "'");
            continue;
        }
        auto label = aggregate(it->second, options.policy);
        (label.label == Label::Complex ? table.complex_count : table.not_complex_count) += 1;
        table.labels.emplace(id, std::move(label));
    }
    return table;
}

std::string consensus_csv(const GroundTruthTable& table) {
    std::ostringstream os;
    os << "sample_id,label,complex_votes,total_votes,unanimity\n";
    for (const auto& [id, l] : table.labels)
        os << csv_field(id) << ',' << to_string(l.label) << ',' << l.complex_votes << ',' << l.total_votes << ','
           << (l.unanimity ? "true" : "false") << '\n';
    return os.str();
}

}  // namespace srpeval
