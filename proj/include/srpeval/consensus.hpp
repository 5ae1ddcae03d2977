#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "srpeval/annotation.hpp"

namespace srpeval {

/// A sample is Complex when complex_votes >= quorum * total_votes. The default
/// 0.5 is simple majority with ties resolved to Complex.
struct ConsensusPolicy {
    double quorum = 0.5;
};

struct ConsensusLabel {
    std::string sample_id;
    Label label = Label::NotComplex;
    int complex_votes = 0;
    int total_votes = 0;
    bool unanimity = false;
    bool tied = false;
    std::array<int, kDriverCount> driver_counts{};

    double complex_fraction() const {
        return total_votes == 0 ? 0.0 : static_cast<double>(complex_votes) / total_votes;
    }
    bool operator==(const ConsensusLabel&) const = default;
};

ConsensusLabel aggregate(std::span<const Annotation> annotations, const ConsensusPolicy& policy = {});

struct DriverRank {
    Driver driver;
    int count = 0;
    int rank = 0;  // 1-based; ties broken by catalog order
};

std::vector<DriverRank> driver_frequency(std::span<const ConsensusLabel> labels);

struct GroundTruthOptions {
    ConsensusPolicy policy;
    bool skip_unannotated = false;
};

struct GroundTruthTable {
    std::map<std::string, ConsensusLabel> labels;
    int complex_count = 0;
    int not_complex_count = 0;
    std::vector<std::string> skipped;
    std::vector<std::string> warnings;

    const ConsensusLabel* find(const std::string& id) const;
    std::vector<ConsensusLabel> values() const;
};

/// Consensus for every id in `sample_ids`. Annotations for other samples are ignored.
GroundTruthTable ground_truth_table(std::span<const std::string> sample_ids,
                                    std::span<const Annotation> annotations,
                                    const GroundTruthOptions& options = {});

/// CSV with header sample_id,label,complex_votes,total_votes,unanimity.
std::string consensus_csv(const GroundTruthTable& table);

}  // namespace srpeval
