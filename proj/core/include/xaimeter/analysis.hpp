#pragma once

#include <vector>

#include "xaimeter/score_table.hpp"

namespace xaimeter {

/// Symmetric metric x metric matrix of Spearman rank correlations between
/// mean-score vectors over the non-trivial explainers. Entries where the
/// correlation is undefined (tie-degenerate vectors) carry defined == false.
struct ConsensusMatrix {
    std::vector<MetricId> metrics;
    std::vector<double> sr;        // row-major metrics.size()^2, diagonal == 1
    std::vector<bool> defined;
    std::vector<MetricId> sign_flipped;  // metrics whose mean scores were negated

    double at(std::size_t i, std::size_t j) const { return sr[i * metrics.size() + j]; }
    bool defined_at(std::size_t i, std::size_t j) const {
        return defined[i * metrics.size() + j];
    }
};

/// Drops the trivial explainers, negates the higher-is-better metrics
/// (AG/AI/PCC/SIM) so consensus always reads as SR near +1, and computes all
/// pairwise Spearman correlations. Needs at least 3 non-trivial explainers.
ConsensusMatrix consensus(const ScoreTable& table);

struct ConsistencyEntry {
    MetricId metric;
    double pcc = std::numeric_limits<double>::quiet_NaN();
    bool defined = false;
};

/// For each sample-based metric, the Pearson correlation between the two
/// tables' mean-score vectors over non-trivial explainers. The tables must
/// come from the same model (checksum), dataset and explainer set.
std::vector<ConsistencyEntry> consistency(const ScoreTable& uniform_table,
                                          const ScoreTable& adversarial_table);

}  // namespace xaimeter
