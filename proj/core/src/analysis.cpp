#include "xaimeter/analysis.hpp"

#include <cmath>

#include "xaimeter/errors.hpp"
#include "xaimeter/stats.hpp"

namespace xaimeter {

namespace {

std::vector<std::size_t> non_trivial_indices(const ScoreTable& table) {
    std::vector<std::size_t> idx;
    for (std::size_t e = 0; e < table.explainers.size(); ++e) {
        if (!table.explainers[e].trivial()) idx.push_back(e);
    }
    return idx;
}

bool negate_for_consensus(MetricId id) {
    // higher-is-better metrics are flipped so strong consensus reads as +1
    return id == MetricId::Ag || id == MetricId::Ai || id == MetricId::Pcc ||
           id == MetricId::Sim;
}

/// Mean-score vector of one metric over the given explainer columns; NaN
/// entries propagate to the caller as an empty optional-like flag.
std::vector<double> mean_vector(const ScoreTable& table, std::size_t m,
                                const std::vector<std::size_t>& explainer_idx, bool negate,
                                bool& all_finite) {
    std::vector<double> v;
    v.reserve(explainer_idx.size());
    all_finite = true;
    for (std::size_t e : explainer_idx) {
        const double mean = table.stats(m, e).mean_score;
        if (!std::isfinite(mean)) all_finite = false;
        v.push_back(negate ? -mean : mean);
    }
    return v;
}

}  // namespace

ConsensusMatrix consensus(const ScoreTable& table) {
    const std::vector<std::size_t> keep = non_trivial_indices(table);
    if (keep.size() < 3) {
        throw ValueError("consensus needs at least 3 non-trivial explainers, have " +
                         std::to_string(keep.size()));
    }

    ConsensusMatrix cm;
    cm.metrics = table.metrics;
    const std::size_t n = cm.metrics.size();
    cm.sr.assign(n * n, std::numeric_limits<double>::quiet_NaN());
    cm.defined.assign(n * n, false);

    std::vector<std::vector<double>> vectors(n);
    std::vector<bool> usable(n);
    for (std::size_t m = 0; m < n; ++m) {
        const bool negate = negate_for_consensus(cm.metrics[m]);
        if (negate) cm.sign_flipped.push_back(cm.metrics[m]);
        bool all_finite = false;
        vectors[m] = mean_vector(table, m, keep, negate, all_finite);
        usable[m] = all_finite;
    }

    for (std::size_t i = 0; i < n; ++i) {
        cm.sr[i * n + i] = 1.0;
        cm.defined[i * n + i] = true;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!usable[i] || !usable[j]) continue;
            try {
                const double sr = spearman(vectors[i], vectors[j]);
                cm.sr[i * n + j] = cm.sr[j * n + i] = sr;
                cm.defined[i * n + j] = cm.defined[j * n + i] = true;
            } catch (const UndefinedCorrelationError&) {
                // tie-degenerate vector: leave the entry flagged undefined
            }
        }
    }
    return cm;
}

std::vector<ConsistencyEntry> consistency(const ScoreTable& uniform_table,
                                          const ScoreTable& adversarial_table) {
    const auto ids = [](const ScoreTable& t) {
        std::vector<std::string> v;
        for (const auto& e : t.explainers) v.push_back(e.id());
        return v;
    };
    if (ids(uniform_table) != ids(adversarial_table)) {
        throw SchemaError("consistency: tables have different explainer sets");
    }
    if (uniform_table.meta.model_checksum != adversarial_table.meta.model_checksum) {
        throw SchemaError("consistency: tables come from different model checkpoints (" +
                          uniform_table.meta.model_checksum + " vs " +
                          adversarial_table.meta.model_checksum + ")");
    }
    if (uniform_table.meta.dataset_name != adversarial_table.meta.dataset_name ||
        uniform_table.n_images != adversarial_table.n_images) {
        throw SchemaError("consistency: tables cover different datasets");
    }

    const std::vector<std::size_t> keep = non_trivial_indices(uniform_table);
    if (keep.size() < 2) {
        throw ValueError("consistency needs at least 2 non-trivial explainers");
    }

    std::vector<ConsistencyEntry> out;
    for (std::size_t m = 0; m < uniform_table.metrics.size(); ++m) {
        const MetricId id = uniform_table.metrics[m];
        if (!metric_is_sample_based(id)) continue;
        ConsistencyEntry entry;
        entry.metric = id;
        bool finite_u = false, finite_a = false;
        const std::vector<double> u = mean_vector(uniform_table, m, keep, false, finite_u);
        std::size_t ma;
        try {
            ma = adversarial_table.metric_index(id);
        } catch (const ValueError&) {
            out.push_back(entry);
            continue;
        }
        const std::vector<double> a = mean_vector(adversarial_table, ma, keep, false, finite_a);
        if (finite_u && finite_a) {
            try {
                entry.pcc = pearson(u, a);
                entry.defined = true;
            } catch (const UndefinedCorrelationError&) {
            }
        }
        out.push_back(entry);
    }
    return out;
}

}  // namespace xaimeter
