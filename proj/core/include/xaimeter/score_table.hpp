#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "xaimeter/explainers.hpp"
#include "xaimeter/metrics.hpp"
#include "xaimeter/perturbation.hpp"

namespace xaimeter {

/// One (image, metric, explainer) result. `score` is NaN when the cell is
/// undefined or failed; `flags` says why.
struct CellRaw {
    double score = std::numeric_limits<double>::quiet_NaN();
    double radius = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> flags;

    bool defined() const { return std::isfinite(score); }
};

struct CellStats {
    double mean_score = std::numeric_limits<double>::quiet_NaN();
    double mean_radius = std::numeric_limits<double>::quiet_NaN();
    int n_defined = 0;
    int n_failed = 0;
};

struct TableMetadata {
    Strategy strategy = Strategy::Uniform;
    std::uint64_t seed = 0;
    double epsilon = 0.0;
    double eta_sq = 1e-6;
    int samples = 50;
    int del_steps = 50;
    OutputSpace g_output = OutputSpace::Logit;
    OutputSpace del_output = OutputSpace::Probability;
    bool lip_normalize = false;
    std::string model_checksum;
    std::string dataset_name;
    int n_images = 0;
};

/// The (metric x explainer) evaluation matrix over a dataset: per-image raw
/// scores plus derived means. Means are always recomputed from the raw cells
/// over defined entries only.
struct ScoreTable {
    std::vector<MetricId> metrics;
    std::vector<ExplainerSpec> explainers;
    int n_images = 0;
    std::vector<CellRaw> raw;  // [(metric * n_explainers + explainer) * n_images + image]
    TableMetadata meta;

    ScoreTable() = default;
    ScoreTable(std::vector<MetricId> metric_ids, std::vector<ExplainerSpec> explainer_specs,
               int image_count, TableMetadata metadata);

    std::size_t cell_index(std::size_t m, std::size_t e, std::size_t img) const {
        return (m * explainers.size() + e) * static_cast<std::size_t>(n_images) + img;
    }
    CellRaw& cell(std::size_t m, std::size_t e, std::size_t img) {
        return raw[cell_index(m, e, img)];
    }
    const CellRaw& cell(std::size_t m, std::size_t e, std::size_t img) const {
        return raw[cell_index(m, e, img)];
    }

    CellStats stats(std::size_t m, std::size_t e) const;
    std::size_t metric_index(MetricId id) const;
    std::size_t explainer_index(const std::string& id) const;

    bool operator==(const ScoreTable& other) const;
};

/// "%.17g" (exact double round-trip), with NaN spelled "NaN".
std::string format_double(double v);
double parse_double(const std::string& text);

/// Writes scores.csv (means, schema
/// `metric,explainer,mean_score,mean_radius,n_defined,n_failed`), raw.jsonl
/// (one object per image x metric x explainer) and metadata.json.
void save_results(const ScoreTable& table, const std::filesystem::path& dir);

/// Rebuilds the table from metadata.json + raw.jsonl; values round-trip
/// bit-exactly. Throws SchemaError on schema-version mismatch.
ScoreTable load_results(const std::filesystem::path& dir);

}  // namespace xaimeter
