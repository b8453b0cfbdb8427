#pragma once

#include <filesystem>
#include <functional>

#include "xaimeter/dataset.hpp"
#include "xaimeter/model.hpp"
#include "xaimeter/score_table.hpp"

namespace xaimeter {

struct RunOptions {
    std::vector<ExplainerSpec> explainers;
    std::vector<MetricId> metrics;
    SamplerConfig sampler;        // epsilon == 0 derives the size-scaled default
    Strategy strategy = Strategy::Uniform;
    double eta_sq = 1e-6;
    int del_steps = 50;
    OutputSpace g_output = OutputSpace::Logit;         // Eq.-1 surrogate family
    OutputSpace del_output = OutputSpace::Probability; // deletion and AD/AI/AG
    bool lip_normalize = false;
    int jobs = 1;
    std::uint64_t seed = 0;
    std::string model_checksum;

    std::filesystem::path save_saliency_dir;  // when set, export anchor maps as PNG
    std::filesystem::path save_samples_dir;   // when set, cache perturbation sets

    /// Progress hook, called once per finished image (may run on any worker).
    std::function<void(int)> on_image_done;
};

/// Evaluates every explainer with every metric on every dataset image. Each
/// image gets one PerturbationSet per run (shared by LIP/LSS/CLE/LRC); random
/// streams derive from (seed, image index, strategy, explainer id) so results
/// do not depend on evaluation order or the worker count. Per-cell errors are
/// recorded in the cell flags and the run continues.
ScoreTable run_matrix(const Classifier& model, const BenchmarkDataset& dataset,
                      const RunOptions& options);

}  // namespace xaimeter
