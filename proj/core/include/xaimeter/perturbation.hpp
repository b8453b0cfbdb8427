#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xaimeter/image.hpp"
#include "xaimeter/model.hpp"
#include "xaimeter/random.hpp"

namespace xaimeter {

enum class Strategy { Uniform, Adversarial };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct SamplerConfig {
    double epsilon = 0.0;          // 0 = derive from image size, see default_epsilon
    int count = 50;                // perturbed samples per image
    int max_walk_iterations = 10000;
    int seed_pixels = 3;           // pixels modified by the adversarial seed noise
    int max_retries = 100;         // redraw budget for degenerate samples
};

/// The neighborhood radius, scaled from the 250-at-256x256x3 calibration so a
/// desk-scale image keeps the same per-dimension budget: 250 * sqrt(n/196608).
double default_epsilon(std::size_t dims);

struct SampleRecord {
    Image image;                  // quantized, always a valid integer image != anchor
    double distance = 0.0;        // l2(anchor, image), recomputed post-quantization
    double pre_quant_distance = 0.0;  // walk/draw distance before rounding
    std::optional<int> steps;         // adversarial walk length (absent for uniform)
    double target_norm = 0.0;         // adversarial: the drawn d; uniform: drawn radius
    double escape_distance = 0.0;     // adversarial: ||A_{i+1} - X0|| that stopped the walk
    bool capped = false;              // walk hit the iteration cap, final iterate returned
    int regenerations = 0;            // times this slot was redrawn
};

struct PerturbationSet {
    Image anchor;
    std::vector<SampleRecord> samples;
    Strategy strategy = Strategy::Uniform;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
};

/// A point uniform in the n-ball of radius `epsilon` (direction uniform on the
/// sphere, radius epsilon * u^(1/n)). Exposed for the radial-statistic tests.
std::vector<double> uniform_ball_point(std::size_t dims, double epsilon, RandomStream& rng);

/// Uniform strategy: X0 + ball point, rounded and clipped to a valid integer
/// image; samples that quantize back onto X0 are redrawn (bounded retries).
PerturbationSet sample_uniform(const Image& x0, const SamplerConfig& cfg, RandomStream& rng);

/// Adversarial strategy: per sample, draw a target norm d in (0, epsilon),
/// seed with noise on `seed_pixels` pixels, then descend the target logit with
/// unit steps A_{i+1} = A_i - grad g(A_i) until the next iterate would leave
/// the ball of radius d; the last iterate inside is quantized and returned.
PerturbationSet sample_adversarial(const Image& x0, const ClassLogitModel& g,
                                   const SamplerConfig& cfg, RandomStream& rng);

/// Replayable on-disk form: one PNG per sample plus manifest.json with
/// distances, strategy, seed and walk statistics.
void save_perturbation_set(const PerturbationSet& set, const std::filesystem::path& dir);
PerturbationSet load_perturbation_set(const std::filesystem::path& dir);

}  // namespace xaimeter
