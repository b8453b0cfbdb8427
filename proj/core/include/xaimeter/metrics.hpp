#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "xaimeter/image.hpp"
#include "xaimeter/model.hpp"
#include "xaimeter/perturbation.hpp"
#include "xaimeter/saliency.hpp"
#include "xaimeter/tensor.hpp"

namespace xaimeter {

enum class MetricId { Lip, Lss, Cle, Lrc, Del, Ad, Ai, Ag, Pcc, Sim };

std::string metric_name(MetricId id);
MetricId metric_from_name(const std::string& name);
std::vector<MetricId> all_metrics();
/// Metrics estimated over a PerturbationSet (LIP, LSS, CLE, LRC).
bool metric_is_sample_based(MetricId id);
/// True if smaller scores mean better explanations (LIP/LSS/CLE/LRC/DEL/AD).
bool metric_lower_is_better(MetricId id);

/// Whether g is evaluated as the raw logit or the softmax probability.
enum class OutputSpace { Logit, Probability };
std::string output_space_name(OutputSpace s);
OutputSpace output_space_from_name(const std::string& name);

/// First-order local model of g anchored at X0, built from a saliency map:
/// E(X) = s(X0)^T (X - X0) + g(X0), everything in raw pixel units.
struct LinearSurrogate {
    std::vector<double> anchor;    // flattened X0
    std::vector<double> saliency;  // flattened s(X0), broadcast applied
    double base = 0.0;             // g(X0)
};

LinearSurrogate make_surrogate(const Image& x0, const SaliencyMap& s, double g_x0);
double surrogate_eval(const LinearSurrogate& e, std::span<const double> x_flat);
double surrogate_eval(const LinearSurrogate& e, const Image& x);

/// |E0(m) - E1(m)| at the midpoint m of the two anchors.
double midpoint_gap(const LinearSurrogate& e0, const LinearSurrogate& e1);

/// Everything the neighborhood metrics need about one (image, explainer,
/// sample set) triple, so LIP/LSS/CLE/LRC can share the explainer and model
/// evaluations at the perturbed samples.
struct NeighborhoodEvals {
    const PerturbationSet* samples = nullptr;
    SaliencyMap s0;                    // s(X0)
    double g0 = 0.0;                   // g(X0)
    std::vector<SaliencyMap> s_tilde;  // s(X~) per sample
    std::vector<double> g_tilde;       // g(X~) per sample
    bool normalize_for_lip = false;    // min-max normalize maps inside LIP's distance
};

using SaliencyFn = std::function<SaliencyMap(const Image&)>;
using ModelValueFn = std::function<double(const Image&)>;

NeighborhoodEvals evaluate_neighborhood(const Image& x0, const SaliencyFn& saliency_fn,
                                        const ModelValueFn& g_fn,
                                        const PerturbationSet& samples);

/// max over samples of ||s(X0) - s(X~)|| / ||X0 - X~||.
double lip(const NeighborhoodEvals& ev);
double lip(const Image& x0, const SaliencyFn& saliency_fn, const PerturbationSet& samples);

/// max over samples of |E_X0(m) - E_X~(m)| / ||X0 - X~||.
double lss(const NeighborhoodEvals& ev);
double lss(const Image& x0, const SaliencyFn& saliency_fn, const ModelValueFn& g_fn,
           const PerturbationSet& samples);

/// mean over samples of |E_X0(X~) - g(X~)|.
double cle(const NeighborhoodEvals& ev);
double cle(const Image& x0, const SaliencyFn& saliency_fn, const ModelValueFn& g_fn,
           const PerturbationSet& samples);

/// mean over samples of |E_X0(X~) - g(X~)| / (|g(X0) - g(X~)| + eta_sq).
double lrc(const NeighborhoodEvals& ev, double eta_sq);
double lrc(const Image& x0, const SaliencyFn& saliency_fn, const ModelValueFn& g_fn,
           const PerturbationSet& samples, double eta_sq);

/// Max sample distance: the evaluation radius of all four neighborhood metrics.
double neighborhood_radius(const PerturbationSet& samples);

struct DeletionResult {
    double audc = 0.0;
    std::vector<double> fractions;      // deleted-pixel fractions, 0 .. 0.5
    std::vector<double> confidences;    // model output for p0 at each fraction
    double radius = 0.0;                // l2(X0, X0 with 50% most important blacked)
};

/// Ranks pixels by importance_plane (ties toward the lower pixel index) and
/// blacks them out in `steps` increments up to half the image, recording the
/// target-class output at each stage. AUDC is the normalized trapezoid area;
/// lower is better.
DeletionResult deletion_audc(const Image& x0, const SaliencyMap& s, const Classifier& model,
                             int p0, int steps, OutputSpace space = OutputSpace::Probability);

struct AdAiAgResult {
    double ad = 0.0;  // average-drop term, percent
    double ai = 0.0;  // average-increase indicator, percent (0 or 100 per image)
    double ag = 0.0;  // average-gain term, percent
    bool ad_defined = true;   // false when y == 0
    bool ag_defined = true;   // false when y == 1
    double radius = 0.0;      // l2(X0, s(X0) (.) X0)
};

/// Masks the image with the min-max-normalized saliency (X_e = s (.) X0) and
/// compares the target-class output on X0 (y) and X_e (o).
AdAiAgResult ad_ai_ag(const Image& x0, const SaliencyMap& s, const Classifier& model, int p0,
                      OutputSpace space = OutputSpace::Probability);

/// 2-d human-attention ground truth: non-negative, at least one positive value.
class GazeMap {
public:
    static GazeMap from_tensor(Tensor hw);
    const Tensor& values() const { return values_; }
    /// Scaled to sum to 1.
    Tensor normalized() const;
    std::size_t height() const { return values_.shape()[0]; }
    std::size_t width() const { return values_.shape()[1]; }

private:
    Tensor values_;
};

/// Pearson correlation between the saliency map (reduced to H x W) and the
/// gaze map. Throws UndefinedCorrelationError for constant maps.
double plausibility_pcc(const SaliencyMap& s, const GazeMap& gaze);

/// Histogram intersection: both maps shifted to be non-negative, normalized
/// to sum 1, then the sum of per-pixel minima. Symmetric, in [0, 1].
double plausibility_sim(const SaliencyMap& s, const GazeMap& gaze);

}  // namespace xaimeter
