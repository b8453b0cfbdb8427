#include "xaimeter/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xaimeter/errors.hpp"
#include "xaimeter/stats.hpp"

namespace xaimeter {

std::string metric_name(MetricId id) {
    switch (id) {
        case MetricId::Lip: return "lip";
        case MetricId::Lss: return "lss";
        case MetricId::Cle: return "cle";
        case MetricId::Lrc: return "lrc";
        case MetricId::Del: return "del";
        case MetricId::Ad: return "ad";
        case MetricId::Ai: return "ai";
        case MetricId::Ag: return "ag";
        case MetricId::Pcc: return "pcc";
        case MetricId::Sim: return "sim";
    }
    throw ValueError("unknown metric id");
}

MetricId metric_from_name(const std::string& name) {
    for (MetricId id : all_metrics()) {
        if (metric_name(id) == name) return id;
    }
    throw ValueError("unknown metric: '" + name + "'");
}

std::vector<MetricId> all_metrics() {
    return {MetricId::Lip, MetricId::Lss, MetricId::Cle, MetricId::Lrc, MetricId::Del,
            MetricId::Ad,  MetricId::Ai,  MetricId::Ag,  MetricId::Pcc, MetricId::Sim};
}

bool metric_is_sample_based(MetricId id) {
    return id == MetricId::Lip || id == MetricId::Lss || id == MetricId::Cle ||
           id == MetricId::Lrc;
}

bool metric_lower_is_better(MetricId id) {
    switch (id) {
        case MetricId::Lip:
        case MetricId::Lss:
        case MetricId::Cle:
        case MetricId::Lrc:
        case MetricId::Del:
        case MetricId::Ad:
            return true;
        default:
            return false;
    }
}

std::string output_space_name(OutputSpace s) {
    return s == OutputSpace::Logit ? "logit" : "prob";
}

OutputSpace output_space_from_name(const std::string& name) {
    if (name == "logit") return OutputSpace::Logit;
    if (name == "prob") return OutputSpace::Probability;
    throw ValueError("unknown output space: '" + name + "' (want logit|prob)");
}

LinearSurrogate make_surrogate(const Image& x0, const SaliencyMap& s, double g_x0) {
    if (s.height() != x0.height() || s.width() != x0.width()) {
        throw ShapeError("surrogate: saliency and anchor sizes differ");
    }
    if (!std::isfinite(g_x0)) throw ValueError("surrogate: base value must be finite");
    LinearSurrogate e;
    e.anchor.assign(x0.flat().begin(), x0.flat().end());
    e.saliency = s.flat();
    e.base = g_x0;
    return e;
}

double surrogate_eval(const LinearSurrogate& e, std::span<const double> x_flat) {
    if (x_flat.size() != e.anchor.size()) {
        throw ShapeError("surrogate: input length " + std::to_string(x_flat.size()) +
                         ", expected " + std::to_string(e.anchor.size()));
    }
    double acc = e.base;
    for (std::size_t i = 0; i < x_flat.size(); ++i) {
        acc += e.saliency[i] * (x_flat[i] - e.anchor[i]);
    }
    return acc;
}

double surrogate_eval(const LinearSurrogate& e, const Image& x) {
    return surrogate_eval(e, x.flat());
}

double midpoint_gap(const LinearSurrogate& e0, const LinearSurrogate& e1) {
    if (e0.anchor.size() != e1.anchor.size()) {
        throw ShapeError("midpoint_gap: surrogates over different image shapes");
    }
    std::vector<double> mid(e0.anchor.size());
    for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = (e0.anchor[i] + e1.anchor[i]) / 2.0;
    return std::abs(surrogate_eval(e0, mid) - surrogate_eval(e1, mid));
}

NeighborhoodEvals evaluate_neighborhood(const Image& x0, const SaliencyFn& saliency_fn,
                                        const ModelValueFn& g_fn,
                                        const PerturbationSet& samples) {
    NeighborhoodEvals ev;
    ev.samples = &samples;
    ev.s0 = saliency_fn(x0);
    ev.g0 = g_fn(x0);
    ev.s_tilde.reserve(samples.samples.size());
    ev.g_tilde.reserve(samples.samples.size());
    for (const SampleRecord& rec : samples.samples) {
        ev.s_tilde.push_back(saliency_fn(rec.image));
        ev.g_tilde.push_back(g_fn(rec.image));
    }
    return ev;
}

namespace {

void check_nonempty(const NeighborhoodEvals& ev) {
    if (!ev.samples || ev.samples->samples.empty()) {
        throw ValueError("neighborhood metric: empty perturbation set");
    }
    if (ev.s_tilde.size() != ev.samples->samples.size() ||
        ev.g_tilde.size() != ev.samples->samples.size()) {
        throw ValueError("neighborhood metric: evaluation arrays out of sync");
    }
}

std::vector<double> lip_vector(const SaliencyMap& s, bool normalize) {
    if (!normalize) return s.flat();
    if (s.is_per_channel()) {
        return SaliencyMap::per_channel(min_max_normalize(s.values())).flat();
    }
    return SaliencyMap::single_plane(min_max_normalize(s.values())).flat();
}

}  // namespace

double lip(const NeighborhoodEvals& ev) {
    check_nonempty(ev);
    const std::vector<double> s0 = lip_vector(ev.s0, ev.normalize_for_lip);
    double best = 0.0;
    for (std::size_t i = 0; i < ev.s_tilde.size(); ++i) {
        const std::vector<double> st = lip_vector(ev.s_tilde[i], ev.normalize_for_lip);
        const double ratio = l2_distance(s0, st) / ev.samples->samples[i].distance;
        best = std::max(best, ratio);
    }
    return best;
}

double lip(const Image& x0, const SaliencyFn& saliency_fn, const PerturbationSet& samples) {
    const auto g_stub = [](const Image&) { return 0.0; };
    return lip(evaluate_neighborhood(x0, saliency_fn, g_stub, samples));
}

double lss(const NeighborhoodEvals& ev) {
    check_nonempty(ev);
    const Image& x0 = ev.samples->anchor;
    const LinearSurrogate e0 = make_surrogate(x0, ev.s0, ev.g0);
    double best = 0.0;
    for (std::size_t i = 0; i < ev.s_tilde.size(); ++i) {
        const SampleRecord& rec = ev.samples->samples[i];
        const LinearSurrogate e1 = make_surrogate(rec.image, ev.s_tilde[i], ev.g_tilde[i]);
        best = std::max(best, midpoint_gap(e0, e1) / rec.distance);
    }
    return best;
}

double lss(const Image& x0, const SaliencyFn& saliency_fn, const ModelValueFn& g_fn,
           const PerturbationSet& samples) {
    return lss(evaluate_neighborhood(x0, saliency_fn, g_fn, samples));
}

double cle(const NeighborhoodEvals& ev) {
    check_nonempty(ev);
    const LinearSurrogate e0 = make_surrogate(ev.samples->anchor, ev.s0, ev.g0);
    double acc = 0.0;
    for (std::size_t i = 0; i < ev.g_tilde.size(); ++i) {
        acc += std::abs(surrogate_eval(e0, ev.samples->samples[i].image) - ev.g_tilde[i]);
    }
    return acc / static_cast<double>(ev.g_tilde.size());
}

double cle(const Image& x0, const SaliencyFn& saliency_fn, const ModelValueFn& g_fn,
           const PerturbationSet& samples) {
    return cle(evaluate_neighborhood(x0, saliency_fn, g_fn, samples));
}

double lrc(const NeighborhoodEvals& ev, double eta_sq) {
    check_nonempty(ev);
    if (eta_sq <= 0.0) throw ValueError("lrc: eta^2 must be > 0");
    const LinearSurrogate e0 = make_surrogate(ev.samples->anchor, ev.s0, ev.g0);
    double acc = 0.0;
    for (std::size_t i = 0; i < ev.g_tilde.size(); ++i) {
        const double c =
            std::abs(surrogate_eval(e0, ev.samples->samples[i].image) - ev.g_tilde[i]);
        const double delta_g = std::abs(ev.g0 - ev.g_tilde[i]);
        acc += c / (delta_g + eta_sq);
    }
    return acc / static_cast<double>(ev.g_tilde.size());
}

double lrc(const Image& x0, const SaliencyFn& saliency_fn, const ModelValueFn& g_fn,
           const PerturbationSet& samples, double eta_sq) {
    return lrc(evaluate_neighborhood(x0, saliency_fn, g_fn, samples), eta_sq);
}

double neighborhood_radius(const PerturbationSet& samples) {
    if (samples.samples.empty()) throw ValueError("neighborhood_radius: empty set");
    double r = 0.0;
    for (const SampleRecord& rec : samples.samples) r = std::max(r, rec.distance);
    return r;
}

namespace {

double model_output(const Classifier& model, const Tensor& x, int p0, OutputSpace space) {
    const std::vector<double> logits = model.forward(x);
    if (space == OutputSpace::Logit) return logits[static_cast<std::size_t>(p0)];
    return softmax(logits)[static_cast<std::size_t>(p0)];
}

/// Pixel indices sorted by descending importance, ties toward the lower index.
std::vector<std::size_t> deletion_order(const Tensor& importance) {
    std::vector<std::size_t> order(importance.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return importance[a] > importance[b];
    });
    return order;
}

}  // namespace

DeletionResult deletion_audc(const Image& x0, const SaliencyMap& s, const Classifier& model,
                             int p0, int steps, OutputSpace space) {
    if (steps < 2) throw ValueError("deletion: need at least 2 steps");
    if (s.height() != x0.height() || s.width() != x0.width()) {
        throw ShapeError("deletion: saliency and image sizes differ");
    }
    const Tensor importance = s.importance_plane();
    const std::vector<std::size_t> order = deletion_order(importance);
    const std::size_t total = x0.pixel_count();

    // pixel counts at fractions j/steps * 0.5, deduplicated; the fraction axis
    // is count/total so the trapezoid abscissae are exact
    std::vector<std::size_t> counts;
    for (int j = 0; j <= steps; ++j) {
        const auto k = static_cast<std::size_t>(
            std::llround(static_cast<double>(j) / steps * 0.5 * static_cast<double>(total)));
        if (counts.empty() || k > counts.back()) counts.push_back(k);
    }

    DeletionResult result;
    Tensor masked = x0.pixels();
    std::size_t blacked = 0;
    const std::size_t w = x0.width();
    for (const std::size_t count : counts) {
        while (blacked < count) {
            const std::size_t pix = order[blacked];
            const std::size_t i = pix / w, j = pix % w;
            masked.at3(i, j, 0) = 0.0;
            masked.at3(i, j, 1) = 0.0;
            masked.at3(i, j, 2) = 0.0;
            ++blacked;
        }
        result.fractions.push_back(static_cast<double>(count) / static_cast<double>(total));
        result.confidences.push_back(model_output(model, masked, p0, space));
        if (count == counts.back()) {
            result.radius = l2_distance(x0.pixels(), masked);
        }
    }
    result.audc = trapezoid_auc(result.fractions, result.confidences);
    return result;
}

AdAiAgResult ad_ai_ag(const Image& x0, const SaliencyMap& s, const Classifier& model, int p0,
                      OutputSpace space) {
    if (s.height() != x0.height() || s.width() != x0.width()) {
        throw ShapeError("ad_ai_ag: saliency and image sizes differ");
    }
    const Tensor mask = min_max_normalize(s.values());
    Tensor explanation_map(x0.pixels().shape());
    if (s.is_per_channel()) {
        for (std::size_t i = 0; i < explanation_map.size(); ++i) {
            explanation_map[i] = mask[i] * x0.flat()[i];
        }
    } else {
        for (std::size_t i = 0; i < mask.size(); ++i) {
            explanation_map[i * 3] = mask[i] * x0.flat()[i * 3];
            explanation_map[i * 3 + 1] = mask[i] * x0.flat()[i * 3 + 1];
            explanation_map[i * 3 + 2] = mask[i] * x0.flat()[i * 3 + 2];
        }
    }

    const double y = model_output(model, x0.pixels(), p0, space);
    const double o = model_output(model, explanation_map, p0, space);

    AdAiAgResult result;
    result.radius = l2_distance(x0.pixels(), explanation_map);
    result.ai = (o > y) ? 100.0 : 0.0;
    if (y == 0.0) {
        result.ad_defined = false;
    } else {
        result.ad = std::max(0.0, y - o) / y * 100.0;
    }
    if (y == 1.0) {
        result.ag_defined = false;
    } else {
        result.ag = std::max(0.0, o - y) / (1.0 - y) * 100.0;
    }
    return result;
}

GazeMap GazeMap::from_tensor(Tensor hw) {
    if (hw.rank() != 2) throw ShapeError("gaze map must be {H,W}");
    hw.ensure_finite("gaze map");
    bool any_positive = false;
    for (std::size_t i = 0; i < hw.size(); ++i) {
        if (hw[i] < 0.0) throw ValueError("gaze map values must be non-negative");
        if (hw[i] > 0.0) any_positive = true;
    }
    if (!any_positive) throw ValueError("gaze map must have at least one positive value");
    GazeMap g;
    g.values_ = std::move(hw);
    return g;
}

Tensor GazeMap::normalized() const {
    const double total = values_.sum();
    Tensor out(values_.shape());
    for (std::size_t i = 0; i < values_.size(); ++i) out[i] = values_[i] / total;
    return out;
}

double plausibility_pcc(const SaliencyMap& s, const GazeMap& gaze) {
    const Tensor plane = s.comparison_plane();
    if (plane.shape() != gaze.values().shape()) {
        throw ShapeError("plausibility_pcc: saliency and gaze sizes differ");
    }
    return pearson(plane.values(), gaze.values().values());
}

namespace {

/// Shift by the minimum and scale to sum 1. Throws UndefinedCorrelationError
/// if the shifted map is identically zero (constant input).
std::vector<double> sim_normalize(const Tensor& t) {
    const double lo = t.min_value();
    std::vector<double> out(t.size());
    double total = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        out[i] = t[i] - lo;
        total += out[i];
    }
    if (total <= 0.0) {
        throw UndefinedCorrelationError("sim undefined: constant map");
    }
    for (double& v : out) v /= total;
    return out;
}

}  // namespace

double plausibility_sim(const SaliencyMap& s, const GazeMap& gaze) {
    const Tensor plane = s.comparison_plane();
    if (plane.shape() != gaze.values().shape()) {
        throw ShapeError("plausibility_sim: saliency and gaze sizes differ");
    }
    const std::vector<double> a = sim_normalize(plane);
    const std::vector<double> b = sim_normalize(gaze.values());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::min(a[i], b[i]);
    return acc;
}

}  // namespace xaimeter
