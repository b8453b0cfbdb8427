#pragma once

#include <string>
#include <vector>

#include "xaimeter/image.hpp"
#include "xaimeter/model.hpp"
#include "xaimeter/random.hpp"
#include "xaimeter/saliency.hpp"

namespace xaimeter {

enum class ExplainerKind {
    Grads,
    GradTimesInput,
    IntegratedGradients,
    SmoothGrads,
    GuidedBackprop,
    GradCam,
    FakeCam,
    CbCam,
};

/// An explanation method plus its parameters. `trivial` marks the two
/// input-independent baselines that stress-test the metrics.
struct ExplainerSpec {
    ExplainerKind kind = ExplainerKind::Grads;
    int samples = 10;      // integrated-gradients / smoothgrads
    double noise = 0.2;    // smoothgrads noise level, as a fraction of the pixel range
    std::string conv_layer;  // grad-cam hook; empty = last conv layer

    bool trivial() const {
        return kind == ExplainerKind::FakeCam || kind == ExplainerKind::CbCam;
    }
    /// Canonical id, e.g. "grads", "integrated-gradients". Also the CLI name.
    std::string id() const;
    static ExplainerSpec parse(const std::string& id);
    static std::vector<ExplainerSpec> all_eight();
};

SaliencyMap explain_grads(const ClassLogitModel& g, const Image& x0);
SaliencyMap explain_grad_times_input(const ClassLogitModel& g, const Image& x0);

/// Midpoint-rule integrated gradients from a black (zero) baseline.
SaliencyMap explain_integrated_gradients(const ClassLogitModel& g, const Image& x0,
                                         int num_samples = 10);

/// Mean gradient over `num_samples` Gaussian-perturbed copies of x0 with
/// sigma = noise * 255 per channel. Deterministic given the stream.
SaliencyMap explain_smoothgrads(const ClassLogitModel& g, const Image& x0,
                                int num_samples, double noise, RandomStream& stream);

SaliencyMap explain_guided_backprop(const ClassLogitModel& g, const Image& x0);

/// Grad-CAM at the named conv layer: channel weights are spatial means of
/// dg/dA, the weighted sum is ReLU-clamped, bilinearly upsampled to the image
/// size and min-max normalized to [0,1].
SaliencyMap explain_gradcam(const ClassLogitModel& g, const Image& x0,
                            const std::string& conv_layer);

/// 7x7 grid, zero in the top-left cell and one everywhere else, upsampled by
/// nearest neighbor. Ignores the image content entirely.
SaliencyMap explain_fake_cam(std::size_t height, std::size_t width);

/// 7x7 grid, one in the center cell and zero everywhere else, upsampled by
/// nearest neighbor.
SaliencyMap explain_cb_cam(std::size_t height, std::size_t width);

/// Dispatch on spec.kind. `stream` is consumed only by smoothgrads.
SaliencyMap explain(const ClassLogitModel& g, const Image& x0, const ExplainerSpec& spec,
                    RandomStream& stream);

/// Bilinear upsampling with half-pixel-centered sampling, exposed for tests.
Tensor bilinear_upsample(const Tensor& hw, std::size_t out_h, std::size_t out_w);
/// Nearest-neighbor upsampling (floor mapping), exposed for tests.
Tensor nearest_upsample(const Tensor& hw, std::size_t out_h, std::size_t out_w);

/// Writes a saliency map as 16-bit grayscale PNG (min-max scaled) plus a JSON
/// sidecar recording the original value range.
void export_saliency_png(const SaliencyMap& map, const std::string& png_path);

}  // namespace xaimeter
