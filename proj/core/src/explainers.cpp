#include "xaimeter/explainers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "xaimeter/errors.hpp"
#include "xaimeter/png_io.hpp"

namespace xaimeter {

std::string ExplainerSpec::id() const {
    switch (kind) {
        case ExplainerKind::Grads: return "grads";
        case ExplainerKind::GradTimesInput: return "grad-times-input";
        case ExplainerKind::IntegratedGradients: return "integrated-gradients";
        case ExplainerKind::SmoothGrads: return "smoothgrads";
        case ExplainerKind::GuidedBackprop: return "guided-backprop";
        case ExplainerKind::GradCam: return "grad-cam";
        case ExplainerKind::FakeCam: return "fake-cam";
        case ExplainerKind::CbCam: return "cb-cam";
    }
    throw ValueError("unknown explainer kind");
}

ExplainerSpec ExplainerSpec::parse(const std::string& id) {
    ExplainerSpec spec;
    if (id == "grads") spec.kind = ExplainerKind::Grads;
    else if (id == "grad-times-input") spec.kind = ExplainerKind::GradTimesInput;
    else if (id == "integrated-gradients") spec.kind = ExplainerKind::IntegratedGradients;
    else if (id == "smoothgrads") spec.kind = ExplainerKind::SmoothGrads;
    else if (id == "guided-backprop") spec.kind = ExplainerKind::GuidedBackprop;
    else if (id == "grad-cam") spec.kind = ExplainerKind::GradCam;
    else if (id == "fake-cam") spec.kind = ExplainerKind::FakeCam;
    else if (id == "cb-cam") spec.kind = ExplainerKind::CbCam;
    else throw ValueError("unknown explainer: '" + id + "'");
    return spec;
}

std::vector<ExplainerSpec> ExplainerSpec::all_eight() {
    std::vector<ExplainerSpec> specs;
    for (const char* id : {"grads", "grad-times-input", "integrated-gradients", "smoothgrads",
                           "guided-backprop", "grad-cam", "fake-cam", "cb-cam"}) {
        specs.push_back(parse(id));
    }
    return specs;
}

SaliencyMap explain_grads(const ClassLogitModel& g, const Image& x0) {
    return SaliencyMap::per_channel(g.grad_input(x0.pixels()));
}

SaliencyMap explain_grad_times_input(const ClassLogitModel& g, const Image& x0) {
    Tensor grad = g.grad_input(x0.pixels());
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= x0.flat()[i];
    return SaliencyMap::per_channel(std::move(grad));
}

SaliencyMap explain_integrated_gradients(const ClassLogitModel& g, const Image& x0,
                                         int num_samples) {
    if (num_samples < 1) throw ValueError("integrated-gradients: need at least 1 sample");
    const Tensor& x = x0.pixels();
    Tensor mean_grad(x.shape());
    Tensor point(x.shape());
    for (int i = 0; i < num_samples; ++i) {
        // midpoint rule on the straight path from the black baseline to x0
        const double alpha = (static_cast<double>(i) + 0.5) / num_samples;
        for (std::size_t k = 0; k < x.size(); ++k) point[k] = alpha * x[k];
        const Tensor grad = g.grad_input(point);
        for (std::size_t k = 0; k < x.size(); ++k) mean_grad[k] += grad[k];
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        mean_grad[k] = mean_grad[k] / num_samples * x[k];  // (x0 - baseline) == x0
    }
    return SaliencyMap::per_channel(std::move(mean_grad));
}

SaliencyMap explain_smoothgrads(const ClassLogitModel& g, const Image& x0, int num_samples,
                                double noise, RandomStream& stream) {
    if (num_samples < 1) throw ValueError("smoothgrads: need at least 1 sample");
    if (noise < 0.0) throw ValueError("smoothgrads: noise must be >= 0");
    const Tensor& x = x0.pixels();
    const double sigma = noise * 255.0;
    Tensor mean_grad(x.shape());
    Tensor point(x.shape());
    for (int i = 0; i < num_samples; ++i) {
        for (std::size_t k = 0; k < x.size(); ++k) point[k] = x[k] + sigma * stream.normal();
        const Tensor grad = g.grad_input(point);
        for (std::size_t k = 0; k < x.size(); ++k) mean_grad[k] += grad[k];
    }
    for (std::size_t k = 0; k < x.size(); ++k) mean_grad[k] /= num_samples;
    return SaliencyMap::per_channel(std::move(mean_grad));
}

SaliencyMap explain_guided_backprop(const ClassLogitModel& g, const Image& x0) {
    return SaliencyMap::per_channel(g.guided_grad_input(x0.pixels()));
}

Tensor bilinear_upsample(const Tensor& hw, std::size_t out_h, std::size_t out_w) {
    if (hw.rank() != 2) throw ShapeError("bilinear_upsample: expects a 2-d tensor");
    const std::size_t in_h = hw.shape()[0], in_w = hw.shape()[1];
    Tensor out({out_h, out_w});
    const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
    for (std::size_t i = 0; i < out_h; ++i) {
        // half-pixel centers, clamped at the borders
        const double fy = (static_cast<double>(i) + 0.5) * sy - 0.5;
        const double cy = std::clamp(fy, 0.0, static_cast<double>(in_h - 1));
        const auto y0 = static_cast<std::size_t>(std::floor(cy));
        const std::size_t y1 = std::min(y0 + 1, in_h - 1);
        const double wy = cy - static_cast<double>(y0);
        for (std::size_t j = 0; j < out_w; ++j) {
            const double fx = (static_cast<double>(j) + 0.5) * sx - 0.5;
            const double cx = std::clamp(fx, 0.0, static_cast<double>(in_w - 1));
            const auto x0 = static_cast<std::size_t>(std::floor(cx));
            const std::size_t x1 = std::min(x0 + 1, in_w - 1);
            const double wx = cx - static_cast<double>(x0);
            const double top = hw.at2(y0, x0) * (1.0 - wx) + hw.at2(y0, x1) * wx;
            const double bot = hw.at2(y1, x0) * (1.0 - wx) + hw.at2(y1, x1) * wx;
            out.at2(i, j) = top * (1.0 - wy) + bot * wy;
        }
    }
    return out;
}

Tensor nearest_upsample(const Tensor& hw, std::size_t out_h, std::size_t out_w) {
    if (hw.rank() != 2) throw ShapeError("nearest_upsample: expects a 2-d tensor");
    const std::size_t in_h = hw.shape()[0], in_w = hw.shape()[1];
    Tensor out({out_h, out_w});
    for (std::size_t i = 0; i < out_h; ++i) {
        const std::size_t si = std::min(i * in_h / out_h, in_h - 1);
        for (std::size_t j = 0; j < out_w; ++j) {
            const std::size_t sj = std::min(j * in_w / out_w, in_w - 1);
            out.at2(i, j) = hw.at2(si, sj);
        }
    }
    return out;
}

SaliencyMap explain_gradcam(const ClassLogitModel& g, const Image& x0,
                            const std::string& conv_layer) {
    const std::string layer =
        conv_layer.empty() ? g.model().last_conv_layer() : conv_layer;
    auto [features, grads] = g.conv_features_and_grads(x0.pixels(), layer);
    const std::size_t channels = features.shape()[0];
    const std::size_t h = features.shape()[1], w = features.shape()[2];
    const auto plane = static_cast<double>(h * w);

    Tensor cam({h, w});
    for (std::size_t c = 0; c < channels; ++c) {
        double alpha = 0.0;
        for (std::size_t k = 0; k < h * w; ++k) alpha += grads[c * h * w + k];
        alpha /= plane;
        for (std::size_t k = 0; k < h * w; ++k) cam[k] += alpha * features[c * h * w + k];
    }
    for (std::size_t k = 0; k < cam.size(); ++k) cam[k] = std::max(0.0, cam[k]);

    Tensor up = bilinear_upsample(cam, x0.height(), x0.width());
    return SaliencyMap::single_plane(min_max_normalize(up));
}

namespace {

SaliencyMap upsampled_grid_cam(std::size_t height, std::size_t width,
                               double corner_or_center_value, bool center) {
    Tensor grid({7, 7}, center ? 0.0 : 1.0);
    if (center) {
        grid.at2(3, 3) = corner_or_center_value;
    } else {
        grid.at2(0, 0) = corner_or_center_value;
    }
    return SaliencyMap::single_plane(nearest_upsample(grid, height, width));
}

}  // namespace

SaliencyMap explain_fake_cam(std::size_t height, std::size_t width) {
    return upsampled_grid_cam(height, width, 0.0, /*center=*/false);
}

SaliencyMap explain_cb_cam(std::size_t height, std::size_t width) {
    return upsampled_grid_cam(height, width, 1.0, /*center=*/true);
}

SaliencyMap explain(const ClassLogitModel& g, const Image& x0, const ExplainerSpec& spec,
                    RandomStream& stream) {
    switch (spec.kind) {
        case ExplainerKind::Grads:
            return explain_grads(g, x0);
        case ExplainerKind::GradTimesInput:
            return explain_grad_times_input(g, x0);
        case ExplainerKind::IntegratedGradients:
            return explain_integrated_gradients(g, x0, spec.samples);
        case ExplainerKind::SmoothGrads:
            return explain_smoothgrads(g, x0, spec.samples, spec.noise, stream);
        case ExplainerKind::GuidedBackprop:
            return explain_guided_backprop(g, x0);
        case ExplainerKind::GradCam:
            return explain_gradcam(g, x0, spec.conv_layer);
        case ExplainerKind::FakeCam:
            return explain_fake_cam(x0.height(), x0.width());
        case ExplainerKind::CbCam:
            return explain_cb_cam(x0.height(), x0.width());
    }
    throw ValueError("unknown explainer kind");
}

void export_saliency_png(const SaliencyMap& map, const std::string& png_path) {
    const Tensor plane = map.comparison_plane();
    const double lo = plane.min_value();
    const double hi = plane.max_value();
    write_gray16_png(png_path, plane, lo, hi);

    nlohmann::json sidecar;
    sidecar["min"] = lo;
    sidecar["max"] = hi;
    sidecar["encoding"] = "value = min + png/65535 * (max - min)";
    sidecar["per_channel_source"] = map.is_per_channel();
    std::ofstream os(png_path + ".json");
    if (!os) throw IoError("cannot write sidecar for " + png_path);
    os << sidecar.dump(2) << "\n";
}

}  // namespace xaimeter
