#include "xaimeter/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xaimeter/errors.hpp"
#include "xaimeter/stats.hpp"

namespace xaimeter {

std::string layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool: return "max-pool";
        case LayerKind::AvgPool: return "avg-pool";
        case LayerKind::Flatten: return "flatten";
    }
    throw ValueError("unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "dense") return LayerKind::Dense;
    if (name == "conv2d") return LayerKind::Conv2d;
    if (name == "relu") return LayerKind::Relu;
    if (name == "max-pool") return LayerKind::MaxPool;
    if (name == "avg-pool") return LayerKind::AvgPool;
    if (name == "flatten") return LayerKind::Flatten;
    throw ValueError("unknown layer kind: " + name);
}

Layer Layer::dense(std::string name, int in_features, int out_features) {
    if (in_features < 1 || out_features < 1) throw ValueError("dense: features must be >= 1");
    Layer l;
    l.kind = LayerKind::Dense;
    l.name = std::move(name);
    l.in_features = in_features;
    l.out_features = out_features;
    l.weights = Tensor({static_cast<std::size_t>(out_features),
                        static_cast<std::size_t>(in_features)});
    l.bias = Tensor({static_cast<std::size_t>(out_features)});
    return l;
}

Layer Layer::conv2d(std::string name, int in_channels, int out_channels, int kernel,
                    int padding) {
    if (in_channels < 1 || out_channels < 1 || kernel < 1 || padding < 0) {
        throw ValueError("conv2d: bad dimensions");
    }
    Layer l;
    l.kind = LayerKind::Conv2d;
    l.name = std::move(name);
    l.in_channels = in_channels;
    l.out_channels = out_channels;
    l.kernel = kernel;
    l.padding = padding;
    l.weights = Tensor({static_cast<std::size_t>(out_channels),
                        static_cast<std::size_t>(in_channels),
                        static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)});
    l.bias = Tensor({static_cast<std::size_t>(out_channels)});
    return l;
}

Layer Layer::relu(std::string name) {
    Layer l;
    l.kind = LayerKind::Relu;
    l.name = std::move(name);
    return l;
}

Layer Layer::max_pool(std::string name, int window) {
    if (window < 1) throw ValueError("max-pool: window must be >= 1");
    Layer l;
    l.kind = LayerKind::MaxPool;
    l.name = std::move(name);
    l.window = window;
    return l;
}

Layer Layer::avg_pool(std::string name, int window) {
    if (window < 1) throw ValueError("avg-pool: window must be >= 1");
    Layer l;
    l.kind = LayerKind::AvgPool;
    l.name = std::move(name);
    l.window = window;
    return l;
}

Layer Layer::flatten(std::string name) {
    Layer l;
    l.kind = LayerKind::Flatten;
    l.name = std::move(name);
    return l;
}

Classifier::Classifier(int input_h, int input_w, int num_classes, std::vector<Layer> layers)
    : input_h_(input_h), input_w_(input_w), num_classes_(num_classes),
      layers_(std::move(layers)) {
    if (input_h_ < 1 || input_w_ < 1) throw ValueError("classifier: input size must be >= 1");
    if (num_classes_ < 2) throw ValueError("classifier: need at least 2 classes");
    validate_and_infer_shapes();
}

void Classifier::validate_and_infer_shapes() {
    shapes_.clear();
    FeatureShape cur{3, input_h_, input_w_, false};
    shapes_.push_back(cur);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        if (l.name.empty()) throw ValueError("layer " + std::to_string(i) + " has no name");
        for (std::size_t j = 0; j < i; ++j) {
            if (layers_[j].name == l.name) throw ValueError("duplicate layer name: " + l.name);
        }
        switch (l.kind) {
            case LayerKind::Conv2d: {
                if (cur.flat) throw ValueError(l.name + ": conv2d needs spatial input");
                if (cur.channels != l.in_channels) {
                    throw ShapeError(l.name + ": expects " + std::to_string(l.in_channels) +
                                     " channels, input has " + std::to_string(cur.channels));
                }
                const int oh = cur.height + 2 * l.padding - l.kernel + 1;
                const int ow = cur.width + 2 * l.padding - l.kernel + 1;
                if (oh < 1 || ow < 1) throw ShapeError(l.name + ": kernel larger than input");
                cur = FeatureShape{l.out_channels, oh, ow, false};
                break;
            }
            case LayerKind::Relu:
                break;
            case LayerKind::MaxPool:
            case LayerKind::AvgPool: {
                if (cur.flat) throw ValueError(l.name + ": pooling needs spatial input");
                const int oh = cur.height / l.window;
                const int ow = cur.width / l.window;
                if (oh < 1 || ow < 1) throw ShapeError(l.name + ": window larger than input");
                cur = FeatureShape{cur.channels, oh, ow, false};
                break;
            }
            case LayerKind::Flatten: {
                if (cur.flat) throw ValueError(l.name + ": input already flat");
                cur = FeatureShape{static_cast<int>(cur.size()), 0, 0, true};
                break;
            }
            case LayerKind::Dense: {
                if (!cur.flat) throw ValueError(l.name + ": dense needs flattened input");
                if (cur.channels != l.in_features) {
                    throw ShapeError(l.name + ": expects " + std::to_string(l.in_features) +
                                     " features, input has " + std::to_string(cur.channels));
                }
                cur = FeatureShape{l.out_features, 0, 0, true};
                break;
            }
        }
        shapes_.push_back(cur);
    }
    if (!cur.flat || cur.channels != num_classes_) {
        throw ShapeError("classifier output must be a flat vector of length " +
                         std::to_string(num_classes_));
    }
}

namespace {

void init_he_normal(Tensor& weights, double fan_in, RandomStream& rng) {
    const double stddev = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = stddev * rng.normal();
}

}  // namespace

Classifier Classifier::toy_cnn(int input_h, int input_w, int num_classes, RandomStream& init) {
    std::vector<Layer> layers;
    layers.push_back(Layer::conv2d("conv1", 3, 8, 3, 1));
    layers.push_back(Layer::relu("relu1"));
    layers.push_back(Layer::max_pool("pool1", 2));
    layers.push_back(Layer::conv2d("conv2", 8, 16, 3, 1));
    layers.push_back(Layer::relu("relu2"));
    layers.push_back(Layer::avg_pool("pool2", 2));
    layers.push_back(Layer::flatten("flatten"));
    const int fc_in = 16 * (input_h / 2 / 2) * (input_w / 2 / 2);
    layers.push_back(Layer::dense("fc", fc_in, num_classes));

    init_he_normal(layers[0].weights, 3.0 * 9.0, init);
    init_he_normal(layers[3].weights, 8.0 * 9.0, init);
    init_he_normal(layers[7].weights, static_cast<double>(fc_in), init);
    return Classifier(input_h, input_w, num_classes, std::move(layers));
}

Classifier Classifier::linear(int input_h, int input_w, int num_classes, RandomStream& init) {
    std::vector<Layer> layers;
    layers.push_back(Layer::flatten("flatten"));
    const int fc_in = 3 * input_h * input_w;
    layers.push_back(Layer::dense("fc", fc_in, num_classes));
    init_he_normal(layers[1].weights, static_cast<double>(fc_in), init);
    return Classifier(input_h, input_w, num_classes, std::move(layers));
}

std::size_t Classifier::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].name == name) return i;
    }
    throw ValueError("no layer named '" + name + "'");
}

std::string Classifier::last_conv_layer() const {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        if (it->kind == LayerKind::Conv2d) return it->name;
    }
    throw ValueError("classifier has no conv2d layer");
}

std::size_t Classifier::parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

bool Classifier::parameters_finite() const {
    for (const Layer& l : layers_) {
        if (!l.weights.all_finite() || !l.bias.all_finite()) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Forward / backward engine. Feature maps are flat vectors in CHW order; the
// raw image is scaled by 1/255 and permuted HWC -> CHW on entry, and input
// gradients take the mirror path (CHW -> HWC, times 1/255) on exit.
// ---------------------------------------------------------------------------

namespace {

struct Trace {
    // acts[0] = scaled CHW input; acts[i+1] = output of layer i.
    std::vector<std::vector<double>> acts;
    // per layer: argmax source indices (filled for max-pool layers only)
    std::vector<std::vector<std::size_t>> pool_argmax;
};

// Per-thread scratch reused across engine calls; gradient walks and training
// run millions of passes and must not churn the allocator.
struct Workspace {
    Trace trace;
    std::vector<std::vector<double>> grad_bufs;  // grad_bufs[i] = dg/d(acts[i])
};

thread_local Workspace tl_workspace;

void scale_input(const Classifier& model, const Tensor& image_hwc, std::vector<double>& chw) {
    const auto h = static_cast<std::size_t>(model.input_height());
    const auto w = static_cast<std::size_t>(model.input_width());
    if (image_hwc.rank() != 3 || image_hwc.shape()[0] != h || image_hwc.shape()[1] != w ||
        image_hwc.shape()[2] != 3) {
        throw ShapeError("model input must have shape {" + std::to_string(h) + "," +
                         std::to_string(w) + ",3}, got " + shape_to_string(image_hwc.shape()));
    }
    chw.resize(3 * h * w);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                chw[(c * h + i) * w + j] = image_hwc.at3(i, j, c) / 255.0;
            }
        }
    }
}

Tensor grad_to_raw_hwc(const Classifier& model, const std::vector<double>& grad_chw) {
    const auto h = static_cast<std::size_t>(model.input_height());
    const auto w = static_cast<std::size_t>(model.input_width());
    Tensor out({h, w, 3});
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                out.at3(i, j, c) = grad_chw[(c * h + i) * w + j] / 255.0;
            }
        }
    }
    return out;
}

// The conv kernels iterate per kernel tap with hoisted validity ranges so the
// innermost loop is a branch-free stride-1 FMA over one row.

void conv_forward(const Layer& l, const FeatureShape& in, const std::vector<double>& x,
                  std::vector<double>& y) {
    const int ih = in.height, iw = in.width;
    const int p = l.padding, k = l.kernel;
    const int oh = ih + 2 * p - k + 1;
    const int ow = iw + 2 * p - k + 1;
    y.resize(static_cast<std::size_t>(l.out_channels) * oh * ow);
    const double* wts = l.weights.data();
    for (int co = 0; co < l.out_channels; ++co) {
        double* yplane = y.data() + static_cast<std::size_t>(co) * oh * ow;
        const double b = l.bias[static_cast<std::size_t>(co)];
        for (int i = 0; i < oh * ow; ++i) yplane[i] = b;
        for (int ci = 0; ci < l.in_channels; ++ci) {
            const double* xplane = x.data() + static_cast<std::size_t>(ci) * ih * iw;
            const double* wbase =
                wts + (static_cast<std::size_t>(co) * l.in_channels + ci) * k * k;
            for (int ki = 0; ki < k; ++ki) {
                const int i0 = std::max(0, p - ki);
                const int i1 = std::min(oh, ih + p - ki);
                for (int kj = 0; kj < k; ++kj) {
                    const double w = wbase[ki * k + kj];
                    const int j0 = std::max(0, p - kj);
                    const int j1 = std::min(ow, iw + p - kj);
                    for (int i = i0; i < i1; ++i) {
                        double* yrow = yplane + static_cast<std::size_t>(i) * ow;
                        const double* xrow =
                            xplane + static_cast<std::size_t>(i - p + ki) * iw + (j0 - p + kj);
                        for (int j = j0; j < j1; ++j) yrow[j] += w * xrow[j - j0];
                    }
                }
            }
        }
    }
}

void conv_backward_input(const Layer& l, const FeatureShape& in, const std::vector<double>& dy,
                         std::vector<double>& dx) {
    const int ih = in.height, iw = in.width;
    const int p = l.padding, k = l.kernel;
    const int oh = ih + 2 * p - k + 1;
    const int ow = iw + 2 * p - k + 1;
    dx.assign(static_cast<std::size_t>(l.in_channels) * ih * iw, 0.0);
    const double* wts = l.weights.data();
    for (int co = 0; co < l.out_channels; ++co) {
        const double* dyplane = dy.data() + static_cast<std::size_t>(co) * oh * ow;
        for (int ci = 0; ci < l.in_channels; ++ci) {
            double* dxplane = dx.data() + static_cast<std::size_t>(ci) * ih * iw;
            const double* wbase =
                wts + (static_cast<std::size_t>(co) * l.in_channels + ci) * k * k;
            for (int ki = 0; ki < k; ++ki) {
                const int i0 = std::max(0, p - ki);
                const int i1 = std::min(oh, ih + p - ki);
                for (int kj = 0; kj < k; ++kj) {
                    const double w = wbase[ki * k + kj];
                    const int j0 = std::max(0, p - kj);
                    const int j1 = std::min(ow, iw + p - kj);
                    for (int i = i0; i < i1; ++i) {
                        const double* dyrow = dyplane + static_cast<std::size_t>(i) * ow;
                        double* dxrow =
                            dxplane + static_cast<std::size_t>(i - p + ki) * iw + (j0 - p + kj);
                        for (int j = j0; j < j1; ++j) dxrow[j - j0] += w * dyrow[j];
                    }
                }
            }
        }
    }
}

void conv_backward_params(const Layer& l, const FeatureShape& in, const std::vector<double>& x,
                          const std::vector<double>& dy, Tensor& dw, Tensor& db) {
    const int ih = in.height, iw = in.width;
    const int p = l.padding, k = l.kernel;
    const int oh = ih + 2 * p - k + 1;
    const int ow = iw + 2 * p - k + 1;
    for (int co = 0; co < l.out_channels; ++co) {
        const double* dyplane = dy.data() + static_cast<std::size_t>(co) * oh * ow;
        double bacc = 0.0;
        for (int i = 0; i < oh * ow; ++i) bacc += dyplane[i];
        db[static_cast<std::size_t>(co)] += bacc;
        for (int ci = 0; ci < l.in_channels; ++ci) {
            const double* xplane = x.data() + static_cast<std::size_t>(ci) * ih * iw;
            double* wbase =
                dw.data() + (static_cast<std::size_t>(co) * l.in_channels + ci) * k * k;
            for (int ki = 0; ki < k; ++ki) {
                const int i0 = std::max(0, p - ki);
                const int i1 = std::min(oh, ih + p - ki);
                for (int kj = 0; kj < k; ++kj) {
                    const int j0 = std::max(0, p - kj);
                    const int j1 = std::min(ow, iw + p - kj);
                    double acc = 0.0;
                    for (int i = i0; i < i1; ++i) {
                        const double* dyrow = dyplane + static_cast<std::size_t>(i) * ow;
                        const double* xrow =
                            xplane + static_cast<std::size_t>(i - p + ki) * iw + (j0 - p + kj);
                        for (int j = j0; j < j1; ++j) acc += dyrow[j] * xrow[j - j0];
                    }
                    wbase[ki * k + kj] += acc;
                }
            }
        }
    }
}

void max_pool_forward(const Layer& l, const FeatureShape& in, const std::vector<double>& x,
                      std::vector<double>& y, std::vector<std::size_t>& argmax) {
    const int w = l.window;
    const int oh = in.height / w, ow = in.width / w;
    y.assign(static_cast<std::size_t>(in.channels) * oh * ow, 0.0);
    argmax.assign(y.size(), 0);
    for (int c = 0; c < in.channels; ++c) {
        const double* xplane = x.data() + static_cast<std::size_t>(c) * in.height * in.width;
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                std::size_t best_idx = (static_cast<std::size_t>(i) * w) * in.width +
                                       static_cast<std::size_t>(j) * w;
                double best = xplane[best_idx];
                for (int di = 0; di < w; ++di) {
                    for (int dj = 0; dj < w; ++dj) {
                        const std::size_t idx =
                            (static_cast<std::size_t>(i * w + di)) * in.width + (j * w + dj);
                        if (xplane[idx] > best) {  // first max wins on ties
                            best = xplane[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t out_idx = (static_cast<std::size_t>(c) * oh + i) * ow + j;
                y[out_idx] = best;
                argmax[out_idx] = static_cast<std::size_t>(c) * in.height * in.width + best_idx;
            }
        }
    }
}

void avg_pool_forward(const Layer& l, const FeatureShape& in, const std::vector<double>& x,
                      std::vector<double>& y) {
    const int w = l.window;
    const int oh = in.height / w, ow = in.width / w;
    const double inv = 1.0 / (w * w);
    y.assign(static_cast<std::size_t>(in.channels) * oh * ow, 0.0);
    for (int c = 0; c < in.channels; ++c) {
        const double* xplane = x.data() + static_cast<std::size_t>(c) * in.height * in.width;
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                double acc = 0.0;
                for (int di = 0; di < w; ++di) {
                    for (int dj = 0; dj < w; ++dj) {
                        acc += xplane[(static_cast<std::size_t>(i * w + di)) * in.width +
                                      (j * w + dj)];
                    }
                }
                y[(static_cast<std::size_t>(c) * oh + i) * ow + j] = acc * inv;
            }
        }
    }
}

void dense_forward(const Layer& l, const std::vector<double>& x, std::vector<double>& y) {
    y.assign(static_cast<std::size_t>(l.out_features), 0.0);
    const double* wts = l.weights.data();
    for (int o = 0; o < l.out_features; ++o) {
        const double* wrow = wts + static_cast<std::size_t>(o) * l.in_features;
        double acc = l.bias[static_cast<std::size_t>(o)];
        for (int i = 0; i < l.in_features; ++i) acc += wrow[i] * x[static_cast<std::size_t>(i)];
        y[static_cast<std::size_t>(o)] = acc;
    }
}

void run_forward(const Classifier& model, const Tensor& image_hwc, Trace& t) {
    const std::size_t num_layers = model.layers().size();
    t.acts.resize(num_layers + 1);
    t.pool_argmax.resize(num_layers);
    scale_input(model, image_hwc, t.acts[0]);
    for (std::size_t i = 0; i < num_layers; ++i) {
        const Layer& l = model.layers()[i];
        const FeatureShape& in = model.input_shape_of(i);
        const std::vector<double>& x = t.acts[i];
        std::vector<double>& y = t.acts[i + 1];
        switch (l.kind) {
            case LayerKind::Conv2d:
                conv_forward(l, in, x, y);
                break;
            case LayerKind::Relu:
                y.resize(x.size());
                for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] > 0.0 ? x[k] : 0.0;
                break;
            case LayerKind::MaxPool:
                max_pool_forward(l, in, x, y, t.pool_argmax[i]);
                break;
            case LayerKind::AvgPool:
                avg_pool_forward(l, in, x, y);
                break;
            case LayerKind::Flatten:
                y = x;
                break;
            case LayerKind::Dense:
                dense_forward(l, x, y);
                break;
        }
    }
}

struct BackwardOptions {
    bool guided = false;
    bool want_input_grad = true;
    // when set, stop after producing the gradient w.r.t. the output of this
    // layer index and store it in `hook_grad`
    std::optional<std::size_t> hook_layer;
    // when non-null, accumulate parameter gradients into these (parallel to
    // model.layers())
    std::vector<Tensor>* weight_grads = nullptr;
    std::vector<Tensor>* bias_grads = nullptr;
};

/// Backward sweep. grad_bufs[i] ends up holding dg/d(acts[i]); the caller
/// reads grad_bufs[0] for the input gradient or grad_bufs[hook] for a hook on
/// the output of layer hook-1. Buffers are reused across calls.
void run_backward(const Classifier& model, const Trace& trace,
                  std::span<const double> seed_logits, const BackwardOptions& opts,
                  std::vector<std::vector<double>>& grad_bufs) {
    const std::size_t num_layers = model.layers().size();
    grad_bufs.resize(num_layers + 1);
    grad_bufs[num_layers].assign(seed_logits.begin(), seed_logits.end());

    const std::size_t stop = opts.hook_layer ? *opts.hook_layer : 0;
    for (std::size_t li = num_layers; li-- > stop;) {
        const Layer& l = model.layers()[li];
        const FeatureShape& in = model.input_shape_of(li);
        const std::vector<double>& x = trace.acts[li];
        const std::vector<double>& grad = grad_bufs[li + 1];
        std::vector<double>& dx = grad_bufs[li];
        switch (l.kind) {
            case LayerKind::Dense: {
                if (opts.weight_grads) {
                    Tensor& dw = (*opts.weight_grads)[li];
                    Tensor& db = (*opts.bias_grads)[li];
                    for (int o = 0; o < l.out_features; ++o) {
                        const double d = grad[static_cast<std::size_t>(o)];
                        db[static_cast<std::size_t>(o)] += d;
                        if (d == 0.0) continue;
                        double* dwrow = dw.data() + static_cast<std::size_t>(o) * l.in_features;
                        for (int i = 0; i < l.in_features; ++i) {
                            dwrow[i] += d * x[static_cast<std::size_t>(i)];
                        }
                    }
                }
                dx.assign(static_cast<std::size_t>(l.in_features), 0.0);
                const double* wts = l.weights.data();
                for (int o = 0; o < l.out_features; ++o) {
                    const double d = grad[static_cast<std::size_t>(o)];
                    if (d == 0.0) continue;
                    const double* wrow = wts + static_cast<std::size_t>(o) * l.in_features;
                    for (int i = 0; i < l.in_features; ++i) {
                        dx[static_cast<std::size_t>(i)] += d * wrow[i];
                    }
                }
                break;
            }
            case LayerKind::Conv2d: {
                if (opts.weight_grads) {
                    conv_backward_params(l, in, x, grad, (*opts.weight_grads)[li],
                                         (*opts.bias_grads)[li]);
                }
                conv_backward_input(l, in, grad, dx);
                break;
            }
            case LayerKind::Relu: {
                dx.resize(grad.size());
                if (opts.guided) {
                    for (std::size_t k = 0; k < grad.size(); ++k) {
                        dx[k] = (x[k] > 0.0 && grad[k] > 0.0) ? grad[k] : 0.0;
                    }
                } else {
                    for (std::size_t k = 0; k < grad.size(); ++k) {
                        dx[k] = x[k] > 0.0 ? grad[k] : 0.0;
                    }
                }
                break;
            }
            case LayerKind::MaxPool: {
                const std::vector<std::size_t>& argmax = trace.pool_argmax[li];
                dx.assign(x.size(), 0.0);
                for (std::size_t k = 0; k < grad.size(); ++k) dx[argmax[k]] += grad[k];
                break;
            }
            case LayerKind::AvgPool: {
                const int w = l.window;
                const int oh = in.height / w, ow = in.width / w;
                const double inv = 1.0 / (w * w);
                dx.assign(x.size(), 0.0);
                for (int c = 0; c < in.channels; ++c) {
                    double* dxplane =
                        dx.data() + static_cast<std::size_t>(c) * in.height * in.width;
                    for (int i = 0; i < oh; ++i) {
                        for (int j = 0; j < ow; ++j) {
                            const double d =
                                grad[(static_cast<std::size_t>(c) * oh + i) * ow + j] * inv;
                            for (int di = 0; di < w; ++di) {
                                for (int dj = 0; dj < w; ++dj) {
                                    dxplane[(static_cast<std::size_t>(i * w + di)) * in.width +
                                            (j * w + dj)] += d;
                                }
                            }
                        }
                    }
                }
                break;
            }
            case LayerKind::Flatten:
                dx = grad;
                break;
        }
    }
}

std::vector<double> one_hot_seed(int num_classes, int target) {
    std::vector<double> seed(static_cast<std::size_t>(num_classes), 0.0);
    seed[static_cast<std::size_t>(target)] = 1.0;
    return seed;
}

}  // namespace

std::vector<double> Classifier::forward(const Tensor& image_hwc) const {
    Trace& t = tl_workspace.trace;
    run_forward(*this, image_hwc, t);
    return t.acts.back();
}

int Classifier::predict(const Tensor& image_hwc) const {
    const std::vector<double> logits = forward(image_hwc);
    return static_cast<int>(argmax_index(logits));
}

ClassLogitModel::ClassLogitModel(const Classifier& model, int target_class)
    : model_(&model), target_class_(target_class) {
    if (target_class < 0 || target_class >= model.num_classes()) {
        throw ValueError("target class " + std::to_string(target_class) + " out of range [0," +
                         std::to_string(model.num_classes()) + ")");
    }
}

double ClassLogitModel::value(const Tensor& image_hwc) const {
    return model_->forward(image_hwc)[static_cast<std::size_t>(target_class_)];
}

double ClassLogitModel::probability(const Tensor& image_hwc) const {
    return softmax(model_->forward(image_hwc))[static_cast<std::size_t>(target_class_)];
}

Tensor ClassLogitModel::grad_input(const Tensor& image_hwc) const {
    Tensor grad;
    value_and_grad(image_hwc, grad);
    return grad;
}

double ClassLogitModel::value_and_grad(const Tensor& image_hwc, Tensor& grad_out) const {
    Workspace& ws = tl_workspace;
    run_forward(*model_, image_hwc, ws.trace);
    const double g = ws.trace.acts.back()[static_cast<std::size_t>(target_class_)];
    BackwardOptions opts;
    run_backward(*model_, ws.trace, one_hot_seed(model_->num_classes(), target_class_), opts,
                 ws.grad_bufs);
    grad_out = grad_to_raw_hwc(*model_, ws.grad_bufs[0]);
    return g;
}

Tensor ClassLogitModel::guided_grad_input(const Tensor& image_hwc) const {
    Workspace& ws = tl_workspace;
    run_forward(*model_, image_hwc, ws.trace);
    BackwardOptions opts;
    opts.guided = true;
    run_backward(*model_, ws.trace, one_hot_seed(model_->num_classes(), target_class_), opts,
                 ws.grad_bufs);
    return grad_to_raw_hwc(*model_, ws.grad_bufs[0]);
}

std::pair<Tensor, Tensor> ClassLogitModel::conv_features_and_grads(
    const Tensor& image_hwc, const std::string& layer_name) const {
    const std::size_t li = model_->layer_index(layer_name);
    if (model_->layers()[li].kind != LayerKind::Conv2d) {
        throw ValueError("'" + layer_name + "' is not a conv2d layer");
    }
    Workspace& ws = tl_workspace;
    run_forward(*model_, image_hwc, ws.trace);
    BackwardOptions opts;
    // dg/d(output of layer li) is the gradient at acts[li + 1]
    opts.hook_layer = li + 1;
    run_backward(*model_, ws.trace, one_hot_seed(model_->num_classes(), target_class_), opts,
                 ws.grad_bufs);

    const FeatureShape& shape = model_->input_shape_of(li + 1);
    const std::vector<std::size_t> chw{static_cast<std::size_t>(shape.channels),
                                       static_cast<std::size_t>(shape.height),
                                       static_cast<std::size_t>(shape.width)};
    return {Tensor(chw, ws.trace.acts[li + 1]), Tensor(chw, ws.grad_bufs[li + 1])};
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw ValueError("softmax: empty input");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    return out;
}

TrainReport train(Classifier& model, std::span<const TrainExample> dataset,
                  const TrainConfig& cfg) {
    if (cfg.epochs < 0) throw ValueError("train: epochs must be >= 0");
    if (cfg.learning_rate <= 0.0) throw ValueError("train: learning rate must be > 0");
    if (cfg.batch_size < 1) throw ValueError("train: batch size must be >= 1");
    if (dataset.empty()) throw ValueError("train: empty dataset");
    for (const TrainExample& ex : dataset) {
        if (ex.label < 0 || ex.label >= model.num_classes()) {
            throw ValueError("train: label " + std::to_string(ex.label) + " out of range");
        }
    }

    TrainReport report;
    RandomStream shuffle_rng(cfg.seed, derive_stream(0, fnv1a64_str("train-shuffle")));

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<Tensor> weight_grads(model.layers().size());
    std::vector<Tensor> bias_grads(model.layers().size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the deterministic stream
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(
                shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto batch_n = static_cast<double>(end - start);

            for (std::size_t li = 0; li < model.layers().size(); ++li) {
                const Layer& l = model.layers()[li];
                weight_grads[li] = Tensor(l.weights.shape());
                bias_grads[li] = Tensor(l.bias.shape());
            }

            for (std::size_t k = start; k < end; ++k) {
                const TrainExample& ex = dataset[order[k]];
                Workspace& ws = tl_workspace;
                run_forward(model, ex.image->pixels(), ws.trace);
                const std::vector<double>& logits = ws.trace.acts.back();
                const std::vector<double> probs = softmax(logits);
                const auto label = static_cast<std::size_t>(ex.label);

                const double m = *std::max_element(logits.begin(), logits.end());
                double lse = 0.0;
                for (double v : logits) lse += std::exp(v - m);
                const double loss = (m + std::log(lse)) - logits[label];
                if (!std::isfinite(loss)) {
                    throw TrainingDivergedError("non-finite loss at epoch " +
                                                std::to_string(epoch));
                }
                loss_sum += loss;
                if (argmax_index(logits) == label) ++correct;

                std::vector<double> seed = probs;  // dL/dlogits = softmax - onehot
                seed[label] -= 1.0;
                for (double& v : seed) v /= batch_n;

                BackwardOptions opts;
                opts.want_input_grad = false;
                opts.weight_grads = &weight_grads;
                opts.bias_grads = &bias_grads;
                run_backward(model, ws.trace, seed, opts, ws.grad_bufs);
            }

            for (std::size_t li = 0; li < model.layers().size(); ++li) {
                Layer& l = model.layers()[li];
                for (std::size_t i = 0; i < l.weights.size(); ++i) {
                    l.weights[i] -= cfg.learning_rate * weight_grads[li][i];
                }
                for (std::size_t i = 0; i < l.bias.size(); ++i) {
                    l.bias[i] -= cfg.learning_rate * bias_grads[li][i];
                }
            }
            if (!model.parameters_finite()) {
                throw TrainingDivergedError("non-finite parameters at epoch " +
                                            std::to_string(epoch));
            }
        }
        report.epoch_loss.push_back(loss_sum / static_cast<double>(dataset.size()));
        report.epoch_accuracy.push_back(static_cast<double>(correct) /
                                        static_cast<double>(dataset.size()));
    }

    if (!report.epoch_accuracy.empty()) {
        report.final_train_accuracy = report.epoch_accuracy.back();
    } else {
        // epochs == 0: report accuracy of the untouched model
        std::size_t correct = 0;
        for (const TrainExample& ex : dataset) {
            if (model.predict(ex.image->pixels()) == ex.label) ++correct;
        }
        report.final_train_accuracy =
            static_cast<double>(correct) / static_cast<double>(dataset.size());
    }
    return report;
}

}  // namespace xaimeter
