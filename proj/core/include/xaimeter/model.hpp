#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xaimeter/image.hpp"
#include "xaimeter/random.hpp"
#include "xaimeter/tensor.hpp"

namespace xaimeter {

enum class LayerKind { Dense, Conv2d, Relu, MaxPool, AvgPool, Flatten };

std::string layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

/// One layer of the classifier. Only the fields relevant to `kind` are used.
struct Layer {
    LayerKind kind{};
    std::string name;

    // conv2d
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    int padding = 0;

    // dense
    int in_features = 0;
    int out_features = 0;

    // max-pool / avg-pool
    int window = 0;

    Tensor weights;  // dense {out,in}; conv {out,in,k,k}
    Tensor bias;     // {out}

    static Layer dense(std::string name, int in_features, int out_features);
    static Layer conv2d(std::string name, int in_channels, int out_channels, int kernel,
                        int padding);
    static Layer relu(std::string name);
    static Layer max_pool(std::string name, int window);
    static Layer avg_pool(std::string name, int window);
    static Layer flatten(std::string name);
};

/// Spatial extent of the data flowing between layers (channels x h x w, or a
/// flat vector once h == w == 0).
struct FeatureShape {
    int channels = 0;
    int height = 0;
    int width = 0;
    bool flat = false;  // true after Flatten: `channels` holds the length
    std::size_t size() const {
        return flat ? static_cast<std::size_t>(channels)
                    : static_cast<std::size_t>(channels) * height * width;
    }
};

/// A small feed-forward classifier f : images -> R^K with exact reverse-mode
/// input gradients. Images are stored in raw [0,255] units; the network
/// consumes values/255 internally and all gradients returned to callers are
/// expressed with respect to the raw units.
class Classifier {
public:
    Classifier(int input_h, int input_w, int num_classes, std::vector<Layer> layers);

    /// conv(3->8,3x3,pad1) - relu - maxpool2 - conv(8->16,3x3,pad1) - relu -
    /// avgpool2 - flatten - dense->K. The smallest stack that exercises every
    /// layer kind the CAM and guided-backprop explainers need.
    static Classifier toy_cnn(int input_h, int input_w, int num_classes, RandomStream& init);

    /// flatten - dense->K: a purely affine classifier.
    static Classifier linear(int input_h, int input_w, int num_classes, RandomStream& init);

    int input_height() const { return input_h_; }
    int input_width() const { return input_w_; }
    int num_classes() const { return num_classes_; }
    std::size_t input_dims() const {
        return static_cast<std::size_t>(input_h_) * input_w_ * 3;
    }

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    /// Index of the named layer; throws ValueError if absent.
    std::size_t layer_index(const std::string& name) const;
    /// Name of the last conv2d layer; throws ValueError if the net has none.
    std::string last_conv_layer() const;
    /// Shape of the data entering layer i (index 0 = model input).
    const FeatureShape& input_shape_of(std::size_t layer_idx) const {
        return shapes_[layer_idx];
    }

    std::size_t parameter_count() const;
    bool parameters_finite() const;

    /// Logits for an image in raw [0,255] units (integer or real-valued).
    std::vector<double> forward(const Tensor& image_hwc) const;
    std::vector<double> forward(const Image& image) const { return forward(image.pixels()); }

    /// argmax over forward(); ties break toward the lowest class index.
    int predict(const Tensor& image_hwc) const;
    int predict(const Image& image) const { return predict(image.pixels()); }

private:
    void validate_and_infer_shapes();

    int input_h_ = 0;
    int input_w_ = 0;
    int num_classes_ = 0;
    std::vector<Layer> layers_;
    std::vector<FeatureShape> shapes_;  // shapes_[i] = input of layer i; back() = output
};

/// Restriction of a classifier to one output logit: g(X) = f_p0(X).
class ClassLogitModel {
public:
    ClassLogitModel(const Classifier& model, int target_class);

    const Classifier& model() const { return *model_; }
    int target_class() const { return target_class_; }

    /// g(x): the raw logit of the target class.
    double value(const Tensor& image_hwc) const;
    /// Softmax probability of the target class.
    double probability(const Tensor& image_hwc) const;

    /// Exact reverse-mode gradient of the target logit w.r.t. the raw-unit
    /// input, shape {H,W,3}.
    Tensor grad_input(const Tensor& image_hwc) const;
    /// Same backward pass, but each ReLU passes gradient only where both its
    /// forward input and the incoming gradient are positive.
    Tensor guided_grad_input(const Tensor& image_hwc) const;

    /// Logit value and input gradient from one forward/backward pass.
    double value_and_grad(const Tensor& image_hwc, Tensor& grad_out) const;

    /// Forward activations A_k and gradients dg/dA_k at the named conv layer,
    /// both shaped {C, h, w} and spatially aligned.
    std::pair<Tensor, Tensor> conv_features_and_grads(const Tensor& image_hwc,
                                                      const std::string& layer_name) const;

private:
    const Classifier* model_;
    int target_class_;
};

std::vector<double> softmax(std::span<const double> logits);

struct TrainExample {
    const Image* image = nullptr;
    int label = -1;
};

struct TrainConfig {
    int epochs = 30;
    double learning_rate = 0.05;
    int batch_size = 16;
    std::uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> epoch_loss;      // mean cross-entropy per epoch
    std::vector<double> epoch_accuracy;  // training accuracy per epoch
    double final_train_accuracy = 0.0;
};

/// Mini-batch SGD on softmax cross-entropy. Deterministic given cfg.seed;
/// throws TrainingDivergedError on non-finite loss or parameters.
TrainReport train(Classifier& model, std::span<const TrainExample> dataset,
                  const TrainConfig& cfg);

}  // namespace xaimeter
