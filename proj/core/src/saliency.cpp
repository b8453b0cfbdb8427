#include "xaimeter/saliency.hpp"

#include <cmath>

#include "xaimeter/errors.hpp"

namespace xaimeter {

SaliencyMap SaliencyMap::per_channel(Tensor hwc) {
    if (hwc.rank() != 3 || hwc.shape()[2] != 3) {
        throw ShapeError("per-channel saliency must be {H,W,3}, got " +
                         shape_to_string(hwc.shape()));
    }
    hwc.ensure_finite("saliency map");
    SaliencyMap m;
    m.values_ = std::move(hwc);
    m.per_channel_ = true;
    return m;
}

SaliencyMap SaliencyMap::single_plane(Tensor hw) {
    if (hw.rank() != 2) {
        throw ShapeError("plane saliency must be {H,W}, got " + shape_to_string(hw.shape()));
    }
    hw.ensure_finite("saliency map");
    SaliencyMap m;
    m.values_ = std::move(hw);
    m.per_channel_ = false;
    return m;
}

std::vector<double> SaliencyMap::flat() const {
    if (per_channel_) return values_.to_vector();
    std::vector<double> out(values_.size() * 3);
    for (std::size_t i = 0; i < values_.size(); ++i) {
        out[i * 3] = values_[i];
        out[i * 3 + 1] = values_[i];
        out[i * 3 + 2] = values_[i];
    }
    return out;
}

Tensor SaliencyMap::importance_plane() const {
    Tensor out({height(), width()});
    if (per_channel_) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = (std::abs(values_[i * 3]) + std::abs(values_[i * 3 + 1]) +
                      std::abs(values_[i * 3 + 2])) /
                     3.0;
        }
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(values_[i]);
    }
    return out;
}

Tensor SaliencyMap::comparison_plane() const {
    if (!per_channel_) return values_;
    return importance_plane();
}

Tensor min_max_normalize(const Tensor& t) {
    if (t.empty()) throw ValueError("min_max_normalize: empty tensor");
    const double lo = t.min_value();
    const double hi = t.max_value();
    Tensor out(t.shape());
    if (hi > lo) {
        for (std::size_t i = 0; i < t.size(); ++i) out[i] = (t[i] - lo) / (hi - lo);
    } else {
        const double v = (hi == 0.0) ? 0.0 : 1.0;
        for (std::size_t i = 0; i < t.size(); ++i) out[i] = v;
    }
    return out;
}

}  // namespace xaimeter
