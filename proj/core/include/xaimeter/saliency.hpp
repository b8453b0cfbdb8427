#pragma once

#include <cstddef>
#include <vector>

#include "xaimeter/tensor.hpp"

namespace xaimeter {

/// Per-pixel importance scores for one classifier decision. Gradient-family
/// maps carry one score per channel (H x W x 3); CAM-family maps carry one
/// score per pixel (H x W) and are broadcast across channels whenever the map
/// is used as a vector in pixel space.
class SaliencyMap {
public:
    SaliencyMap() = default;

    static SaliencyMap per_channel(Tensor hwc);
    static SaliencyMap single_plane(Tensor hw);

    bool is_per_channel() const { return per_channel_; }
    const Tensor& values() const { return values_; }

    std::size_t height() const { return values_.empty() ? 0 : values_.shape()[0]; }
    std::size_t width() const { return values_.empty() ? 0 : values_.shape()[1]; }

    /// The map as a vector of length H*W*3 (plane maps replicated per channel).
    std::vector<double> flat() const;

    /// H x W per-pixel importance: mean of absolute channel values (identity
    /// up to |.| for plane maps). Used for pixel ranking.
    Tensor importance_plane() const;

    /// H x W reduction for comparisons against 2-d gaze maps: plane maps are
    /// used as-is, per-channel maps reduce to the mean of absolute values.
    Tensor comparison_plane() const;

    bool operator==(const SaliencyMap& other) const {
        return per_channel_ == other.per_channel_ &&
               values_.shape() == other.values_.shape() &&
               values_.to_vector() == other.values_.to_vector();
    }

private:
    Tensor values_;
    bool per_channel_ = true;
};

/// Min-max normalization to [0,1]. A constant map collapses to all-zero when
/// the value is zero and all-one otherwise.
Tensor min_max_normalize(const Tensor& t);

}  // namespace xaimeter
