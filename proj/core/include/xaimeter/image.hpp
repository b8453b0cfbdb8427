#pragma once

#include <cstddef>
#include <span>

#include "xaimeter/tensor.hpp"

namespace xaimeter {

/// Integer-valued H x W x 3 raster with values in [0, 255], stored as doubles
/// so one buffer serves both L2 geometry (raw pixel units) and the model.
class Image {
public:
    Image() = default;

    /// Wraps a tensor, validating shape {H,W,3}, integrality and range.
    static Image from_tensor(Tensor hwc);

    /// Rounds to nearest integer and clips to [0,255], then wraps.
    static Image quantize(const Tensor& real_hwc);

    const Tensor& pixels() const { return px_; }
    std::span<const double> flat() const { return px_.values(); }

    std::size_t height() const { return px_.empty() ? 0 : px_.shape()[0]; }
    std::size_t width() const { return px_.empty() ? 0 : px_.shape()[1]; }
    /// Number of (h, w) pixel positions.
    std::size_t pixel_count() const { return height() * width(); }
    /// Flattened dimensionality H * W * 3.
    std::size_t dims() const { return px_.size(); }

    double at(std::size_t h, std::size_t w, std::size_t c) const { return px_.at3(h, w, c); }

    bool operator==(const Image& other) const {
        return px_.shape() == other.px_.shape() && px_.to_vector() == other.px_.to_vector();
    }

private:
    explicit Image(Tensor px) : px_(std::move(px)) {}
    Tensor px_;
};

}  // namespace xaimeter
