#include "xaimeter/image.hpp"

#include <cmath>

#include "xaimeter/errors.hpp"

namespace xaimeter {

Image Image::from_tensor(Tensor hwc) {
    if (hwc.rank() != 3 || hwc.shape()[2] != 3) {
        throw ShapeError("image must have shape {H,W,3}, got " + shape_to_string(hwc.shape()));
    }
    if (hwc.shape()[0] == 0 || hwc.shape()[1] == 0) {
        throw ShapeError("image must have nonzero height and width");
    }
    for (std::size_t i = 0; i < hwc.size(); ++i) {
        const double v = hwc[i];
        if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) {
            throw ValueError("image values must be integers in [0,255], got " +
                             std::to_string(v));
        }
    }
    return Image(std::move(hwc));
}

Image Image::quantize(const Tensor& real_hwc) {
    if (real_hwc.rank() != 3 || real_hwc.shape()[2] != 3) {
        throw ShapeError("image must have shape {H,W,3}, got " +
                         shape_to_string(real_hwc.shape()));
    }
    Tensor out(real_hwc.shape());
    for (std::size_t i = 0; i < real_hwc.size(); ++i) {
        double v = std::round(real_hwc[i]);  // half away from zero, mode-independent
        if (v < 0.0) v = 0.0;
        if (v > 255.0) v = 255.0;
        out[i] = v;
    }
    return Image(std::move(out));
}

}  // namespace xaimeter
