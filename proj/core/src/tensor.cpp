#include "xaimeter/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "xaimeter/errors.hpp"

namespace xaimeter {

std::size_t Tensor::shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) return 0;
        if (n > std::numeric_limits<std::size_t>::max() / d) {
            throw ValueError("tensor shape overflows size_t: " + shape_to_string(shape));
        }
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
    }
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::ensure_finite(const std::string& what) const {
    if (!all_finite()) throw ValueError(what + " contains NaN or infinite values");
}

double Tensor::min_value() const {
    if (data_.empty()) throw ValueError("min of empty tensor");
    return *std::min_element(data_.begin(), data_.end());
}

double Tensor::max_value() const {
    if (data_.empty()) throw ValueError("max of empty tensor");
    return *std::max_element(data_.begin(), data_.end());
}

double Tensor::sum() const {
    return std::accumulate(data_.begin(), data_.end(), 0.0);
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace xaimeter
