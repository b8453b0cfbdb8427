#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace xaimeter {

/// Dense row-major tensor of 64-bit floats. The whole metrics path runs in
/// double precision; this type is deliberately minimal (no views, no
/// broadcasting, no decompositions).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> values() const { return data_; }
    std::vector<double> to_vector() const { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    /// Flat index for a 2-d tensor.
    std::size_t index2(std::size_t i, std::size_t j) const { return i * shape_[1] + j; }
    /// Flat index for a 3-d tensor.
    std::size_t index3(std::size_t i, std::size_t j, std::size_t k) const {
        return (i * shape_[1] + j) * shape_[2] + k;
    }

    double at2(std::size_t i, std::size_t j) const { return data_[index2(i, j)]; }
    double& at2(std::size_t i, std::size_t j) { return data_[index2(i, j)]; }
    double at3(std::size_t i, std::size_t j, std::size_t k) const { return data_[index3(i, j, k)]; }
    double& at3(std::size_t i, std::size_t j, std::size_t k) { return data_[index3(i, j, k)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const;
    /// Throws ValueError naming `what` if any element is NaN or infinite.
    void ensure_finite(const std::string& what) const;

    double min_value() const;
    double max_value() const;
    double sum() const;

    static std::size_t shape_size(const std::vector<std::size_t>& shape);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace xaimeter
