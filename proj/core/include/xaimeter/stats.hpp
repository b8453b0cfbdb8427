#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xaimeter/tensor.hpp"

namespace xaimeter {

/// Euclidean distance over flattened values. Throws ShapeError on length
/// mismatch.
double l2_distance(std::span<const double> a, std::span<const double> b);
double l2_distance(const Tensor& a, const Tensor& b);

double l2_norm(std::span<const double> a);

/// Sample Pearson correlation coefficient. Throws UndefinedCorrelationError
/// if either input is constant (never returns a silent 0).
double pearson(std::span<const double> a, std::span<const double> b);

/// Average ranks (1-based); ties receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation: Pearson of the average-rank transforms.
double spearman(std::span<const double> a, std::span<const double> b);

/// Index of the maximum value; ties break toward the lowest index.
std::size_t argmax_index(std::span<const double> values);

/// Trapezoid-rule area under (xs, ys), normalized by (xs.back() - xs.front()).
/// xs must be strictly increasing with at least two points.
double trapezoid_auc(std::span<const double> xs, std::span<const double> ys);

}  // namespace xaimeter
