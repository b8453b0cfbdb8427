#include "xaimeter/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xaimeter/errors.hpp"

namespace xaimeter {

double l2_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("l2_distance: lengths differ (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double l2_distance(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("l2_distance: shapes differ (" + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()) + ")");
    }
    return l2_distance(a.values(), b.values());
}

double l2_norm(std::span<const double> a) {
    double acc = 0.0;
    for (double v : a) acc += v * v;
    return std::sqrt(acc);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("pearson: lengths differ");
    const std::size_t n = a.size();
    if (n < 2) throw ValueError("pearson: need at least 2 points");

    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) {
        throw UndefinedCorrelationError("pearson undefined: constant input");
    }
    const double r = cov / std::sqrt(var_a * var_b);
    return std::clamp(r, -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });

    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // positions i..j share the same value; give each the mean rank
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("spearman: lengths differ");
    if (a.size() < 2) throw ValueError("spearman: need at least 2 points");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    return pearson(ra, rb);
}

std::size_t argmax_index(std::span<const double> values) {
    if (values.empty()) throw ValueError("argmax_index: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

double trapezoid_auc(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ShapeError("trapezoid_auc: lengths differ");
    if (xs.size() < 2) throw ValueError("trapezoid_auc: need at least 2 points");
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double dx = xs[i + 1] - xs[i];
        if (dx <= 0.0) throw ValueError("trapezoid_auc: xs must be strictly increasing");
        area += dx * (ys[i] + ys[i + 1]) / 2.0;
    }
    return area / (xs.back() - xs.front());
}

}  // namespace xaimeter
