#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "odsd/matrix.hpp"
#include "odsd/rng.hpp"

namespace odsd::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

inline Matrix random_symmetric(std::size_t n, Rng& rng, double scale = 1.0) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v = scale * rng.normal();
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

/// Central finite difference of a scalar function over every matrix entry.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, Matrix at,
                          double h = 1e-5) {
    Matrix g(at.rows(), at.cols());
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double keep = at.data()[i];
        at.data()[i] = keep + h;
        const double hi = f(at);
        at.data()[i] = keep - h;
        const double lo = f(at);
        at.data()[i] = keep;
        g.data()[i] = (hi - lo) / (2.0 * h);
    }
    return g;
}

inline double rel_err(const Matrix& a, const Matrix& b) {
    double denom = 1e-10;
    for (double v : a.data()) denom = std::max(denom, std::abs(v));
    for (double v : b.data()) denom = std::max(denom, std::abs(v));
    return max_abs_diff(a, b) / denom;
}

/// Best k-partition objective by exhaustive assignment enumeration. Centers
/// are cluster means; empty clusters are allowed in the enumeration (they
/// simply contribute nothing and waste a cluster).
inline double exhaustive_kmeans_objective(const Matrix& points, std::size_t k) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    std::vector<std::size_t> assign(n, 0);
    double best = std::numeric_limits<double>::infinity();
    const double total = std::pow(static_cast<double>(k), static_cast<double>(n));
    (void)total;

    std::function<void(std::size_t)> walk = [&](std::size_t i) {
        if (i == n) {
            std::vector<std::vector<double>> centers(k, std::vector<double>(d, 0.0));
            std::vector<std::size_t> count(k, 0);
            for (std::size_t p = 0; p < n; ++p) {
                ++count[assign[p]];
                for (std::size_t j = 0; j < d; ++j) centers[assign[p]][j] += points(p, j);
            }
            for (std::size_t c = 0; c < k; ++c)
                if (count[c] > 0)
                    for (std::size_t j = 0; j < d; ++j)
                        centers[c][j] /= static_cast<double>(count[c]);
            double obj = 0.0;
            for (std::size_t p = 0; p < n; ++p)
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = points(p, j) - centers[assign[p]][j];
                    obj += diff * diff;
                }
            best = std::min(best, obj);
            return;
        }
        for (std::size_t c = 0; c < k; ++c) {
            assign[i] = c;
            walk(i + 1);
        }
    };
    walk(0);
    return best;
}

}  // namespace odsd::test
