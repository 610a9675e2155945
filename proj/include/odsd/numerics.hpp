#pragma once

#include <span>
#include <vector>

#include "odsd/matrix.hpp"

namespace odsd {

/// Numerically stable softmax (max-subtracted). Input must be non-empty and
/// finite; output sums to 1 within 1e-12.
std::vector<double> softmax(std::span<const double> v);

/// log(softmax(v)) without forming the exponentials of large arguments.
std::vector<double> log_softmax(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Cosine similarity clamped to [-1, 1]. Throws DegenerateVectorError when
/// either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

struct HuberResult {
    double value = 0.0;
    Matrix grad_b;  // d value / d b
};

/// Mean elementwise Huber loss between a and b, with its gradient wrt b.
/// Quadratic inside |r| <= delta, linear outside.
HuberResult huber(const Matrix& a, const Matrix& b, double delta = 1.0);

}  // namespace odsd
