#include "odsd/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "odsd/error.hpp"

namespace odsd {

namespace {

void require_finite(std::span<const double> v, const char* who) {
    for (double x : v)
        if (!std::isfinite(x)) throw ContractViolation(std::string(who) + ": non-finite entry");
}

}  // namespace

std::vector<double> softmax(std::span<const double> v) {
    if (v.empty()) throw ContractViolation("softmax: empty input");
    require_finite(v, "softmax");
    const double m = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

std::vector<double> log_softmax(std::span<const double> v) {
    if (v.empty()) throw ContractViolation("log_softmax: empty input");
    require_finite(v, "log_softmax");
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - m);
    const double lse = m + std::log(sum);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ContractViolation("dot: lengths disagree");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || a.size() != b.size()) throw ContractViolation("cosine: bad lengths");
    require_finite(a, "cosine");
    require_finite(b, "cosine");
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na == 0.0 || nb == 0.0) throw DegenerateVectorError("cosine: zero-norm vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

HuberResult huber(const Matrix& a, const Matrix& b, double delta) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ContractViolation("huber: shapes disagree");
    if (a.empty()) throw ContractViolation("huber: empty input");
    if (!(delta > 0.0)) throw ContractViolation("huber: delta must be positive");
    if (!a.all_finite() || !b.all_finite()) throw ContractViolation("huber: non-finite entry");

    HuberResult res;
    res.grad_b = Matrix(b.rows(), b.cols());
    const double inv_n = 1.0 / static_cast<double>(a.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = b.data()[i] - a.data()[i];
        if (std::abs(r) <= delta) {
            sum += 0.5 * r * r;
            res.grad_b.data()[i] = r * inv_n;
        } else {
            sum += delta * (std::abs(r) - 0.5 * delta);
            res.grad_b.data()[i] = (r > 0.0 ? delta : -delta) * inv_n;
        }
    }
    res.value = sum * inv_n;
    return res;
}

}  // namespace odsd
