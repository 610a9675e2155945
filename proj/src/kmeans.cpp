#include "odsd/kmeans.hpp"

#include <cmath>
#include <limits>

#include "odsd/error.hpp"
#include "odsd/rng.hpp"

namespace odsd {

namespace {

double dist2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

Matrix seed_centers(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows();
    Matrix centers(k, points.cols());
    std::vector<double> best(n, std::numeric_limits<double>::infinity());

    auto set_center = [&](std::size_t c, std::size_t p) {
        auto src = points.row(p);
        std::copy(src.begin(), src.end(), centers.row(c).begin());
    };

    set_center(0, static_cast<std::size_t>(rng.below(n)));
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            best[i] = std::min(best[i], dist2(points.row(i), centers.row(c - 1)));
            total += best[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double cum = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += best[i];
                if (cum > u) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng.below(n));
        }
        set_center(c, pick);
    }
    return centers;
}

struct LloydOutcome {
    Matrix centers;
    std::vector<std::size_t> assignment;
    double objective = 0.0;
    std::size_t iterations = 0;
    std::vector<double> trace;
};

LloydOutcome lloyd_from(const Matrix& points, std::size_t k, Matrix initial,
                        const KMeansOptions& opts) {
    const std::size_t n = points.rows();
    LloydOutcome out;
    out.centers = std::move(initial);
    out.assignment.assign(n, k);  // sentinel: forces at least one full pass

    std::vector<double> point_dist(n, 0.0);
    std::vector<std::size_t> count(k, 0);

    for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t arg = 0;
            double bestd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = dist2(points.row(i), out.centers.row(c));
                if (d < bestd) {
                    bestd = d;
                    arg = c;
                }
            }
            point_dist[i] = bestd;
            if (arg != out.assignment[i]) {
                out.assignment[i] = arg;
                changed = true;
            }
        }

        // repair empty clusters: claim the point farthest from its center,
        // donors restricted to clusters that keep at least one member
        count.assign(k, 0);
        for (std::size_t i = 0; i < n; ++i) ++count[out.assignment[i]];
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] != 0) continue;
            std::size_t claim = n;
            double far = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (count[out.assignment[i]] < 2) continue;
                if (point_dist[i] > far) {
                    far = point_dist[i];
                    claim = i;
                }
            }
            if (claim == n) break;  // cannot happen while n >= k, defensive
            --count[out.assignment[claim]];
            out.assignment[claim] = c;
            ++count[c];
            point_dist[claim] = 0.0;
            auto src = points.row(claim);
            std::copy(src.begin(), src.end(), out.centers.row(c).begin());
            changed = true;
        }

        if (!changed && iter > 0) break;
        out.iterations = iter + 1;

        // means in index order, deterministic accumulation
        Matrix sums(k, points.cols());
        count.assign(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = out.assignment[i];
            ++count[c];
            auto row = points.row(i);
            auto acc = sums.row(c);
            for (std::size_t j = 0; j < row.size(); ++j) acc[j] += row[j];
        }
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < points.cols(); ++j)
                out.centers(c, j) = sums(c, j) / static_cast<double>(count[c]);

        if (opts.track_objective) {
            double obj = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                obj += dist2(points.row(i), out.centers.row(out.assignment[i]));
            out.trace.push_back(obj);
        }
    }

    out.objective = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        out.objective += dist2(points.row(i), out.centers.row(out.assignment[i]));
    return out;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& opts) {
    const std::size_t n = points.rows();
    if (n == 0) throw ContractViolation("kmeans: no points");
    if (k == 0) throw ContractViolation("kmeans: k must be positive");
    if (!points.all_finite()) throw ContractViolation("kmeans: non-finite point");
    if (n < k) throw ReduceKSignal(n, k);

    const std::size_t restarts = std::max<std::size_t>(1, opts.restarts);
    LloydOutcome best;
    bool have = false;
    auto consider = [&](LloydOutcome cur) {
        if (!have || cur.objective < best.objective) {
            best = std::move(cur);
            have = true;
        }
    };
    for (std::size_t r = 0; r < restarts; ++r) {
        Rng rng(mix_seed(seed, 0xA11CE5ULL + r));
        consider(lloyd_from(points, k, seed_centers(points, k, rng), opts));
    }

    // tiny instances additionally sweep every k-subset of points as initial
    // centers, which pins the exhaustive-partition optimum in practice
    if (n <= 12 && k <= 3) {
        std::vector<std::size_t> pick(k, 0);
        Matrix initial(k, points.cols());
        auto run = [&] {
            for (std::size_t c = 0; c < k; ++c) {
                auto src = points.row(pick[c]);
                std::copy(src.begin(), src.end(), initial.row(c).begin());
            }
            consider(lloyd_from(points, k, initial, opts));
        };
        if (k == 1) {
            run();
        } else if (k == 2) {
            for (pick[0] = 0; pick[0] < n; ++pick[0])
                for (pick[1] = pick[0] + 1; pick[1] < n; ++pick[1]) run();
        } else {
            for (pick[0] = 0; pick[0] < n; ++pick[0])
                for (pick[1] = pick[0] + 1; pick[1] < n; ++pick[1])
                    for (pick[2] = pick[1] + 1; pick[2] < n; ++pick[2]) run();
        }
    }

    KMeansResult res;
    res.centers = std::move(best.centers);
    res.assignment = std::move(best.assignment);
    res.objective = best.objective;
    res.iterations = best.iterations;
    res.objective_trace = std::move(best.trace);
    return res;
}

}  // namespace odsd
